use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chem::{hf_configuration, SystemSpec};
use crate::sci::CIVector;
use crate::{Error, Result};

/// Averaged spin-orbital occupations n_pσ, each in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyVector {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

const SLACK: f64 = 1e-9;

impl OccupancyVector {
    /// Values within rounding of [0, 1] are clamped; anything further out
    /// is rejected.
    pub fn new(mut alpha: Vec<f64>, mut beta: Vec<f64>) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::Contract(format!(
                "occupancy sectors of length {} and {}",
                alpha.len(),
                beta.len()
            )));
        }
        for x in alpha.iter_mut().chain(beta.iter_mut()) {
            if !(-SLACK..=1.0 + SLACK).contains(x) {
                return Err(Error::Contract(format!("occupancy {x} outside [0, 1]")));
            }
            *x = x.clamp(0.0, 1.0);
        }
        Ok(OccupancyVector { alpha, beta })
    }

    /// Indicator occupations of the Hartree–Fock determinant.
    pub fn hartree_fock(spec: &SystemSpec) -> Self {
        let hf = hf_configuration(spec);
        let ind = |h: crate::chem::HalfConfiguration| (0..spec.n_orb).map(|p| f64::from(u8::from(h.is_occupied(p)))).collect();
        OccupancyVector {
            alpha: ind(hf.alpha),
            beta: ind(hf.beta),
        }
    }

    pub fn n_orb(&self) -> usize {
        self.alpha.len()
    }

    pub fn sector(&self, beta: bool) -> &[f64] {
        if beta {
            &self.beta
        } else {
            &self.alpha
        }
    }

    pub fn totals(&self) -> (f64, f64) {
        (self.alpha.iter().sum(), self.beta.iter().sum())
    }

    /// One line per spatial orbital: `n_alpha n_beta`. `#` starts a comment.
    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("occupancy file", e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number `{t}`"))))
                .collect::<Result<_>>()?;
            let [a, b] = vals[..] else {
                return Err(Error::parse(i + 1, "expected two occupations"));
            };
            alpha.push(a);
            beta.push(b);
        }
        Self::new(alpha, beta)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_text(std::io::BufReader::new(f))
    }

    /// The file at `path` when given, otherwise Hartree–Fock indicators.
    pub fn load_or_hf(path: Option<&Path>, spec: &SystemSpec) -> Result<Self> {
        let occ = match path {
            Some(p) => Self::read(p)?,
            None => return Ok(Self::hartree_fock(spec)),
        };
        if occ.n_orb() != spec.n_orb {
            return Err(Error::Contract(format!(
                "occupancy file has {} orbitals, system has {}",
                occ.n_orb(),
                spec.n_orb
            )));
        }
        Ok(occ)
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (a, b) in self.alpha.iter().zip(&self.beta) {
            writeln!(w, "{a:.17e} {b:.17e}")?;
        }
        Ok(())
    }
}

/// n_pσ = Σ_x |ψ_x|² x_pσ / ‖ψ‖².
pub fn update_occupancies(psi: &CIVector) -> Result<OccupancyVector> {
    let basis = psi.basis();
    let n = basis.spec().n_orb;
    let norm2 = psi.norm().powi(2);
    if norm2 == 0.0 {
        return Err(Error::ZeroVector("occupancies of a null vector".into()));
    }
    let nb = basis.dim_beta();
    let amps = psi.amplitudes();
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let mut col = vec![0.0; nb];
    for (a, row) in amps.chunks(nb.max(1)).enumerate() {
        let w: f64 = row.iter().map(|x| x * x).sum();
        for p in basis.alpha()[a].occupied() {
            alpha[p] += w;
        }
        for (c, x) in col.iter_mut().zip(row) {
            *c += x * x;
        }
    }
    for (b, w) in col.iter().enumerate() {
        for p in basis.beta()[b].occupied() {
            beta[p] += w;
        }
    }
    alpha.iter_mut().chain(beta.iter_mut()).for_each(|x| *x /= norm2);
    let (sa, sb) = (alpha.iter().sum::<f64>(), beta.iter().sum::<f64>());
    let spec = basis.spec();
    if (sa - spec.n_alpha as f64).abs() > 1e-8 || (sb - spec.n_beta as f64).abs() > 1e-8 {
        log::debug!("occupancy totals ({sa}, {sb}) drift from ({}, {})", spec.n_alpha, spec.n_beta);
    }
    OccupancyVector::new(alpha, beta)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::chem::HalfConfiguration;
    use crate::sci::SubspaceBasis;

    #[test]
    fn single_determinant_gives_indicators() {
        let spec = SystemSpec::new(4, 2, 1).unwrap();
        let basis = Arc::new(SubspaceBasis::new(spec, vec![HalfConfiguration(0b0101)], vec![HalfConfiguration(0b1000)]).unwrap());
        let psi = CIVector::new(basis, vec![-2.0]).unwrap();
        let occ = update_occupancies(&psi).unwrap();
        assert_eq!(occ.alpha, vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(occ.beta, vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn equal_superposition_is_half_filled() {
        let spec = SystemSpec::new(4, 2, 2).unwrap();
        let halves = vec![HalfConfiguration(0b0011), HalfConfiguration(0b1100)];
        let basis = Arc::new(SubspaceBasis::new(spec, halves.clone(), halves).unwrap());
        // 0011⊗0011 and 1100⊗1100
        let psi = CIVector::new(basis, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let occ = update_occupancies(&psi).unwrap();
        assert!(occ.alpha.iter().chain(&occ.beta).all(|&x| (x - 0.5).abs() < 1e-15));
    }

    #[test]
    fn text_round_trip_and_fallback() {
        let occ = OccupancyVector::new(vec![0.9, 0.1], vec![1.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        occ.write_text(&mut buf).unwrap();
        assert_eq!(OccupancyVector::read_text(&buf[..]).unwrap(), occ);
        assert!(OccupancyVector::read_text("0.5\n".as_bytes()).is_err());
        assert!(OccupancyVector::new(vec![1.5], vec![0.0]).is_err());
        let spec = SystemSpec::new(3, 2, 1).unwrap();
        let hf = OccupancyVector::load_or_hf(None, &spec).unwrap();
        assert_eq!(hf.totals(), (2.0, 1.0));
    }
}

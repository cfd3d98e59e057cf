use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::chem::HalfConfiguration;
use crate::sci::CIVector;
use crate::{Error, Result};

/// Top-weighted half-configurations retained for the next subspace,
/// in descending weight order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CarryoverSet {
    pub n_orb: usize,
    pub iteration: usize,
    pub entries: Vec<(HalfConfiguration, f64)>,
}

impl CarryoverSet {
    pub fn empty(n_orb: usize) -> Self {
        CarryoverSet {
            n_orb,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn halves(&self) -> impl Iterator<Item = HalfConfiguration> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Header comment with the iteration, then `<bits> <weight>` per line.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# iteration {}", self.iteration)?;
        for (h, r) in &self.entries {
            writeln!(w, "{} {r:.17e}", h.to_bitstring(self.n_orb))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn read_text<R: BufRead>(r: R, n_orb: usize) -> Result<Self> {
        let mut set = CarryoverSet::empty(n_orb);
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("carryover set", e))?;
            let line = line.trim();
            if let Some(rest) = line.strip_prefix("# iteration") {
                set.iteration = rest.trim().parse().map_err(|_| Error::parse(i + 1, "bad iteration header"))?;
                continue;
            }
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(bits), Some(w), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(i + 1, "expected `<bits> <weight>`"));
            };
            if bits.len() != n_orb {
                return Err(Error::parse(i + 1, format!("half of length {} for {n_orb} orbitals", bits.len())));
            }
            let h = HalfConfiguration::from_bitstring(bits).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            let w: f64 = w.parse().map_err(|_| Error::parse(i + 1, format!("bad weight `{w}`")))?;
            set.entries.push((h, w));
        }
        Ok(set)
    }
}

/// Per-half weights. A spin-symmetric basis uses the α row sums
/// r_b = Σ_b' ψ_bb'²; otherwise α row sums and β column sums are pooled
/// by half.
fn half_weights(psi: &CIVector) -> BTreeMap<HalfConfiguration, f64> {
    let basis = psi.basis();
    let nb = basis.dim_beta();
    let amps = psi.amplitudes();
    let mut w = BTreeMap::new();
    let mut col = vec![0.0; nb];
    for (a, row) in amps.chunks(nb).enumerate() {
        *w.entry(basis.alpha()[a]).or_insert(0.0) += row.iter().map(|x| x * x).sum::<f64>();
        for (c, x) in col.iter_mut().zip(row) {
            *c += x * x;
        }
    }
    if !basis.is_spin_symmetric() {
        for (b, c) in col.into_iter().enumerate() {
            *w.entry(basis.beta()[b]).or_insert(0.0) += c;
        }
    }
    w
}

/// The ⌈c·D_h⌉ heaviest halves, never fewer than one. Ties go to the
/// smaller bitmask.
pub fn select_carryover(psi: &CIVector, c: f64, iteration: usize) -> Result<CarryoverSet> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Contract(format!("carryover ratio {c} outside [0, 1]")));
    }
    let mut ranked: Vec<(HalfConfiguration, f64)> = half_weights(psi).into_iter().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let keep = ((c * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len());
    ranked.truncate(keep);
    Ok(CarryoverSet {
        n_orb: psi.basis().spec().n_orb,
        iteration,
        entries: ranked,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::chem::SystemSpec;
    use crate::sci::SubspaceBasis;

    fn two_by_two(amps: Vec<f64>) -> CIVector {
        let spec = SystemSpec::new(2, 1, 1).unwrap();
        CIVector::new(Arc::new(SubspaceBasis::full(spec)), amps).unwrap()
    }

    #[test]
    fn keeps_the_dominant_row() {
        let s = select_carryover(&two_by_two(vec![1.0, 0.0, 0.0, 0.0]), 0.5, 4).unwrap();
        assert_eq!(s.entries, vec![(HalfConfiguration(0b01), 1.0)]);
        assert_eq!(s.iteration, 4);
    }

    #[test]
    fn boundary_ratios() {
        let psi = two_by_two(vec![0.5, 0.5, 0.5, 0.5]);
        assert_eq!(select_carryover(&psi, 1.0, 0).unwrap().len(), 2);
        // equal weights: the smaller mask wins the single slot
        let s = select_carryover(&psi, 0.0, 0).unwrap();
        assert_eq!(s.halves().collect::<Vec<_>>(), vec![HalfConfiguration(0b01)]);
        assert!(select_carryover(&psi, 1.5, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let s = select_carryover(&two_by_two(vec![0.6, 0.0, 0.8, 0.0]), 1.0, 7).unwrap();
        assert_eq!(s.entries[0].0, HalfConfiguration(0b10));
        let back = CarryoverSet::read_text(s.to_text().as_bytes(), 2).unwrap();
        assert_eq!(back, s);
        assert!(CarryoverSet::read_text("011 0.5\n".as_bytes(), 2).is_err());
    }
}

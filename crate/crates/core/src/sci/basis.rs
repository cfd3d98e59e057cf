use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::chem::{enumerate_halves, Configuration, HalfConfiguration, SystemSpec};
use crate::{Error, Result};

/// The product subspace S = alpha_list ⊗ beta_list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    spec: SystemSpec,
    alpha: Vec<HalfConfiguration>,
    beta: Vec<HalfConfiguration>,
}

fn check_list(list: &[HalfConfiguration], n_e: usize, spec: &SystemSpec, sector: &str) -> Result<()> {
    if list.is_empty() {
        return Err(Error::Contract(format!("empty {sector} list")));
    }
    if !list.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::Contract(format!("{sector} list not sorted unique")));
    }
    for h in list {
        if h.count() != n_e || h.0 & !spec.orbital_mask() != 0 {
            return Err(Error::Contract(format!(
                "{sector} half {h} incompatible with ({}, {n_e})",
                spec.n_orb
            )));
        }
    }
    Ok(())
}

impl SubspaceBasis {
    pub fn new(
        spec: SystemSpec,
        alpha: Vec<HalfConfiguration>,
        beta: Vec<HalfConfiguration>,
    ) -> Result<Self> {
        check_list(&alpha, spec.n_alpha, &spec, "alpha")?;
        check_list(&beta, spec.n_beta, &spec, "beta")?;
        Ok(SubspaceBasis { spec, alpha, beta })
    }

    /// Sorts and deduplicates before validating.
    pub fn from_unsorted(
        spec: SystemSpec,
        mut alpha: Vec<HalfConfiguration>,
        mut beta: Vec<HalfConfiguration>,
    ) -> Result<Self> {
        alpha.sort_unstable();
        alpha.dedup();
        beta.sort_unstable();
        beta.dedup();
        Self::new(spec, alpha, beta)
    }

    /// Reads a basis from text. Each non-comment line is either a full
    /// `2·n_orb` bitstring (α half then β half, contributing one half to each
    /// sector) or an `n_orb` half, which joins every sector whose electron
    /// count matches its popcount.
    pub fn read_text<R: BufRead>(r: R, spec: SystemSpec) -> Result<Self> {
        let n = spec.n_orb;
        let (mut alpha, mut beta) = (Vec::new(), Vec::new());
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("basis", e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |e: Error| Error::parse(i + 1, e.to_string());
            if line.len() == 2 * n {
                let c = Configuration::from_bitstring(line, n).map_err(bad)?;
                if !c.matches(&spec) {
                    return Err(Error::parse(i + 1, format!("`{line}` has the wrong electron count")));
                }
                alpha.push(c.alpha);
                beta.push(c.beta);
            } else if line.len() == n {
                let h = HalfConfiguration::from_bitstring(line).map_err(bad)?;
                let (a, b) = (h.count() == spec.n_alpha, h.count() == spec.n_beta);
                if !(a || b) {
                    return Err(Error::parse(i + 1, format!("`{line}` matches neither sector")));
                }
                if a {
                    alpha.push(h);
                }
                if b {
                    beta.push(h);
                }
            } else {
                return Err(Error::parse(
                    i + 1,
                    format!("expected {n} or {} characters, got {}", 2 * n, line.len()),
                ));
            }
        }
        Self::from_unsorted(spec, alpha, beta)
    }

    /// Writes every α half, then every β half, as `n_orb`-character lines
    /// under an `# alpha` / `# beta` marker. Only spin-balanced bases read
    /// back unchanged, since a half lands in every matching sector.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.spec.n_orb;
        writeln!(w, "# alpha")?;
        for h in &self.alpha {
            writeln!(w, "{}", h.to_bitstring(n))?;
        }
        writeln!(w, "# beta")?;
        for h in &self.beta {
            writeln!(w, "{}", h.to_bitstring(n))?;
        }
        Ok(())
    }

    /// The complete determinant space.
    pub fn full(spec: SystemSpec) -> Self {
        SubspaceBasis {
            alpha: enumerate_halves(spec.n_orb, spec.n_alpha),
            beta: enumerate_halves(spec.n_orb, spec.n_beta),
            spec,
        }
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn alpha(&self) -> &[HalfConfiguration] {
        &self.alpha
    }

    pub fn beta(&self) -> &[HalfConfiguration] {
        &self.beta
    }

    pub fn dim_alpha(&self) -> usize {
        self.alpha.len()
    }

    pub fn dim_beta(&self) -> usize {
        self.beta.len()
    }

    pub fn dim(&self) -> usize {
        self.alpha.len() * self.beta.len()
    }

    /// alpha_list == beta_list
    pub fn is_spin_symmetric(&self) -> bool {
        self.alpha == self.beta
    }

    pub fn alpha_index(&self, h: HalfConfiguration) -> Option<usize> {
        self.alpha.binary_search(&h).ok()
    }

    pub fn beta_index(&self, h: HalfConfiguration) -> Option<usize> {
        self.beta.binary_search(&h).ok()
    }

    /// Flat row-major index of a configuration.
    pub fn index_of(&self, c: &Configuration) -> Option<usize> {
        Some(self.alpha_index(c.alpha)? * self.beta.len() + self.beta_index(c.beta)?)
    }

    pub fn configuration(&self, flat: usize) -> Configuration {
        let nb = self.beta.len();
        Configuration {
            alpha: self.alpha[flat / nb],
            beta: self.beta[flat % nb],
        }
    }
}

/// Amplitudes ψ_bb' over a subspace, stored row-major (α row, β column).
#[derive(Clone, Debug)]
pub struct CIVector {
    basis: Arc<SubspaceBasis>,
    amplitudes: Vec<f64>,
}

impl CIVector {
    pub fn new(basis: Arc<SubspaceBasis>, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "{} amplitudes for a basis of dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::Contract("non-finite amplitude".into()));
        }
        Ok(CIVector { basis, amplitudes })
    }

    pub fn zeros(basis: Arc<SubspaceBasis>) -> Self {
        let n = basis.dim();
        CIVector {
            basis,
            amplitudes: vec![0.0; n],
        }
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [f64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<f64> {
        self.amplitudes
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.amplitudes[a * self.basis.dim_beta() + b]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &CIVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Scales to unit norm and returns the original norm.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::ZeroVector("cannot normalize a null CI vector".into()));
        }
        self.amplitudes.iter_mut().for_each(|a| *a /= n);
        Ok(n)
    }

    pub fn same_basis(&self, other: &SubspaceBasis) -> bool {
        self.basis.as_ref() == other
    }

    /// Components on configurations shared with `target`; the rest is zero.
    pub fn project_onto(&self, target: &Arc<SubspaceBasis>) -> CIVector {
        let mut out = CIVector::zeros(target.clone());
        let nb_t = target.dim_beta();
        let beta_map: Vec<Option<usize>> =
            self.basis.beta.iter().map(|&h| target.beta_index(h)).collect();
        for (a, &ha) in self.basis.alpha.iter().enumerate() {
            let Some(ta) = target.alpha_index(ha) else { continue };
            for (b, tb) in beta_map.iter().enumerate() {
                if let Some(tb) = tb {
                    out.amplitudes[ta * nb_t + tb] = self.get(a, b);
                }
            }
        }
        out
    }

    /// ψ_bb' → ψ_b'b; only meaningful on spin-symmetric bases.
    pub fn transposed(&self) -> Result<CIVector> {
        if !self.basis.is_spin_symmetric() {
            return Err(Error::BasisMismatch("transpose needs alpha_list == beta_list".into()));
        }
        let n = self.basis.dim_alpha();
        let mut out = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                out[b * n + a] = self.amplitudes[a * n + b];
            }
        }
        Ok(CIVector {
            basis: self.basis.clone(),
            amplitudes: out,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> SystemSpec {
        SystemSpec::new(4, 2, 2).unwrap()
    }

    #[test]
    fn text_formats() {
        let text = "# full configurations\n11001010\n0110\n";
        let b = SubspaceBasis::read_text(text.as_bytes(), spec()).unwrap();
        assert_eq!(b.alpha().len(), 2);
        assert_eq!(b.beta().len(), 2);
        let mut buf = Vec::new();
        b.write_text(&mut buf).unwrap();
        let back = SubspaceBasis::read_text(&buf[..], spec()).unwrap();
        // the two sectors share every half in the rewritten file
        assert_eq!(back.dim_alpha(), 3);
        let sym = SubspaceBasis::new(spec(), b.alpha().to_vec(), b.alpha().to_vec()).unwrap();
        let mut buf = Vec::new();
        sym.write_text(&mut buf).unwrap();
        assert_eq!(SubspaceBasis::read_text(&buf[..], spec()).unwrap(), sym);
        assert!(SubspaceBasis::read_text("11000\n".as_bytes(), spec()).is_err());
        assert!(SubspaceBasis::read_text("1110\n".as_bytes(), spec()).is_err());
        assert!(SubspaceBasis::read_text("11101000\n".as_bytes(), spec()).is_err());
    }

    #[test]
    fn rejects_bad_lists() {
        let h = |b| HalfConfiguration(b);
        assert!(SubspaceBasis::new(spec(), vec![h(0b0101), h(0b0011)], vec![h(0b0011)]).is_err());
        assert!(SubspaceBasis::new(spec(), vec![h(0b0111)], vec![h(0b0011)]).is_err());
        assert!(SubspaceBasis::new(spec(), vec![], vec![h(0b0011)]).is_err());
        let b = SubspaceBasis::from_unsorted(spec(), vec![h(0b0101), h(0b0011), h(0b0101)], vec![h(0b0011)])
            .unwrap();
        assert_eq!(b.dim(), 2);
    }

    #[test]
    fn projection_keeps_common_part() {
        let full = Arc::new(SubspaceBasis::full(spec()));
        let amps: Vec<f64> = (0..36).map(|i| i as f64).collect();
        let v = CIVector::new(full.clone(), amps).unwrap();
        let h = |b| HalfConfiguration(b);
        let small = Arc::new(
            SubspaceBasis::new(spec(), vec![h(0b0011), h(0b1100)], vec![h(0b0101)]).unwrap(),
        );
        let p = v.project_onto(&small);
        assert_eq!(p.amplitudes(), &[v.get(0, 1), v.get(5, 1)]);
        let back = p.project_onto(&full);
        assert_eq!(back.get(0, 1), v.get(0, 1));
        assert_eq!(back.get(0, 0), 0.0);
    }

    #[test]
    fn flat_indexing() {
        let full = SubspaceBasis::full(spec());
        for i in 0..full.dim() {
            assert_eq!(full.index_of(&full.configuration(i)), Some(i));
        }
    }
}

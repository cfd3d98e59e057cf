use super::{HalfConfiguration, SystemSpec};
use crate::{Error, Result};

/// Exact binomial coefficient with overflow detection.
pub fn binomial(n: u64, k: u64) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc
            .checked_mul((n - i) as u128)
            .ok_or_else(|| Error::Overflow(format!("binomial({n}, {k})")))?
            / (i as u128 + 1);
    }
    Ok(acc)
}

/// binom(n_orb, n_alpha) · binom(n_orb, n_beta), exactly.
pub fn hilbert_dimension(spec: &SystemSpec) -> Result<u128> {
    let a = binomial(spec.n_orb as u64, spec.n_alpha as u64)?;
    let b = binomial(spec.n_orb as u64, spec.n_beta as u64)?;
    a.checked_mul(b).ok_or_else(|| {
        Error::Overflow(format!(
            "hilbert dimension of ({}, {}, {})",
            spec.n_orb, spec.n_alpha, spec.n_beta
        ))
    })
}

/// Index of `h` among masks with the same popcount in ascending numeric
/// order (combinatorial number system).
pub fn rank_half(h: HalfConfiguration, n_orb: usize, n_e: usize) -> Result<u128> {
    if h.count() != n_e {
        return Err(Error::Contract(format!(
            "half configuration {h} has {} electrons, expected {n_e}",
            h.count()
        )));
    }
    if n_orb < 64 && h.0 >> n_orb != 0 {
        return Err(Error::Contract(format!("{h} exceeds {n_orb} orbitals")));
    }
    let mut rank = 0u128;
    for (k, p) in h.occupied().enumerate() {
        rank += binomial(p as u64, k as u64 + 1)?;
    }
    Ok(rank)
}

pub fn unrank_half(index: u128, n_orb: usize, n_e: usize) -> Result<HalfConfiguration> {
    let total = binomial(n_orb as u64, n_e as u64)?;
    if index >= total {
        return Err(Error::Contract(format!(
            "rank {index} outside [0, {total}) for ({n_orb}, {n_e})"
        )));
    }
    let mut rest = index;
    let mut bits = 0u64;
    for k in (1..=n_e).rev() {
        // largest p with binom(p, k) <= rest
        let mut p = k - 1;
        while p + 1 < n_orb && binomial((p + 1) as u64, k as u64)? <= rest {
            p += 1;
        }
        rest -= binomial(p as u64, k as u64)?;
        bits |= 1 << p;
    }
    Ok(HalfConfiguration(bits))
}

impl SystemSpec {
    pub fn rank_alpha(&self, h: HalfConfiguration) -> Result<u128> {
        rank_half(h, self.n_orb, self.n_alpha)
    }

    pub fn rank_beta(&self, h: HalfConfiguration) -> Result<u128> {
        rank_half(h, self.n_orb, self.n_beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::enumerate_halves;

    #[test]
    fn iron_sulfur_active_space_dimensions() {
        let d = hilbert_dimension(&SystemSpec::new(36, 25, 25).unwrap()).unwrap();
        assert_eq!(binomial(36, 25).unwrap(), 600_805_296);
        assert_eq!(d, 600_805_296u128 * 600_805_296u128);
        assert_eq!(d, 360_967_003_701_647_616);

        let d = hilbert_dimension(&SystemSpec::new(36, 27, 27).unwrap()).unwrap();
        assert_eq!(binomial(36, 27).unwrap(), 94_143_280);
        assert_eq!(d, 94_143_280u128 * 94_143_280u128);
        assert_eq!(d, 8_862_957_169_158_400);

        assert_eq!(hilbert_dimension(&SystemSpec::new(1, 0, 0).unwrap()).unwrap(), 1);
    }

    #[test]
    fn overflow_is_reported() {
        let spec = SystemSpec::new(64, 32, 32).unwrap();
        // binom(64,32)^2 ~ 3.4e36 still fits in u128
        assert!(hilbert_dimension(&spec).is_ok());
        assert!(matches!(binomial(200, 100), Err(Error::Overflow(_))));
    }

    #[test]
    fn swap_symmetry() {
        for (n, a, b) in [(10, 3, 5), (36, 25, 20), (12, 0, 7)] {
            let x = hilbert_dimension(&SystemSpec::new(n, a, b).unwrap()).unwrap();
            let y = hilbert_dimension(&SystemSpec::new(n, b, a).unwrap()).unwrap();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn rank_unrank_small() {
        assert_eq!(unrank_half(0, 4, 2).unwrap(), HalfConfiguration(0b0011));
        // enumerate all binom(4,2) = 6 masks by brute force over 0..16
        let brute: Vec<u64> = (0u64..16).filter(|m| m.count_ones() == 2).collect();
        assert_eq!(brute, vec![0b0011, 0b0101, 0b0110, 0b1001, 0b1010, 0b1100]);
        for (i, &m) in brute.iter().enumerate() {
            assert_eq!(rank_half(HalfConfiguration(m), 4, 2).unwrap(), i as u128);
            assert_eq!(unrank_half(i as u128, 4, 2).unwrap().0, m);
        }
        assert_eq!(rank_half(HalfConfiguration::lowest(5), 9, 5).unwrap(), 0);
        assert!(rank_half(HalfConfiguration(0b0111), 4, 2).is_err());
        assert!(unrank_half(6, 4, 2).is_err());
    }

    #[test]
    fn rank_is_monotone() {
        let all = enumerate_halves(9, 4);
        for (i, h) in all.iter().enumerate() {
            assert_eq!(rank_half(*h, 9, 4).unwrap(), i as u128);
        }
    }
}

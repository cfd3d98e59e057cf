use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Widest half-configuration a `u64` mask can hold.
pub const MAX_ORBITALS: usize = 64;

/// Active-space description: spatial orbitals and electrons per spin.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemSpec {
    pub n_orb: usize,
    pub n_alpha: usize,
    pub n_beta: usize,
}

impl SystemSpec {
    pub fn new(n_orb: usize, n_alpha: usize, n_beta: usize) -> Result<Self> {
        let spec = SystemSpec {
            n_orb,
            n_alpha,
            n_beta,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_orb == 0 || self.n_orb > MAX_ORBITALS {
            return Err(Error::Contract(format!(
                "n_orb = {} outside 1..={MAX_ORBITALS}",
                self.n_orb
            )));
        }
        if self.n_alpha > self.n_orb || self.n_beta > self.n_orb {
            return Err(Error::Contract(format!(
                "({}, {}) electrons do not fit in {} orbitals",
                self.n_alpha, self.n_beta, self.n_orb
            )));
        }
        Ok(())
    }

    pub fn n_electrons(&self) -> usize {
        self.n_alpha + self.n_beta
    }

    /// Mask with the lowest `n_orb` bits set.
    pub fn orbital_mask(&self) -> u64 {
        if self.n_orb == 64 {
            u64::MAX
        } else {
            (1u64 << self.n_orb) - 1
        }
    }
}

/// Occupations of one spin sector; bit `p` is spatial orbital `p`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HalfConfiguration(pub u64);

impl HalfConfiguration {
    /// Lowest `n_e` orbitals occupied.
    pub fn lowest(n_e: usize) -> Self {
        if n_e == 64 {
            HalfConfiguration(u64::MAX)
        } else {
            HalfConfiguration((1u64 << n_e) - 1)
        }
    }

    #[inline]
    pub fn bits(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn count(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn is_occupied(self, p: usize) -> bool {
        (self.0 >> p) & 1 == 1
    }

    /// Occupied orbital indices in ascending order.
    pub fn occupied(self) -> impl Iterator<Item = usize> {
        BitIter(self.0)
    }

    /// Occupation bitstring with orbital 0 leftmost.
    pub fn to_bitstring(self, n_orb: usize) -> String {
        (0..n_orb)
            .map(|p| if self.is_occupied(p) { '1' } else { '0' })
            .collect()
    }

    pub fn from_bitstring(s: &str) -> Result<Self> {
        if s.len() > MAX_ORBITALS {
            return Err(Error::Contract(format!("bitstring longer than {MAX_ORBITALS}")));
        }
        let mut bits = 0u64;
        for (p, c) in s.chars().enumerate() {
            match c {
                '1' => bits |= 1 << p,
                '0' => {}
                other => return Err(Error::Contract(format!("bad bit character {other:?}"))),
            }
        }
        Ok(HalfConfiguration(bits))
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }
}

/// Full determinant: α half followed by β half.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Configuration {
    pub alpha: HalfConfiguration,
    pub beta: HalfConfiguration,
}

impl Configuration {
    pub fn new(alpha: u64, beta: u64) -> Self {
        Configuration {
            alpha: HalfConfiguration(alpha),
            beta: HalfConfiguration(beta),
        }
    }

    pub fn matches(&self, spec: &SystemSpec) -> bool {
        self.alpha.count() == spec.n_alpha
            && self.beta.count() == spec.n_beta
            && self.alpha.0 & !spec.orbital_mask() == 0
            && self.beta.0 & !spec.orbital_mask() == 0
    }

    /// `2·n_orb` characters, α half then β half, orbital 0 leftmost.
    pub fn to_bitstring(&self, n_orb: usize) -> String {
        let mut s = self.alpha.to_bitstring(n_orb);
        s.push_str(&self.beta.to_bitstring(n_orb));
        s
    }

    pub fn from_bitstring(s: &str, n_orb: usize) -> Result<Self> {
        if s.len() != 2 * n_orb {
            return Err(Error::Contract(format!(
                "bitstring of length {} for {} orbitals",
                s.len(),
                n_orb
            )));
        }
        Ok(Configuration {
            alpha: HalfConfiguration::from_bitstring(&s[..n_orb])?,
            beta: HalfConfiguration::from_bitstring(&s[n_orb..])?,
        })
    }
}

impl fmt::Display for HalfConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#b}", self.0)
    }
}

/// Lowest `n_alpha` / `n_beta` orbitals occupied.
pub fn hf_configuration(spec: &SystemSpec) -> Configuration {
    Configuration {
        alpha: HalfConfiguration::lowest(spec.n_alpha),
        beta: HalfConfiguration::lowest(spec.n_beta),
    }
}

/// All masks with `n_e` of the lowest `n_orb` bits set, ascending.
pub fn enumerate_halves(n_orb: usize, n_e: usize) -> Vec<HalfConfiguration> {
    assert!(n_e <= n_orb && n_orb <= MAX_ORBITALS);
    if n_e == 0 {
        return vec![HalfConfiguration(0)];
    }
    let limit: u128 = 1u128 << n_orb;
    let mut out = Vec::new();
    let mut v: u64 = HalfConfiguration::lowest(n_e).0;
    loop {
        out.push(HalfConfiguration(v));
        // Gosper's hack: next larger integer with the same popcount.
        let c = v & v.wrapping_neg();
        let r = v.wrapping_add(c);
        if r == 0 {
            break;
        }
        let next = (((r ^ v) >> 2) / c) | r;
        if (next as u128) >= limit || next <= v {
            break;
        }
        v = next;
    }
    out
}

use serde::{Deserialize, Serialize};

use crate::chem::HalfConfiguration;

/// Parity of moving one electron r → p inside a half configuration:
/// −1 to the number of occupied orbitals strictly between r and p.
#[inline]
pub fn single_sign(bits: u64, r: usize, p: usize) -> f64 {
    let (lo, hi) = if r < p { (r, p) } else { (p, r) };
    let between = if hi - lo <= 1 {
        0
    } else {
        let mask = ((1u64 << (hi - lo - 1)) - 1) << (lo + 1);
        (bits & mask).count_ones()
    };
    if between % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Sign of a†_p a_r a†_q a_s acting on `bits` (s, r occupied and distinct;
/// p, q empty after removal and distinct).
#[inline]
pub fn double_sign(bits: u64, r: usize, s: usize, p: usize, q: usize) -> f64 {
    let s1 = single_sign(bits, s, q);
    let mid = bits ^ (1 << s) ^ (1 << q);
    s1 * single_sign(mid, r, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleExcitation {
    /// Index of the excited half in the same list.
    pub target: usize,
    pub from: u8,
    pub to: u8,
    pub sign: f64,
}

/// a†_p a_r a†_q a_s with r < s and p < q.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubleExcitation {
    pub target: usize,
    pub from: [u8; 2],
    pub to: [u8; 2],
    pub sign: f64,
}

/// Excitations internal to one sorted half-configuration list.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExcitationTable {
    pub singles: Vec<Vec<SingleExcitation>>,
    pub doubles: Vec<Vec<DoubleExcitation>>,
}

impl ExcitationTable {
    pub fn len(&self) -> usize {
        self.singles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singles.is_empty()
    }

    /// Number of connected partners of half `b` (its task size).
    pub fn connections(&self, b: usize) -> usize {
        self.singles[b].len() + self.doubles[b].len()
    }
}

fn lookup(list: &[HalfConfiguration], bits: u64) -> Option<usize> {
    list.binary_search(&HalfConfiguration(bits)).ok()
}

/// Enumerates every single and same-spin double excitation whose target
/// is also in `list`. Rows are ordered by target index.
pub fn build_excitation_tables(list: &[HalfConfiguration], n_orb: usize) -> ExcitationTable {
    debug_assert!(list.windows(2).all(|w| w[0] < w[1]), "list must be sorted unique");
    let rows = crate::par::map_range(list.len(), |b| {
        let x = list[b].0;
        let occ: Vec<usize> = list[b].occupied().collect();
        let virt: Vec<usize> = (0..n_orb).filter(|&p| (x >> p) & 1 == 0).collect();
        let mut singles = Vec::new();
        for &r in &occ {
            for &p in &virt {
                let y = x ^ (1 << r) ^ (1 << p);
                if let Some(t) = lookup(list, y) {
                    singles.push(SingleExcitation {
                        target: t,
                        from: r as u8,
                        to: p as u8,
                        sign: single_sign(x, r, p),
                    });
                }
            }
        }
        let mut doubles = Vec::new();
        for (i, &r) in occ.iter().enumerate() {
            for &s in &occ[i + 1..] {
                for (k, &p) in virt.iter().enumerate() {
                    for &q in &virt[k + 1..] {
                        let y = x ^ (1 << r) ^ (1 << s) ^ (1 << p) ^ (1 << q);
                        if let Some(t) = lookup(list, y) {
                            doubles.push(DoubleExcitation {
                                target: t,
                                from: [r as u8, s as u8],
                                to: [p as u8, q as u8],
                                sign: double_sign(x, r, s, p, q),
                            });
                        }
                    }
                }
            }
        }
        singles.sort_by_key(|e| e.target);
        doubles.sort_by_key(|e| e.target);
        (singles, doubles)
    });
    let (singles, doubles) = rows.into_iter().unzip();
    ExcitationTable { singles, doubles }
}

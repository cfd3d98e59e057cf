use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Triangular index of the unordered pair {i, j}.
#[inline]
pub fn pair_index(i: usize, j: usize) -> usize {
    if i >= j {
        i * (i + 1) / 2 + j
    } else {
        j * (j + 1) / 2 + i
    }
}

/// One- and two-body integrals of the active-space Hamiltonian
///
/// H = E_core + Σ h_pr a†_pσ a_rσ + ½ Σ (pr|qs) a†_pσ a†_qτ a_sτ a_rσ
///
/// in chemists' notation. The two-body tensor is stored once per 8-fold
/// symmetry class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MolecularIntegrals {
    n_orb: usize,
    pub core_energy: f64,
    /// Row-major n_orb × n_orb, symmetric.
    h: Vec<f64>,
    /// Packed over pair_index(pair_index(p,r), pair_index(q,s)).
    eri: Vec<f64>,
}

impl MolecularIntegrals {
    pub fn zeros(n_orb: usize) -> Self {
        let npair = n_orb * (n_orb + 1) / 2;
        MolecularIntegrals {
            n_orb,
            core_energy: 0.0,
            h: vec![0.0; n_orb * n_orb],
            eri: vec![0.0; npair * (npair + 1) / 2],
        }
    }

    /// Builds from dense tensors, checking the symmetries to 1e-12.
    pub fn from_dense(n_orb: usize, core_energy: f64, h: &[f64], eri: &[f64]) -> Result<Self> {
        let n = n_orb;
        if h.len() != n * n || eri.len() != n * n * n * n {
            return Err(Error::Contract("dense integral shapes do not match n_orb".into()));
        }
        let mut out = MolecularIntegrals::zeros(n);
        out.core_energy = core_energy;
        for p in 0..n {
            for r in 0..n {
                if (h[p * n + r] - h[r * n + p]).abs() > 1e-12 {
                    return Err(Error::Contract(format!("h not symmetric at ({p},{r})")));
                }
            }
        }
        out.h.copy_from_slice(h);
        let idx = |p: usize, r: usize, q: usize, s: usize| ((p * n + r) * n + q) * n + s;
        for p in 0..n {
            for r in 0..n {
                for q in 0..n {
                    for s in 0..n {
                        let v = eri[idx(p, r, q, s)];
                        for w in [
                            eri[idx(r, p, q, s)],
                            eri[idx(p, r, s, q)],
                            eri[idx(q, s, p, r)],
                        ] {
                            if (v - w).abs() > 1e-12 {
                                return Err(Error::Contract(format!(
                                    "eri lacks 8-fold symmetry at ({p}{r}|{q}{s})"
                                )));
                            }
                        }
                        out.set_eri(p, r, q, s, v);
                    }
                }
            }
        }
        Ok(out)
    }

    #[inline]
    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    #[inline]
    pub fn h(&self, p: usize, r: usize) -> f64 {
        self.h[p * self.n_orb + r]
    }

    /// Sets h_pr and h_rp.
    pub fn set_h(&mut self, p: usize, r: usize, v: f64) {
        let n = self.n_orb;
        self.h[p * n + r] = v;
        self.h[r * n + p] = v;
    }

    /// (pr|qs)
    #[inline]
    pub fn eri(&self, p: usize, r: usize, q: usize, s: usize) -> f64 {
        self.eri[pair_index(pair_index(p, r), pair_index(q, s))]
    }

    /// (pr|qs) addressed by precomputed pair indices.
    #[inline]
    pub fn eri_pairs(&self, pr: usize, qs: usize) -> f64 {
        self.eri[pair_index(pr, qs)]
    }

    /// Sets the whole symmetry class of (pr|qs).
    pub fn set_eri(&mut self, p: usize, r: usize, q: usize, s: usize, v: f64) {
        let i = pair_index(pair_index(p, r), pair_index(q, s));
        self.eri[i] = v;
    }

    pub fn h_dense(&self) -> &[f64] {
        &self.h
    }

    pub fn eri_dense(&self) -> Vec<f64> {
        let n = self.n_orb;
        let mut out = vec![0.0; n * n * n * n];
        for p in 0..n {
            for r in 0..n {
                for q in 0..n {
                    for s in 0..n {
                        out[((p * n + r) * n + q) * n + s] = self.eri(p, r, q, s);
                    }
                }
            }
        }
        out
    }

    /// Canonical (p ≥ r, q ≥ s, pr ≥ qs) two-body entries.
    pub fn unique_eri(&self) -> impl Iterator<Item = (usize, usize, usize, usize, f64)> + '_ {
        let n = self.n_orb;
        (0..n).flat_map(move |p| {
            (0..=p).flat_map(move |r| {
                let pr = pair_index(p, r);
                (0..n).flat_map(move |q| {
                    (0..=q).filter_map(move |s| {
                        let qs = pair_index(q, s);
                        (qs <= pr).then(|| (p, r, q, s, self.eri(p, r, q, s)))
                    })
                })
            })
        })
    }

    pub fn max_abs_diff(&self, other: &MolecularIntegrals) -> f64 {
        assert_eq!(self.n_orb, other.n_orb);
        let mut m = (self.core_energy - other.core_energy).abs();
        for (a, b) in self.h.iter().zip(&other.h) {
            m = m.max((a - b).abs());
        }
        for (a, b) in self.eri.iter().zip(&other.eri) {
            m = m.max((a - b).abs());
        }
        m
    }

    /// Seeded synthetic integrals with molecule-like structure: orbital
    /// energies rise with index, Coulomb-type (pp|qq) terms dominate and
    /// the remaining couplings are small. For benchmarks and tests only.
    pub fn synthetic(n_orb: usize, seed: u64) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = MolecularIntegrals::zeros(n_orb);
        out.core_energy = rng.gen_range(-1.0..1.0);
        for p in 0..n_orb {
            for r in 0..=p {
                let v = if p == r {
                    -2.0 + 0.6 * p as f64 + rng.gen_range(-0.1..0.1)
                } else {
                    rng.gen_range(-0.2..0.2)
                };
                out.set_h(p, r, v);
            }
        }
        let npair = n_orb * (n_orb + 1) / 2;
        for pr in 0..npair {
            for qs in 0..=pr {
                let diag = |k: usize| {
                    let i = ((((8 * k + 1) as f64).sqrt() as usize) - 1) / 2;
                    k == i * (i + 1) / 2 + i
                };
                out.eri[pair_index(pr, qs)] = if diag(pr) && diag(qs) {
                    rng.gen_range(0.2..0.8)
                } else {
                    rng.gen_range(-0.1..0.1)
                };
            }
        }
        out
    }
}

use nalgebra::DMatrix;

use crate::chem::{HalfConfiguration, MolecularIntegrals};
use crate::par;
use crate::sci::{single_sign, CIVector};
use crate::{Error, Result};

/// Spin-summed density matrices of a real state:
/// γ_pr = ⟨E_pr⟩ and Γ_prqs = ⟨Σ_στ a†_pσ a†_qτ a_sτ a_rσ⟩, so that
/// E = E_core + Σ h_pr γ_pr + ½ Σ (pr|qs) Γ_prqs.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensityMatrices {
    pub gamma: DMatrix<f64>,
    /// Dense n⁴, index ((p·n + r)·n + q)·n + s.
    pub big_gamma: Vec<f64>,
}

impl ReducedDensityMatrices {
    pub fn n_orb(&self) -> usize {
        self.gamma.nrows()
    }

    #[inline]
    pub fn two_body(&self, p: usize, r: usize, q: usize, s: usize) -> f64 {
        let n = self.n_orb();
        self.big_gamma[((p * n + r) * n + q) * n + s]
    }

    pub fn energy(&self, ints: &MolecularIntegrals) -> f64 {
        let n = self.n_orb();
        let mut e = ints.core_energy;
        for p in 0..n {
            for r in 0..n {
                e += ints.h(p, r) * self.gamma[(p, r)];
            }
        }
        let v = ints.eri_dense();
        e + 0.5 * v.iter().zip(&self.big_gamma).map(|(a, b)| a * b).sum::<f64>()
    }
}

/// a†_q a_s on one half: the new half and its sign, if the move is allowed.
#[inline]
fn excite(h: HalfConfiguration, q: usize, s: usize) -> Option<(HalfConfiguration, f64)> {
    if !h.is_occupied(s) {
        return None;
    }
    if q == s {
        return Some((h, 1.0));
    }
    if h.is_occupied(q) {
        return None;
    }
    Some((HalfConfiguration(h.0 ^ (1 << s) ^ (1 << q)), single_sign(h.0, s, q)))
}

/// Accumulates ⟨ψ|E_pr E_qs|ψ⟩ and ⟨ψ|E_qs|ψ⟩ over every basis
/// determinant, then removes the δ_qr γ_ps contraction term.
pub fn compute_rdms(psi: &CIVector) -> Result<ReducedDensityMatrices> {
    let basis = psi.basis();
    let n = basis.spec().n_orb;
    let norm2 = psi.norm().powi(2);
    if norm2 == 0.0 {
        return Err(Error::ZeroVector("density matrices of a null vector".into()));
    }
    let (da, db) = (basis.dim_alpha(), basis.dim_beta());
    let amps = psi.amplitudes();
    let lookup = |a: HalfConfiguration, b: HalfConfiguration| -> f64 {
        match (basis.alpha_index(a), basis.beta_index(b)) {
            (Some(i), Some(j)) => amps[i * db + j],
            _ => 0.0,
        }
    };
    let chunks = da.min(4 * par::threads().max(1)).max(1);
    let rows = crate::engine::split_even(da, chunks);
    let n2 = n * n;
    let partial = par::map_range(chunks, |k| {
        let mut one = vec![0.0; n2];
        let mut two = vec![0.0; n2 * n2];
        for ia in rows[k].clone() {
            let ha = basis.alpha()[ia];
            for ib in 0..db {
                let cx = amps[ia * db + ib];
                if cx == 0.0 {
                    continue;
                }
                let hb = basis.beta()[ib];
                for spin1 in 0..2 {
                    for q in 0..n {
                        for s in 0..n {
                            let (ya, yb, s1) = if spin1 == 0 {
                                let Some((h, g)) = excite(ha, q, s) else { continue };
                                (h, hb, g)
                            } else {
                                let Some((h, g)) = excite(hb, q, s) else { continue };
                                (ha, h, g)
                            };
                            one[q * n + s] += lookup(ya, yb) * s1 * cx;
                            for spin2 in 0..2 {
                                for p in 0..n {
                                    for r in 0..n {
                                        let (za, zb, s2) = if spin2 == 0 {
                                            let Some((h, g)) = excite(ya, p, r) else { continue };
                                            (h, yb, g)
                                        } else {
                                            let Some((h, g)) = excite(yb, p, r) else { continue };
                                            (ya, h, g)
                                        };
                                        let cz = lookup(za, zb);
                                        if cz != 0.0 {
                                            two[(p * n + r) * n2 + q * n + s] += cz * s1 * s2 * cx;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        (one, two)
    });
    let mut one = vec![0.0; n2];
    let mut two = vec![0.0; n2 * n2];
    for (o, t) in partial {
        one.iter_mut().zip(&o).for_each(|(a, b)| *a += b);
        two.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
    }
    one.iter_mut().chain(two.iter_mut()).for_each(|x| *x /= norm2);
    for p in 0..n {
        for q in 0..n {
            for s in 0..n {
                // E_pr E_qs with r = q
                two[(p * n + q) * n2 + q * n + s] -= one[p * n + s];
            }
        }
    }
    Ok(ReducedDensityMatrices {
        gamma: DMatrix::from_row_slice(n, n, &one),
        big_gamma: two,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::chem::{hf_configuration, SystemSpec};
    use crate::sci::{diagonal_element, SubspaceBasis};

    #[test]
    fn single_determinant() {
        let spec = SystemSpec::new(4, 2, 1).unwrap();
        let hf = hf_configuration(&spec);
        let basis = Arc::new(SubspaceBasis::new(spec, vec![hf.alpha], vec![hf.beta]).unwrap());
        let psi = CIVector::new(basis, vec![1.0]).unwrap();
        let rdm = compute_rdms(&psi).unwrap();
        let diag: Vec<f64> = (0..4).map(|p| rdm.gamma[(p, p)]).collect();
        assert_eq!(diag, vec![2.0, 1.0, 0.0, 0.0]);
        let ints = MolecularIntegrals::synthetic(4, 9);
        assert!((rdm.energy(&ints) - diagonal_element(&hf, &ints)).abs() < 1e-12);
    }
}

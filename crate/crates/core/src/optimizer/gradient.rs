use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::lbfgs::{lbfgs_minimize, LbfgsOptions, LbfgsReport};
use super::orbital::{three_index_transform, OrbitalRotation};
use super::rdm::{compute_rdms, ReducedDensityMatrices};
use crate::chem::MolecularIntegrals;
use crate::linalg::expm;
use crate::sci::CIVector;
use crate::{Error, Result};

/// E(κ) for fixed density matrices and its gradient with respect to the
/// strict upper triangle of κ.
///
/// With G = ∂E/∂Φ = 2hΦγ + 2 Σ_rqs T_xrqs Γ_yrqs, the chain rule through
/// Φ = e^κ uses the adjoint Fréchet derivative L(κᵀ, G), read off the
/// upper-right block of exp([[κᵀ, G], [0, κᵀ]]).
pub fn orbital_objective(ints: &MolecularIntegrals, rdm: &ReducedDensityMatrices, rot: &OrbitalRotation) -> (f64, Vec<f64>) {
    let n = ints.n_orb();
    let phi = rot.phi();
    let h = DMatrix::from_row_slice(n, n, ints.h_dense());
    let t = three_index_transform(ints, phi);
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;

    let h_rot = phi.transpose() * &h * phi;
    let mut energy = ints.core_energy + h_rot.component_mul(&rdm.gamma).sum();
    for p in 0..n {
        for r in 0..n {
            for q in 0..n {
                for s in 0..n {
                    let g = rdm.two_body(p, r, q, s);
                    if g != 0.0 {
                        let v: f64 = (0..n).map(|a| phi[(a, p)] * t[idx(a, r, q, s)]).sum();
                        energy += 0.5 * v * g;
                    }
                }
            }
        }
    }

    let mut grad_phi = 2.0 * &h * phi * &rdm.gamma;
    for x in 0..n {
        for y in 0..n {
            let mut acc = 0.0;
            for r in 0..n {
                for q in 0..n {
                    for s in 0..n {
                        acc += t[idx(x, r, q, s)] * rdm.two_body(y, r, q, s);
                    }
                }
            }
            grad_phi[(x, y)] += 2.0 * acc;
        }
    }

    let kt = rot.kappa().transpose();
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&kt);
    block.view_mut((n, n), (n, n)).copy_from(&kt);
    block.view_mut((0, n), (n, n)).copy_from(&grad_phi);
    let m = expm(&block).view((0, n), (n, n)).into_owned();
    let mut grad = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for p in 0..n {
        for q in p + 1..n {
            grad.push(m[(p, q)] - m[(q, p)]);
        }
    }
    (energy, grad)
}

/// ∂E/∂κ_pq as an antisymmetric matrix (upper entries are the free
/// parameters' derivatives).
pub fn kappa_gradient(psi: &CIVector, ints: &MolecularIntegrals, rot: &OrbitalRotation) -> Result<DMatrix<f64>> {
    if rot.n_orb() != ints.n_orb() || psi.basis().spec().n_orb != ints.n_orb() {
        return Err(Error::BasisMismatch("rotation, state and integrals disagree on n_orb".into()));
    }
    let rdm = compute_rdms(psi)?;
    let (_, g) = orbital_objective(ints, &rdm, rot);
    Ok(crate::linalg::antisymmetric_from_upper(ints.n_orb(), &g))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitalReport {
    pub rotation: OrbitalRotation,
    pub initial_energy: f64,
    pub energy: f64,
    pub lbfgs: LbfgsReport,
}

/// Minimizes ⟨ψ|H(κ)|ψ⟩ over κ with ψ held fixed, starting from `start`.
pub fn optimize_orbitals(
    psi: &CIVector,
    ints: &MolecularIntegrals,
    start: &OrbitalRotation,
    opts: &LbfgsOptions,
) -> Result<OrbitalReport> {
    let n = ints.n_orb();
    if start.n_orb() != n || psi.basis().spec().n_orb != n {
        return Err(Error::BasisMismatch("rotation, state and integrals disagree on n_orb".into()));
    }
    let rdm = compute_rdms(psi)?;
    let mut failure = None;
    let mut objective = |x: &[f64]| match OrbitalRotation::from_params(n, x) {
        Ok(rot) => orbital_objective(ints, &rdm, &rot),
        Err(e) => {
            failure = Some(e);
            (f64::INFINITY, vec![0.0; x.len()])
        }
    };
    let initial_energy = objective(&start.params()).0;
    let report = lbfgs_minimize(&mut objective, &start.params(), opts);
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(OrbitalReport {
        rotation: OrbitalRotation::from_params(n, &report.x)?,
        initial_energy,
        energy: report.value,
        lbfgs: report,
    })
}

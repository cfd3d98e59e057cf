use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chem::MolecularIntegrals;
use crate::linalg::{antisymmetric_from_upper, expm, strict_upper};
use crate::sci::{CIVector, SubspaceHamiltonian};
use crate::{Error, Result};

/// Real antisymmetric generator κ and Φ = e^κ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RotationRecord", into = "RotationRecord")]
pub struct OrbitalRotation {
    kappa: DMatrix<f64>,
    phi: DMatrix<f64>,
}

/// κ on disk: its strict upper triangle, row-major.
#[derive(Serialize, Deserialize)]
struct RotationRecord {
    n_orb: usize,
    kappa_upper: Vec<f64>,
}

impl TryFrom<RotationRecord> for OrbitalRotation {
    type Error = Error;
    fn try_from(r: RotationRecord) -> Result<Self> {
        OrbitalRotation::from_params(r.n_orb, &r.kappa_upper)
    }
}

impl From<OrbitalRotation> for RotationRecord {
    fn from(r: OrbitalRotation) -> Self {
        RotationRecord {
            n_orb: r.n_orb(),
            kappa_upper: r.params(),
        }
    }
}

impl OrbitalRotation {
    pub fn identity(n_orb: usize) -> Self {
        OrbitalRotation {
            kappa: DMatrix::zeros(n_orb, n_orb),
            phi: DMatrix::identity(n_orb, n_orb),
        }
    }

    pub fn new(kappa: DMatrix<f64>) -> Result<Self> {
        if !kappa.is_square() {
            return Err(Error::Contract("κ must be square".into()));
        }
        let asym = (&kappa + kappa.transpose()).abs().max();
        if asym > 1e-12 {
            return Err(Error::Contract(format!("κ deviates from antisymmetry by {asym:e}")));
        }
        let phi = expm(&kappa);
        Ok(OrbitalRotation { kappa, phi })
    }

    /// From the n(n−1)/2 free parameters κ_pq, p < q.
    pub fn from_params(n_orb: usize, upper: &[f64]) -> Result<Self> {
        if upper.len() != n_orb * n_orb.saturating_sub(1) / 2 {
            return Err(Error::Contract(format!(
                "{} rotation parameters for {n_orb} orbitals",
                upper.len()
            )));
        }
        Self::new(antisymmetric_from_upper(n_orb, upper))
    }

    pub fn n_orb(&self) -> usize {
        self.kappa.nrows()
    }

    pub fn params(&self) -> Vec<f64> {
        strict_upper(&self.kappa)
    }

    pub fn kappa(&self) -> &DMatrix<f64> {
        &self.kappa
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n_orb();
        (self.phi.transpose() * &self.phi - DMatrix::identity(n, n)).abs().max()
    }
}

fn check_orthogonal(phi: &DMatrix<f64>) -> Result<()> {
    let n = phi.nrows();
    if !phi.is_square() {
        return Err(Error::Contract("Φ must be square".into()));
    }
    let err = (phi.transpose() * phi - DMatrix::identity(n, n)).abs().max();
    if err > 1e-8 {
        return Err(Error::Contract(format!("Φ is not orthogonal (‖ΦᵀΦ − I‖ = {err:e})")));
    }
    Ok(())
}

/// T[a,r,q,s] = Σ_cbd (ac|bd) Φ_cr Φ_bq Φ_ds, the two-body tensor with all
/// but the first index rotated. Dense, row-major.
pub(crate) fn three_index_transform(ints: &MolecularIntegrals, phi: &DMatrix<f64>) -> Vec<f64> {
    let n = ints.n_orb();
    let v = ints.eri_dense();
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    // last index
    let mut t1 = vec![0.0; n * n * n * n];
    for a in 0..n {
        for c in 0..n {
            for b in 0..n {
                let base = idx(a, c, b, 0);
                for s in 0..n {
                    t1[base + s] = (0..n).map(|d| v[base + d] * phi[(d, s)]).sum();
                }
            }
        }
    }
    // third index
    let mut t2 = vec![0.0; n * n * n * n];
    for a in 0..n {
        for c in 0..n {
            for q in 0..n {
                for s in 0..n {
                    t2[idx(a, c, q, s)] = (0..n).map(|b| t1[idx(a, c, b, s)] * phi[(b, q)]).sum();
                }
            }
        }
    }
    // second index
    let mut t3 = vec![0.0; n * n * n * n];
    for a in 0..n {
        for r in 0..n {
            for q in 0..n {
                for s in 0..n {
                    t3[idx(a, r, q, s)] = (0..n).map(|c| t2[idx(a, c, q, s)] * phi[(c, r)]).sum();
                }
            }
        }
    }
    t3
}

/// h′ = Φᵀ h Φ and (pr|qs)′ = Σ (ac|bd) Φ_ap Φ_cr Φ_bq Φ_ds.
pub fn transform_with_matrix(ints: &MolecularIntegrals, phi: &DMatrix<f64>) -> Result<MolecularIntegrals> {
    let n = ints.n_orb();
    if phi.nrows() != n {
        return Err(Error::BasisMismatch(format!("Φ of size {} for {n} orbitals", phi.nrows())));
    }
    check_orthogonal(phi)?;
    let h = DMatrix::from_row_slice(n, n, ints.h_dense());
    let h_new = phi.transpose() * h * phi;
    let t = three_index_transform(ints, phi);
    let mut out = MolecularIntegrals::zeros(n);
    out.core_energy = ints.core_energy;
    for p in 0..n {
        for r in 0..=p {
            out.set_h(p, r, 0.5 * (h_new[(p, r)] + h_new[(r, p)]));
        }
    }
    let idx = |a: usize, b: usize, c: usize, d: usize| ((a * n + b) * n + c) * n + d;
    for (p, r, q, s, _) in ints.unique_eri() {
        let v: f64 = (0..n).map(|a| phi[(a, p)] * t[idx(a, r, q, s)]).sum();
        out.set_eri(p, r, q, s, v);
    }
    Ok(out)
}

pub fn transform_integrals(ints: &MolecularIntegrals, rot: &OrbitalRotation) -> Result<MolecularIntegrals> {
    transform_with_matrix(ints, rot.phi())
}

/// ⟨ψ|H(κ)|ψ⟩ / ⟨ψ|ψ⟩ with H(κ) built from rotated integrals.
pub fn rayleigh_energy(psi: &CIVector, ints: &MolecularIntegrals, rot: &OrbitalRotation) -> Result<f64> {
    if rot.n_orb() != ints.n_orb() {
        return Err(Error::BasisMismatch(format!(
            "rotation for {} orbitals, integrals for {}",
            rot.n_orb(),
            ints.n_orb()
        )));
    }
    let rotated = Arc::new(transform_integrals(ints, rot)?);
    let ham = SubspaceHamiltonian::new(psi.basis().clone(), rotated)?;
    ham.expectation(psi.amplitudes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_generator_is_identity() {
        let ints = MolecularIntegrals::synthetic(4, 2);
        let out = transform_integrals(&ints, &OrbitalRotation::identity(4)).unwrap();
        assert!(out.max_abs_diff(&ints) < 1e-14);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut k = DMatrix::zeros(2, 2);
        k[(0, 1)] = 0.3;
        assert!(OrbitalRotation::new(k).is_err());
        assert!(OrbitalRotation::from_params(3, &[0.1]).is_err());
        let ints = MolecularIntegrals::synthetic(2, 1);
        assert!(transform_with_matrix(&ints, &DMatrix::from_element(2, 2, 1.0)).is_err());
    }

    #[test]
    fn serde_keeps_the_generator() {
        let r = OrbitalRotation::from_params(3, &[0.1, -0.2, 0.3]).unwrap();
        let back: OrbitalRotation = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back.params(), r.params());
        assert!(r.orthogonality_error() < 1e-14);
    }
}

//! Exact energy variance ⟨H²⟩ − ⟨H⟩² by unprojected application.
//!
//! Every determinant reached from supp(ψ) by H differs in at most two
//! spin-orbitals in total, so each of its halves lies within a double
//! excitation of a support half. Applying H on the product of the expanded
//! half lists therefore yields Hψ with no component dropped.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::basis::{CIVector, SubspaceBasis};
use super::hamiltonian::{LinearOperator, SubspaceHamiltonian};
use crate::chem::{HalfConfiguration, MolecularIntegrals};
use crate::{Error, Result};

/// Largest expanded product dimension evaluated by default.
pub const DEFAULT_VARIANCE_CAP: usize = 20_000_000;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct VarianceReport {
    pub variance: f64,
    pub energy: f64,
    /// Norm of ψ as supplied.
    pub norm_factor: f64,
    /// Dimension of the expanded product space H was applied on.
    pub connected_dim: usize,
}

/// All halves within a double excitation of some element of `list`
/// (including the elements themselves), sorted.
pub fn connected_halves(list: &[HalfConfiguration], n_orb: usize) -> Vec<HalfConfiguration> {
    let mask = if n_orb == 64 { u64::MAX } else { (1u64 << n_orb) - 1 };
    let mut out = BTreeSet::new();
    for &h in list {
        out.insert(h);
        let occ: Vec<u64> = h.occupied().map(|p| 1u64 << p).collect();
        let virt: Vec<u64> = HalfConfiguration(!h.0 & mask).occupied().map(|p| 1u64 << p).collect();
        for (i, &r) in occ.iter().enumerate() {
            for (k, &p) in virt.iter().enumerate() {
                let single = h.0 ^ r ^ p;
                out.insert(HalfConfiguration(single));
                for &s in &occ[i + 1..] {
                    for &q in &virt[k + 1..] {
                        out.insert(HalfConfiguration(single ^ s ^ q));
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// ΔE = ‖Hψ‖² − E² for normalized ψ, with Hψ taken in the full
/// determinant space.
pub fn energy_variance(psi: &CIVector, ints: &Arc<MolecularIntegrals>, cap: usize) -> Result<VarianceReport> {
    let basis = psi.basis();
    let nb = basis.dim_beta();
    let amps = psi.amplitudes();
    let norm_factor = psi.norm();
    if norm_factor == 0.0 {
        return Err(Error::ZeroVector("variance of a null vector".into()));
    }
    let rows: Vec<HalfConfiguration> = (0..basis.dim_alpha())
        .filter(|&a| amps[a * nb..(a + 1) * nb].iter().any(|&x| x != 0.0))
        .map(|a| basis.alpha()[a])
        .collect();
    let cols: Vec<HalfConfiguration> = (0..nb)
        .filter(|&b| (0..basis.dim_alpha()).any(|a| amps[a * nb + b] != 0.0))
        .map(|b| basis.beta()[b])
        .collect();
    let n_orb = basis.spec().n_orb;
    let alpha = connected_halves(&rows, n_orb);
    let beta = connected_halves(&cols, n_orb);
    let needed = alpha.len() as u128 * beta.len() as u128;
    if needed > cap as u128 {
        return Err(Error::Capacity {
            what: "variance connected space".into(),
            needed,
            cap: cap as u128,
        });
    }
    let expanded = Arc::new(SubspaceBasis::new(*basis.spec(), alpha, beta)?);
    let mut x = psi.project_onto(&expanded);
    x.normalize()?;
    let ham = SubspaceHamiltonian::new(expanded.clone(), ints.clone())?;
    let mut hx = vec![0.0; expanded.dim()];
    ham.apply(x.amplitudes(), &mut hx)?;
    let energy: f64 = x.amplitudes().iter().zip(&hx).map(|(a, b)| a * b).sum();
    let variance: f64 = hx
        .iter()
        .zip(x.amplitudes())
        .map(|(h, a)| (h - energy * a).powi(2))
        .sum();
    Ok(VarianceReport {
        variance,
        energy,
        norm_factor,
        connected_dim: expanded.dim(),
    })
}

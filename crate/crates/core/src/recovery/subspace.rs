use std::collections::BTreeSet;

use super::carryover::CarryoverSet;
use crate::chem::{hf_configuration, Configuration, HalfConfiguration, SystemSpec};
use crate::sci::SubspaceBasis;
use crate::{Error, Result};

/// Product basis over the unique halves of `selected`, the carryover halves
/// and the Hartree–Fock halves.
///
/// In spin-symmetric mode every half goes into one shared list, so D_h is
/// the size of the union and the dimension is D_h². Otherwise each list
/// takes the halves whose electron count fits its sector.
pub fn build_subspace(
    selected: &[Configuration],
    carryover: &CarryoverSet,
    spec: &SystemSpec,
    spin_symmetric: bool,
) -> Result<SubspaceBasis> {
    if let Some(bad) = selected.iter().find(|c| !c.matches(spec)) {
        return Err(Error::Contract(format!(
            "selected configuration {} does not match ({}, {}, {})",
            bad.to_bitstring(spec.n_orb),
            spec.n_orb,
            spec.n_alpha,
            spec.n_beta
        )));
    }
    if spin_symmetric && spec.n_alpha != spec.n_beta {
        return Err(Error::Contract(format!(
            "spin-symmetric subspace needs equal electron counts, got ({}, {})",
            spec.n_alpha, spec.n_beta
        )));
    }
    let hf = hf_configuration(spec);
    let mask = spec.orbital_mask();
    let fits = |h: HalfConfiguration, n_e: usize| h.count() == n_e && h.0 & !mask == 0;
    let mut alpha: BTreeSet<HalfConfiguration> = selected.iter().map(|c| c.alpha).collect();
    let mut beta: BTreeSet<HalfConfiguration> = selected.iter().map(|c| c.beta).collect();
    alpha.insert(hf.alpha);
    beta.insert(hf.beta);
    for h in carryover.halves() {
        if fits(h, spec.n_alpha) {
            alpha.insert(h);
        }
        if fits(h, spec.n_beta) {
            beta.insert(h);
        }
        if !fits(h, spec.n_alpha) && !fits(h, spec.n_beta) {
            log::warn!("carryover half {h} fits neither spin sector, dropped");
        }
    }
    if spin_symmetric {
        alpha.append(&mut beta);
        let shared: Vec<_> = alpha.into_iter().collect();
        SubspaceBasis::new(*spec, shared.clone(), shared)
    } else {
        SubspaceBasis::new(*spec, alpha.into_iter().collect(), beta.into_iter().collect())
    }
}

//! Hamiltonian matrix elements between determinants.
//!
//! Conventions: α operators precede β operators in the canonical product,
//! and within a spin sector creation operators are ordered by orbital index.

use super::excitations::{double_sign, single_sign};
use crate::chem::{Configuration, HalfConfiguration, MolecularIntegrals};
use crate::{Error, Result};

/// ⟨x|H|x⟩ including the core energy.
pub fn diagonal_element(x: &Configuration, ints: &MolecularIntegrals) -> f64 {
    let occ_a: Vec<usize> = x.alpha.occupied().collect();
    let occ_b: Vec<usize> = x.beta.occupied().collect();
    let mut e = ints.core_energy;
    for occ in [&occ_a, &occ_b] {
        for (i, &p) in occ.iter().enumerate() {
            e += ints.h(p, p);
            for &q in &occ[..i] {
                e += ints.eri(p, p, q, q) - ints.eri(p, q, q, p);
            }
        }
    }
    for &p in &occ_a {
        for &q in &occ_b {
            e += ints.eri(p, p, q, q);
        }
    }
    e
}

fn diff(x: HalfConfiguration, y: HalfConfiguration) -> (Vec<usize>, Vec<usize>) {
    let removed = HalfConfiguration(x.0 & !y.0).occupied().collect();
    let added = HalfConfiguration(y.0 & !x.0).occupied().collect();
    (removed, added)
}

/// Same-spin single r → p out of `x`, with `other` the opposite-spin half.
fn single_value(
    x: HalfConfiguration,
    other: HalfConfiguration,
    r: usize,
    p: usize,
    ints: &MolecularIntegrals,
) -> f64 {
    let mut v = ints.h(p, r);
    for q in x.occupied() {
        v += ints.eri(p, r, q, q) - ints.eri(p, q, q, r);
    }
    for q in other.occupied() {
        v += ints.eri(p, r, q, q);
    }
    single_sign(x.0, r, p) * v
}

fn double_value(x: HalfConfiguration, from: &[usize], to: &[usize], ints: &MolecularIntegrals) -> f64 {
    let (r, s, p, q) = (from[0], from[1], to[0], to[1]);
    double_sign(x.0, r, s, p, q) * (ints.eri(p, r, q, s) - ints.eri(p, s, q, r))
}

/// ⟨y|H|x⟩ by the Slater–Condon rules.
pub fn slater_condon_element(
    x: &Configuration,
    y: &Configuration,
    ints: &MolecularIntegrals,
) -> Result<f64> {
    if x.alpha.count() != y.alpha.count() || x.beta.count() != y.beta.count() {
        return Err(Error::Contract(format!(
            "particle numbers differ: ({}, {}) vs ({}, {})",
            x.alpha.count(),
            x.beta.count(),
            y.alpha.count(),
            y.beta.count()
        )));
    }
    let (ra, aa) = diff(x.alpha, y.alpha);
    let (rb, ab) = diff(x.beta, y.beta);
    let value = match (ra.len(), rb.len()) {
        (0, 0) => diagonal_element(x, ints),
        (1, 0) => single_value(x.alpha, x.beta, ra[0], aa[0], ints),
        (0, 1) => single_value(x.beta, x.alpha, rb[0], ab[0], ints),
        (2, 0) => double_value(x.alpha, &ra, &aa, ints),
        (0, 2) => double_value(x.beta, &rb, &ab, ints),
        (1, 1) => {
            single_sign(x.alpha.0, ra[0], aa[0])
                * single_sign(x.beta.0, rb[0], ab[0])
                * ints.eri(aa[0], ra[0], ab[0], rb[0])
        }
        _ => 0.0,
    };
    Ok(value)
}

//! Projected Hamiltonian action on an α⊗β product subspace.
//!
//! σ = Hψ splits into
//!
//! * the diagonal,
//! * pure-α singles and doubles (β column unchanged),
//! * pure-β singles and doubles (α row unchanged),
//! * mixed terms with one single excitation in each sector.
//!
//! Because the subspace is a full tensor product, every entry of the
//! excitation tables has a partner on the other axis, so each term reduces
//! to a dense sweep over one axis. Rows of σ are independent, which is what
//! the parallel path splits on.

use std::sync::Arc;

use super::basis::{CIVector, SubspaceBasis};
use super::davidson::{davidson, DavidsonOptions, DavidsonReport};
use super::excitations::{build_excitation_tables, ExcitationTable};
use crate::chem::{pair_index, HalfConfiguration, MolecularIntegrals};
use crate::{Error, Result};

/// y = A·x for a symmetric operator.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

/// Sector-local data precomputed from the integrals.
#[derive(Clone, Debug)]
struct SectorTerms {
    table: Arc<ExcitationTable>,
    /// One-sector energy of each half (h + same-spin two-body).
    self_energy: Vec<f64>,
    /// sign·(h_pr + Σ_q∈occ (pr|qq) − (pq|qr)) per single, parallel to `table.singles`.
    single_base: Vec<Vec<f64>>,
    /// pair_index(p, r) per single.
    single_pair: Vec<Vec<usize>>,
    /// sign·((pr|qs) − (ps|qr)) per double.
    double_value: Vec<Vec<f64>>,
    /// coulomb[pair * len + b] = Σ_{q ∈ occ(b)} (pair|qq)
    coulomb: Vec<f64>,
}

impl SectorTerms {
    fn build(list: &[HalfConfiguration], table: Arc<ExcitationTable>, ints: &MolecularIntegrals) -> Self {
        let n = ints.n_orb();
        let npair = n * (n + 1) / 2;
        let len = list.len();
        let occs: Vec<Vec<usize>> = list.iter().map(|h| h.occupied().collect()).collect();

        let self_energy = occs
            .iter()
            .map(|occ| {
                let mut e = 0.0;
                for (i, &p) in occ.iter().enumerate() {
                    e += ints.h(p, p);
                    for &q in &occ[..i] {
                        e += ints.eri(p, p, q, q) - ints.eri(p, q, q, p);
                    }
                }
                e
            })
            .collect();

        let mut single_base = Vec::with_capacity(len);
        let mut single_pair = Vec::with_capacity(len);
        let mut double_value = Vec::with_capacity(len);
        for (b, occ) in occs.iter().enumerate() {
            let mut base = Vec::with_capacity(table.singles[b].len());
            let mut pairs = Vec::with_capacity(table.singles[b].len());
            for e in &table.singles[b] {
                let (r, p) = (e.from as usize, e.to as usize);
                let mut v = ints.h(p, r);
                for &q in occ {
                    v += ints.eri(p, r, q, q) - ints.eri(p, q, q, r);
                }
                base.push(e.sign * v);
                pairs.push(pair_index(p, r));
            }
            single_base.push(base);
            single_pair.push(pairs);
            double_value.push(
                table.doubles[b]
                    .iter()
                    .map(|d| {
                        let (r, s) = (d.from[0] as usize, d.from[1] as usize);
                        let (p, q) = (d.to[0] as usize, d.to[1] as usize);
                        d.sign * (ints.eri(p, r, q, s) - ints.eri(p, s, q, r))
                    })
                    .collect(),
            );
        }

        let mut coulomb = vec![0.0; npair * len];
        for p in 0..n {
            for r in 0..=p {
                let pr = pair_index(p, r);
                for (b, occ) in occs.iter().enumerate() {
                    coulomb[pr * len + b] = occ.iter().map(|&q| ints.eri(p, r, q, q)).sum();
                }
            }
        }

        SectorTerms {
            table,
            self_energy,
            single_base,
            single_pair,
            double_value,
            coulomb,
        }
    }
}

/// The Hamiltonian restricted to one product subspace.
#[derive(Clone, Debug)]
pub struct SubspaceHamiltonian {
    basis: Arc<SubspaceBasis>,
    ints: Arc<MolecularIntegrals>,
    alpha: SectorTerms,
    beta: SectorTerms,
    diag: Vec<f64>,
}

impl SubspaceHamiltonian {
    pub fn new(basis: Arc<SubspaceBasis>, ints: Arc<MolecularIntegrals>) -> Result<Self> {
        let n_orb = basis.spec().n_orb;
        if ints.n_orb() != n_orb {
            return Err(Error::BasisMismatch(format!(
                "integrals for {} orbitals, basis has {n_orb}",
                ints.n_orb()
            )));
        }
        let alpha_table = Arc::new(build_excitation_tables(basis.alpha(), n_orb));
        let beta_table = if basis.is_spin_symmetric() {
            alpha_table.clone()
        } else {
            Arc::new(build_excitation_tables(basis.beta(), n_orb))
        };
        let alpha = SectorTerms::build(basis.alpha(), alpha_table, &ints);
        let beta = if basis.is_spin_symmetric() {
            alpha.clone()
        } else {
            SectorTerms::build(basis.beta(), beta_table, &ints)
        };

        let (na, nb) = (basis.dim_alpha(), basis.dim_beta());
        let mut diag = vec![0.0; na * nb];
        for (i, ha) in basis.alpha().iter().enumerate() {
            let occ_a: Vec<usize> = ha.occupied().collect();
            for j in 0..nb {
                let cross: f64 = occ_a
                    .iter()
                    .map(|&p| beta.coulomb[pair_index(p, p) * nb + j])
                    .sum();
                diag[i * nb + j] =
                    ints.core_energy + alpha.self_energy[i] + beta.self_energy[j] + cross;
            }
        }
        Ok(SubspaceHamiltonian {
            basis,
            ints,
            alpha,
            beta,
            diag,
        })
    }

    pub fn basis(&self) -> &Arc<SubspaceBasis> {
        &self.basis
    }

    pub fn integrals(&self) -> &Arc<MolecularIntegrals> {
        &self.ints
    }

    pub fn alpha_table(&self) -> &ExcitationTable {
        &self.alpha.table
    }

    pub fn beta_table(&self) -> &ExcitationTable {
        &self.beta.table
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Contribution of the source α-half that `coupling` names (β columns
    /// `src_cols`) to output row `row`, restricted to output columns
    /// `out_cols`. `psi_block` holds ψ[source, src_cols] contiguous.
    ///
    /// This is the unit of work the distributed engine schedules; the serial
    /// kernel below is the same sum organised by output row.
    pub(crate) fn accumulate_block(
        &self,
        row: usize,
        coupling: Coupling,
        src_cols: std::ops::Range<usize>,
        psi_block: &[f64],
        out_cols: std::ops::Range<usize>,
        out: &mut [f64],
    ) {
        let nb = self.basis.dim_beta();
        let beta = &self.beta;
        let in_src = |c: usize| c >= src_cols.start && c < src_cols.end;
        match coupling {
            Coupling::Same => {
                // diagonal, β singles and β doubles; α row unchanged
                for (o, j) in out_cols.clone().enumerate() {
                    let mut acc = 0.0;
                    if in_src(j) {
                        acc += self.diag[row * nb + j] * psi_block[j - src_cols.start];
                    }
                    for (k, e) in beta.table.singles[j].iter().enumerate() {
                        if in_src(e.target) {
                            let v = beta.single_base[j][k]
                                + e.sign * self.alpha.coulomb[beta.single_pair[j][k] * self.basis.dim_alpha() + row];
                            acc += v * psi_block[e.target - src_cols.start];
                        }
                    }
                    for (k, d) in beta.table.doubles[j].iter().enumerate() {
                        if in_src(d.target) {
                            acc += beta.double_value[j][k] * psi_block[d.target - src_cols.start];
                        }
                    }
                    out[o] += acc;
                }
            }
            Coupling::AlphaSingle(k) => {
                let base = self.alpha.single_base[row][k];
                let pair = self.alpha.single_pair[row][k];
                let sign = self.alpha.table.singles[row][k].sign;
                let coul = &beta.coulomb[pair * nb..(pair + 1) * nb];
                for (o, j) in out_cols.clone().enumerate() {
                    let mut acc = 0.0;
                    if in_src(j) {
                        acc += (base + sign * coul[j]) * psi_block[j - src_cols.start];
                    }
                    let mut mixed = 0.0;
                    for (kb, e) in beta.table.singles[j].iter().enumerate() {
                        if in_src(e.target) {
                            mixed += e.sign
                                * self.ints.eri_pairs(pair, beta.single_pair[j][kb])
                                * psi_block[e.target - src_cols.start];
                        }
                    }
                    out[o] += acc + sign * mixed;
                }
            }
            Coupling::AlphaDouble(k) => {
                let v = self.alpha.double_value[row][k];
                for (o, j) in out_cols.clone().enumerate() {
                    if in_src(j) {
                        out[o] += v * psi_block[j - src_cols.start];
                    }
                }
            }
        }
    }

    /// Every (row ← source) coupling along the α axis, grouped by source.
    pub(crate) fn alpha_couplings(&self, row: usize) -> impl Iterator<Item = (usize, Coupling)> + '_ {
        let t = &self.alpha.table;
        std::iter::once((row, Coupling::Same))
            .chain(t.singles[row].iter().enumerate().map(|(k, e)| (e.target, Coupling::AlphaSingle(k))))
            .chain(t.doubles[row].iter().enumerate().map(|(k, d)| (d.target, Coupling::AlphaDouble(k))))
    }

    fn apply_row(&self, i: usize, psi: &[f64], out: &mut [f64]) {
        let nb = self.basis.dim_beta();
        let na = self.basis.dim_alpha();
        let a = &self.alpha;
        let b = &self.beta;
        let row_psi = &psi[i * nb..(i + 1) * nb];

        for j in 0..nb {
            out[j] += self.diag[i * nb + j] * row_psi[j];
        }

        // pure α
        for (k, e) in a.table.singles[i].iter().enumerate() {
            let src = &psi[e.target * nb..(e.target + 1) * nb];
            let base = a.single_base[i][k];
            let coul = &b.coulomb[a.single_pair[i][k] * nb..(a.single_pair[i][k] + 1) * nb];
            for j in 0..nb {
                out[j] += (base + e.sign * coul[j]) * src[j];
            }
        }
        for (k, d) in a.table.doubles[i].iter().enumerate() {
            let src = &psi[d.target * nb..(d.target + 1) * nb];
            let v = a.double_value[i][k];
            for j in 0..nb {
                out[j] += v * src[j];
            }
        }

        // pure β
        for j in 0..nb {
            let mut acc = 0.0;
            for (k, e) in b.table.singles[j].iter().enumerate() {
                let v = b.single_base[j][k] + e.sign * a.coulomb[b.single_pair[j][k] * na + i];
                acc += v * row_psi[e.target];
            }
            for (k, d) in b.table.doubles[j].iter().enumerate() {
                acc += b.double_value[j][k] * row_psi[d.target];
            }
            out[j] += acc;
        }

        // mixed α single × β single
        for (k, ea) in a.table.singles[i].iter().enumerate() {
            let src = &psi[ea.target * nb..(ea.target + 1) * nb];
            let pa = a.single_pair[i][k];
            for j in 0..nb {
                let mut acc = 0.0;
                for (kb, eb) in b.table.singles[j].iter().enumerate() {
                    acc += eb.sign * self.ints.eri_pairs(pa, b.single_pair[j][kb]) * src[eb.target];
                }
                out[j] += ea.sign * acc;
            }
        }
    }

    fn check_len(&self, x: &[f64], y: &[f64]) -> Result<()> {
        let d = self.basis.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::BasisMismatch(format!(
                "vector lengths ({}, {}) for subspace dimension {d}",
                x.len(),
                y.len()
            )));
        }
        Ok(())
    }

    pub fn apply_sequential(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x, y)?;
        let nb = self.basis.dim_beta();
        y.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in y.chunks_mut(nb).enumerate() {
            self.apply_row(i, x, row);
        }
        Ok(())
    }

    pub fn expectation(&self, psi: &[f64]) -> Result<f64> {
        let mut hpsi = vec![0.0; psi.len()];
        self.apply(psi, &mut hpsi)?;
        let num: f64 = psi.iter().zip(&hpsi).map(|(a, b)| a * b).sum();
        let den: f64 = psi.iter().map(|a| a * a).sum();
        if den == 0.0 {
            return Err(Error::ZeroVector("expectation of a null vector".into()));
        }
        Ok(num / den)
    }
}

/// How a source α-half couples to an output row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Coupling {
    Same,
    AlphaSingle(usize),
    AlphaDouble(usize),
}

impl LinearOperator for SubspaceHamiltonian {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.check_len(x, y)?;
        let nb = self.basis.dim_beta();
        crate::par::for_each_chunk_mut(y, nb, |i, row| {
            row.iter_mut().for_each(|v| *v = 0.0);
            self.apply_row(i, x, row);
        });
        Ok(())
    }
}

fn check_basis(psi: &CIVector, ham: &SubspaceHamiltonian) -> Result<()> {
    if !Arc::ptr_eq(psi.basis(), ham.basis()) && psi.basis().as_ref() != ham.basis().as_ref() {
        return Err(Error::BasisMismatch("CI vector and tables built on different subspaces".into()));
    }
    Ok(())
}

/// Hψ on the subspace (parallel when the `parallel` feature is on).
pub fn apply_hamiltonian(psi: &CIVector, ham: &SubspaceHamiltonian) -> Result<CIVector> {
    check_basis(psi, ham)?;
    let mut out = vec![0.0; psi.amplitudes().len()];
    ham.apply(psi.amplitudes(), &mut out)?;
    CIVector::new(ham.basis().clone(), out)
}

/// Hψ on a single thread regardless of features.
pub fn apply_hamiltonian_sequential(psi: &CIVector, ham: &SubspaceHamiltonian) -> Result<CIVector> {
    check_basis(psi, ham)?;
    let mut out = vec![0.0; psi.amplitudes().len()];
    ham.apply_sequential(psi.amplitudes(), &mut out)?;
    CIVector::new(ham.basis().clone(), out)
}

/// ⟨x|H|x⟩ for every basis element, row-major.
pub fn diagonal_elements(basis: Arc<SubspaceBasis>, ints: Arc<MolecularIntegrals>) -> Result<Vec<f64>> {
    Ok(SubspaceHamiltonian::new(basis, ints)?.diag)
}

/// Unit vector on the element with the lowest diagonal; ties go to the
/// smallest flat index.
pub fn lowest_diagonal_start(ham: &SubspaceHamiltonian) -> Result<CIVector> {
    let diag = ham.diagonal();
    if diag.is_empty() {
        return Err(Error::Contract("empty basis".into()));
    }
    let mut best = 0;
    for (k, &d) in diag.iter().enumerate() {
        if d < diag[best] {
            best = k;
        }
    }
    let mut v = CIVector::zeros(ham.basis().clone());
    v.amplitudes_mut()[best] = 1.0;
    Ok(v)
}

/// Davidson from the lowest-diagonal determinant, seeded with the common
/// components of `guess` when supplied.
pub fn solve(
    ham: &SubspaceHamiltonian,
    opts: &DavidsonOptions,
    guess: Option<&CIVector>,
) -> Result<(DavidsonReport, CIVector)> {
    solve_with(ham, ham, opts, guess)
}

/// As [`solve`] but with a different operator implementation for Hψ (for
/// example the distributed engine).
pub fn solve_with(
    ham: &SubspaceHamiltonian,
    op: &dyn LinearOperator,
    opts: &DavidsonOptions,
    guess: Option<&CIVector>,
) -> Result<(DavidsonReport, CIVector)> {
    let v0 = lowest_diagonal_start(ham)?;
    let projected = guess.map(|g| g.project_onto(ham.basis()));
    let report = davidson(
        op,
        ham.diagonal(),
        v0.amplitudes(),
        projected.as_ref().map(|p| p.amplitudes()),
        opts,
    )?;
    let vec = CIVector::new(ham.basis().clone(), report.eigenvector.clone())?;
    Ok((report, vec))
}

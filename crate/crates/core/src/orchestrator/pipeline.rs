//! The classical half of one (iteration, population) step.
//!
//! Walkers of a population are processed side by side inside each phase,
//! and the phases themselves run one after another, so the timing records
//! of a population never overlap.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::{PartitionConfig, RunConfig};
use super::extrapolate::VariancePoint;
use super::state::{derive_seed, PopulationState, Purpose, StoredVector};
use super::timeline::{Phase, RunClock, TimingRecord};
use crate::chem::{MolecularIntegrals, SystemSpec};
use crate::engine::{DistributedOperator, EngineOptions};
use crate::lucj::{LucjParameters, SampleBatch};
use crate::optimizer::{
    de_step, optimize_orbitals, parameter_hash, transform_integrals, DeTraceRow, Evaluation, OrbitalRotation,
};
use crate::par;
use crate::recovery::{
    build_subspace, recover_configurations, select_carryover, subsample, update_occupancies, CarryoverSet,
    OccupancyVector,
};
use crate::sci::{energy_variance, solve, solve_with, CIVector, DavidsonReport, SubspaceBasis, SubspaceHamiltonian, DEFAULT_VARIANCE_CAP};
use crate::{Error, Result};

/// The fixed inputs every evaluation shares.
#[derive(Clone, Debug)]
pub struct Problem {
    pub ints: Arc<MolecularIntegrals>,
    pub spec: SystemSpec,
    pub spin_symmetric: bool,
    pub partition: Option<PartitionConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub recovered_unique: usize,
    pub dim_alpha: usize,
    pub dim_beta: usize,
    pub alpha: Vec<u64>,
    pub beta: Vec<u64>,
    pub davidson: DavidsonReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrbitalStep {
    pub initial_energy: f64,
    pub optimized_energy: f64,
    pub lbfgs_iterations: usize,
    pub converged: bool,
    pub davidson: DavidsonReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkerReport {
    pub walker: usize,
    pub param_hash: String,
    pub rounds: Vec<RoundReport>,
    pub orbital: Vec<OrbitalStep>,
    pub energy: f64,
    pub accepted: bool,
    pub best_energy: f64,
}

/// What one population contributed in one iteration.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub reports: Vec<WalkerReport>,
    pub trace: Vec<DeTraceRow>,
    pub variance: Option<VariancePoint>,
}

/// Per-walker working state while the phases run.
struct Work {
    params: LucjParameters,
    noisy: SampleBatch,
    occ: OccupancyVector,
    carry: CarryoverSet,
    kappa: OrbitalRotation,
    ints: Arc<MolecularIntegrals>,
    guess: Option<CIVector>,
    basis: Option<Arc<SubspaceBasis>>,
    energy: f64,
    rounds: Vec<RoundReport>,
    orbital: Vec<OrbitalStep>,
}

struct Refined {
    psi: CIVector,
    kappa: OrbitalRotation,
    energy: f64,
    steps: Vec<OrbitalStep>,
}

/// Union of two carryover sets; the first occurrence of a half wins.
pub fn merge_carryover(a: &CarryoverSet, b: Option<&CarryoverSet>) -> CarryoverSet {
    let mut out = a.clone();
    if let Some(b) = b {
        for &(h, w) in &b.entries {
            if !out.entries.iter().any(|&(x, _)| x == h) {
                out.entries.push((h, w));
            }
        }
    }
    out
}

fn diagonalize(
    problem: &Problem,
    cfg: &RunConfig,
    basis: Arc<SubspaceBasis>,
    ints: Arc<MolecularIntegrals>,
    guess: Option<&CIVector>,
) -> Result<(DavidsonReport, CIVector)> {
    let ham = SubspaceHamiltonian::new(basis.clone(), ints)?;
    let opts = cfg.davidson.options();
    match problem.partition {
        Some(p) => {
            let plan = p.plan(basis.dim_alpha(), basis.dim_beta())?;
            let engine = EngineOptions {
                balance: p.balance,
                ..Default::default()
            };
            let op = DistributedOperator::new(&ham, plan, engine)?;
            solve_with(&ham, &op, &opts, guess)
        }
        None => solve(&ham, &opts, guess),
    }
}

fn halves(v: &[crate::chem::HalfConfiguration]) -> Vec<u64> {
    v.iter().map(|h| h.0).collect()
}

fn collect<T>(results: Vec<Result<T>>) -> Result<Vec<T>> {
    results.into_iter().collect()
}

/// Retrieve, R × (pre-processing, diagonalization), then the orbital and
/// selection tail, for one population.
#[allow(clippy::too_many_arguments)]
pub fn classical_step(
    problem: &Problem,
    cfg: &RunConfig,
    pop: &mut PopulationState,
    population: usize,
    iteration: usize,
    batches: Vec<SampleBatch>,
    clock: &RunClock,
    records: &mut Vec<TimingRecord>,
    out_dir: &Path,
) -> Result<StepOutcome> {
    let nw = pop.walkers.len();
    let seed_of = |w: usize, purpose: Purpose, extra: u64| {
        derive_seed(cfg.seed, &[iteration as u64, population as u64, w as u64, purpose as u64, extra])
    };

    let t = clock.now();
    if batches.len() != nw {
        return Err(Error::Sampler(format!("expected {nw} batches, got {}", batches.len())));
    }
    if cfg.write_samples {
        let dir = out_dir.join("samples");
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (w, b) in batches.iter().enumerate() {
            let path = dir.join(format!("iter_{iteration:04}_p{population}_w{w}.txt"));
            std::fs::write(&path, b.to_text()).map_err(|e| Error::io(&path, e))?;
        }
    }
    let mut works: Vec<Work> = Vec::with_capacity(nw);
    for (w, noisy) in batches.into_iter().enumerate() {
        let slot = &pop.walkers[w];
        let kappa = if cfg.orbital.reset_kappa {
            OrbitalRotation::identity(problem.spec.n_orb)
        } else {
            slot.state.kappa.clone()
        };
        let ints = Arc::new(transform_integrals(&problem.ints, &kappa)?);
        works.push(Work {
            params: pop.pending[w].clone(),
            noisy,
            occ: slot.state.occupancies.clone(),
            carry: merge_carryover(&slot.state.carryover, pop.received.as_ref()),
            kappa,
            ints,
            guess: slot.psi.as_ref().map(StoredVector::to_vector).transpose()?,
            basis: None,
            energy: f64::INFINITY,
            rounds: Vec::new(),
            orbital: Vec::new(),
        });
    }
    records.push(clock.record(Phase::Retrieve, population, None, iteration, t));

    for round in 0..cfg.recovery_rounds {
        let t = clock.now();
        let built = collect(par::map_range(nw, |w| -> Result<(Arc<SubspaceBasis>, usize)> {
            let wk = &works[w];
            let rec = recover_configurations(
                &wk.noisy,
                &wk.occ,
                &problem.spec,
                seed_of(w, Purpose::Recovery, round as u64),
            )?;
            let selected = subsample(&rec, cfg.subsample, seed_of(w, Purpose::Subsample, round as u64))?;
            let basis = build_subspace(&selected, &wk.carry, &problem.spec, problem.spin_symmetric)?;
            Ok((Arc::new(basis), rec.unique()))
        }))?;
        records.push(clock.record(Phase::PreProcessing, population, None, iteration, t));

        let t = clock.now();
        let solved = collect(par::map_range(nw, |w| {
            let wk = &works[w];
            diagonalize(problem, cfg, built[w].0.clone(), wk.ints.clone(), wk.guess.as_ref())
        }))?;
        for ((wk, (basis, unique)), (rep, psi)) in works.iter_mut().zip(built).zip(solved) {
            wk.occ = update_occupancies(&psi)?;
            wk.carry = select_carryover(&psi, cfg.carryover_ratio, iteration)?;
            wk.energy = rep.energy;
            wk.rounds.push(RoundReport {
                round,
                recovered_unique: unique,
                dim_alpha: basis.dim_alpha(),
                dim_beta: basis.dim_beta(),
                alpha: halves(basis.alpha()),
                beta: halves(basis.beta()),
                davidson: rep,
            });
            wk.basis = Some(basis);
            wk.guess = Some(psi);
        }
        records.push(clock.record(Phase::Diagonalization, population, None, iteration, t));
    }

    let t = clock.now();
    if cfg.orbital.enabled {
        let lbfgs = cfg.orbital.lbfgs();
        let refined = collect(par::map_range(nw, |w| -> Result<Refined> {
            let wk = &works[w];
            let basis = wk.basis.clone().expect("at least one round");
            let mut r = Refined {
                psi: wk.guess.clone().expect("solved"),
                kappa: wk.kappa.clone(),
                energy: wk.energy,
                steps: Vec::new(),
            };
            for _ in 0..cfg.orbital.rounds {
                let opt = optimize_orbitals(&r.psi, &problem.ints, &r.kappa, &lbfgs)?;
                r.kappa = opt.rotation;
                let ints = Arc::new(transform_integrals(&problem.ints, &r.kappa)?);
                let (rep, next) = diagonalize(problem, cfg, basis.clone(), ints, Some(&r.psi))?;
                r.energy = rep.energy;
                r.psi = next;
                r.steps.push(OrbitalStep {
                    initial_energy: opt.initial_energy,
                    optimized_energy: opt.energy,
                    lbfgs_iterations: opt.lbfgs.iterations,
                    converged: opt.lbfgs.converged,
                    davidson: rep,
                });
            }
            Ok(r)
        }))?;
        for (wk, r) in works.iter_mut().zip(refined) {
            wk.occ = update_occupancies(&r.psi)?;
            wk.carry = select_carryover(&r.psi, cfg.carryover_ratio, iteration)?;
            wk.kappa = r.kappa;
            wk.energy = r.energy;
            wk.orbital = r.steps;
            wk.guess = Some(r.psi);
        }
    }

    let mut reports = Vec::with_capacity(nw);
    let mut trace = Vec::with_capacity(nw);
    for (w, wk) in works.into_iter().enumerate() {
        let hash = parameter_hash(&wk.params.to_vector());
        let psi = wk.guess.expect("solved");
        let slot = &mut pop.walkers[w];
        let accepted = slot.state.offer(Evaluation {
            params: wk.params,
            energy: wk.energy,
            kappa: wk.kappa,
            carryover: wk.carry,
            occupancies: wk.occ,
        });
        if accepted {
            slot.psi = Some(StoredVector::from_vector(&psi));
        }
        trace.push(DeTraceRow {
            iteration,
            population,
            walker: w,
            energy: wk.energy,
            accepted,
            param_hash: hash.clone(),
        });
        reports.push(WalkerReport {
            walker: w,
            param_hash: hash,
            rounds: wk.rounds,
            orbital: wk.orbital,
            energy: wk.energy,
            accepted,
            best_energy: slot.state.best_energy,
        });
    }

    let states: Vec<_> = pop.walkers.iter().map(|s| s.state.clone()).collect();
    pop.pending = de_step(&states, &cfg.de, seed_of(0, Purpose::Evolution, 0))?;

    let variance = if cfg.variance {
        best_variance(problem, pop, population, iteration)?
    } else {
        None
    };
    records.push(clock.record(Phase::Diagonalization, population, None, iteration, t));

    Ok(StepOutcome {
        reports,
        trace,
        variance,
    })
}

fn best_variance(problem: &Problem, pop: &PopulationState, population: usize, iteration: usize) -> Result<Option<VariancePoint>> {
    let slot = &pop.walkers[pop.best_walker()];
    let Some(stored) = &slot.psi else {
        return Ok(None);
    };
    let psi = stored.to_vector()?;
    let ints = Arc::new(transform_integrals(&problem.ints, &slot.state.kappa)?);
    match energy_variance(&psi, &ints, DEFAULT_VARIANCE_CAP) {
        Ok(v) => Ok(Some(VariancePoint::new(
            slot.state.best_energy,
            v.variance,
            psi.basis().dim(),
            iteration,
            population,
        )?)),
        Err(Error::Capacity { needed, cap, .. }) => {
            log::warn!("variance skipped: connected space {needed} exceeds {cap}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

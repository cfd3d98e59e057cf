use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::orbital::OrbitalRotation;
use crate::lucj::LucjParameters;
use crate::recovery::{CarryoverSet, OccupancyVector};
use crate::{Error, Result};

pub const DE_TRACE_SCHEMA: &str = "# schema: sqd-de-trace v1";

/// How the four difference-vector indices of best/2/bin are drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexMode {
    /// Four distinct walkers other than the target; needs ≥ 5 walkers.
    Strict,
    /// Each index uniform over the walkers other than the target, with
    /// replacement; works from 2 walkers.
    #[default]
    Replacement,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DEConfig {
    pub populations: usize,
    pub walkers: usize,
    pub mutation: f64,
    pub crossover: f64,
    pub strategy: String,
    pub index_mode: IndexMode,
    /// Box bounds applied to every coordinate of a trial vector.
    pub bounds: Option<(f64, f64)>,
}

impl Default for DEConfig {
    fn default() -> Self {
        DEConfig {
            populations: 2,
            walkers: 4,
            mutation: 0.25,
            crossover: 0.7,
            strategy: "best/2/bin".into(),
            index_mode: IndexMode::Replacement,
            bounds: None,
        }
    }
}

impl DEConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mutation >= 0.0 && self.mutation.is_finite()) {
            return Err(Error::Config(format!("mutation factor {} must be ≥ 0", self.mutation)));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::Config(format!("crossover ratio {} outside [0, 1]", self.crossover)));
        }
        if self.strategy != "best/2/bin" {
            return Err(Error::Config(format!("unsupported DE strategy `{}`", self.strategy)));
        }
        let min = match self.index_mode {
            IndexMode::Strict => 5,
            IndexMode::Replacement => 2,
        };
        // a lone walker is re-evaluated without mutation
        if self.walkers == 0 || (self.walkers > 1 && self.walkers < min) {
            return Err(Error::Config(format!(
                "{:?} index mode needs at least {min} walkers, got {}",
                self.index_mode, self.walkers
            )));
        }
        if self.populations == 0 {
            return Err(Error::Config("at least one population is required".into()));
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi) {
                return Err(Error::Config(format!("empty bounds ({lo}, {hi})")));
            }
        }
        Ok(())
    }
}

/// One trial vector per walker by best/2/bin:
/// v = x_best + F(x_r1 − x_r2) + F(x_r3 − x_r4), then binomial crossover
/// with the target at rate CR and one forced mutant coordinate.
/// The best walker is the lowest energy, ties to the lower index.
pub fn de_trials(vectors: &[Vec<f64>], energies: &[f64], cfg: &DEConfig, seed: u64) -> Result<Vec<Vec<f64>>> {
    let np = vectors.len();
    if np != energies.len() {
        return Err(Error::Contract(format!("{np} vectors but {} energies", energies.len())));
    }
    let min = if cfg.index_mode == IndexMode::Strict { 5 } else { 2 };
    if np < min {
        return Err(Error::Infeasible(format!("{:?} index mode needs at least {min} walkers, got {np}", cfg.index_mode)));
    }
    let dim = vectors[0].len();
    if vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Contract("walker vectors differ in length".into()));
    }
    let best = (0..np)
        .min_by(|&a, &b| energies[a].total_cmp(&energies[b]).then(a.cmp(&b)))
        .expect("non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(np);
    for i in 0..np {
        let others: Vec<usize> = (0..np).filter(|&j| j != i).collect();
        let r: Vec<usize> = match cfg.index_mode {
            IndexMode::Strict => others.choose_multiple(&mut rng, 4).copied().collect(),
            IndexMode::Replacement => (0..4).map(|_| others[rng.gen_range(0..others.len())]).collect(),
        };
        let forced = if dim > 0 { rng.gen_range(0..dim) } else { 0 };
        let trial: Vec<f64> = (0..dim)
            .map(|k| {
                let take = rng.gen::<f64>() < cfg.crossover || k == forced;
                let v = if take {
                    vectors[best][k]
                        + cfg.mutation * (vectors[r[0]][k] - vectors[r[1]][k])
                        + cfg.mutation * (vectors[r[2]][k] - vectors[r[3]][k])
                } else {
                    vectors[i][k]
                };
                match cfg.bounds {
                    Some((lo, hi)) => v.clamp(lo, hi),
                    None => v,
                }
            })
            .collect();
        trials.push(trial);
    }
    Ok(trials)
}

/// Walker bookkeeping. A walker moves only when a trial scores strictly
/// lower, so `best_energy` never increases.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkerState {
    pub params: LucjParameters,
    pub best_energy: f64,
    pub kappa: OrbitalRotation,
    pub carryover: CarryoverSet,
    pub occupancies: OccupancyVector,
    /// Best energy after each offered trial.
    pub history: Vec<f64>,
}

/// Everything one SQD evaluation of a parameter vector produced.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub params: LucjParameters,
    pub energy: f64,
    pub kappa: OrbitalRotation,
    pub carryover: CarryoverSet,
    pub occupancies: OccupancyVector,
}

impl WalkerState {
    pub fn new(params: LucjParameters, occupancies: OccupancyVector) -> Self {
        let n = params.n_orb;
        WalkerState {
            params,
            best_energy: f64::INFINITY,
            kappa: OrbitalRotation::identity(n),
            carryover: CarryoverSet::empty(n),
            occupancies,
            history: Vec::new(),
        }
    }

    /// Greedy selection; returns whether the trial replaced the walker.
    pub fn offer(&mut self, eval: Evaluation) -> bool {
        let accept = eval.energy < self.best_energy;
        if accept {
            self.params = eval.params;
            self.best_energy = eval.energy;
            self.kappa = eval.kappa;
            self.carryover = eval.carryover;
            self.occupancies = eval.occupancies;
        }
        self.history.push(self.best_energy);
        accept
    }
}

/// best/2/bin over a population of walkers, using each walker's best
/// energy for the choice of x_best. A single walker keeps its parameters.
pub fn de_step(population: &[WalkerState], cfg: &DEConfig, seed: u64) -> Result<Vec<LucjParameters>> {
    if population.len() == 1 {
        return Ok(vec![population[0].params.clone()]);
    }
    let vectors: Vec<Vec<f64>> = population.iter().map(|w| w.params.to_vector()).collect();
    let energies: Vec<f64> = population.iter().map(|w| w.best_energy).collect();
    let trials = de_trials(&vectors, &energies, cfg, seed)?;
    trials
        .into_iter()
        .zip(population)
        .map(|(t, w)| LucjParameters::from_vector(w.params.n_orb, w.params.n_layers(), &t))
        .collect()
}

/// FNV-1a over the IEEE bit patterns, as 16 hex digits.
pub fn parameter_hash(v: &[f64]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for x in v {
        for b in x.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeTraceRow {
    pub iteration: usize,
    pub population: usize,
    pub walker: usize,
    pub energy: f64,
    pub accepted: bool,
    pub param_hash: String,
}

pub fn write_de_trace<W: Write>(rows: &[DeTraceRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{DE_TRACE_SCHEMA}")?;
    writeln!(w, "iteration,population,walker,energy,accepted,param_hash")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{:.12},{},{}",
            r.iteration, r.population, r.walker, r.energy, r.accepted, r.param_hash
        )?;
    }
    Ok(())
}

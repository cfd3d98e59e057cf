use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::extrapolate::write_variance_points;
use super::pipeline::{classical_step, Problem};
use super::sampler::{launch, PendingSample, RetryPolicy, SampleRequest, Sampler, SimulatedSampler};
use super::state::{derive_seed, Checkpoint, PopulationState, Purpose, WalkerSlot, CHECKPOINT_VERSION};
use super::timeline::{emit_timeline, read_timeline, Phase, RunClock, TimelineSummary, TimingRecord};
use crate::chem::{parse_fcidump, SystemSpec};
use crate::lucj::{init_parameters, InitMode, LucjParameters};
use crate::optimizer::{write_de_trace, WalkerState};
use crate::recovery::OccupancyVector;
use crate::{Error, Result};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

/// Caps worker ranks; read from the environment by the runner and the CLI.
pub const THREADS_ENV: &str = "SQD_THREADS";

/// Positive value of `SQD_THREADS`, if set.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n: &usize| n > 0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub output: PathBuf,
    pub iterations: usize,
    pub best_energy: f64,
    pub population_best: Vec<f64>,
    pub best_trace: Vec<f64>,
    pub timeline: TimelineSummary,
    /// Run-clock reading at the end, resumed sessions included.
    pub elapsed_s: f64,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    io(path, std::fs::write(path, bytes))
}

fn initial_populations(cfg: &RunConfig, spec: &SystemSpec) -> Result<Vec<PopulationState>> {
    let base = cfg.init.params.as_ref().map(LucjParameters::read).transpose()?;
    if let Some(b) = &base {
        if b.n_orb != spec.n_orb {
            return Err(Error::Config(format!(
                "parameter file is for {} orbitals, system has {}",
                b.n_orb, spec.n_orb
            )));
        }
    }
    let occ = OccupancyVector::load_or_hf(cfg.occupancies.as_deref(), spec)?;
    (0..cfg.de.populations)
        .map(|p| {
            let walkers = (0..cfg.de.walkers)
                .map(|w| {
                    let seed = derive_seed(cfg.seed, &[0, p as u64, w as u64, Purpose::Init as u64]);
                    // population 0 walker 0 and every walker of later
                    // populations start from the file as is
                    let mode = match cfg.init.mode {
                        InitMode::File if p == 0 && w > 0 => InitMode::PerturbedFile,
                        m => m,
                    };
                    let params =
                        init_parameters(mode, base.as_ref(), spec.n_orb, cfg.init.layers, cfg.init.magnitude, seed)?;
                    Ok(WalkerSlot {
                        state: WalkerState::new(params, occ.clone()),
                        psi: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let pending = walkers.iter().map(|w| w.state.params.clone()).collect();
            Ok(PopulationState {
                walkers,
                pending,
                received: None,
            })
        })
        .collect()
}

fn check_shape(ckpt: &Checkpoint, cfg: &RunConfig, spec: &SystemSpec) -> Result<()> {
    if ckpt.spec != *spec {
        return Err(Error::Config(format!(
            "checkpoint system ({}, {}, {}) does not match ({}, {}, {})",
            ckpt.spec.n_orb, ckpt.spec.n_alpha, ckpt.spec.n_beta, spec.n_orb, spec.n_alpha, spec.n_beta
        )));
    }
    let shape_ok = ckpt.populations.len() == cfg.de.populations
        && ckpt.populations.iter().all(|p| p.walkers.len() == cfg.de.walkers);
    if !shape_ok {
        return Err(Error::Config(format!(
            "checkpoint holds {} populations of {:?} walkers, config asks for {} × {}",
            ckpt.populations.len(),
            ckpt.populations.iter().map(|p| p.walkers.len()).collect::<Vec<_>>(),
            cfg.de.populations,
            cfg.de.walkers
        )));
    }
    Ok(())
}

/// Points `cfg` at the final checkpoint of a previous run so the new
/// run's walkers start from its parameters, κ, carryover and occupancies.
pub fn warm_start(cfg: &RunConfig, prior: &Path) -> Result<RunConfig> {
    let path = if prior.is_dir() { prior.join(CHECKPOINT_FILE) } else { prior.to_path_buf() };
    let ckpt = Checkpoint::read(&path)?;
    let (_, spec) = parse_fcidump(&cfg.fcidump)?;
    check_shape(&ckpt, cfg, &spec)?;
    Ok(RunConfig {
        warm_start: Some(path),
        ..cfg.clone()
    })
}

struct Artifacts {
    dir: PathBuf,
}

impl Artifacts {
    fn create(dir: &Path) -> Result<Self> {
        for sub in ["", "checkpoints", "reports"] {
            let d = dir.join(sub);
            io(&d, std::fs::create_dir_all(&d))?;
        }
        Ok(Artifacts { dir: dir.to_path_buf() })
    }

    fn checkpoint(&self, ckpt: &Checkpoint, records: &[TimingRecord]) -> Result<TimelineSummary> {
        ckpt.write(&self.dir.join(CHECKPOINT_FILE))?;
        if ckpt.iteration > 0 {
            let snap = self.dir.join("checkpoints").join(format!("iter_{:04}.json", ckpt.iteration - 1));
            ckpt.write(&snap)?;
        }
        write_traces(ckpt, &self.dir)?;
        emit_timeline(records, &self.dir)
    }
}

/// The CSV files derived from a checkpoint: DE trace, best-energy trace,
/// per-walker best energies and variance points.
pub fn write_traces(ckpt: &Checkpoint, dir: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_de_trace(&ckpt.de_trace, &mut buf).expect("in-memory write");
    write_file(&dir.join("de_trace.csv"), &buf)?;

    let mut best = String::from("# schema: sqd-best-trace v1\niteration,best_energy\n");
    for (i, e) in ckpt.best_trace.iter().enumerate() {
        best.push_str(&format!("{i},{e:.12}\n"));
    }
    write_file(&dir.join("best_trace.csv"), best)?;

    let mut walkers = String::from("# schema: sqd-walker-trace v1\niteration,population,walker,best_energy\n");
    for (p, pop) in ckpt.populations.iter().enumerate() {
        for (w, slot) in pop.walkers.iter().enumerate() {
            for (i, e) in slot.state.history.iter().enumerate() {
                walkers.push_str(&format!("{i},{p},{w},{e:.12}\n"));
            }
        }
    }
    write_file(&dir.join("walker_trace.csv"), walkers)?;

    let mut buf = Vec::new();
    write_variance_points(&ckpt.variance_points, &mut buf).expect("in-memory write");
    write_file(&dir.join("variance_points.csv"), &buf)
}

/// Runs the loop with the simulated device described by `cfg`.
pub fn run_closed_loop(cfg: &RunConfig) -> Result<RunSummary> {
    run_closed_loop_with(cfg, None, None)
}

/// Continues the run stored in `dir` up to `cfg.max_iter` iterations.
pub fn resume_closed_loop(cfg: &RunConfig, dir: &Path) -> Result<RunSummary> {
    run_closed_loop_with(cfg, None, Some(dir))
}

/// Two-population schedule: every population's sampler is launched up
/// front; then, per iteration and population in turn, wait for its
/// batches, run its classical step and relaunch it for the next iteration
/// straight away, so one population's device time overlaps the other's
/// classical work.
pub fn run_closed_loop_with(cfg: &RunConfig, sampler: Option<Arc<dyn Sampler>>, resume: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let (ints, spec) = parse_fcidump(&cfg.fcidump)?;
    let spin_symmetric = cfg.spin_symmetric.unwrap_or(spec.n_alpha == spec.n_beta);
    let partition = match (cfg.partition, thread_cap()) {
        (Some(p), Some(cap)) if p.rank_count() > cap => {
            let c = p.capped(cap);
            log::info!("{THREADS_ENV}={cap} caps the partition at {} ranks", c.rank_count());
            Some(c)
        }
        (p, _) => p,
    };
    let problem = Problem {
        ints: Arc::new(ints),
        spec,
        spin_symmetric,
        partition,
    };
    let sampler: Arc<dyn Sampler> = match sampler {
        Some(s) => s,
        None => Arc::new(SimulatedSampler::new(
            spec,
            cfg.shots,
            cfg.noise,
            Duration::from_millis(cfg.sampler_latency_ms),
        )?),
    };
    let policy = RetryPolicy {
        retries: cfg.sampler_retries,
        backoff: Duration::from_millis(cfg.sampler_backoff_ms),
    };

    let out_dir = resume.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.clone());
    let art = Artifacts::create(&out_dir)?;
    let (mut ckpt, mut records) = match resume {
        Some(dir) => {
            let ckpt = Checkpoint::read(&dir.join(CHECKPOINT_FILE))?;
            check_shape(&ckpt, cfg, &spec)?;
            let tl = dir.join("timeline.json");
            let records = if tl.is_file() { read_timeline(&tl)? } else { Vec::new() };
            (ckpt, records)
        }
        None => {
            write_file(&out_dir.join("config.json"), cfg.to_json())?;
            let populations = match &cfg.warm_start {
                Some(path) => {
                    let prior = Checkpoint::read(path)?;
                    check_shape(&prior, cfg, &spec)?;
                    prior.populations
                }
                None => initial_populations(cfg, &spec)?,
            };
            let ckpt = Checkpoint {
                version: CHECKPOINT_VERSION,
                spec,
                iteration: 0,
                populations,
                de_trace: Vec::new(),
                best_trace: Vec::new(),
                variance_points: Vec::new(),
                clock_s: 0.0,
            };
            (ckpt, Vec::new())
        }
    };
    let clock = RunClock::start(ckpt.clock_s);
    let start = ckpt.iteration;
    let n_pop = ckpt.populations.len();
    if resume.is_none() {
        art.checkpoint(&ckpt, &records)?;
    }

    let throw = |ckpt: &Checkpoint, p: usize, itr: usize, records: &mut Vec<TimingRecord>| -> PendingSample {
        let t = clock.now();
        let params = ckpt.populations[p].pending.clone();
        let seeds = (0..params.len())
            .map(|w| derive_seed(cfg.seed, &[itr as u64, p as u64, w as u64, Purpose::Sample as u64]))
            .collect();
        let req = SampleRequest {
            iteration: itr,
            population: p,
            params,
            seeds,
        };
        let pending = launch(sampler.clone(), req, policy);
        records.push(clock.record(Phase::Throw, p, None, itr, t));
        pending
    };

    let mut inflight: Vec<Option<PendingSample>> = (0..n_pop)
        .map(|p| (start < cfg.max_iter).then(|| throw(&ckpt, p, start, &mut records)))
        .collect();

    for itr in start..cfg.max_iter {
        let mut outcomes = Vec::with_capacity(n_pop);
        for p in 0..n_pop {
            let outcome = inflight[p].take().expect("launched").wait();
            records.push(TimingRecord {
                phase: Phase::QuantumExecution,
                population: p,
                walker: None,
                iteration: itr,
                start_s: clock.from_monotonic(outcome.started_s),
                end_s: clock.from_monotonic(outcome.finished_s),
                wall_start_ms: super::timeline::wall_ms(),
            });
            let batches = match outcome.result {
                Ok(b) => b,
                Err(e) => {
                    log::error!("aborting at iteration {itr}: {e}; last checkpoint is resumable");
                    emit_timeline(&records, &out_dir)?;
                    return Err(e);
                }
            };
            let step = classical_step(
                &problem,
                cfg,
                &mut ckpt.populations[p],
                p,
                itr,
                batches,
                &clock,
                &mut records,
                &out_dir,
            );
            let step = match step {
                Ok(s) => s,
                Err(e) => {
                    log::error!("classical step failed at iteration {itr}, population {p}: {e}");
                    emit_timeline(&records, &out_dir)?;
                    return Err(e);
                }
            };
            if itr + 1 < cfg.max_iter {
                inflight[p] = Some(throw(&ckpt, p, itr + 1, &mut records));
            }
            let path = out_dir.join("reports").join(format!("iter_{itr:04}_p{p}.json"));
            write_file(&path, serde_json::to_string_pretty(&step.reports)?)?;
            outcomes.push(step);
        }

        if cfg.cooperative_start.is_some_and(|s| itr >= s) && n_pop > 1 {
            let best: Vec<_> = ckpt
                .populations
                .iter()
                .map(|pop| pop.walkers[pop.best_walker()].state.carryover.clone())
                .collect();
            for (p, pop) in ckpt.populations.iter_mut().enumerate() {
                pop.received = Some(best[(p + 1) % n_pop].clone());
            }
        }

        for step in outcomes {
            ckpt.de_trace.extend(step.trace);
            ckpt.variance_points.extend(step.variance);
        }
        ckpt.best_trace.push(ckpt.best_energy());
        ckpt.iteration = itr + 1;
        ckpt.clock_s = clock.now();
        log::info!("iteration {itr}: best energy {:.10}", ckpt.best_energy());
        art.checkpoint(&ckpt, &records)?;
    }

    ckpt.clock_s = clock.now();
    let timeline = art.checkpoint(&ckpt, &records)?;
    let summary = RunSummary {
        output: out_dir.clone(),
        iterations: ckpt.iteration,
        best_energy: ckpt.best_energy(),
        population_best: ckpt.populations.iter().map(|p| p.best_energy()).collect(),
        best_trace: ckpt.best_trace.clone(),
        timeline,
        elapsed_s: clock.now(),
    };
    let path = out_dir.join("summary.json");
    let mut f = io(&path, std::fs::File::create(&path))?;
    io(&path, f.write_all(serde_json::to_string_pretty(&summary)?.as_bytes()))?;
    Ok(summary)
}

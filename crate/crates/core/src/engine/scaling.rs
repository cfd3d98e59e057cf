use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::distributed::{assign_tasks, distributed_apply_with, EngineOptions};
use super::partition::{factorizations, plan_partition, PartitionPlan};
use crate::chem::{binomial, enumerate_halves, MolecularIntegrals, SystemSpec};
use crate::sci::{SubspaceBasis, SubspaceHamiltonian};
use crate::{Error, Result};

pub const SCALING_SCHEMA: &str = "# schema: sqd-scaling v1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRecord {
    pub rank_count: usize,
    pub b_alpha: usize,
    pub b_beta: usize,
    pub t: usize,
    pub m: usize,
    pub wall_ms_median: f64,
    pub speedup: f64,
    pub efficiency: f64,
    /// Largest per-replica task load of the assignment used.
    pub max_replica_load: u64,
    /// Set when the plan failed; timing fields are then NaN.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ScalingOptions {
    pub rank_counts: Vec<usize>,
    pub plans_per_count: usize,
    pub repetitions: usize,
    pub engine: EngineOptions,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        ScalingOptions {
            rank_counts: vec![1, 2, 4, 8],
            plans_per_count: 1,
            repetitions: 3,
            engine: EngineOptions::default(),
        }
    }
}

/// Seeded subspace of roughly `dim` determinants on synthetic integrals,
/// plus a normalized random ψ.
pub fn synthetic_problem(dim: usize, seed: u64) -> Result<(SubspaceHamiltonian, Vec<f64>)> {
    let dh = ((dim.max(1) as f64).sqrt().ceil() as usize).max(1);
    let mut n = 4;
    while binomial(n as u64, (n / 2) as u64)? < dh as u128 {
        n += 2;
        if n > 30 {
            return Err(Error::Capacity {
                what: "synthetic half dimension".into(),
                needed: dh as u128,
                cap: binomial(30, 15)?,
            });
        }
    }
    let ne = n / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| {
        let mut all = enumerate_halves(n, ne);
        all.shuffle(rng);
        all.truncate(dh);
        all.sort_unstable();
        all
    };
    let alpha = pick(&mut rng);
    let beta = pick(&mut rng);
    let spec = SystemSpec::new(n, ne, ne)?;
    let basis = Arc::new(SubspaceBasis::new(spec, alpha, beta)?);
    let ints = Arc::new(MolecularIntegrals::synthetic(n, seed));
    let ham = SubspaceHamiltonian::new(basis.clone(), ints)?;
    let mut psi: Vec<f64> = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = psi.iter().map(|x| x * x).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|x| *x /= norm);
    Ok((ham, psi))
}

/// Plans for `ranks`, with T closest to √B first.
pub fn candidate_plans(ranks: usize, d_alpha: usize, d_beta: usize, limit: usize) -> Result<Vec<PartitionPlan>> {
    let mut shapes = factorizations(ranks, d_alpha, d_beta);
    shapes.sort_by(|a, b| {
        let key = |&(ba, bb, t, _): &(usize, usize, usize, usize)| {
            ((t as f64).ln() - 0.5 * ((ba * bb) as f64).ln()).abs()
        };
        key(a).total_cmp(&key(b)).then(a.cmp(b))
    });
    shapes
        .into_iter()
        .take(limit.max(1))
        .map(|(ba, bb, t, m)| plan_partition(d_alpha, d_beta, ba, bb, t, m))
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of `repetitions` distributed applications per plan.
///
/// The first successful record is the baseline for speedup and efficiency.
pub fn scaling_benchmark(ham: &SubspaceHamiltonian, psi: &[f64], opts: &ScalingOptions) -> Result<Vec<ScalingRecord>> {
    let (da, db) = (ham.basis().dim_alpha(), ham.basis().dim_beta());
    let mut records = Vec::new();
    for &ranks in &opts.rank_counts {
        let plans = candidate_plans(ranks, da, db, opts.plans_per_count)?;
        if plans.is_empty() {
            log::warn!("no feasible plan with {ranks} ranks for ({da}, {db})");
        }
        for plan in plans {
            let mut rec = ScalingRecord {
                rank_count: ranks,
                b_alpha: plan.b_alpha,
                b_beta: plan.b_beta,
                t: plan.t,
                m: plan.m,
                wall_ms_median: f64::NAN,
                speedup: f64::NAN,
                efficiency: f64::NAN,
                max_replica_load: 0,
                error: None,
            };
            let run = || -> Result<(f64, u64)> {
                let assignment = assign_tasks(ham, plan.t, opts.engine.balance)?;
                let mut times = Vec::with_capacity(opts.repetitions.max(1));
                for _ in 0..opts.repetitions.max(1) {
                    let t0 = Instant::now();
                    distributed_apply_with(ham, psi, &plan, &assignment, &opts.engine)?;
                    times.push(t0.elapsed().as_secs_f64() * 1e3);
                }
                Ok((median(times), assignment.max_load()))
            };
            match run() {
                Ok((ms, load)) => {
                    rec.wall_ms_median = ms;
                    rec.max_replica_load = load;
                }
                Err(e) => {
                    log::warn!("plan {:?} failed: {e}", (plan.b_alpha, plan.b_beta, plan.t, plan.m));
                    rec.error = Some(e.to_string());
                }
            }
            records.push(rec);
        }
    }
    if let Some(base) = records.iter().find(|r| r.error.is_none()).cloned() {
        for r in records.iter_mut().filter(|r| r.error.is_none()) {
            r.speedup = base.wall_ms_median / r.wall_ms_median;
            r.efficiency = base.wall_ms_median * base.rank_count as f64 / (r.wall_ms_median * r.rank_count as f64);
        }
    }
    Ok(records)
}

/// Writes the schema line, the header and one row per record.
pub fn write_scaling_csv<W: Write>(records: &[ScalingRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SCALING_SCHEMA}")?;
    writeln!(w, "rank_count,b_alpha,b_beta,t,m,wall_ms_median,speedup,efficiency")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{:.6},{:.6},{:.6}",
            r.rank_count, r.b_alpha, r.b_beta, r.t, r.m, r.wall_ms_median, r.speedup, r.efficiency
        )?;
    }
    Ok(())
}

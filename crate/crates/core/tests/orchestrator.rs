mod common;

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sqd_core::lucj::SampleBatch;
use sqd_core::orchestrator::*;
use sqd_core::Error;

fn read_reports(dir: &Path, itr: usize, p: usize) -> Vec<WalkerReport> {
    let text = std::fs::read_to_string(dir.join(format!("reports/iter_{itr:04}_p{p}.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn timeline(dir: &Path) -> Vec<TimingRecord> {
    read_timeline(&dir.join("timeline.json")).unwrap()
}

fn checkpoint(dir: &Path) -> Checkpoint {
    Checkpoint::read(&dir.join(CHECKPOINT_FILE)).unwrap()
}

fn is_classical(r: &TimingRecord) -> bool {
    r.phase != Phase::QuantumExecution
}

#[test]
fn minimal_loop_leaves_a_complete_artifact_directory() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::loop_config("h4_chain_sto3g", dir.path(), 1);
    cfg.de.walkers = 1;
    let s = run_closed_loop(&cfg).unwrap();
    assert_eq!(s.iterations, 1);
    let samples: Vec<_> = std::fs::read_dir(dir.path().join("samples")).unwrap().collect();
    assert_eq!(samples.len(), 2);
    for p in 0..2 {
        let reps = read_reports(dir.path(), 0, p);
        assert_eq!(reps.len(), 1);
        assert_eq!(reps[0].rounds.len(), 1);
        assert!(reps[0].rounds[0].davidson.energy.is_finite());
        assert!(reps[0].accepted);
    }
    let recs = timeline(dir.path());
    let phases: BTreeSet<_> = recs.iter().map(|r| r.phase).collect();
    assert_eq!(phases.len(), Phase::ALL.len());
    assert!(recs.iter().all(|r| r.end_s >= r.start_s));
    for f in ["config.json", "checkpoint.json", "de_trace.csv", "timeline.csv", "variance_points.csv", "summary.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
    let trace = std::fs::read_to_string(dir.path().join("de_trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 2 + 2);
}

#[test]
fn schedule_follows_the_two_population_pattern() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::loop_config("h6_ring_sto3g", dir.path(), 4);
    run_closed_loop(&cfg).unwrap();
    let recs = timeline(dir.path());
    let classical_end = |i: usize, p: usize| {
        recs.iter()
            .filter(|r| is_classical(r) && r.phase != Phase::Throw && r.iteration == i && r.population == p)
            .map(|r| r.end_s)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    for i in 1..4 {
        for p in 0..2 {
            let q = recs
                .iter()
                .find(|r| r.phase == Phase::QuantumExecution && r.iteration == i && r.population == p)
                .unwrap();
            assert!(q.start_s >= classical_end(i - 1, p), "sampler ({i}, {p}) started early");
        }
    }
    // one control flow: no two classical phases overlap, whatever the population
    let classical: Vec<_> = recs.iter().filter(|r| is_classical(r)).collect();
    for (k, a) in classical.iter().enumerate() {
        for b in &classical[k + 1..] {
            assert!(!common::overlaps((a.start_s, a.end_s), (b.start_s, b.end_s)), "{a:?} overlaps {b:?}");
        }
    }
    // the device works for one population while the other is processed
    let p1_quantum = recs.iter().filter(|r| r.phase == Phase::QuantumExecution && r.population == 1);
    let overlap = p1_quantum.clone().any(|q| {
        classical
            .iter()
            .any(|c| c.population == 0 && common::overlaps((q.start_s, q.end_s), (c.start_s, c.end_s)))
    });
    assert!(overlap, "no p1 sampling overlaps p0 classical work");
}

#[test]
fn identical_seeds_give_identical_runs_and_resume_continues_them() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let cfg = |d: &Path, n| common::loop_config("h6_stretched_sto3g", d, n);
    run_closed_loop(&cfg(a.path(), 4)).unwrap();
    run_closed_loop(&cfg(b.path(), 4)).unwrap();
    run_closed_loop(&cfg(c.path(), 2)).unwrap();
    resume_closed_loop(&cfg(c.path(), 4), c.path()).unwrap();
    let (ca, cb, cc) = (checkpoint(a.path()), checkpoint(b.path()), checkpoint(c.path()));
    assert_eq!(ca.best_trace, cb.best_trace);
    assert_eq!(ca.de_trace, cb.de_trace);
    assert_eq!(ca.best_trace, cc.best_trace);
    assert_eq!(ca.de_trace, cc.de_trace);
    assert_eq!(cc.iteration, 4);
    let other = tempfile::tempdir().unwrap();
    let mut diff = cfg(other.path(), 4);
    diff.seed += 1;
    run_closed_loop(&diff).unwrap();
    assert_ne!(checkpoint(other.path()).de_trace, ca.de_trace);
}

#[test]
fn best_energies_never_increase() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::loop_config("h6_stretched_sto3g", dir.path(), 6);
    cfg.subsample = 30;
    cfg.init.magnitude = 0.3;
    let s = run_closed_loop(&cfg).unwrap();
    assert!(s.best_trace.windows(2).all(|w| w[1] <= w[0]));
    let ck = checkpoint(dir.path());
    for pop in &ck.populations {
        for slot in &pop.walkers {
            assert_eq!(slot.state.history.len(), 6);
            assert!(slot.state.history.windows(2).all(|w| w[1] <= w[0]));
        }
    }
    assert!(ck.variance_points.iter().all(|v| v.variance >= 0.0));
}

#[test]
fn cooperative_exchange_hands_over_the_other_best_carryover() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::loop_config("h6_stretched_sto3g", dir.path(), 4);
    cfg.subsample = 20;
    cfg.init.magnitude = 0.3;
    cfg.cooperative_start = Some(1);
    run_closed_loop(&cfg).unwrap();
    let snap = |i: usize| Checkpoint::read(&dir.path().join(format!("checkpoints/iter_{i:04}.json"))).unwrap();
    assert!(snap(0).populations.iter().all(|p| p.received.is_none()));
    for i in 1..4 {
        let ck = snap(i);
        for p in 0..2 {
            let other = &ck.populations[1 - p];
            let sent: BTreeSet<u64> = other.walkers[other.best_walker()].state.carryover.halves().map(|h| h.0).collect();
            let got: BTreeSet<u64> = ck.populations[p].received.as_ref().unwrap().halves().map(|h| h.0).collect();
            assert_eq!(got, sent);
            if i + 1 < 4 {
                // every walker's first subspace of the next iteration holds them
                for rep in read_reports(dir.path(), i + 1, p) {
                    let alpha: BTreeSet<u64> = rep.rounds[0].alpha.iter().copied().collect();
                    assert!(got.is_subset(&alpha));
                }
            }
        }
    }
}

#[test]
fn warm_start_restores_the_prior_state() {
    let prior = tempfile::tempdir().unwrap();
    let cfg = common::loop_config("h6_stretched_sto3g", prior.path(), 2);
    run_closed_loop(&cfg).unwrap();
    let before = checkpoint(prior.path());

    let idle = tempfile::tempdir().unwrap();
    let warm = warm_start(&common::loop_config("h6_stretched_sto3g", idle.path(), 0), prior.path()).unwrap();
    run_closed_loop(&warm).unwrap();
    let after = checkpoint(idle.path());
    assert_eq!(
        serde_json::to_value(&after.populations).unwrap(),
        serde_json::to_value(&before.populations).unwrap()
    );

    let bigger = tempfile::tempdir().unwrap();
    let mut next = common::loop_config("h6_stretched_sto3g", bigger.path(), 1);
    next.subsample = 400;
    run_closed_loop(&warm_start(&next, prior.path()).unwrap()).unwrap();
    for p in 0..2 {
        for (w, rep) in read_reports(bigger.path(), 0, p).iter().enumerate() {
            let alpha: BTreeSet<u64> = rep.rounds[0].alpha.iter().copied().collect();
            let carried = &before.populations[p].walkers[w].state.carryover;
            assert!(carried.halves().all(|h| alpha.contains(&h.0)));
        }
    }

    let wrong = common::loop_config("h4_chain_sto3g", bigger.path(), 1);
    let e = warm_start(&wrong, prior.path()).unwrap_err();
    assert!(matches!(e, Error::Config(_)), "{e}");
}

/// Fails every call from `fail_from` on, `limit` times at most.
struct Faulty {
    inner: SimulatedSampler,
    fail_from: usize,
    limit: usize,
    failures: AtomicUsize,
}

impl Sampler for Faulty {
    fn sample(&self, r: &SampleRequest, cancel: &AtomicBool) -> sqd_core::Result<Vec<SampleBatch>> {
        if r.iteration >= self.fail_from && self.failures.load(Ordering::SeqCst) < self.limit {
            self.failures.fetch_add(1, Ordering::SeqCst);
            return Err(Error::Sampler("queue rejected the job".into()));
        }
        self.inner.sample(r, cancel)
    }
}

fn faulty(cfg: &RunConfig, fail_from: usize, limit: usize) -> Arc<Faulty> {
    let (_, spec) = cfg.read_fcidump().unwrap();
    Arc::new(Faulty {
        inner: SimulatedSampler::new(spec, cfg.shots, cfg.noise, Duration::ZERO).unwrap(),
        fail_from,
        limit,
        failures: AtomicUsize::new(0),
    })
}

#[test]
fn sampler_failures_are_retried_or_leave_a_resumable_checkpoint() {
    let clean = tempfile::tempdir().unwrap();
    let mut cfg = common::loop_config("h6_ring_sto3g", clean.path(), 3);
    cfg.sampler_latency_ms = 0;
    cfg.sampler_backoff_ms = 1;
    run_closed_loop(&cfg).unwrap();
    let reference = checkpoint(clean.path());

    let flaky = tempfile::tempdir().unwrap();
    let cfg_f = RunConfig {
        output: flaky.path().to_path_buf(),
        ..cfg.clone()
    };
    let s = faulty(&cfg_f, 1, 2);
    run_closed_loop_with(&cfg_f, Some(s.clone()), None).unwrap();
    assert_eq!(s.failures.load(Ordering::SeqCst), 2);
    assert_eq!(checkpoint(flaky.path()).de_trace, reference.de_trace);

    let broken = tempfile::tempdir().unwrap();
    let cfg_b = RunConfig {
        output: broken.path().to_path_buf(),
        ..cfg.clone()
    };
    let e = run_closed_loop_with(&cfg_b, Some(faulty(&cfg_b, 2, usize::MAX)), None).unwrap_err();
    assert!(matches!(e, Error::Sampler(_)), "{e}");
    assert_eq!(checkpoint(broken.path()).iteration, 2);
    resume_closed_loop(&cfg_b, broken.path()).unwrap();
    assert_eq!(checkpoint(broken.path()).de_trace, reference.de_trace);
}

#[test]
fn report_regenerates_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = common::loop_config("h6_stretched_sto3g", dir.path(), 3);
    let s = run_closed_loop(&cfg).unwrap();
    std::fs::remove_file(dir.path().join("timeline.csv")).unwrap();
    let r = report_run(dir.path()).unwrap();
    assert_eq!(r.best_energy, s.best_energy);
    assert_eq!(r.iterations, 3);
    for f in &r.files {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert!(dir.path().join("report.json").is_file());
}

#[test]
fn config_file_paths_resolve_against_its_directory() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::copy(common::data_path("h4_chain_sto3g.fcidump"), dir.path().join("h4.fcidump")).unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"fcidump": "h4.fcidump", "output": "out", "max_iter": 2, "de": {"walkers": 2}}"#).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.fcidump, dir.path().join("h4.fcidump"));
    assert_eq!(cfg.output, dir.path().join("out"));
    std::fs::write(&path, r#"{"fcidump": "missing.fcidump"}"#).unwrap();
    assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    std::fs::write(&path, r#"{"fcidump": "h4.fcidump", "carryover_ratio": 2}"#).unwrap();
    assert!(RunConfig::load(&path).is_err());
}

/// Intercept and its standard error from the normal equations, as an
/// independent check on the closed-form fit.
fn normal_equation_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len();
    let a = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let yv = DVector::from_column_slice(y);
    let ata_inv = (a.transpose() * &a).try_inverse().unwrap();
    let beta = &ata_inv * a.transpose() * &yv;
    let resid = &yv - &a * &beta;
    let s2 = resid.norm_squared() / (n as f64 - 2.0);
    (beta[0], (s2 * ata_inv[(0, 0)]).sqrt())
}

#[test]
fn extrapolation_matches_normal_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let n = rng.gen_range(3..15);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
        let y: Vec<f64> = x.iter().map(|v| -3.0 + 0.8 * v + rng.gen_range(-0.01..0.01)).collect();
        let pts: Vec<_> = x.iter().zip(&y).map(|(&v, &e)| VariancePoint::new(e, v, 0, 0, 0).unwrap()).collect();
        let fit = extrapolate_zero_variance(&pts).unwrap();
        let (e0, se) = normal_equation_fit(&x, &y);
        assert!((fit.e0 - e0).abs() < 1e-10);
        assert!((fit.sigma - se).abs() < 1e-10 * se.max(1.0));
    }
}

#[test]
fn extrapolation_interval_covers_the_truth() {
    // synthetic variance ladders around a known zero-variance energy
    let truth = -3.25;
    let noise = Normal::new(0.0, 2e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut covered = 0;
    for _ in 0..100 {
        let pts: Vec<_> = (0..30)
            .map(|_| {
                let v = rng.gen_range(0.05..0.6);
                VariancePoint::new(truth + 0.45 * v + noise.sample(&mut rng), v, 0, 0, 0).unwrap()
            })
            .collect();
        let fit = extrapolate_zero_variance(&pts).unwrap();
        if (fit.e0 - truth).abs() <= 2.0 * fit.sigma {
            covered += 1;
        }
    }
    assert!(covered >= 90, "coverage {covered}/100");
}

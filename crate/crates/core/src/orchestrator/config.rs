use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::chem::{parse_fcidump, MolecularIntegrals, SystemSpec};
use crate::engine::{plan_partition, PartitionPlan};
use crate::lucj::{InitMode, DEFAULT_PERTURBATION};
use crate::optimizer::{DEConfig, LbfgsOptions};
use crate::sci::DavidsonOptions;
use crate::{Error, Result};

/// How the first generation of walker parameters is produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub mode: InitMode,
    /// LUCJ parameter file, required by `file` and `perturbed-file`.
    pub params: Option<PathBuf>,
    pub magnitude: f64,
    /// LUCJ layers when no parameter file fixes them.
    pub layers: usize,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            mode: InitMode::Random,
            params: None,
            magnitude: DEFAULT_PERTURBATION,
            layers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DavidsonConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Per-solve wall-clock budget; absent means unlimited.
    pub wall_clock_ms: Option<u64>,
}

impl Default for DavidsonConfig {
    fn default() -> Self {
        let d = DavidsonOptions::default();
        DavidsonConfig {
            tol: d.tol,
            max_iter: d.max_iter,
            wall_clock_ms: None,
        }
    }
}

impl DavidsonConfig {
    pub fn options(&self) -> DavidsonOptions {
        DavidsonOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            wall_clock: self.wall_clock_ms.map(Duration::from_millis),
            max_subspace: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrbitalConfig {
    pub enabled: bool,
    /// ψ ↔ κ alternations per evaluation.
    pub rounds: usize,
    pub max_iter: usize,
    pub tol_grad: f64,
    /// Start every evaluation from κ = 0 instead of the walker's κ.
    pub reset_kappa: bool,
}

impl Default for OrbitalConfig {
    fn default() -> Self {
        let l = LbfgsOptions::default();
        OrbitalConfig {
            enabled: true,
            rounds: 1,
            max_iter: l.max_iter,
            tol_grad: l.tol_grad,
            reset_kappa: false,
        }
    }
}

impl OrbitalConfig {
    pub fn lbfgs(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iter: self.max_iter,
            tol_grad: self.tol_grad,
            ..Default::default()
        }
    }
}

/// (B_α, B_β, T, M) factors for the distributed Hamiltonian application.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub b_alpha: usize,
    pub b_beta: usize,
    pub t: usize,
    pub m: usize,
    #[serde(default = "yes")]
    pub balance: bool,
}

fn yes() -> bool {
    true
}

impl PartitionConfig {
    pub fn rank_count(&self) -> usize {
        self.b_alpha * self.b_beta * self.t * self.m
    }

    /// Plan for a concrete subspace. Basis factors larger than the half
    /// dimensions are clamped so small early subspaces still run.
    pub fn plan(&self, d_alpha: usize, d_beta: usize) -> Result<PartitionPlan> {
        plan_partition(
            d_alpha,
            d_beta,
            self.b_alpha.min(d_alpha.max(1)),
            self.b_beta.min(d_beta.max(1)),
            self.t,
            self.m,
        )
    }

    /// Shrinks M, then T, then the basis factors until at most `cap` ranks
    /// remain.
    pub fn capped(self, cap: usize) -> Self {
        let cap = cap.max(1);
        let mut f = [self.m, self.t, self.b_beta, self.b_alpha];
        for i in 0..4 {
            while f.iter().product::<usize>() > cap && f[i] > 1 {
                f[i] -= 1;
            }
        }
        PartitionConfig {
            m: f[0],
            t: f[1],
            b_beta: f[2],
            b_alpha: f[3],
            balance: self.balance,
        }
    }
}

/// Every knob of one closed-loop run. Relative paths resolve against the
/// directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub fcidump: PathBuf,
    pub shots: u64,
    /// Independent bit-flip probability of the simulated device.
    pub noise: f64,
    pub init: InitConfig,
    /// Configurations drawn from the recovered batch (D).
    pub subsample: usize,
    /// Recovery → projection → diagonalization rounds per evaluation (R).
    pub recovery_rounds: usize,
    pub carryover_ratio: f64,
    pub de: DEConfig,
    pub max_iter: usize,
    pub partition: Option<PartitionConfig>,
    /// First iteration whose end exchanges carryover between populations.
    pub cooperative_start: Option<usize>,
    pub davidson: DavidsonConfig,
    pub orbital: OrbitalConfig,
    pub seed: u64,
    pub output: PathBuf,
    /// Starting occupancies; Hartree–Fock when absent.
    pub occupancies: Option<PathBuf>,
    /// Shared α/β half list; defaults to on when N_α = N_β.
    pub spin_symmetric: Option<bool>,
    /// Emulated fixed device time per sampler call.
    pub sampler_latency_ms: u64,
    pub sampler_retries: usize,
    pub sampler_backoff_ms: u64,
    /// Record ΔE for every population's best state each iteration.
    pub variance: bool,
    /// Checkpoint whose walkers seed this run (set by warm start).
    pub warm_start: Option<PathBuf>,
    pub write_samples: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fcidump: PathBuf::new(),
            shots: 10_000,
            noise: 0.01,
            init: InitConfig::default(),
            subsample: 100,
            recovery_rounds: 1,
            carryover_ratio: 0.5,
            de: DEConfig::default(),
            max_iter: 10,
            partition: None,
            cooperative_start: None,
            davidson: DavidsonConfig::default(),
            orbital: OrbitalConfig::default(),
            seed: 0,
            output: PathBuf::from("sqd-run"),
            occupancies: None,
            spin_symmetric: None,
            sampler_latency_ms: 0,
            sampler_retries: 2,
            sampler_backoff_ms: 50,
            variance: true,
            warm_start: None,
            write_samples: true,
        }
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() && !p.as_os_str().is_empty() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Parses, resolves relative paths and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        resolve(base, &mut cfg.fcidump);
        resolve(base, &mut cfg.output);
        for p in [&mut cfg.init.params, &mut cfg.occupancies, &mut cfg.warm_start]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.shots == 0 {
            return bad("shots must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad(format!("noise {} outside [0, 1]", self.noise));
        }
        if self.subsample == 0 {
            return bad("subsample count D must be positive".into());
        }
        if self.recovery_rounds == 0 {
            return bad("recovery_rounds must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.carryover_ratio) {
            return bad(format!("carryover ratio {} outside [0, 1]", self.carryover_ratio));
        }
        if !(self.init.magnitude >= 0.0 && self.init.magnitude.is_finite()) {
            return bad(format!("init magnitude {} must be ≥ 0", self.init.magnitude));
        }
        if self.init.mode != InitMode::Random && self.init.params.is_none() {
            return bad(format!("init mode {:?} needs a parameter file", self.init.mode));
        }
        if !(self.davidson.tol > 0.0) || self.davidson.max_iter == 0 {
            return bad("davidson needs tol > 0 and max_iter ≥ 1".into());
        }
        if self.orbital.enabled && self.orbital.rounds == 0 {
            return bad("orbital rounds must be ≥ 1 when enabled".into());
        }
        if let Some(p) = &self.partition {
            if p.rank_count() == 0 {
                return bad("partition factors must be positive".into());
            }
        }
        self.de.validate()?;
        let mut files = vec![("fcidump", &self.fcidump)];
        files.extend(self.init.params.iter().map(|p| ("init.params", p)));
        files.extend(self.occupancies.iter().map(|p| ("occupancies", p)));
        files.extend(self.warm_start.iter().map(|p| ("warm_start", p)));
        for (what, p) in files {
            if !p.is_file() {
                return bad(format!("{what} file {} does not exist", p.display()));
            }
        }
        Ok(())
    }

    pub fn read_fcidump(&self) -> Result<(MolecularIntegrals, SystemSpec)> {
        parse_fcidump(&self.fcidump)
    }
}

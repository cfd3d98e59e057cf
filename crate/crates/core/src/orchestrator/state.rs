use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::extrapolate::VariancePoint;
use crate::chem::{HalfConfiguration, SystemSpec};
use crate::lucj::LucjParameters;
use crate::optimizer::{DeTraceRow, WalkerState};
use crate::recovery::CarryoverSet;
use crate::sci::{CIVector, SubspaceBasis};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Derives an independent stream seed from the run seed and a path of
/// coordinates (iteration, population, walker, purpose, ...).
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    let mut z = seed;
    for &k in path {
        z = splitmix(z ^ splitmix(k.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    z
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed purposes, the last coordinate of a [`derive_seed`] path.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Purpose {
    Sample = 1,
    Recovery = 2,
    Subsample = 3,
    Evolution = 4,
    Init = 5,
}

/// A CI vector with its half lists, for checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredVector {
    pub spec: SystemSpec,
    pub alpha: Vec<u64>,
    pub beta: Vec<u64>,
    pub amplitudes: Vec<f64>,
}

impl StoredVector {
    pub fn from_vector(psi: &CIVector) -> Self {
        let b = psi.basis();
        StoredVector {
            spec: *b.spec(),
            alpha: b.alpha().iter().map(|h| h.0).collect(),
            beta: b.beta().iter().map(|h| h.0).collect(),
            amplitudes: psi.amplitudes().to_vec(),
        }
    }

    pub fn to_vector(&self) -> Result<CIVector> {
        let halves = |v: &[u64]| v.iter().map(|&x| HalfConfiguration(x)).collect();
        let basis = SubspaceBasis::new(self.spec, halves(&self.alpha), halves(&self.beta))?;
        CIVector::new(Arc::new(basis), self.amplitudes.clone())
    }
}

/// A walker plus the state vector of its accepted evaluation, used to
/// seed the next Davidson solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WalkerSlot {
    pub state: WalkerState,
    pub psi: Option<StoredVector>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PopulationState {
    pub walkers: Vec<WalkerSlot>,
    /// Parameters for the next sampler call.
    pub pending: Vec<LucjParameters>,
    /// Carryover received from the other population at the last exchange.
    pub received: Option<CarryoverSet>,
}

impl PopulationState {
    /// Lowest best energy, ties to the lower index.
    pub fn best_walker(&self) -> usize {
        (0..self.walkers.len())
            .min_by(|&a, &b| {
                self.walkers[a]
                    .state
                    .best_energy
                    .total_cmp(&self.walkers[b].state.best_energy)
                    .then(a.cmp(&b))
            })
            .unwrap_or(0)
    }

    pub fn best_energy(&self) -> f64 {
        self.walkers
            .iter()
            .map(|w| w.state.best_energy)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Everything needed to continue a run after the iteration it records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub spec: SystemSpec,
    /// Iterations completed; the next one to run.
    pub iteration: usize,
    pub populations: Vec<PopulationState>,
    pub de_trace: Vec<DeTraceRow>,
    /// Best energy over all walkers after each completed iteration.
    pub best_trace: Vec<f64>,
    pub variance_points: Vec<VariancePoint>,
    /// Run-clock reading when the checkpoint was taken.
    pub clock_s: f64,
}

impl Checkpoint {
    pub fn best_energy(&self) -> f64 {
        self.populations
            .iter()
            .map(|p| p.best_energy())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_string(self)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let c: Checkpoint = serde_json::from_str(&text)?;
        if c.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                c.version
            )));
        }
        Ok(c)
    }
}

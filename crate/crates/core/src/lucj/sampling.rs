use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicBool, Ordering};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::state::LucjState;
use crate::chem::Configuration;
use crate::linalg::monotonic_seconds;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Ideal,
    Noisy,
    Recovered,
}

/// Shot counts per measured bitstring. Noisy bitstrings may have any
/// popcount.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    pub n_orb: usize,
    pub shots: u64,
    pub counts: BTreeMap<Configuration, u64>,
    pub provenance: Provenance,
    /// Monotonic seconds at which sampling started and finished.
    pub started_s: f64,
    pub finished_s: f64,
}

/// Independent per-bit flips at `bitflip_rate`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub bitflip_rate: f64,
}

impl NoiseModel {
    pub fn new(bitflip_rate: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&bitflip_rate) {
            return Err(Error::Config(format!("bit-flip rate {bitflip_rate} outside [0, 1]")));
        }
        Ok(NoiseModel { bitflip_rate })
    }
}

impl SampleBatch {
    pub fn unique(&self) -> usize {
        self.counts.len()
    }

    /// Every shot as its own configuration, in key order.
    pub fn expanded(&self) -> Vec<Configuration> {
        self.counts
            .iter()
            .flat_map(|(c, &k)| std::iter::repeat_n(*c, k as usize))
            .collect()
    }

    /// `<bits> <count>` per unique bitstring, α half then β half,
    /// orbital 0 leftmost.
    pub fn write_text<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (c, k) in &self.counts {
            writeln!(w, "{} {k}", c.to_bitstring(self.n_orb))?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn read_text<R: BufRead>(r: R, n_orb: usize, provenance: Provenance) -> Result<Self> {
        let mut counts = BTreeMap::new();
        let mut shots = 0;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::io("sample batch", e))?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let (Some(bits), Some(count), None) = (it.next(), it.next(), it.next()) else {
                return Err(Error::parse(i + 1, "expected `<bits> <count>`"));
            };
            let c = Configuration::from_bitstring(bits, n_orb).map_err(|e| Error::parse(i + 1, e.to_string()))?;
            let k: u64 = count.parse().map_err(|_| Error::parse(i + 1, format!("bad count `{count}`")))?;
            *counts.entry(c).or_insert(0) += k;
            shots += k;
        }
        Ok(SampleBatch {
            n_orb,
            shots,
            counts,
            provenance,
            started_s: 0.0,
            finished_s: 0.0,
        })
    }
}

const CANCEL_STRIDE: u64 = 4096;

/// Multinomial draw of `shots` bitstrings from |amplitude|².
pub fn sample_counts(state: &LucjState, shots: u64, seed: u64) -> Result<SampleBatch> {
    sample_counts_cancellable(state, shots, seed, &AtomicBool::new(false))
}

/// As [`sample_counts`], giving up with [`Error::Cancelled`] once `cancel`
/// is set.
pub fn sample_counts_cancellable(
    state: &LucjState,
    shots: u64,
    seed: u64,
    cancel: &AtomicBool,
) -> Result<SampleBatch> {
    let started_s = monotonic_seconds();
    let probs = state.probabilities();
    let total: f64 = probs.iter().sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::ZeroVector("cannot sample a null state".into()));
    }
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::Sampler(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits: BTreeMap<usize, u64> = BTreeMap::new();
    for s in 0..shots {
        if s % CANCEL_STRIDE == 0 && cancel.load(Ordering::Relaxed) {
            return Err(Error::Cancelled);
        }
        *hits.entry(dist.sample(&mut rng)).or_insert(0) += 1;
    }
    let counts = hits.into_iter().map(|(k, n)| (state.configuration(k), n)).collect();
    Ok(SampleBatch {
        n_orb: state.spec().n_orb,
        shots,
        counts,
        provenance: Provenance::Ideal,
        started_s,
        finished_s: monotonic_seconds(),
    })
}

/// Flips every bit of every shot independently with the model's rate.
pub fn apply_noise(batch: &SampleBatch, noise: NoiseModel, seed: u64) -> SampleBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = batch.n_orb;
    let mut counts = BTreeMap::new();
    let eps = noise.bitflip_rate;
    for (c, &k) in &batch.counts {
        for _ in 0..k {
            let (mut a, mut b) = (c.alpha.0, c.beta.0);
            if eps > 0.0 {
                for p in 0..n {
                    if rng.gen_bool(eps) {
                        a ^= 1 << p;
                    }
                    if rng.gen_bool(eps) {
                        b ^= 1 << p;
                    }
                }
            }
            *counts.entry(Configuration::new(a, b)).or_insert(0) += 1;
        }
    }
    SampleBatch {
        n_orb: n,
        shots: batch.shots,
        counts,
        provenance: Provenance::Noisy,
        started_s: batch.started_s,
        finished_s: batch.finished_s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::SystemSpec;
    use crate::lucj::{lucj_state, LucjParameters, DEFAULT_STATE_CAP};

    fn point_mass() -> LucjState {
        let spec = SystemSpec::new(4, 2, 2).unwrap();
        lucj_state(&LucjParameters::zeros(4, 1), spec, Configuration::new(0b0011, 0b0011), DEFAULT_STATE_CAP)
            .unwrap()
    }

    #[test]
    fn point_mass_sampling() {
        let b = sample_counts(&point_mass(), 100, 3).unwrap();
        assert_eq!(b.unique(), 1);
        assert_eq!(b.counts[&Configuration::new(0b0011, 0b0011)], 100);
        assert_eq!(b.provenance, Provenance::Ideal);
    }

    #[test]
    fn noise_extremes() {
        let b = sample_counts(&point_mass(), 50, 3).unwrap();
        assert_eq!(apply_noise(&b, NoiseModel::new(0.0).unwrap(), 1).counts, b.counts);
        let all = apply_noise(&b, NoiseModel::new(1.0).unwrap(), 1);
        assert_eq!(all.counts[&Configuration::new(0b1100, 0b1100)], 50);
        assert_eq!(all.provenance, Provenance::Noisy);
        assert!(NoiseModel::new(1.5).is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut b = sample_counts(&point_mass(), 10, 3).unwrap();
        b = apply_noise(&b, NoiseModel::new(0.3).unwrap(), 4);
        let text = b.to_text();
        let back = SampleBatch::read_text(text.as_bytes(), 4, Provenance::Noisy).unwrap();
        assert_eq!(back.counts, b.counts);
        assert_eq!(back.shots, 10);
        assert!(text.lines().all(|l| l.split(' ').next().unwrap().len() == 8));
        assert!(SampleBatch::read_text("0101 x\n".as_bytes(), 2, Provenance::Noisy).is_err());
    }

    #[test]
    fn cancellation() {
        let flag = AtomicBool::new(true);
        assert!(matches!(
            sample_counts_cancellable(&point_mass(), 10, 1, &flag),
            Err(Error::Cancelled)
        ));
    }
}

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::occupancy::OccupancyVector;
use crate::chem::{Configuration, HalfConfiguration, SystemSpec};
use crate::lucj::{Provenance, SampleBatch};
use crate::{Error, Result};

/// Floor added to every flip weight so no orbital is ever unreachable.
pub const DEFAULT_ETA: f64 = 1e-6;

fn pick<R: Rng>(candidates: &[usize], weight: impl Fn(usize) -> f64, rng: &mut R) -> usize {
    let w: Vec<f64> = candidates.iter().map(|&p| weight(p)).collect();
    let dist = WeightedIndex::new(&w).expect("weights are at least eta");
    candidates[dist.sample(rng)]
}

/// Flips one bit at a time until the half holds `n_e` electrons. Surplus
/// electrons leave orbital p with weight (1 − n_p) + η, holes are filled
/// at p with weight n_p + η.
fn repair_half<R: Rng>(h: HalfConfiguration, n_e: usize, n_orb: usize, occ: &[f64], eta: f64, rng: &mut R) -> HalfConfiguration {
    let mut bits = h.0;
    loop {
        let count = bits.count_ones() as usize;
        if count == n_e {
            return HalfConfiguration(bits);
        }
        if count > n_e {
            let occupied: Vec<usize> = (0..n_orb).filter(|&p| bits >> p & 1 == 1).collect();
            let p = pick(&occupied, |p| 1.0 - occ[p] + eta, rng);
            bits &= !(1u64 << p);
        } else {
            let empty: Vec<usize> = (0..n_orb).filter(|&p| bits >> p & 1 == 0).collect();
            let p = pick(&empty, |p| occ[p] + eta, rng);
            bits |= 1u64 << p;
        }
    }
}

pub fn recover_configurations(noisy: &SampleBatch, occ: &OccupancyVector, spec: &SystemSpec, seed: u64) -> Result<SampleBatch> {
    recover_configurations_with(noisy, occ, spec, seed, DEFAULT_ETA)
}

/// Repairs every shot independently. Shots that already carry the right
/// electron counts are passed through untouched.
pub fn recover_configurations_with(
    noisy: &SampleBatch,
    occ: &OccupancyVector,
    spec: &SystemSpec,
    seed: u64,
    eta: f64,
) -> Result<SampleBatch> {
    if occ.n_orb() != spec.n_orb || noisy.n_orb != spec.n_orb {
        return Err(Error::Contract(format!(
            "occupancies for {} orbitals and samples for {} against a {}-orbital system",
            occ.n_orb(),
            noisy.n_orb,
            spec.n_orb
        )));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Contract(format!("flip weight floor {eta} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts: BTreeMap<Configuration, u64> = BTreeMap::new();
    let n = spec.n_orb;
    for (&c, &k) in &noisy.counts {
        if c.matches(spec) {
            *counts.entry(c).or_insert(0) += k;
            continue;
        }
        for _ in 0..k {
            let fixed = Configuration {
                alpha: repair_half(c.alpha, spec.n_alpha, n, &occ.alpha, eta, &mut rng),
                beta: repair_half(c.beta, spec.n_beta, n, &occ.beta, eta, &mut rng),
            };
            *counts.entry(fixed).or_insert(0) += 1;
        }
    }
    Ok(SampleBatch {
        n_orb: n,
        shots: noisy.shots,
        counts,
        provenance: Provenance::Recovered,
        started_s: noisy.started_s,
        finished_s: noisy.finished_s,
    })
}

/// `d` draws with replacement, proportional to shot counts.
pub fn subsample(batch: &SampleBatch, d: usize, seed: u64) -> Result<Vec<Configuration>> {
    if d == 0 {
        return Err(Error::Contract("subsample size must be positive".into()));
    }
    if batch.counts.is_empty() {
        return Err(Error::Contract("cannot subsample an empty batch".into()));
    }
    let (keys, weights): (Vec<Configuration>, Vec<u64>) = batch.counts.iter().map(|(c, k)| (*c, *k)).unzip();
    let dist = WeightedIndex::new(&weights).map_err(|e| Error::Sampler(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..d).map(|_| keys[dist.sample(&mut rng)]).collect())
}

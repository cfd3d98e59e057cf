mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqd_core::chem::{enumerate_halves, hf_configuration, Configuration, HalfConfiguration, SystemSpec};
use sqd_core::lucj::{Provenance, SampleBatch};
use sqd_core::recovery::*;
use sqd_core::sci::{diagonal_element, solve, CIVector, DavidsonOptions, SubspaceBasis, SubspaceHamiltonian};

fn batch(entries: &[(Configuration, u64)], n_orb: usize) -> SampleBatch {
    let mut counts = BTreeMap::new();
    for &(c, k) in entries {
        *counts.entry(c).or_insert(0) += k;
    }
    SampleBatch {
        n_orb,
        shots: entries.iter().map(|e| e.1).sum(),
        counts,
        provenance: Provenance::Noisy,
        started_s: 0.0,
        finished_s: 0.0,
    }
}

/// Exact distribution of the repaired half by enumerating every flip
/// sequence with its probability.
fn repair_distribution(bits: u64, n_e: usize, n_orb: usize, occ: &[f64], eta: f64) -> BTreeMap<u64, f64> {
    let mut out = BTreeMap::new();
    fn walk(bits: u64, n_e: usize, n_orb: usize, occ: &[f64], eta: f64, p: f64, out: &mut BTreeMap<u64, f64>) {
        let count = bits.count_ones() as usize;
        if count == n_e {
            *out.entry(bits).or_insert(0.0) += p;
            return;
        }
        let surplus = count > n_e;
        let moves: Vec<(usize, f64)> = (0..n_orb)
            .filter(|&q| (bits >> q & 1 == 1) == surplus)
            .map(|q| (q, if surplus { 1.0 - occ[q] + eta } else { occ[q] + eta }))
            .collect();
        let total: f64 = moves.iter().map(|m| m.1).sum();
        for (q, w) in moves {
            walk(bits ^ (1 << q), n_e, n_orb, occ, eta, p * w / total, out);
        }
    }
    walk(bits, n_e, n_orb, occ, eta, 1.0, &mut out);
    out
}

fn within_5_sigma(hits: u64, shots: u64, p: f64) -> bool {
    let sigma = (p * (1.0 - p) / shots as f64).sqrt();
    (hits as f64 / shots as f64 - p).abs() <= 5.0 * sigma + 1e-12
}

#[test]
fn single_surplus_follows_the_flip_law() {
    let spec = SystemSpec::new(6, 3, 3).unwrap();
    let hf = hf_configuration(&spec);
    let noisy = Configuration {
        alpha: HalfConfiguration(hf.alpha.0 | 1 << 4),
        beta: hf.beta,
    };
    let occ = OccupancyVector::hartree_fock(&spec);
    let shots = 100_000;
    let eta = 0.2;
    let r = recover_configurations_with(&batch(&[(noisy, shots)], 6), &occ, &spec, 11, eta).unwrap();
    // three occupied orbitals at weight η against the spurious one at 1 + η
    let p = (1.0 + eta) / (1.0 + 4.0 * eta);
    assert!(within_5_sigma(r.counts[&hf], shots, p));
    // as η → 0 the spurious electron is always the one removed
    let r = recover_configurations(&batch(&[(noisy, shots)], 6), &occ, &spec, 11).unwrap();
    assert!(r.counts[&hf] as f64 >= shots as f64 * (1.0 - 1e-4));
}

#[test]
fn multi_flip_repairs_match_enumeration() {
    let spec = SystemSpec::new(6, 3, 2).unwrap();
    let occ = OccupancyVector::new(vec![0.95, 0.8, 0.6, 0.35, 0.2, 0.1], vec![0.9, 0.7, 0.2, 0.1, 0.05, 0.05]).unwrap();
    // α has two surplus electrons, β is one short
    let noisy = Configuration::new(0b110111, 0b000100);
    let shots = 200_000;
    let eta = 0.05;
    let r = recover_configurations_with(&batch(&[(noisy, shots)], 6), &occ, &spec, 3, eta).unwrap();
    let pa = repair_distribution(noisy.alpha.0, 3, 6, &occ.alpha, eta);
    let pb = repair_distribution(noisy.beta.0, 2, 6, &occ.beta, eta);
    let mut seen = 0;
    for (a, wa) in &pa {
        for (b, wb) in &pb {
            let hits = r.counts.get(&Configuration::new(*a, *b)).copied().unwrap_or(0);
            seen += hits;
            assert!(within_5_sigma(hits, shots, wa * wb), "{a:b} {b:b}: {hits}");
        }
    }
    assert_eq!(seen, shots);
}

#[test]
fn recovery_is_idempotent() {
    let spec = SystemSpec::new(5, 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let entries: Vec<(Configuration, u64)> =
        (0..200).map(|_| (Configuration::new(rng.gen_range(0..32), rng.gen_range(0..32)), rng.gen_range(1..20))).collect();
    let occ = OccupancyVector::new(vec![0.9, 0.7, 0.3, 0.1, 0.0], vec![0.8, 0.8, 0.2, 0.2, 0.0]).unwrap();
    let once = recover_configurations(&batch(&entries, 5), &occ, &spec, 1).unwrap();
    let twice = recover_configurations(&once, &occ, &spec, 99).unwrap();
    assert_eq!(once.counts, twice.counts);
    assert_eq!(once.shots, twice.shots);
}

#[test]
fn subsampling_is_multinomial() {
    let configs: Vec<Configuration> = [(0b01, 0b01), (0b01, 0b10), (0b10, 0b01), (0b10, 0b10)]
        .iter()
        .map(|&(a, b)| Configuration::new(a, b))
        .collect();
    let b = batch(&configs.iter().map(|&c| (c, 5)).collect::<Vec<_>>(), 2);
    let d = 100_000;
    let s = subsample(&b, d, 21).unwrap();
    assert_eq!(s.len(), d);
    for c in &configs {
        let hits = s.iter().filter(|x| *x == c).count() as u64;
        assert!(within_5_sigma(hits, d as u64, 0.25));
    }
    assert_eq!(subsample(&b, 1000, 21).unwrap(), subsample(&b, 1000, 21).unwrap());
    assert_ne!(subsample(&b, 1000, 21).unwrap(), subsample(&b, 1000, 22).unwrap());
}

fn random_vector(spec: SystemSpec, seed: u64) -> CIVector {
    let basis = Arc::new(SubspaceBasis::full(spec));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..basis.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut v = CIVector::new(basis, amps).unwrap();
    v.normalize().unwrap();
    v
}

#[test]
fn occupancies_match_direct_summation() {
    let spec = SystemSpec::new(4, 2, 2).unwrap();
    let psi = random_vector(spec, 8);
    let occ = update_occupancies(&psi).unwrap();
    let mut want = [[0.0; 4]; 2];
    for k in 0..psi.basis().dim() {
        let c = psi.basis().configuration(k);
        let w = psi.amplitudes()[k].powi(2);
        for p in 0..4 {
            want[0][p] += w * ((c.alpha.0 >> p) & 1) as f64;
            want[1][p] += w * ((c.beta.0 >> p) & 1) as f64;
        }
    }
    for p in 0..4 {
        assert!((occ.alpha[p] - want[0][p]).abs() < 1e-14);
        assert!((occ.beta[p] - want[1][p]).abs() < 1e-14);
    }
    let (sa, sb) = occ.totals();
    assert!((sa - 2.0).abs() < 1e-12 && (sb - 2.0).abs() < 1e-12);
}

#[test]
fn carryover_weights_are_row_sums() {
    let spec = SystemSpec::new(5, 2, 2).unwrap();
    let psi = random_vector(spec, 3);
    let set = select_carryover(&psi, 1.0, 0).unwrap();
    let halves = enumerate_halves(5, 2);
    assert_eq!(set.len(), halves.len());
    for (h, w) in &set.entries {
        let a = halves.iter().position(|x| x == h).unwrap();
        let row: f64 = (0..halves.len()).map(|b| psi.get(a, b).powi(2)).sum();
        assert!((w - row).abs() < 1e-14);
    }
    assert!(set.entries.windows(2).all(|w| w[0].1 >= w[1].1));
}

#[test]
fn subspace_energy_never_exceeds_hartree_fock() {
    let (ints, spec) = load("h6_ring_sto3g");
    let hf = hf_configuration(&spec);
    let e_hf = diagonal_element(&hf, &ints);
    assert!((e_hf - reference("h6_ring_sto3g", "e_hf")).abs() < 1e-8);
    let halves = enumerate_halves(6, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let sel: Vec<Configuration> = (0..4)
            .map(|_| Configuration {
                alpha: halves[rng.gen_range(0..halves.len())],
                beta: halves[rng.gen_range(0..halves.len())],
            })
            .collect();
        let basis = Arc::new(build_subspace(&sel, &CarryoverSet::empty(6), &spec, true).unwrap());
        assert!(basis.index_of(&hf).is_some());
        let ham = SubspaceHamiltonian::new(basis, ints.clone()).unwrap();
        let (rep, _) = solve(&ham, &DavidsonOptions::tight(1e-8, 100), None).unwrap();
        assert!(rep.energy <= e_hf + 1e-10);
    }
}

#[test]
fn carryover_survives_absent_samples() {
    let spec = SystemSpec::new(4, 2, 2).unwrap();
    let psi = random_vector(spec, 12);
    let carry = select_carryover(&psi, 0.5, 3).unwrap();
    let basis = build_subspace(&[hf_configuration(&spec)], &carry, &spec, true).unwrap();
    for h in carry.halves() {
        assert!(basis.alpha_index(h).is_some() && basis.beta_index(h).is_some());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn recovered_counts_are_exact(
        entries in prop::collection::vec((0u64..256, 0u64..256, 1u64..5), 1..40),
        na in 0usize..=8,
        nb in 0usize..=8,
        seed in 0u64..1000,
    ) {
        let spec = SystemSpec::new(8, na, nb).unwrap();
        let b = batch(&entries.iter().map(|&(a, bb, k)| (Configuration::new(a, bb), k)).collect::<Vec<_>>(), 8);
        let occ = OccupancyVector::new(vec![0.5; 8], vec![0.25; 8]).unwrap();
        let r = recover_configurations(&b, &occ, &spec, seed).unwrap();
        prop_assert!(r.counts.keys().all(|c| c.matches(&spec)));
        prop_assert_eq!(r.counts.values().sum::<u64>(), b.shots);
    }

    #[test]
    fn carryover_nests_and_keeps_enough_weight(seed in 0u64..500, c1 in 0.0f64..=1.0, c2 in 0.0f64..=1.0) {
        let (lo, hi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
        let psi = random_vector(SystemSpec::new(5, 2, 2).unwrap(), seed);
        let small = select_carryover(&psi, lo, 0).unwrap();
        let large = select_carryover(&psi, hi, 0).unwrap();
        prop_assert!(small.halves().all(|h| large.halves().any(|g| g == h)));
        let all = select_carryover(&psi, 1.0, 0).unwrap();
        let total: f64 = all.entries.iter().map(|e| e.1).sum();
        let kept: f64 = large.entries.iter().map(|e| e.1).sum();
        prop_assert!(kept >= hi * total - 1e-12);
    }
}

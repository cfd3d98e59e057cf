//! Shared fixtures and an independent Fock-space operator oracle.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqd_core::chem::{parse_fcidump, Configuration, MolecularIntegrals, SystemSpec};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn load(name: &str) -> (Arc<MolecularIntegrals>, SystemSpec) {
    let (ints, spec) = parse_fcidump(data_path(&format!("{name}.fcidump"))).unwrap();
    (Arc::new(ints), spec)
}

pub fn reference(name: &str, key: &str) -> f64 {
    let text = std::fs::read_to_string(data_path("reference_energies.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v[name][key].as_f64().unwrap()
}

/// Random real integrals with the full 8-fold symmetry and orbital energies
/// rising with index, so the aufbau determinant dominates the ground state.
pub fn random_integrals(n: usize, seed: u64) -> MolecularIntegrals {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ints = MolecularIntegrals::zeros(n);
    ints.core_energy = rng.gen_range(-1.0..1.0);
    for p in 0..n {
        for r in 0..=p {
            let v = if p == r { -2.0 + 0.6 * p as f64 + rng.gen_range(-0.1..0.1) } else { rng.gen_range(-0.2..0.2) };
            ints.set_h(p, r, v);
        }
    }
    for p in 0..n {
        for r in 0..=p {
            for q in 0..n {
                for s in 0..=q {
                    if p * (p + 1) / 2 + r >= q * (q + 1) / 2 + s {
                        let v = if p == r && q == s {
                            rng.gen_range(0.2..0.8)
                        } else {
                            rng.gen_range(-0.1..0.1)
                        };
                        ints.set_eri(p, r, q, s, v);
                    }
                }
            }
        }
    }
    ints
}

/// Determinant as a spin-orbital occupation: α orbital p is mode p, β
/// orbital p is mode n + p; the canonical product is in ascending mode order.
pub fn modes(c: &Configuration, n: usize) -> u128 {
    c.alpha.0 as u128 | ((c.beta.0 as u128) << n)
}

pub fn annihilate(state: u128, i: usize) -> Option<(u128, f64)> {
    if state >> i & 1 == 0 {
        return None;
    }
    let below = (state & ((1u128 << i) - 1)).count_ones();
    Some((state ^ (1u128 << i), if below.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

pub fn create(state: u128, i: usize) -> Option<(u128, f64)> {
    if state >> i & 1 == 1 {
        return None;
    }
    let below = (state & ((1u128 << i) - 1)).count_ones();
    Some((state | (1u128 << i), if below.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

/// H|x⟩ by literal application of every operator string in the Hamiltonian.
pub fn apply_operator(x: u128, ints: &MolecularIntegrals) -> HashMap<u128, f64> {
    let n = ints.n_orb();
    let mut out: HashMap<u128, f64> = HashMap::new();
    *out.entry(x).or_default() += ints.core_energy;
    for sigma in 0..2 {
        for p in 0..n {
            for r in 0..n {
                let Some((s1, f1)) = annihilate(x, r + sigma * n) else { continue };
                let Some((s2, f2)) = create(s1, p + sigma * n) else { continue };
                *out.entry(s2).or_default() += f1 * f2 * ints.h(p, r);
            }
        }
    }
    for sigma in 0..2 {
        for tau in 0..2 {
            for p in 0..n {
                for r in 0..n {
                    for q in 0..n {
                        for s in 0..n {
                            let v = ints.eri(p, r, q, s);
                            if v == 0.0 {
                                continue;
                            }
                            // a†_pσ a†_qτ a_sτ a_rσ
                            let Some((s1, f1)) = annihilate(x, r + sigma * n) else { continue };
                            let Some((s2, f2)) = annihilate(s1, s + tau * n) else { continue };
                            let Some((s3, f3)) = create(s2, q + tau * n) else { continue };
                            let Some((s4, f4)) = create(s3, p + sigma * n) else { continue };
                            *out.entry(s4).or_default() += 0.5 * f1 * f2 * f3 * f4 * v;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Dense ⟨y|H|x⟩ over a configuration list.
pub fn oracle_matrix(configs: &[Configuration], ints: &MolecularIntegrals) -> DMatrix<f64> {
    let n = ints.n_orb();
    let index: HashMap<u128, usize> =
        configs.iter().enumerate().map(|(i, c)| (modes(c, n), i)).collect();
    let mut m = DMatrix::zeros(configs.len(), configs.len());
    for (j, c) in configs.iter().enumerate() {
        for (state, v) in apply_operator(modes(c, n), ints) {
            if let Some(&i) = index.get(&state) {
                m[(i, j)] += v;
            }
        }
    }
    m
}

/// ‖H|ψ⟩‖² − ⟨ψ|H|ψ⟩² over the whole Fock sector, ψ normalized here.
pub fn oracle_variance(configs: &[Configuration], amps: &[f64], ints: &MolecularIntegrals) -> f64 {
    let n = ints.n_orb();
    let norm: f64 = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut hpsi: HashMap<u128, f64> = HashMap::new();
    for (c, a) in configs.iter().zip(amps) {
        for (state, v) in apply_operator(modes(c, n), ints) {
            *hpsi.entry(state).or_default() += v * a / norm;
        }
    }
    let e: f64 = configs
        .iter()
        .zip(amps)
        .map(|(c, a)| a / norm * hpsi.get(&modes(c, n)).copied().unwrap_or(0.0))
        .sum();
    hpsi.values().map(|v| v * v).sum::<f64>() - e * e
}

pub fn lowest_eigen(m: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let eig = SymmetricEigen::new(m.clone());
    let (i, e) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    (e, eig.eigenvectors.column(i).iter().copied().collect())
}

/// Outcome of one recovered-vs-raw comparison at equal half count.
#[derive(Clone, Copy, Debug)]
pub struct RecoveryTrial {
    pub recovered_energy: f64,
    pub raw_energy: f64,
    pub d_h: usize,
    pub popcount_exact: bool,
}

/// Unique halves in order of first appearance, keeping only those with
/// `n_e` electrons.
pub fn first_halves(configs: &[Configuration], n_e: usize) -> Vec<sqd_core::chem::HalfConfiguration> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for c in configs {
        for h in [c.alpha, c.beta] {
            if h.count() == n_e && seen.insert(h) {
                out.push(h);
            }
        }
    }
    out
}

/// Samples the exact ground state `psi0`, corrupts it with bit flips at
/// `eps`, then diagonalizes on halves drawn from the recovered batch and
/// from the raw noisy batch (wrong-count halves discarded), both cut to
/// the same D_h by order of first appearance and both given the HF half.
pub fn recovery_trial(
    psi0: &sqd_core::sci::CIVector,
    ints: &Arc<MolecularIntegrals>,
    shots: u64,
    d: usize,
    eps: f64,
    seed: u64,
) -> RecoveryTrial {
    use sqd_core::chem::hf_configuration;
    use sqd_core::lucj::{apply_noise, sample_counts, LucjState, NoiseModel, DEFAULT_STATE_CAP};
    use sqd_core::recovery::{recover_configurations, subsample, OccupancyVector};
    use sqd_core::sci::{solve, DavidsonOptions, SubspaceBasis, SubspaceHamiltonian};

    let spec = *psi0.basis().spec();
    let state = LucjState::from_ci_vector(psi0, DEFAULT_STATE_CAP).unwrap();
    let clean = sample_counts(&state, shots, seed).unwrap();
    let noisy = apply_noise(&clean, NoiseModel::new(eps).unwrap(), seed ^ 0x5eed);
    let occ = OccupancyVector::hartree_fock(&spec);
    let recovered = recover_configurations(&noisy, &occ, &spec, seed.wrapping_add(1)).unwrap();
    let popcount_exact = recovered.counts.keys().all(|c| c.matches(&spec));
    let rec_halves = first_halves(&subsample(&recovered, d, seed.wrapping_add(2)).unwrap(), spec.n_alpha);
    let raw_halves = first_halves(&subsample(&noisy, d, seed.wrapping_add(2)).unwrap(), spec.n_alpha);
    let d_h = rec_halves.len().min(raw_halves.len());
    let hf = hf_configuration(&spec).alpha;
    let energy = |halves: &[sqd_core::chem::HalfConfiguration]| {
        let mut list: Vec<_> = halves[..d_h].to_vec();
        list.push(hf);
        let basis = Arc::new(SubspaceBasis::from_unsorted(spec, list.clone(), list).unwrap());
        let ham = SubspaceHamiltonian::new(basis, ints.clone()).unwrap();
        solve(&ham, &DavidsonOptions::tight(1e-9, 200), None).unwrap().0.energy
    };
    RecoveryTrial {
        recovered_energy: energy(&rec_halves),
        raw_energy: energy(&raw_halves),
        d_h,
        popcount_exact,
    }
}

/// Ground state on the complete determinant space.
pub fn fci_vector(ints: &Arc<MolecularIntegrals>, spec: SystemSpec) -> sqd_core::sci::CIVector {
    use sqd_core::sci::{solve, DavidsonOptions, SubspaceBasis, SubspaceHamiltonian};
    let ham = SubspaceHamiltonian::new(Arc::new(SubspaceBasis::full(spec)), ints.clone()).unwrap();
    solve(&ham, &DavidsonOptions::tight(1e-10, 300), None).unwrap().1
}

/// Closed-loop settings shared by the orchestrator and acceptance suites:
/// 2 populations × 4 walkers, ε = 1%, a fixed 20 ms device time per call.
pub fn loop_config(name: &str, out: &std::path::Path, max_iter: usize) -> sqd_core::orchestrator::RunConfig {
    use sqd_core::orchestrator::{InitConfig, RunConfig};
    RunConfig {
        fcidump: data_path(&format!("{name}.fcidump")),
        shots: 10_000,
        noise: 0.01,
        subsample: 100,
        max_iter,
        output: out.to_path_buf(),
        init: InitConfig {
            magnitude: 1.0,
            ..Default::default()
        },
        sampler_latency_ms: 20,
        seed: 11,
        ..Default::default()
    }
}

/// Whether two closed intervals share more than a point.
pub fn overlaps(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 < b.1 && b.0 < a.1
}

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::params::LucjParameters;
use crate::chem::{enumerate_halves, hf_configuration, hilbert_dimension, Configuration, HalfConfiguration, SystemSpec};
use crate::linalg::expm;
use crate::sci::{single_sign, CIVector, SubspaceBasis};
use crate::{Error, Result};

/// Largest determinant space simulated by default.
pub const DEFAULT_STATE_CAP: u128 = 4_000_000;

/// Complex amplitudes over the full determinant space, row-major in
/// (α half, β half) with halves in ascending numeric order.
#[derive(Clone, Debug)]
pub struct LucjState {
    spec: SystemSpec,
    alpha: Vec<HalfConfiguration>,
    beta: Vec<HalfConfiguration>,
    amps: Vec<Complex64>,
}

/// A rotation in the (i, j) orbital plane: Φ_ii = Φ_jj = cos θ,
/// Φ_ji = sin θ, Φ_ij = −sin θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Givens {
    pub i: usize,
    pub j: usize,
    pub theta: f64,
}

impl LucjState {
    /// Indicator vector on `reference`.
    pub fn reference(spec: SystemSpec, reference: Configuration, cap: u128) -> Result<Self> {
        spec.validate()?;
        let dim = hilbert_dimension(&spec)?;
        if dim > cap {
            return Err(Error::Capacity {
                what: "LUCJ state dimension".into(),
                needed: dim,
                cap,
            });
        }
        if !reference.matches(&spec) {
            return Err(Error::Contract(format!(
                "reference {} does not have ({}, {}) electrons",
                reference.to_bitstring(spec.n_orb),
                spec.n_alpha,
                spec.n_beta
            )));
        }
        let alpha = enumerate_halves(spec.n_orb, spec.n_alpha);
        let beta = enumerate_halves(spec.n_orb, spec.n_beta);
        let mut amps = vec![Complex64::new(0.0, 0.0); alpha.len() * beta.len()];
        let a = alpha.binary_search(&reference.alpha).expect("enumerated");
        let b = beta.binary_search(&reference.beta).expect("enumerated");
        amps[a * beta.len() + b] = Complex64::new(1.0, 0.0);
        Ok(LucjState { spec, alpha, beta, amps })
    }

    /// A real CI vector embedded in the full space, so exact eigenvectors
    /// can be fed to the sampler.
    pub fn from_ci_vector(psi: &CIVector, cap: u128) -> Result<Self> {
        let spec = *psi.basis().spec();
        let mut state = Self::reference(spec, hf_configuration(&spec), cap)?;
        let full = Arc::new(SubspaceBasis::full(spec));
        let embedded = psi.project_onto(&full);
        for (z, &x) in state.amps.iter_mut().zip(embedded.amplitudes()) {
            *z = Complex64::new(x, 0.0);
        }
        Ok(state)
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn alpha(&self) -> &[HalfConfiguration] {
        &self.alpha
    }

    pub fn beta(&self) -> &[HalfConfiguration] {
        &self.beta
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn configuration(&self, flat: usize) -> Configuration {
        let nb = self.beta.len();
        Configuration {
            alpha: self.alpha[flat / nb],
            beta: self.beta[flat % nb],
        }
    }

    pub fn amplitude(&self, c: &Configuration) -> Option<Complex64> {
        let a = self.alpha.binary_search(&c.alpha).ok()?;
        let b = self.beta.binary_search(&c.beta).ok()?;
        Some(self.amps[a * self.beta.len() + b])
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Applies the determinant transform a†_p → Σ_r Φ_rp a†_r to both spin
    /// sectors. Φ must be orthogonal.
    pub fn apply_orbital_rotation(&mut self, phi: &DMatrix<f64>) {
        let (rotations, signs) = givens_decomposition(phi);
        // Φ = G_1 ⋯ G_k · D acts right to left
        self.apply_diagonal_signs(&signs);
        for g in rotations.iter().rev() {
            self.apply_givens(*g);
        }
    }

    fn apply_diagonal_signs(&mut self, signs: &[f64]) {
        let parity = |h: HalfConfiguration| h.occupied().map(|p| signs[p]).product::<f64>();
        let pa: Vec<f64> = self.alpha.iter().map(|&h| parity(h)).collect();
        let pb: Vec<f64> = self.beta.iter().map(|&h| parity(h)).collect();
        let nb = self.beta.len();
        for (k, z) in self.amps.iter_mut().enumerate() {
            *z *= pa[k / nb] * pb[k % nb];
        }
    }

    /// Pairs (x, x') with i ∈ x, j ∉ x and x' = x with i replaced by j,
    /// plus the sign of a†_j a_i on x.
    fn givens_pairs(list: &[HalfConfiguration], g: Givens) -> Vec<(usize, usize, f64)> {
        let (bi, bj) = (1u64 << g.i, 1u64 << g.j);
        list.iter()
            .enumerate()
            .filter(|(_, h)| h.0 & bi != 0 && h.0 & bj == 0)
            .map(|(x, h)| {
                let partner = HalfConfiguration(h.0 ^ bi ^ bj);
                let y = list.binary_search(&partner).expect("same particle number");
                (x, y, single_sign(h.0, g.i, g.j))
            })
            .collect()
    }

    fn apply_givens(&mut self, g: Givens) {
        let (c, s) = (g.theta.cos(), g.theta.sin());
        let nb = self.beta.len();
        for (x, y, sg) in Self::givens_pairs(&self.alpha, g) {
            for col in 0..nb {
                let (u, v) = (self.amps[x * nb + col], self.amps[y * nb + col]);
                self.amps[x * nb + col] = u * c - v * (s * sg);
                self.amps[y * nb + col] = u * (s * sg) + v * c;
            }
        }
        let na = self.alpha.len();
        for (x, y, sg) in Self::givens_pairs(&self.beta, g) {
            for row in 0..na {
                let (u, v) = (self.amps[row * nb + x], self.amps[row * nb + y]);
                self.amps[row * nb + x] = u * c - v * (s * sg);
                self.amps[row * nb + y] = u * (s * sg) + v * c;
            }
        }
    }

    /// Multiplies each determinant by exp(i Σ_{p≤q} J_pq n_p n_q), with n
    /// the spatial occupancy (0, 1 or 2).
    pub fn apply_jastrow(&mut self, j: &DMatrix<f64>) {
        let n = self.spec.n_orb;
        let nb = self.beta.len();
        let alpha = &self.alpha;
        let beta = &self.beta;
        crate::par::for_each_chunk_mut(&mut self.amps, nb, |a, row| {
            for (b, z) in row.iter_mut().enumerate() {
                let occ: Vec<f64> = (0..n)
                    .map(|p| f64::from(u8::from(alpha[a].is_occupied(p)) + u8::from(beta[b].is_occupied(p))))
                    .collect();
                let mut phase = 0.0;
                for p in 0..n {
                    if occ[p] == 0.0 {
                        continue;
                    }
                    for q in p..n {
                        phase += j[(p, q)] * occ[p] * occ[q];
                    }
                }
                *z *= Complex64::from_polar(1.0, phase);
            }
        });
    }
}

/// Factors an orthogonal Φ as G_1 ⋯ G_k · diag(signs) with adjacent-plane
/// rotations.
pub fn givens_decomposition(phi: &DMatrix<f64>) -> (Vec<Givens>, Vec<f64>) {
    let n = phi.nrows();
    let mut m = phi.clone();
    let mut rotations = Vec::new();
    for col in 0..n {
        for r in (col + 1..n).rev() {
            let (a, b) = (m[(r - 1, col)], m[(r, col)]);
            if b == 0.0 {
                continue;
            }
            let theta = b.atan2(a);
            let (c, s) = (theta.cos(), theta.sin());
            // left-multiply by Gᵀ on rows (r−1, r)
            for k in 0..n {
                let (u, v) = (m[(r - 1, k)], m[(r, k)]);
                m[(r - 1, k)] = c * u + s * v;
                m[(r, k)] = -s * u + c * v;
            }
            rotations.push(Givens { i: r - 1, j: r, theta });
        }
    }
    let signs = (0..n).map(|p| if m[(p, p)] < 0.0 { -1.0 } else { 1.0 }).collect();
    (rotations, signs)
}

/// ∏_layers [phase(J_k)]·[rotation(e^{K_k})] applied to |reference⟩.
pub fn lucj_state(
    params: &LucjParameters,
    spec: SystemSpec,
    reference: Configuration,
    cap: u128,
) -> Result<LucjState> {
    if params.n_orb != spec.n_orb && params.n_layers() > 0 {
        return Err(Error::Contract(format!(
            "parameters for {} orbitals, system has {}",
            params.n_orb, spec.n_orb
        )));
    }
    let mut state = LucjState::reference(spec, reference, cap)?;
    for l in 0..params.n_layers() {
        state.apply_orbital_rotation(&expm(&params.k_matrix(l)));
        state.apply_jastrow(&params.j_matrix(l));
    }
    Ok(state)
}

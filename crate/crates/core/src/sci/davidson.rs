//! Davidson eigensolver for the lowest eigenpair.
//!
//! Termination fires on the first of: raw residual 2-norm below `tol`,
//! `max_iter` Rayleigh–Ritz steps, or the wall-clock budget.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::hamiltonian::LinearOperator;
use crate::{Error, Result};

/// Smallest magnitude allowed in the preconditioner denominator.
pub const LEVEL_SHIFT_FLOOR: f64 = 1e-8;

const REORTHO_RATIO: f64 = std::f64::consts::FRAC_1_SQRT_2;
const BREAKDOWN: f64 = 1e-14;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DavidsonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// `None` means unlimited.
    pub wall_clock: Option<Duration>,
    /// Trial-space cap; defaults to max(2·max_iter, 25).
    pub max_subspace: Option<usize>,
}

impl Default for DavidsonOptions {
    fn default() -> Self {
        DavidsonOptions {
            tol: 1e-3,
            max_iter: 10,
            wall_clock: None,
            max_subspace: None,
        }
    }
}

impl DavidsonOptions {
    pub fn tight(tol: f64, max_iter: usize) -> Self {
        DavidsonOptions {
            tol,
            max_iter,
            ..Default::default()
        }
    }

    fn subspace_cap(&self) -> usize {
        self.max_subspace
            .unwrap_or_else(|| (2 * self.max_iter).max(25))
            .max(2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Residual,
    MaxIterations,
    WallClock,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DavidsonReport {
    pub energy: f64,
    #[serde(skip)]
    pub eigenvector: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub termination: Termination,
    pub elapsed_ms: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthogonalizes `v` against `basis` with repeated modified Gram–Schmidt;
/// returns the remaining norm (0 when `v` lies in the span).
fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    let mut before = norm(v);
    if before == 0.0 {
        return 0.0;
    }
    for _ in 0..3 {
        for b in basis {
            let c = dot(b, v);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let after = norm(v);
        if after > REORTHO_RATIO * before {
            return after;
        }
        if after < BREAKDOWN * before.max(1.0) {
            return 0.0;
        }
        before = after;
    }
    norm(v)
}

/// Lowest eigenpair of `op` using `diag` as the preconditioner.
///
/// `v0` must be nonzero. A supplied `guess` is added to the initial search
/// space next to `v0`.
pub fn davidson(
    op: &dyn LinearOperator,
    diag: &[f64],
    v0: &[f64],
    guess: Option<&[f64]>,
    opts: &DavidsonOptions,
) -> Result<DavidsonReport> {
    let n = op.dim();
    if v0.len() != n || diag.len() != n {
        return Err(Error::BasisMismatch(format!(
            "operator dimension {n}, v0 {} , diagonal {}",
            v0.len(),
            diag.len()
        )));
    }
    if opts.max_iter == 0 {
        return Err(Error::Contract("max_iter must be at least 1".into()));
    }
    let start = Instant::now();
    let cap = opts.subspace_cap();

    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut avs: Vec<Vec<f64>> = Vec::new();
    let push = |v: Vec<f64>, vs: &mut Vec<Vec<f64>>, avs: &mut Vec<Vec<f64>>| -> Result<()> {
        let mut av = vec![0.0; n];
        op.apply(&v, &mut av)?;
        vs.push(v);
        avs.push(av);
        Ok(())
    };

    let mut first = v0.to_vec();
    let n0 = norm(&first);
    if n0 == 0.0 || !n0.is_finite() {
        return Err(Error::ZeroVector("Davidson start vector is null".into()));
    }
    first.iter_mut().for_each(|x| *x /= n0);
    push(first, &mut vs, &mut avs)?;
    if let Some(g) = guess {
        if g.len() != n {
            return Err(Error::BasisMismatch("guess length differs from operator".into()));
        }
        let mut g = g.to_vec();
        let r = orthogonalize(&mut g, &vs);
        if r > 0.0 {
            g.iter_mut().for_each(|x| *x /= r);
            push(g, &mut vs, &mut avs)?;
        }
    }

    let mut iterations = 0;
    loop {
        iterations += 1;
        let k = vs.len();
        let mut small = DMatrix::<f64>::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let h = 0.5 * (dot(&vs[i], &avs[j]) + dot(&vs[j], &avs[i]));
                small[(i, j)] = h;
                small[(j, i)] = h;
            }
        }
        let eig = SymmetricEigen::new(small);
        let (imin, theta) = eig
            .eigenvalues
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty trial space");
        let y = eig.eigenvectors.column(imin);

        let mut w = vec![0.0; n];
        let mut aw = vec![0.0; n];
        for (c, (v, av)) in y.iter().zip(vs.iter().zip(&avs)) {
            w.iter_mut().zip(v).for_each(|(a, b)| *a += c * b);
            aw.iter_mut().zip(av).for_each(|(a, b)| *a += c * b);
        }
        let wn = norm(&w);
        w.iter_mut().for_each(|x| *x /= wn);
        aw.iter_mut().for_each(|x| *x /= wn);
        let resid: Vec<f64> = aw.iter().zip(&w).map(|(a, b)| a - theta * b).collect();
        let rnorm = norm(&resid);

        let finish = |termination: Termination, w: Vec<f64>| DavidsonReport {
            energy: theta,
            eigenvector: w,
            residual_norm: rnorm,
            iterations,
            converged: rnorm < opts.tol,
            termination,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        };

        if rnorm < opts.tol {
            return Ok(finish(Termination::Residual, w));
        }
        if iterations >= opts.max_iter {
            return Ok(finish(Termination::MaxIterations, w));
        }
        if opts.wall_clock.is_some_and(|limit| start.elapsed() >= limit) {
            return Ok(finish(Termination::WallClock, w));
        }

        let mut t: Vec<f64> = resid
            .iter()
            .zip(diag)
            .map(|(r, d)| {
                let mut den = d - theta;
                if den.abs() < LEVEL_SHIFT_FLOOR {
                    den = if den < 0.0 { -LEVEL_SHIFT_FLOOR } else { LEVEL_SHIFT_FLOOR };
                }
                r / den
            })
            .collect();

        if vs.len() >= cap {
            vs.clear();
            avs.clear();
            vs.push(w);
            avs.push(aw);
        }
        let mut tn = orthogonalize(&mut t, &vs);
        if tn == 0.0 {
            // preconditioned residual fell into the span; the raw residual
            // is orthogonal to it by construction
            t = resid.clone();
            tn = orthogonalize(&mut t, &vs);
        }
        if tn == 0.0 {
            return Ok(finish(Termination::Residual, vs[0].clone()));
        }
        t.iter_mut().for_each(|x| *x /= tn);
        push(t, &mut vs, &mut avs)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Dense {
        n: usize,
        a: Vec<f64>,
    }

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.n
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
            for i in 0..self.n {
                y[i] = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
            }
            Ok(())
        }
    }

    fn diag_of(d: &Dense) -> Vec<f64> {
        (0..d.n).map(|i| d.a[i * d.n + i]).collect()
    }

    fn e(n: usize, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[k] = 1.0;
        v
    }

    #[test]
    fn basis_vector_of_diagonal_matrix_is_a_fixed_point() {
        let n = 8;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = (i + 1) as f64;
        }
        let op = Dense { n, a };
        let r = davidson(&op, &diag_of(&op), &e(n, 2), None, &DavidsonOptions::tight(1e-10, 10)).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.energy, 3.0);
        assert!(r.converged && r.residual_norm < 1e-12);
    }

    #[test]
    fn diagonal_matrix_from_mixed_start() {
        let n = 8;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            a[i * n + i] = (i + 1) as f64;
        }
        let op = Dense { n, a };
        let mut v0 = e(n, 2);
        v0[0] = 1.0;
        let r = davidson(&op, &diag_of(&op), &v0, None, &DavidsonOptions::tight(1e-10, 10)).unwrap();
        assert!(r.iterations <= 2, "{} iterations", r.iterations);
        assert!((r.energy - 1.0).abs() < 1e-12);
        assert!((r.eigenvector[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_matrix_from_e3() {
        // diag(1..n) with a weak uniform coupling; dense reference from nalgebra
        let n = 12;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = if i == j { (i + 1) as f64 } else { 0.05 };
            }
        }
        let exact = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &a)).eigenvalues.min();
        let op = Dense { n, a };
        let r = davidson(&op, &diag_of(&op), &e(n, 2), None, &DavidsonOptions::tight(1e-9, 50)).unwrap();
        assert!(r.converged);
        assert!((r.energy - exact).abs() < 1e-10);
    }

    #[test]
    fn policy_limits_are_recorded() {
        let n = 30;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = if i == j { i as f64 * 0.1 } else { 0.3 / (1.0 + (i as f64 - j as f64).abs()) };
            }
        }
        let op = Dense { n, a };
        let d = diag_of(&op);
        let r = davidson(&op, &d, &e(n, 0), None, &DavidsonOptions::tight(1e-14, 3)).unwrap();
        assert_eq!(r.termination, Termination::MaxIterations);
        assert_eq!(r.iterations, 3);
        assert!(!r.converged);

        let opts = DavidsonOptions {
            wall_clock: Some(Duration::ZERO),
            ..DavidsonOptions::tight(1e-14, 10)
        };
        let r = davidson(&op, &d, &e(n, 0), None, &opts).unwrap();
        assert_eq!(r.termination, Termination::WallClock);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn restart_cap_still_converges() {
        let n = 40;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = if i == j { (i % 7) as f64 } else { 0.2 / (1.0 + (i + j) as f64) };
            }
        }
        let exact = SymmetricEigen::new(DMatrix::from_row_slice(n, n, &a)).eigenvalues.min();
        let op = Dense { n, a };
        let opts = DavidsonOptions {
            max_subspace: Some(4),
            ..DavidsonOptions::tight(1e-9, 200)
        };
        let r = davidson(&op, &diag_of(&op), &e(n, 0), None, &opts).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.energy - exact).abs() < 1e-9);
    }

    #[test]
    fn zero_start_is_rejected() {
        let op = Dense { n: 2, a: vec![1.0, 0.0, 0.0, 2.0] };
        assert!(matches!(
            davidson(&op, &[1.0, 2.0], &[0.0, 0.0], None, &DavidsonOptions::default()),
            Err(Error::ZeroVector(_))
        ));
    }
}

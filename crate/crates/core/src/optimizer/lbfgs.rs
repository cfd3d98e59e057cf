use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    /// Stop once ‖∇f‖₂ falls to this value.
    pub tol_grad: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 1000,
            memory: 10,
            tol_grad: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsReport {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub values: Vec<f64>,
    /// Why the run stopped early, when it did.
    pub diagnostic: Option<String>,
}

const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Limited-memory BFGS with an Armijo backtracking line search.
///
/// Each accepted step lowers f. After a step satisfies Armijo the
/// minimizer of the quadratic through f(0), f'(0), f(α) is tried as well
/// and kept when it is lower, which makes the search exact on quadratics.
pub fn lbfgs_minimize<F>(mut f: F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f(&x);
    let mut evaluations = 1;
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    #[cfg(debug_assertions)]
    check_gradient(&mut f, &x, fx, &g);
    let mut values = vec![fx];
    let report = |x: Vec<f64>, fx: f64, g: &[f64], it: usize, ev: usize, conv: bool, values: Vec<f64>, diag: Option<String>| {
        LbfgsReport {
            x,
            value: fx,
            grad_norm: norm(g),
            iterations: it,
            evaluations: ev,
            converged: conv,
            values,
            diagnostic: diag,
        }
    };
    if !fx.is_finite() {
        return report(x, fx, &g, 0, evaluations, false, values, Some("objective not finite at start".into()));
    }
    for iter in 0..opts.max_iter {
        if norm(&g) <= opts.tol_grad {
            return report(x, fx, &g, iter, evaluations, true, values, None);
        }
        // two-loop recursion
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &d);
            d = axpy(&d, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.back() {
            let scale = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            d = axpy(&d, a - b, s);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 || !slope.is_finite() {
            history.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }
        let mut alpha = if history.is_empty() { (1.0 / norm(&g)).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let xa = axpy(&x, alpha, &d);
            let (fa, ga) = f(&xa);
            evaluations += 1;
            let curvature = (fa - fx - slope * alpha) / (alpha * alpha);
            if fa.is_finite() && fa <= fx + ARMIJO * alpha * slope {
                let mut best = (xa, fa, ga);
                if curvature > 0.0 {
                    let aq = -slope / (2.0 * curvature);
                    if aq.is_finite() && aq > 0.0 && (aq - alpha).abs() > 1e-3 * alpha && aq < 1e3 * alpha {
                        let xq = axpy(&x, aq, &d);
                        let (fq, gq) = f(&xq);
                        evaluations += 1;
                        if fq.is_finite() && fq < best.1 && fq <= fx + ARMIJO * aq * slope {
                            best = (xq, fq, gq);
                        }
                    }
                }
                accepted = Some(best);
                break;
            }
            alpha = if curvature > 0.0 && curvature.is_finite() {
                (-slope / (2.0 * curvature)).clamp(0.1 * alpha, 0.5 * alpha)
            } else {
                0.5 * alpha
            };
        }
        let Some((xn, fnew, gn)) = accepted else {
            return report(x, fx, &g, iter, evaluations, false, values, Some("line search failed to decrease the objective".into()));
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if history.len() == opts.memory.max(1) {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - fnew;
        x = xn;
        fx = fnew;
        g = gn;
        values.push(fx);
        if decrease <= f64::EPSILON * fx.abs().max(1.0) && norm(&g) > opts.tol_grad {
            let conv = norm(&g) <= opts.tol_grad;
            return report(x, fx, &g, iter + 1, evaluations, conv, values, Some("objective stalled at rounding level".into()));
        }
    }
    let conv = norm(&g) <= opts.tol_grad;
    let diag = (!conv).then(|| "iteration limit reached".to_string());
    report(x, fx, &g, opts.max_iter, evaluations, conv, values, diag)
}

/// Compares the gradient with a central difference along it and logs a
/// warning on disagreement.
#[cfg(debug_assertions)]
fn check_gradient<F: FnMut(&[f64]) -> (f64, Vec<f64>)>(f: &mut F, x: &[f64], fx: f64, g: &[f64]) {
    let gn = norm(g);
    if gn == 0.0 || !fx.is_finite() {
        return;
    }
    let h = 1e-6 / gn;
    let (fp, _) = f(&axpy(x, h, g));
    let (fm, _) = f(&axpy(x, -h, g));
    let fd = (fp - fm) / (2.0 * h);
    if (fd - gn * gn).abs() > 1e-3 * gn * gn + 1e-8 {
        log::warn!("gradient check: directional derivative {fd:e} vs {:e}", gn * gn);
    }
}

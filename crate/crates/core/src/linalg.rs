//! Small dense helpers shared by the sampler and the orbital optimizer.

use std::sync::OnceLock;
use std::time::Instant;

use nalgebra::DMatrix;

/// e^A by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.iter().all(|x| x.abs() < 1e-18) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Antisymmetric matrix from its strict upper triangle, row-major
/// (K_pq = x, K_qp = −x for p < q).
pub fn antisymmetric_from_upper(n: usize, upper: &[f64]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(n, n);
    let mut it = upper.iter();
    for p in 0..n {
        for q in p + 1..n {
            let v = *it.next().expect("strict upper triangle length");
            k[(p, q)] = v;
            k[(q, p)] = -v;
        }
    }
    k
}

pub fn strict_upper(k: &DMatrix<f64>) -> Vec<f64> {
    let n = k.nrows();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for p in 0..n {
        for q in p + 1..n {
            out.push(k[(p, q)]);
        }
    }
    out
}

/// Seconds since the first call in this process, monotonic.
pub fn monotonic_seconds() -> f64 {
    static EPOCH: OnceLock<Instant> = OnceLock::new();
    EPOCH.get_or_init(Instant::now).elapsed().as_secs_f64()
}

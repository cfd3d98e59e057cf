use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const VARIANCE_SCHEMA: &str = "# schema: sqd-variance-points v1";

/// One (ΔE, E) sample for the zero-variance fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariancePoint {
    pub energy: f64,
    pub variance: f64,
    pub dimension: usize,
    pub iteration: usize,
    pub population: usize,
}

impl VariancePoint {
    pub fn new(energy: f64, variance: f64, dimension: usize, iteration: usize, population: usize) -> Result<Self> {
        // round-off can leave a tiny negative ΔE on converged states
        if !(variance >= -1e-12) || !energy.is_finite() {
            return Err(Error::Contract(format!("invalid variance point ({energy}, {variance})")));
        }
        Ok(VariancePoint {
            energy,
            variance: variance.max(0.0),
            dimension,
            iteration,
            population,
        })
    }
}

/// E = e0 + slope·ΔE by ordinary least squares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub e0: f64,
    /// Standard error of the intercept; 0 when two points fix the line.
    pub sigma: f64,
    pub slope: f64,
    pub points: usize,
}

pub fn extrapolate_zero_variance(points: &[VariancePoint]) -> Result<Extrapolation> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Contract(format!("zero-variance fit needs at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let xm = points.iter().map(|p| p.variance).sum::<f64>() / nf;
    let ym = points.iter().map(|p| p.energy).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.variance - xm).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.variance - xm) * (p.energy - ym)).sum();
    let scale = points.iter().map(|p| p.variance.abs()).fold(0.0, f64::max);
    if sxx <= (1e-14 * scale).powi(2) * nf || sxx == 0.0 {
        return Err(Error::Contract("zero-variance fit needs at least two distinct variances".into()));
    }
    let slope = sxy / sxx;
    let e0 = ym - slope * xm;
    let sigma = if n > 2 {
        let rss: f64 = points
            .iter()
            .map(|p| (p.energy - e0 - slope * p.variance).powi(2))
            .sum();
        let s2 = rss / (nf - 2.0);
        let sum_x2: f64 = points.iter().map(|p| p.variance * p.variance).sum();
        (s2 * sum_x2 / (nf * sxx)).sqrt()
    } else {
        0.0
    };
    Ok(Extrapolation {
        e0,
        sigma,
        slope,
        points: n,
    })
}

pub fn write_variance_points<W: Write>(points: &[VariancePoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{VARIANCE_SCHEMA}")?;
    writeln!(w, "iteration,population,dimension,energy,variance")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{:.15e},{:.15e}",
            p.iteration, p.population, p.dimension, p.energy, p.variance
        )?;
    }
    Ok(())
}

/// Reads the CSV written by [`write_variance_points`]. A bare two-column
/// `variance,energy` file with an optional header is accepted as well.
pub fn read_variance_points<R: BufRead>(r: R) -> Result<Vec<VariancePoint>> {
    let mut out = Vec::new();
    let mut columns: Option<Vec<String>> = None;
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("variance points", e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if columns.is_none() && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            columns = Some(fields.iter().map(|f| f.to_string()).collect());
            continue;
        }
        let cols = columns.get_or_insert_with(|| vec!["variance".into(), "energy".into()]);
        if fields.len() != cols.len() {
            return Err(Error::parse(i + 1, format!("expected {} fields, got {}", cols.len(), fields.len())));
        }
        let get = |name: &str| -> Result<Option<f64>> {
            match cols.iter().position(|c| c == name) {
                Some(k) => fields[k]
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| Error::parse(i + 1, format!("bad number `{}`", fields[k]))),
                None => Ok(None),
            }
        };
        let (Some(energy), Some(variance)) = (get("energy")?, get("variance")?) else {
            return Err(Error::parse(i + 1, "needs `energy` and `variance` columns"));
        };
        let int = |name: &str| get(name).map(|v| v.unwrap_or(0.0) as usize);
        let p = VariancePoint::new(energy, variance, int("dimension")?, int("iteration")?, int("population")?)
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::antisymmetric_from_upper;
use crate::{Error, Result};

/// Perturbation half-width applied to file parameters by default.
pub const DEFAULT_PERTURBATION: f64 = 0.05;

/// One rotation-plus-phase layer. Both generators are stored as triangles,
/// so K is antisymmetric and J symmetric by construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LucjLayer {
    /// Strict upper triangle of K, row-major.
    pub k: Vec<f64>,
    /// Upper triangle of J including the diagonal, row-major.
    pub j: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LucjParameters {
    pub n_orb: usize,
    pub layers: Vec<LucjLayer>,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ParameterFile {
    layers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_orb: Option<usize>,
    K: Vec<Vec<f64>>,
    J: Vec<Vec<f64>>,
}

fn n_from_upper_with_diag(len: usize) -> Option<usize> {
    let n = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (n * (n + 1) / 2 == len).then_some(n)
}

impl LucjParameters {
    pub fn zeros(n_orb: usize, layers: usize) -> Self {
        LucjParameters {
            n_orb,
            layers: (0..layers)
                .map(|_| LucjLayer {
                    k: vec![0.0; n_orb * (n_orb - 1) / 2],
                    j: vec![0.0; n_orb * (n_orb + 1) / 2],
                })
                .collect(),
        }
    }

    /// Builds from full matrices, rejecting K that is not antisymmetric or
    /// J that is not symmetric (tolerance 1e-12).
    pub fn from_matrices(pairs: &[(DMatrix<f64>, DMatrix<f64>)]) -> Result<Self> {
        let n = pairs.first().map_or(0, |(k, _)| k.nrows());
        let mut layers = Vec::with_capacity(pairs.len());
        for (l, (k, j)) in pairs.iter().enumerate() {
            if k.shape() != (n, n) || j.shape() != (n, n) {
                return Err(Error::Contract(format!("layer {l}: generators must be {n}×{n}")));
            }
            if (k + k.transpose()).abs().max() > 1e-12 {
                return Err(Error::Contract(format!("layer {l}: K is not antisymmetric")));
            }
            if (j - j.transpose()).abs().max() > 1e-12 {
                return Err(Error::Contract(format!("layer {l}: J is not symmetric")));
            }
            let mut ku = Vec::new();
            let mut ju = Vec::new();
            for p in 0..n {
                for q in p..n {
                    if q > p {
                        ku.push(k[(p, q)]);
                    }
                    ju.push(j[(p, q)]);
                }
            }
            layers.push(LucjLayer { k: ku, j: ju });
        }
        Ok(LucjParameters { n_orb: n, layers })
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn k_matrix(&self, layer: usize) -> DMatrix<f64> {
        antisymmetric_from_upper(self.n_orb, &self.layers[layer].k)
    }

    pub fn j_matrix(&self, layer: usize) -> DMatrix<f64> {
        let n = self.n_orb;
        let mut m = DMatrix::zeros(n, n);
        let mut it = self.layers[layer].j.iter();
        for p in 0..n {
            for q in p..n {
                let v = *it.next().expect("upper triangle length");
                m[(p, q)] = v;
                m[(q, p)] = v;
            }
        }
        m
    }

    /// Number of free parameters (the DE search dimension).
    pub fn len(&self) -> usize {
        self.layers.iter().map(|l| l.k.len() + l.j.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flattened θ: per layer, K triangle then J triangle.
    pub fn to_vector(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.k.iter().chain(&l.j).copied()).collect()
    }

    pub fn from_vector(n_orb: usize, layers: usize, theta: &[f64]) -> Result<Self> {
        let (nk, nj) = (n_orb * (n_orb - 1) / 2, n_orb * (n_orb + 1) / 2);
        if theta.len() != layers * (nk + nj) {
            return Err(Error::Contract(format!(
                "θ has {} entries, {layers} layers on {n_orb} orbitals need {}",
                theta.len(),
                layers * (nk + nj)
            )));
        }
        Ok(LucjParameters {
            n_orb,
            layers: theta
                .chunks(nk + nj)
                .map(|c| LucjLayer {
                    k: c[..nk].to_vec(),
                    j: c[nk..].to_vec(),
                })
                .collect(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: ParameterFile = serde_json::from_str(text)?;
        if f.K.len() != f.layers || f.J.len() != f.layers {
            return Err(Error::Config(format!(
                "parameter file declares {} layers but has {} K and {} J entries",
                f.layers,
                f.K.len(),
                f.J.len()
            )));
        }
        let n = match (f.n_orb, f.J.first()) {
            (Some(n), _) => n,
            (None, Some(j)) => n_from_upper_with_diag(j.len())
                .ok_or_else(|| Error::Config(format!("J triangle length {} is not n(n+1)/2", j.len())))?,
            (None, None) => return Err(Error::Config("n_orb missing and no layers to infer it from".into())),
        };
        if n == 0 {
            return Err(Error::Config("n_orb must be positive".into()));
        }
        let mut layers = Vec::with_capacity(f.layers);
        for (l, (k, j)) in f.K.into_iter().zip(f.J).enumerate() {
            if k.len() != n * (n - 1) / 2 || j.len() != n * (n + 1) / 2 {
                return Err(Error::Config(format!(
                    "layer {l}: K has {} and J {} entries, expected {} and {}",
                    k.len(),
                    j.len(),
                    n * (n - 1) / 2,
                    n * (n + 1) / 2
                )));
            }
            layers.push(LucjLayer { k, j });
        }
        Ok(LucjParameters { n_orb: n, layers })
    }

    pub fn to_json(&self) -> String {
        let f = ParameterFile {
            layers: self.layers.len(),
            n_orb: Some(self.n_orb),
            K: self.layers.iter().map(|l| l.k.clone()).collect(),
            J: self.layers.iter().map(|l| l.j.clone()).collect(),
        };
        serde_json::to_string_pretty(&f).expect("plain numbers serialize")
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    File,
    Random,
    PerturbedFile,
}

/// Initial walker parameters.
///
/// `File` returns `base`; `PerturbedFile` adds i.i.d. uniform(±magnitude) to
/// every triangle entry of `base`; `Random` draws every entry from
/// uniform(±magnitude) with `n_orb` and `layers`.
pub fn init_parameters(
    mode: InitMode,
    base: Option<&LucjParameters>,
    n_orb: usize,
    layers: usize,
    magnitude: f64,
    seed: u64,
) -> Result<LucjParameters> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| if magnitude > 0.0 { rng.gen_range(-magnitude..=magnitude) } else { 0.0 };
    match mode {
        InitMode::File | InitMode::PerturbedFile => {
            let base = base.ok_or_else(|| Error::Config("file initialisation needs a parameter file".into()))?;
            let mut p = base.clone();
            if mode == InitMode::PerturbedFile {
                for l in &mut p.layers {
                    l.k.iter_mut().chain(l.j.iter_mut()).for_each(|x| *x += draw(&mut rng));
                }
            }
            Ok(p)
        }
        InitMode::Random => {
            let mut p = LucjParameters::zeros(n_orb, layers);
            for l in &mut p.layers {
                l.k.iter_mut().chain(l.j.iter_mut()).for_each(|x| *x = draw(&mut rng));
            }
            Ok(p)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LucjParameters {
        LucjParameters::from_json(r#"{"layers": 1, "K": [[0.1, -0.2, 0.3]], "J": [[1, 2, 3, 4, 5, 6]]}"#).unwrap()
    }

    #[test]
    fn infers_orbitals() {
        let p = sample();
        assert_eq!(p.n_orb, 3);
        let k = p.k_matrix(0);
        assert_eq!(k[(0, 1)], 0.1);
        assert_eq!(k[(1, 0)], -0.1);
        assert_eq!(k[(1, 2)], 0.3);
        let j = p.j_matrix(0);
        assert_eq!(j[(1, 1)], 4.0);
        assert_eq!(j[(2, 1)], 5.0);
        let back = LucjParameters::from_json(&p.to_json()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn malformed_files() {
        assert!(LucjParameters::from_json(r#"{"layers": 2, "K": [[0.1, 0.2, 0.3]], "J": [[1,2,3,4,5,6]]}"#).is_err());
        assert!(LucjParameters::from_json(r#"{"layers": 1, "K": [[0.1]], "J": [[1,2,3,4,5,6]]}"#).is_err());
        assert!(LucjParameters::from_json(r#"{"layers": 1, "K": [[0.1]], "J": [[1,2,3,4]]}"#).is_err());
        assert!(LucjParameters::from_json("not json").is_err());
    }

    #[test]
    fn vector_round_trip() {
        let p = init_parameters(InitMode::Random, None, 4, 2, 0.3, 1).unwrap();
        assert_eq!(p.len(), 2 * (6 + 10));
        let q = LucjParameters::from_vector(4, 2, &p.to_vector()).unwrap();
        assert_eq!(p, q);
        assert!(LucjParameters::from_vector(4, 2, &[0.0; 5]).is_err());
    }

    #[test]
    fn init_modes() {
        let base = sample();
        let same = init_parameters(InitMode::PerturbedFile, Some(&base), 0, 0, 0.0, 9).unwrap();
        assert_eq!(same, base);
        let pert = init_parameters(InitMode::PerturbedFile, Some(&base), 0, 0, DEFAULT_PERTURBATION, 9).unwrap();
        for (a, b) in pert.to_vector().iter().zip(base.to_vector()) {
            assert!((a - b).abs() <= DEFAULT_PERTURBATION);
        }
        let k = pert.k_matrix(0);
        assert!((&k + k.transpose()).abs().max() == 0.0);
        let rnd = init_parameters(InitMode::Random, None, 5, 3, 0.05, 2).unwrap();
        assert!(rnd.to_vector().iter().all(|x| x.abs() <= 0.05));
        assert!(init_parameters(InitMode::File, None, 3, 1, 0.0, 0).is_err());
    }

    #[test]
    fn rejects_bad_matrices() {
        let mut k = DMatrix::zeros(2, 2);
        k[(0, 1)] = 1.0;
        k[(1, 0)] = -0.5;
        assert!(LucjParameters::from_matrices(&[(k, DMatrix::zeros(2, 2))]).is_err());
    }
}

//! Sample-based quantum diagonalization at desk scale.
//!
//! The crate is organized the way the closed loop runs:
//!
//! * [`chem`] integrals, determinant bitstrings, FCIDUMP ingestion.
//! * [`sci`] Slater–Condon Hamiltonian action on an α⊗β product subspace,
//!   Davidson eigensolver and exact energy variance.
//! * [`engine`] rank-decomposed (B_α, B_β, T, M) Hamiltonian application over
//!   message-passing worker threads, plus the scaling harness.
//! * [`lucj`] the simulated sampler: LUCJ state vector, shot sampling and a
//!   bit-flip noise channel.
//! * [`recovery`] configuration recovery, subsampling, subspace construction
//!   and carryover selection.
//! * [`optimizer`] orbital rotations, integral transformation, RDMs, analytic
//!   κ gradient, L-BFGS and best/2/bin differential evolution.
//! * [`orchestrator`] the two-population schedule with overlapped sampling,
//!   checkpoints, timelines and zero-variance extrapolation.
//!
//! With the default `parallel` feature the hot loops run on rayon; without it
//! every kernel falls back to the sequential path.

pub mod chem;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod lucj;
pub mod optimizer;
pub mod orchestrator;
pub mod par;
pub mod recovery;
pub mod sci;

pub use error::{Error, Result};

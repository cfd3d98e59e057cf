//! Simulated sampler: an LUCJ-style state vector over the full determinant
//! space, shot sampling and a bit-flip noise channel.

mod params;
mod sampling;
mod state;

pub use params::{init_parameters, InitMode, LucjLayer, LucjParameters, DEFAULT_PERTURBATION};
pub use sampling::{
    apply_noise, sample_counts, sample_counts_cancellable, NoiseModel, Provenance, SampleBatch,
};
pub use state::{givens_decomposition, lucj_state, Givens, LucjState, DEFAULT_STATE_CAP};

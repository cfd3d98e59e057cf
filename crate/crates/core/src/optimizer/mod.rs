//! Outer optimizers: differential evolution over circuit parameters and
//! orbital-rotation optimization with analytic gradients.

mod de;
mod gradient;
mod lbfgs;
mod orbital;
mod rdm;

pub use de::{
    de_step, de_trials, parameter_hash, write_de_trace, DEConfig, DeTraceRow, Evaluation, IndexMode, WalkerState,
    DE_TRACE_SCHEMA,
};
pub use gradient::{kappa_gradient, optimize_orbitals, orbital_objective, OrbitalReport};
pub use lbfgs::{lbfgs_minimize, LbfgsOptions, LbfgsReport};
pub use orbital::{rayleigh_energy, transform_integrals, transform_with_matrix, OrbitalRotation};
pub use rdm::{compute_rdms, ReducedDensityMatrices};

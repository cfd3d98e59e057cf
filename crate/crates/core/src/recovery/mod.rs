//! Classical pre-processing between sampling and diagonalization.

mod carryover;
mod occupancy;
mod repair;
mod subspace;

pub use carryover::{select_carryover, CarryoverSet};
pub use occupancy::{update_occupancies, OccupancyVector};
pub use repair::{recover_configurations, recover_configurations_with, subsample, DEFAULT_ETA};
pub use subspace::build_subspace;

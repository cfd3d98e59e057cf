//! Selected-CI machinery on an α⊗β product subspace.

mod basis;
mod davidson;
mod excitations;
mod hamiltonian;
mod slater_condon;
mod variance;

pub use basis::{CIVector, SubspaceBasis};
pub use davidson::{
    davidson, DavidsonOptions, DavidsonReport, Termination, LEVEL_SHIFT_FLOOR,
};
pub use excitations::{
    build_excitation_tables, double_sign, single_sign, DoubleExcitation, ExcitationTable,
    SingleExcitation,
};
pub use hamiltonian::{
    apply_hamiltonian, apply_hamiltonian_sequential, diagonal_elements, lowest_diagonal_start,
    solve, solve_with, LinearOperator, SubspaceHamiltonian,
};
pub use slater_condon::{diagonal_element, slater_condon_element};
pub use variance::{connected_halves, energy_variance, VarianceReport, DEFAULT_VARIANCE_CAP};

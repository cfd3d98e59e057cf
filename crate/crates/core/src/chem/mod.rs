//! Chemistry data model: integrals, occupation bitstrings, combinatorial
//! addressing and FCIDUMP ingestion.

mod combinatorics;
mod config;
mod fcidump;
mod integrals;

pub use combinatorics::{binomial, hilbert_dimension, rank_half, unrank_half};
pub use config::{
    enumerate_halves, hf_configuration, Configuration, HalfConfiguration, SystemSpec, MAX_ORBITALS,
};
pub use fcidump::{parse_fcidump, parse_fcidump_str, write_fcidump, write_fcidump_string};
pub use integrals::{pair_index, MolecularIntegrals};

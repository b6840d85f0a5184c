//! Circuit-QED toolkit for a flux-tunable transmon capacitively coupled to a
//! high-impedance resonator.

pub mod circuit;
pub mod cli;
pub mod constants;
pub mod cpb;
pub mod design;
pub mod error;
pub mod fitting;
pub mod foster;
pub mod hamiltonian;
pub mod simplex;
pub mod spectroscopy;

pub use error::{Error, Result};

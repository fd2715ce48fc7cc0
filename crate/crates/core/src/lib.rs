//! Failure-spectrum analysis of binary decoding systems: sampling,
//! ansatz fitting, minimum-weight onset computation and Metropolis
//! splitting.

pub mod error;
pub mod f2linalg;
pub mod rng;
pub mod system;
pub mod decoders;
pub mod sampling;
pub mod ansatz;
pub mod minweight;
pub mod splitting;
pub mod cli;

pub use error::{Error, Result};

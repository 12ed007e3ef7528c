//! Noncentral and doubly noncentral matrix-variate and bimatrix-variate
//! generalised beta distributions, with the zonal and invariant polynomial
//! machinery their series densities need.

pub mod cli;
pub mod densities;
pub mod error;
pub mod invariant;
pub mod matrixkit;
pub mod partitions;
pub mod sampling;
pub mod validation;
pub mod zonal;

pub use error::{Error, Result};

/// Version tag written into every persisted table.
pub const TABLE_VERSION: &str = "dncbeta-tables/1";

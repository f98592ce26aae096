//! Orthogonal duality polynomials for conservative particle systems on `Z^d`:
//! Charlier bases, random-walk and exclusion transition kernels, Monte Carlo
//! samplers and fluctuation-field covariances.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod error;
pub mod exec;
mod fft;
pub mod fields;
pub mod fit;
pub mod kernels;
pub mod orthopoly;
pub mod report;
pub mod sampler;
pub mod stats;

pub use config::{CoordVector, DensityMeta, DualConfig, OccupationState, Site, Window};
pub use error::{Error, Result};
pub use exec::Execution;

/// Crate version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

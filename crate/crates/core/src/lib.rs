//! Cascaded intracavity second/fourth harmonic generation: stationary states,
//! linearized output quadrature spectra, tripartite correlation witnesses and
//! a positive-P stochastic integrator.

// `!(x < y)` is used on purpose so NaN inputs are rejected; index loops
// mirror the matrix algebra
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod correlations;
pub mod error;
pub mod linearized;
pub mod model;
pub mod ode;
pub mod semiclassical;
pub mod stochastic;

pub use error::{Error, Result};
pub use model::{FieldState, Normalization, QuadCovariance, SystemParams};

//! Recovery of compressively sampled signals and matrices by minimizing weighted
//! sums of convex structure-inducing regularizers under a measurement-residual
//! constraint.
//!
//! * [`ops`] builds the analysis operators (identity, DFT, differencing, wavelets).
//! * [`prox`] holds the proximal maps the splitting solver composes.
//! * [`solver`] solves the multi-structure program and provides the named presets.
//! * [`sensing`] generates measurement matrices and simulated block signals.
//! * [`eval`] computes error metrics, runs Monte Carlo benchmarks and cross-validation.
//! * [`experiment`] and [`io`] drive declarative experiments and their artifacts.

pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod ops;
pub mod prox;
pub mod sensing;
pub mod solver;

pub use error::{Error, Result};

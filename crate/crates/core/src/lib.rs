//! Mean-square-optimal and minimax-robust linear forecasting of stochastic
//! sequences with periodically stationary generalized multiple (GM) seasonal
//! increments.
//!
//! A scalar sequence with a period-`T` covariance structure and a product of
//! seasonal differencing operators `(1 - B^{mu*s})^{R + D}` (integer order `R`,
//! fractional order `D`) is blocked into a `T`-dimensional sequence whose GM
//! increments are stationary. Forecasts of linear functionals of unobserved
//! values are computed either by solving the operator equation built from
//! Fourier coefficients of the inverse weighted spectral density (the
//! "classical" route) or directly from the canonical moving-average
//! factorization (the "factorized" route). When the density is only known to
//! lie in an admissible class, least-favorable densities and minimax
//! characteristics are handled by the [`minimax`] module.
//!
//! Module map:
//! - [`increment`]: the increment-operator algebra (expansion, inverse
//!   expansion, frequency-domain evaluators).
//! - [`fractional`]: Gegenbauer layer (frequency sets, fractional filter
//!   coefficients, stationarity classification).
//! - [`blocking`]: scalar-to-vector blocking, functional weights, sample-path
//!   increments.
//! - [`spectral`]: spectral models, Fourier coefficient blocks, structural
//!   functions, factorization utilities.
//! - [`forecast`]: coefficient lifting and the two forecasting routes.
//! - [`minimax`]: admissible density classes, least-favorable residuals and
//!   scalar solvers, saddle-point verification.
//! - [`simulate`]: seeded generators and Monte Carlo / brute-force oracles.

// Indexed loops over matrix/series entries read better than iterator chains
// in the numeric kernels; negated comparisons are NaN-rejecting on purpose.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod blocking;
pub mod config;
pub mod error;
pub mod forecast;
pub mod fractional;
pub mod increment;
pub mod io;
pub mod linalg;
pub mod minimax;
pub mod models;
pub mod simulate;
pub mod spectral;

pub use error::{Error, Result};
pub use increment::{CoefficientSeries, IncrementFactor, IncrementSpec};
pub use linalg::{CMat, C64};

//! Numeric defaults shared across the crate and the CLI.
//!
//! Every tunable lives here so command-line flags and library callers override
//! a single documented layer.

use std::f64::consts::PI;

/// Default quadrature grid size (number of offset nodes on `[-pi, pi)`).
pub const DEFAULT_GRID: usize = 1 << 14;

/// Default truncation length for operator-equation solves.
pub const DEFAULT_LAGS: usize = 256;

/// Maximum dyadic refinements attempted by adaptive quadrature.
pub const QUAD_MAX_REFINE: u32 = 3;

/// Target for the quadrature refinement loop.
pub const QUAD_TOL: f64 = 1e-10;

/// Condition-number threshold above which operator systems are rejected.
pub const COND_LIMIT: f64 = 1e12;

/// Tail mass below which infinite functionals are considered resolved.
pub const TRUNCATION_EPS: f64 = 1e-12;

/// Half-width of the exclusion neighborhood around singular frequencies used
/// by log-domain (cepstral) sampling.
pub const EXCLUSION_RADIUS: f64 = 1e-3 * 2.0 * PI;

/// Damping factor of the least-favorable fixed-point iteration.
pub const LF_DAMPING: f64 = 0.5;

/// Sup-norm change at which the least-favorable iteration stops.
pub const LF_TOL: f64 = 1e-10;

/// Sweep budget of the least-favorable iteration.
pub const LF_MAX_SWEEPS: usize = 500;

/// Dense-solve size limit; larger block-Toeplitz systems take the Levinson path.
pub const DENSE_SOLVE_LIMIT: usize = 2048;

/// Default number of predictor weights kept in the time domain.
pub const DEFAULT_PREDICTOR_LEN: usize = 64;

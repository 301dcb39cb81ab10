//! Blocking of scalar periodically stationary sequences into vector form and
//! increments of sample paths.
//!
//! The bijection is `xi_p(m) = zeta(m T + p - 1)`, `p = 1..T`: block `m`
//! collects the scalar values at indices `m T .. m T + T - 1`. Functionals on
//! the scalar sequence are carried over by blocking their weights the same
//! way, zero-padding the last block.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increment::{expand_operator, IncrementSpec};

/// Scalar series over a contiguous integer index range.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarSeries {
    pub values: Vec<f64>,
    /// Index of `values[0]`.
    pub start: i64,
    /// Covariance period of the underlying sequence.
    pub period: u32,
}

impl ScalarSeries {
    pub fn new(values: Vec<f64>, start: i64, period: u32) -> Self {
        ScalarSeries { values, start, period }
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }
}

/// `T`-dimensional series of blocks over a contiguous block-index range.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorSeries {
    rows: Vec<Vec<f64>>,
    dim: usize,
    /// Block index of `rows[0]`.
    pub start: i64,
}

impl VectorSeries {
    pub fn new(rows: Vec<Vec<f64>>, start: i64) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Misaligned("vector series needs at least one nonempty row".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Misaligned("all rows must have the same dimension".into()));
        }
        Ok(VectorSeries { rows, dim, start })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn end(&self) -> i64 {
        self.start + self.rows.len() as i64 - 1
    }

    /// Row at block index `m`, if stored.
    pub fn row(&self, m: i64) -> Option<&[f64]> {
        let i = m - self.start;
        if i < 0 || i as usize >= self.rows.len() {
            None
        } else {
            Some(&self.rows[i as usize])
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// The same rows re-indexed so that the last block sits at `end`.
    pub fn shifted_to_end(&self, end: i64) -> VectorSeries {
        VectorSeries {
            rows: self.rows.clone(),
            dim: self.dim,
            start: end - self.rows.len() as i64 + 1,
        }
    }
}

/// Block a scalar series into `T`-dimensional rows.
///
/// The start index must be a multiple of `T`; a trailing incomplete block is
/// rejected unless `truncate_partial` is set, in which case it is dropped.
pub fn block(series: &ScalarSeries, t: u32, truncate_partial: bool) -> Result<VectorSeries> {
    let t = t as usize;
    if t == 0 {
        return Err(Error::Misaligned("period must be positive".into()));
    }
    if series.start.rem_euclid(t as i64) != 0 {
        return Err(Error::Misaligned(format!(
            "series start {} is not aligned to block boundaries (T = {t})",
            series.start
        )));
    }
    let full = series.values.len() / t;
    if !series.values.len().is_multiple_of(t) && !truncate_partial {
        return Err(Error::Misaligned(format!(
            "series length {} is not a multiple of T = {t}; pass the truncation flag to drop the partial block",
            series.values.len()
        )));
    }
    if full == 0 {
        return Err(Error::Misaligned("no complete block".into()));
    }
    let rows: Vec<Vec<f64>> = (0..full).map(|m| series.values[m * t..(m + 1) * t].to_vec()).collect();
    VectorSeries::new(rows, series.start / t as i64)
}

/// Inverse of [`block`].
pub fn unblock(series: &VectorSeries) -> ScalarSeries {
    let t = series.dim();
    let mut values = Vec::with_capacity(series.len() * t);
    for row in series.rows() {
        values.extend_from_slice(row);
    }
    ScalarSeries::new(values, series.start * t as i64, t as u32)
}

/// Weights of a linear functional of future values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FunctionalWeights {
    /// Scalar weights `a(0..M)` on the unblocked sequence.
    Scalar { values: Vec<f64> },
    /// Blocked rows given directly.
    Blocked { rows: Vec<Vec<f64>> },
    /// Geometric family: row `m` is `ratio^m * base`, `0 < ratio < 1`.
    Geometric { base: Vec<f64>, ratio: f64 },
}

impl FunctionalWeights {
    pub fn validate(&self, t: usize) -> Result<()> {
        match self {
            FunctionalWeights::Scalar { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidSpec("empty weights".into()));
                }
            }
            FunctionalWeights::Blocked { rows } => {
                if rows.is_empty() || rows.iter().any(|r| r.len() != t) {
                    return Err(Error::InvalidSpec(format!("blocked rows must all have length {t}")));
                }
            }
            FunctionalWeights::Geometric { base, ratio } => {
                if base.len() != t {
                    return Err(Error::InvalidSpec(format!("geometric base must have length {t}")));
                }
                if !(*ratio > 0.0 && *ratio < 1.0) {
                    return Err(Error::InvalidSpec("geometric ratio must lie in (0, 1)".into()));
                }
            }
        }
        Ok(())
    }

    pub fn is_geometric(&self) -> bool {
        matches!(self, FunctionalWeights::Geometric { .. })
    }
}

/// Block scalar weights `a(0..=m_max)` over period `t`: row `m` has entries
/// `a(m t + p - 1)`, with zeros padding positions past `m_max`.
pub fn block_weights(values: &[f64], t: usize, m_max: usize) -> Vec<Vec<f64>> {
    assert!(m_max < values.len(), "m_max must index into the weights");
    let n = m_max / t;
    let mut rows = Vec::with_capacity(n + 1);
    for m in 0..=n {
        let mut row = vec![0.0; t];
        for (p, slot) in row.iter_mut().enumerate() {
            let k = m * t + p;
            if k <= m_max {
                *slot = values[k];
            }
        }
        rows.push(row);
    }
    rows
}

/// Materialized blocked rows of a functional together with its decay
/// certificate, when one exists.
#[derive(Clone, Debug)]
pub struct BlockedFunctional {
    pub rows: Vec<Vec<f64>>,
    /// `Some(ratio)` when rows continue geometrically past the materialized
    /// horizon; the stored rows then satisfy the certified tail bound.
    pub geometric_ratio: Option<f64>,
    /// Bound on `sum_{k > horizon} (k+1) ||a(k)||^2` for geometric families.
    pub tail_bound: f64,
}

/// Horizon `H` such that `sum_{k >= H} (k+1) r^{2k} ||base||^2 < eps`, using
/// the closed form `sum_{k>=H} (k+1) x^k = x^H ((H+1)(1-x) + x) / (1-x)^2`.
fn geometric_horizon(base_norm_sq: f64, ratio: f64, eps: f64) -> usize {
    let x = ratio * ratio;
    let mut h = 1usize;
    loop {
        let tail = base_norm_sq * x.powi(h as i32) * ((h as f64 + 1.0) * (1.0 - x) + x)
            / ((1.0 - x) * (1.0 - x));
        if tail < eps || h > 100_000 {
            return h;
        }
        h += 1;
    }
}

/// Resolve functional weights to blocked rows over period `t`.
///
/// Geometric families are materialized out to the horizon certified by
/// `eps` (both summability conditions on the coefficients hold with tail
/// below `eps`).
pub fn resolve_weights(weights: &FunctionalWeights, t: usize, eps: f64) -> Result<BlockedFunctional> {
    weights.validate(t)?;
    match weights {
        FunctionalWeights::Scalar { values } => Ok(BlockedFunctional {
            rows: block_weights(values, t, values.len() - 1),
            geometric_ratio: None,
            tail_bound: 0.0,
        }),
        FunctionalWeights::Blocked { rows } => Ok(BlockedFunctional {
            rows: rows.clone(),
            geometric_ratio: None,
            tail_bound: 0.0,
        }),
        FunctionalWeights::Geometric { base, ratio } => {
            let base_sq: f64 = base.iter().map(|v| v * v).sum();
            let h = geometric_horizon(base_sq, *ratio, eps).max(8);
            let mut rows = Vec::with_capacity(h);
            let mut scale = 1.0;
            for _ in 0..h {
                rows.push(base.iter().map(|v| v * scale).collect());
                scale *= ratio;
            }
            let x = ratio * ratio;
            let tail = base_sq * x.powi(h as i32) * ((h as f64 + 1.0) * (1.0 - x) + x)
                / ((1.0 - x) * (1.0 - x));
            Ok(BlockedFunctional { rows, geometric_ratio: Some(*ratio), tail_bound: tail })
        }
    }
}

/// Componentwise GM increment of a vector series: convolution of each
/// component with the integer-order expansion `e_gamma`.
///
/// Increments exist only for block indices with `n(gamma)` predecessors in
/// range; the output starts at `series.start + n(gamma)`.
pub fn gm_increment(series: &VectorSeries, spec: &IncrementSpec) -> Result<VectorSeries> {
    if !spec.is_integer() {
        return Err(Error::FractionalOrder);
    }
    let e = expand_operator(spec)?;
    let n = spec.degree();
    if series.len() <= n {
        return Err(Error::InsufficientHistory { needed: n + 1, have: series.len() });
    }
    let t = series.dim();
    let mut rows = Vec::with_capacity(series.len() - n);
    for i in n..series.len() {
        let mut row = vec![0.0; t];
        for (k, &ev) in e.values.iter().enumerate() {
            if ev == 0.0 {
                continue;
            }
            let src = &series.rows()[i - k];
            for p in 0..t {
                row[p] += ev * src[p];
            }
        }
        rows.push(row);
    }
    VectorSeries::new(rows, series.start + n as i64)
}

//! Increment-operator algebra.
//!
//! A generalized multiple (GM) increment operator is a product of seasonal
//! differencing factors `(1 - B^{mu*s})^{R + D}` with step `mu >= 1`, season
//! `s >= 1`, integer order `R >= 0` and fractional order `D` in `(-1, 1)`.
//! This module provides the exact expansion of the integer part, its inverse
//! expansion, and the frequency-domain evaluators `chi` and `beta`.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::C64;

/// One seasonal differencing factor `(1 - B^{step*season})^{order + frac}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementFactor {
    pub step: u32,
    pub season: u32,
    pub order: u32,
    #[serde(default)]
    pub frac: f64,
}

impl IncrementFactor {
    pub fn new(step: u32, season: u32, order: u32) -> Self {
        IncrementFactor { step, season, order, frac: 0.0 }
    }

    pub fn fractional(step: u32, season: u32, order: u32, frac: f64) -> Self {
        IncrementFactor { step, season, order, frac }
    }

    /// Effective lag `mu * s` of the factor.
    pub fn lag(&self) -> usize {
        self.step as usize * self.season as usize
    }

    /// Total differencing order `R + D`.
    pub fn total_order(&self) -> f64 {
        self.order as f64 + self.frac
    }
}

/// A GM increment specification: an ordered list of factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecDoc", into = "SpecDoc")]
pub struct IncrementSpec {
    factors: Vec<IncrementFactor>,
}

#[derive(Serialize, Deserialize)]
struct SpecDoc {
    factors: Vec<IncrementFactor>,
}

impl TryFrom<SpecDoc> for IncrementSpec {
    type Error = Error;
    fn try_from(doc: SpecDoc) -> Result<Self> {
        IncrementSpec::new(doc.factors)
    }
}

impl From<IncrementSpec> for SpecDoc {
    fn from(spec: IncrementSpec) -> SpecDoc {
        SpecDoc { factors: spec.factors }
    }
}

impl IncrementSpec {
    pub fn new(factors: Vec<IncrementFactor>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidSpec("at least one factor required".into()));
        }
        for f in &factors {
            if f.step < 1 || f.season < 1 {
                return Err(Error::InvalidSpec(format!(
                    "step and season must be >= 1, got ({}, {})",
                    f.step, f.season
                )));
            }
            if !(f.frac > -1.0 && f.frac < 1.0) {
                return Err(Error::InvalidSpec(format!(
                    "fractional order must lie in (-1, 1), got {}",
                    f.frac
                )));
            }
        }
        Ok(IncrementSpec { factors })
    }

    /// Convenience constructor from `(step, season, order)` triples.
    pub fn integer(triples: &[(u32, u32, u32)]) -> Result<Self> {
        IncrementSpec::new(triples.iter().map(|&(m, s, r)| IncrementFactor::new(m, s, r)).collect())
    }

    pub fn factors(&self) -> &[IncrementFactor] {
        &self.factors
    }

    /// Degree `n(gamma) = sum mu_i s_i R_i` of the integer-order expansion.
    pub fn degree(&self) -> usize {
        self.factors.iter().map(|f| f.lag() * f.order as usize).sum()
    }

    pub fn is_integer(&self) -> bool {
        self.factors.iter().all(|f| f.frac == 0.0)
    }

    pub fn has_fractional(&self) -> bool {
        !self.is_integer()
    }

    /// The spec with fractional orders dropped.
    pub fn integer_part(&self) -> IncrementSpec {
        IncrementSpec {
            factors: self
                .factors
                .iter()
                .map(|f| IncrementFactor::new(f.step, f.season, f.order))
                .collect(),
        }
    }

    /// The spec with integer orders dropped (fractional layer only); factors
    /// with zero fractional order are kept with order zero so the frequency
    /// bookkeeping is unchanged.
    pub fn fractional_part(&self) -> IncrementSpec {
        IncrementSpec {
            factors: self
                .factors
                .iter()
                .map(|f| IncrementFactor::fractional(f.step, f.season, 0, f.frac))
                .collect(),
        }
    }

    /// Smallest effective lag `min mu_i s_i`.
    pub fn min_lag(&self) -> usize {
        self.factors.iter().map(|f| f.lag()).min().unwrap_or(1)
    }

    /// Largest effective lag `max mu_i s_i`.
    pub fn max_lag(&self) -> usize {
        self.factors.iter().map(|f| f.lag()).max().unwrap_or(1)
    }

    pub fn all_unit_step(&self) -> bool {
        self.factors.iter().all(|f| f.step == 1)
    }

    /// Scale all seasons by `t` (scalar-time operator of a period-`t`
    /// blocked sequence).
    pub fn scale_seasons(&self, t: u32) -> IncrementSpec {
        IncrementSpec {
            factors: self
                .factors
                .iter()
                .map(|f| IncrementFactor { step: f.step, season: f.season * t, order: f.order, frac: f.frac })
                .collect(),
        }
    }
}

/// A truncated coefficient sequence together with an index offset and a bound
/// on the discarded absolute tail. `tail_bound == 0` exactly for finite
/// expansions; it is infinite when the tail is not absolutely summable (e.g.
/// the inverse expansion of an integrating operator).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSeries {
    pub values: Vec<f64>,
    pub offset: i64,
    pub tail_bound: f64,
}

impl CoefficientSeries {
    pub fn exact(values: Vec<f64>) -> Self {
        CoefficientSeries { values, offset: 0, tail_bound: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at absolute index `k` (zero outside the stored range).
    pub fn at(&self, k: i64) -> f64 {
        let i = k - self.offset;
        if i < 0 || i as usize >= self.values.len() {
            0.0
        } else {
            self.values[i as usize]
        }
    }

    /// Evaluate `sum_k c_k z^k` at `z = e^{-i lambda}`.
    pub fn eval_transfer(&self, lambda: f64) -> C64 {
        let z = Complex::from_polar(1.0, -lambda);
        let mut acc = Complex::new(0.0, 0.0);
        // Horner from the top
        for &v in self.values.iter().rev() {
            acc = acc * z + Complex::new(v, 0.0);
        }
        acc * z.powi(self.offset as i32)
    }

    /// Geometric-ratio bound on the discarded absolute tail, from the trailing
    /// coefficients, with a conservative factor of two. Infinite when the tail
    /// does not look summable.
    pub fn estimate_tail(values: &[f64]) -> f64 {
        let n = values.len();
        if n < 6 {
            return f64::INFINITY;
        }
        let tail: Vec<f64> = values[n - 6..].iter().map(|v| v.abs()).collect();
        let last = tail[5];
        if last == 0.0 {
            return 0.0;
        }
        let mut ratios = Vec::new();
        for w in tail.windows(2) {
            if w[0] > 0.0 {
                ratios.push(w[1] / w[0]);
            }
        }
        if ratios.is_empty() {
            return f64::INFINITY;
        }
        let r = ratios.iter().fold(0.0f64, |a, &b| a.max(b));
        if r >= 1.0 {
            return f64::INFINITY;
        }
        2.0 * last * r / (1.0 - r)
    }
}

/// Exact convolution of two integer coefficient vectors.
fn convolve_i128(a: &[i128], b: &[i128]) -> Vec<i128> {
    let mut out = vec![0i128; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn binomial_i128(n: u32, k: u32) -> i128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1i128;
    for j in 0..k {
        acc = acc * (n - j) as i128 / (j + 1) as i128;
    }
    acc
}

#[doc(hidden)]
pub fn tests_binomial(n: u32, k: u32) -> f64 {
    binomial_i128(n, k) as f64
}

/// Exact integer expansion of the operator: coefficients of
/// `prod_i (1 - x^{mu_i s_i})^{R_i}`.
pub fn expand_operator_exact(spec: &IncrementSpec) -> Result<Vec<i128>> {
    if !spec.is_integer() {
        return Err(Error::FractionalOrder);
    }
    let mut poly = vec![1i128];
    for f in spec.factors() {
        let lag = f.lag();
        // binomial expansion of (1 - x^lag)^R placed at stride `lag`
        let mut factor = vec![0i128; lag * f.order as usize + 1];
        for l in 0..=f.order {
            let sign = if l % 2 == 0 { 1 } else { -1 };
            factor[lag * l as usize] = sign * binomial_i128(f.order, l);
        }
        poly = convolve_i128(&poly, &factor);
    }
    Ok(poly)
}

/// `e_gamma(0..n(gamma))`: the expansion of the integer-order GM increment
/// operator. Exact; `tail_bound = 0`.
pub fn expand_operator(spec: &IncrementSpec) -> Result<CoefficientSeries> {
    let exact = expand_operator_exact(spec)?;
    Ok(CoefficientSeries::exact(exact.into_iter().map(|v| v as f64).collect()))
}

/// Exact inverse expansion `d_mu(0..len)`: coefficients of
/// `prod_i (sum_j x^{mu_i s_i j})^{R_i}` truncated at `len` (inclusive).
pub fn expand_inverse_exact(spec: &IncrementSpec, len: usize) -> Result<Vec<i128>> {
    if !spec.is_integer() {
        return Err(Error::FractionalOrder);
    }
    let mut poly = vec![0i128; len + 1];
    poly[0] = 1;
    for f in spec.factors() {
        let lag = f.lag();
        for _ in 0..f.order {
            // multiply by the comb series sum_j x^{lag*j}, truncated
            let mut out = vec![0i128; len + 1];
            for k in 0..=len {
                if poly[k] == 0 {
                    continue;
                }
                let mut idx = k;
                loop {
                    out[idx] += poly[k];
                    idx += lag;
                    if idx > len {
                        break;
                    }
                }
            }
            poly = out;
        }
    }
    Ok(poly)
}

/// `d_mu(0..len)` as a coefficient series. The discarded tail of an inverse
/// integrating expansion is not absolutely summable, so `tail_bound` is
/// infinite.
pub fn expand_inverse(spec: &IncrementSpec, len: usize) -> Result<CoefficientSeries> {
    let exact = expand_inverse_exact(spec, len)?;
    Ok(CoefficientSeries {
        values: exact.into_iter().map(|v| v as f64).collect(),
        offset: 0,
        tail_bound: f64::INFINITY,
    })
}

/// Frequencies `2 pi k / den` at which some factor of the spec vanishes,
/// together with the total (possibly fractional) order aggregated over the
/// factors vanishing there. Frequencies are reported in `[-pi, pi]` as exact
/// rationals of `2 pi`.
fn factor_zeros(spec: &IncrementSpec) -> Vec<(i64, i64, f64)> {
    // (num, den) reduced, order
    let mut zeros: Vec<(i64, i64, f64)> = Vec::new();
    for f in spec.factors() {
        let lag = f.lag() as i64;
        let half = lag / 2;
        for k in -half..=half {
            let g = gcd(k.unsigned_abs(), lag as u64) as i64;
            let (num, den) = if k == 0 { (0, 1) } else { (k / g, lag / g) };
            let ord = f.total_order();
            if let Some(entry) = zeros.iter_mut().find(|z| z.0 == num && z.1 == den) {
                entry.2 += ord;
            } else {
                zeros.push((num, den, ord));
            }
        }
    }
    zeros
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Distance-based test: is `lambda` within `tol` of the zero `2 pi num / den`
/// modulo `2 pi`?
fn near_zero_of(lambda: f64, num: i64, den: i64, tol: f64) -> bool {
    let nu = 2.0 * PI * num as f64 / den as f64;
    let mut d = (lambda - nu) % (2.0 * PI);
    if d > PI {
        d -= 2.0 * PI;
    }
    if d < -PI {
        d += 2.0 * PI;
    }
    d.abs() < tol
}

const ZERO_DETECT_TOL: f64 = 1e-12;

/// Evaluate `chi(e^{-i lambda}) = prod_j (1 - e^{-i lambda mu_j s_j})^{R_j + D_j}`
/// on the principal branch.
///
/// Each factor is normalized as `2 sin(theta/2) e^{i (pi - theta)/2}` with
/// `theta = lambda mu s` reduced modulo `2 pi`, which keeps arguments inside
/// the principal branch before powering. At a zero of a factor the result is
/// exactly zero when the total order of the vanishing factors is positive;
/// a negative total order signals a singular evaluation.
pub fn eval_chi(spec: &IncrementSpec, lambda: f64) -> Result<C64> {
    // aggregate order at a zero hit, if any
    let mut vanish_order = 0.0f64;
    let mut vanished = false;
    for f in spec.factors() {
        if f.total_order() == 0.0 {
            continue;
        }
        let theta = lambda * f.lag() as f64;
        let t = theta / (2.0 * PI);
        if (t - t.round()).abs() < ZERO_DETECT_TOL / (2.0 * PI) * f.lag() as f64
            || (t - t.round()).abs() * 2.0 * PI < ZERO_DETECT_TOL
        {
            vanished = true;
            vanish_order += f.total_order();
        }
    }
    if vanished {
        if vanish_order > 0.0 {
            return Ok(Complex::new(0.0, 0.0));
        }
        return Err(Error::SingularEvaluation { lambda, order: vanish_order });
    }
    let mut acc = Complex::new(1.0, 0.0);
    for f in spec.factors() {
        let d = f.total_order();
        if d == 0.0 {
            continue;
        }
        let theta = lambda * f.lag() as f64;
        // reduce to [0, 2pi)
        let theta = theta.rem_euclid(2.0 * PI);
        let r = 2.0 * (theta / 2.0).sin();
        let phase = (PI - theta) / 2.0;
        if f.frac == 0.0 {
            acc *= Complex::from_polar(r, phase).powi(f.order as i32);
        } else {
            acc *= Complex::from_polar(r.powf(d), phase * d);
        }
    }
    Ok(acc)
}

/// Evaluate `beta(i lambda) = prod_j prod_{k=-[s_j/2]}^{[s_j/2]}
/// (i lambda - 2 pi i k / s_j)^{R_j + D_j}` on the principal branch.
///
/// At a grid frequency the result is exactly zero for positive order; a
/// negative order signals a singular evaluation.
pub fn eval_beta(spec: &IncrementSpec, lambda: f64) -> Result<C64> {
    let mut acc = Complex::new(1.0, 0.0);
    for f in spec.factors() {
        let d = f.total_order();
        let s = f.season as i64;
        let half = s / 2;
        for k in -half..=half {
            let x = lambda - 2.0 * PI * k as f64 / s as f64;
            if x.abs() < ZERO_DETECT_TOL {
                if d > 0.0 {
                    return Ok(Complex::new(0.0, 0.0));
                }
                if d < 0.0 {
                    return Err(Error::SingularEvaluation { lambda, order: d });
                }
                continue;
            }
            if d == 0.0 {
                continue;
            }
            // (i x)^d, principal branch: |x|^d e^{i d (pi/2) sign(x)}
            let term = Complex::from_polar(x.abs().powf(d), d * 0.5 * PI * x.signum());
            acc *= term;
        }
    }
    Ok(acc)
}

/// `|chi|^2 / |beta|^2` for the integer part of a spec, computed factor-safe.
///
/// Shared zeros of `chi` and `beta` cancel to matching degree when all steps
/// are one; within `1e-9` of such a zero the evaluation point is nudged off
/// the zero, which costs an error of the order of the nudge times the local
/// derivative and keeps the ratio finite.
pub fn chi_over_beta_sq(spec: &IncrementSpec, lambda: f64) -> f64 {
    let ispec = spec.integer_part();
    let zeros = factor_zeros(&ispec);
    let mut lam = lambda;
    for &(num, den, _) in &zeros {
        if near_zero_of(lam, num, den, 1e-9) {
            lam += 1e-7;
        }
    }
    let mut num = 1.0f64;
    for f in ispec.factors() {
        let theta = lam * f.lag() as f64;
        let s = 2.0 * (theta / 2.0).sin();
        num *= (s * s).powi(f.order as i32);
    }
    let mut den = 1.0f64;
    for f in ispec.factors() {
        let s = f.season as i64;
        let half = s / 2;
        for k in -half..=half {
            let x = lam - 2.0 * PI * k as f64 / s as f64;
            den *= (x * x).powi(f.order as i32);
        }
    }
    num / den
}

/// `|beta|^2 / |chi|^2` for the integer part of a spec (reciprocal of
/// [`chi_over_beta_sq`]).
pub fn beta_over_chi_sq(spec: &IncrementSpec, lambda: f64) -> f64 {
    1.0 / chi_over_beta_sq(spec, lambda)
}

/// Squared modulus of the fractional layer,
/// `|chi^{(D)}(e^{-i lambda})|^2 = prod_j (2 |sin(lambda s_j / 2)|)^{2 D_j}`.
///
/// The steps are taken as one (the fractional layer is only defined for unit
/// steps); factors with `D_j = 0` contribute nothing.
pub fn fractional_chi_sq(spec: &IncrementSpec, lambda: f64) -> f64 {
    let mut acc = 1.0f64;
    for f in spec.factors() {
        if f.frac == 0.0 {
            continue;
        }
        let theta = lambda * f.season as f64;
        let s = 2.0 * (theta / 2.0).sin().abs();
        acc *= s.powf(2.0 * f.frac);
    }
    acc
}

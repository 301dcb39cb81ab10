//! Fractional (Gegenbauer) layer of the increment algebra.
//!
//! The fractional part of a unit-step spec factors over a finite set of
//! frequencies `nu = 2 pi k / s` into elementary filters
//! `(1 - 2 cos(nu) B + B^2)^{D~_nu}`, whose inverse expansions are Gegenbauer
//! polynomial series. Aggregated per-frequency orders decide stationarity,
//! long memory and invertibility.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::increment::{CoefficientSeries, IncrementSpec};

/// One spectral frequency of the fractional layer, kept as an exact rational
/// multiple of `2 pi` so set membership is decided without floating error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyOrder {
    /// Numerator of `nu / (2 pi)` in lowest terms.
    pub num: u32,
    /// Denominator of `nu / (2 pi)` in lowest terms.
    pub den: u32,
    /// `nu` in radians, in `[0, pi]`.
    pub nu: f64,
    /// Aggregated order `D_nu = sum_j D_j 1{nu in M_j}`.
    pub total_order: f64,
    /// `D~_nu`: halved at `nu = 0` and `nu = pi`, equal to `D_nu` otherwise.
    pub halved_order: f64,
}

impl FrequencyOrder {
    pub fn is_endpoint(&self) -> bool {
        // nu = 0 or nu = pi
        (self.num == 0 && self.den == 1) || (self.num == 1 && self.den == 2)
    }

    pub fn cos_nu(&self) -> f64 {
        if self.num == 0 {
            1.0
        } else if 2 * self.num == self.den {
            -1.0
        } else {
            self.nu.cos()
        }
    }
}

/// The union of the per-factor frequency sets with aggregated orders, sorted
/// by frequency.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencySet {
    pub frequencies: Vec<FrequencyOrder>,
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Build the frequency set of a spec: the union over factors of
/// `{2 pi k / s_j : 0 <= k <= floor(s_j / 2)}` with per-frequency aggregated
/// fractional orders.
pub fn frequency_set(spec: &IncrementSpec) -> FrequencySet {
    let mut freqs: Vec<FrequencyOrder> = Vec::new();
    for f in spec.factors() {
        let s = f.season;
        for k in 0..=s / 2 {
            let g = if k == 0 { s } else { gcd(k, s) };
            let (num, den) = (k / g.max(1), s / g.max(1));
            let (num, den) = if k == 0 { (0, 1) } else { (num, den) };
            if !freqs.iter().any(|q| q.num == num && q.den == den) {
                freqs.push(FrequencyOrder {
                    num,
                    den,
                    nu: 2.0 * PI * num as f64 / den as f64,
                    total_order: 0.0,
                    halved_order: 0.0,
                });
            }
        }
    }
    // aggregate: nu = 2 pi num/den belongs to M_j iff den divides s_j
    for q in freqs.iter_mut() {
        for f in spec.factors() {
            if f.season % q.den == 0 {
                q.total_order += f.frac;
            }
        }
        q.halved_order = if q.is_endpoint() { q.total_order / 2.0 } else { q.total_order };
    }
    freqs.sort_by(|a, b| a.nu.partial_cmp(&b.nu).unwrap());
    FrequencySet { frequencies: freqs }
}

impl FrequencySet {
    pub fn order_at(&self, num: u32, den: u32) -> Option<f64> {
        let g = gcd(num.max(1), den);
        let (num, den) = if num == 0 { (0, 1) } else { (num / g, den / g) };
        self.frequencies.iter().find(|q| q.num == num && q.den == den).map(|q| q.total_order)
    }
}

/// Gegenbauer polynomial value `C_n^{(d)}(u)`.
///
/// Interior `|u| < 1` uses the three-term recurrence
/// `n C_n = 2u (n + d - 1) C_{n-1} - (n + 2d - 2) C_{n-2}`; at `u = +-1`,
/// where the recurrence cancels badly, the closed form
/// `C_n^{(d)}(1) = rising(2d, n) / n!` applies (and `C_n^{(d)}(-1)` is its
/// alternating twin).
pub fn gegenbauer_coeff(d: f64, u: f64, n: usize) -> f64 {
    if u == 1.0 || u == -1.0 {
        let mut c = 1.0f64;
        for k in 1..=n {
            c *= (2.0 * d + k as f64 - 1.0) / k as f64;
        }
        return if u < 0.0 && n % 2 == 1 { -c } else { c };
    }
    match n {
        0 => 1.0,
        1 => 2.0 * d * u,
        _ => {
            let mut c_prev = 1.0;
            let mut c = 2.0 * d * u;
            for m in 2..=n {
                let mf = m as f64;
                let next = (2.0 * u * (mf + d - 1.0) * c - (mf + 2.0 * d - 2.0) * c_prev) / mf;
                c_prev = c;
                c = next;
            }
            c
        }
    }
}

/// First `len + 1` Gegenbauer coefficients `C_0..C_len` for fixed `(d, u)`.
fn gegenbauer_series(d: f64, u: f64, len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len + 1);
    if u == 1.0 || u == -1.0 {
        let mut c = 1.0f64;
        out.push(c);
        for k in 1..=len {
            c *= (2.0 * d + k as f64 - 1.0) / k as f64;
            out.push(if u < 0.0 && k % 2 == 1 { -c } else { c });
        }
        return out;
    }
    out.push(1.0);
    if len == 0 {
        return out;
    }
    out.push(2.0 * d * u);
    for m in 2..=len {
        let mf = m as f64;
        let next = (2.0 * u * (mf + d - 1.0) * out[m - 1] - (mf + 2.0 * d - 2.0) * out[m - 2]) / mf;
        out.push(next);
    }
    out
}

/// Sign of a fractional expansion: `Plus` expands the inverse filter
/// `prod (1 - 2 cos nu B + B^2)^{-D~_nu}`, `Minus` the filter itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GiSign {
    Plus,
    Minus,
}

/// Fractional filter coefficients `G+` / `G-` of the spec's fractional layer,
/// computed by sequential convolution of the per-frequency Gegenbauer series.
///
/// `conv(G+, G-)` is the unit impulse as a formal power series, exactly on
/// every index covered by the truncation.
pub fn gi_coefficients(spec: &IncrementSpec, sign: GiSign, len: usize) -> CoefficientSeries {
    let fs = frequency_set(spec);
    let mut out = vec![0.0f64; len + 1];
    out[0] = 1.0;
    for q in &fs.frequencies {
        let d = match sign {
            GiSign::Plus => q.halved_order,
            GiSign::Minus => -q.halved_order,
        };
        if d == 0.0 {
            continue;
        }
        let series = gegenbauer_series(d, q.cos_nu(), len);
        // truncated convolution in place
        let mut next = vec![0.0f64; len + 1];
        for (i, &a) in out.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in series.iter().enumerate() {
                if i + j > len {
                    break;
                }
                next[i + j] += a * b;
            }
        }
        out = next;
    }
    let tail = CoefficientSeries::estimate_tail(&out);
    CoefficientSeries { values: out, offset: 0, tail_bound: tail }
}

/// Per-frequency and overall stationarity verdicts for the fractional layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StationarityReport {
    pub frequencies: Vec<FrequencyVerdict>,
    pub stationary: bool,
    pub long_memory: bool,
    pub invertible: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrequencyVerdict {
    pub nu: f64,
    pub total_order: f64,
    pub stationary: bool,
    pub long_memory: bool,
    pub invertible: bool,
}

/// Classify the fractional layer: stationary iff `-1/2 < D_nu < 1/2` at every
/// frequency, long memory iff `0 < D_nu < 1/2` somewhere, invertible iff
/// `-1/2 < D_nu < 0` wherever a fractional order is present (frequencies with
/// `D_nu = 0` have no fractional content and are counted as vacuously
/// invertible).
pub fn classify_stationarity(spec: &IncrementSpec) -> StationarityReport {
    let fs = frequency_set(spec);
    let verdicts: Vec<FrequencyVerdict> = fs
        .frequencies
        .iter()
        .map(|q| {
            let d = q.total_order;
            FrequencyVerdict {
                nu: q.nu,
                total_order: d,
                stationary: d > -0.5 && d < 0.5,
                long_memory: d > 0.0 && d < 0.5,
                invertible: d > -0.5 && d < 0.0,
            }
        })
        .collect();
    let stationary = verdicts.iter().all(|v| v.stationary);
    let long_memory = verdicts.iter().any(|v| v.long_memory);
    let invertible = verdicts.iter().all(|v| v.invertible || v.total_order == 0.0);
    StationarityReport { frequencies: verdicts, stationary, long_memory, invertible }
}

//! Forecasting of linear functionals of unobserved values from observations
//! at negative block indices.
//!
//! A target functional `A xi = sum_{k>=0} a(k)' xi(k)` is first lifted onto
//! the observed increments: `A xi = B chi xi - V xi` with
//! `b(k) = sum_{m>=k} d(m-k) a(m)` and
//! `v(k) = sum_{l=0}^{k+n} e(l-k) b(l)`, `k = -n..-1`. The optimal estimate
//! is then obtained either by solving the operator equation `F c = b` built
//! from Fourier coefficients of the inverse weighted density (classical
//! route), or directly from the canonical factor (factorized route). Either
//! way the solution is reduced to time-domain predictor weights `s(k)`
//! applied to past increments plus the initial-value weights `v(k)`.

use num_complex::Complex;

use crate::blocking::{resolve_weights, FunctionalWeights, VectorSeries};
use crate::config;
use crate::error::{Error, Result};
use crate::increment::{expand_inverse, expand_operator, IncrementSpec};
use crate::linalg::{dot_re, C64};
use crate::spectral::{
    fourier_coeffs, invert_factor, minimality_check, mu_factor, FourierBlock, QuadConfig,
    SpectralModel,
};

/// Horizon of the target functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Horizon {
    Finite(usize),
    Infinite,
}

/// Target weights lifted onto increments and initial values.
#[derive(Clone, Debug)]
pub struct LiftedFunctional {
    pub spec: IncrementSpec,
    pub dim: usize,
    /// Target rows `a(0..H)`.
    pub target: Vec<Vec<f64>>,
    /// Lifted rows `b(0..H)`.
    pub lifted: Vec<Vec<f64>>,
    /// Initial-value rows `v(-n..-1)`; index `i` holds `v(-n + i)`.
    pub initial: Vec<Vec<f64>>,
    /// `Some(n)` for the finite-horizon variant.
    pub horizon: Option<usize>,
    /// Geometric decay ratio of the rows past the materialized horizon.
    pub geometric_ratio: Option<f64>,
    /// Certified bound on the discarded weight tail.
    pub tail_bound: f64,
}

impl LiftedFunctional {
    pub fn degree(&self) -> usize {
        self.spec.degree()
    }

    /// Initial-value row at block index `k` in `-n..=-1`.
    pub fn initial_at(&self, k: i64) -> &[f64] {
        let n = self.spec.degree() as i64;
        &self.initial[(k + n) as usize]
    }

    /// Last index with a nonzero lifted row.
    pub fn lifted_support(&self) -> usize {
        self.lifted
            .iter()
            .rposition(|row| row.iter().any(|&v| v != 0.0))
            .unwrap_or(0)
    }
}

/// Closed form `S_d(r) = sum_j d(j) r^j = prod_i (1 - r^{mu_i s_i})^{-R_i}`.
fn inverse_generating(spec: &IncrementSpec, r: f64) -> f64 {
    spec.factors()
        .iter()
        .map(|f| (1.0 - r.powi(f.lag() as i32)).powi(-(f.order as i32)))
        .product()
}

/// Lift functional weights onto increments and initial values.
///
/// Finite horizons cap both sums at `N` (rows past the supplied weights are
/// zero). Infinite horizons require finite-support weights or a geometric
/// family, whose rows are exact: `b(k) = r^k S_d(r) base`.
pub fn lift_functional(
    spec: &IncrementSpec,
    weights: &FunctionalWeights,
    dim: usize,
    horizon: Horizon,
) -> Result<LiftedFunctional> {
    let ispec = spec.integer_part();
    let n = ispec.degree();
    if let (Horizon::Infinite, FunctionalWeights::Geometric { ratio, .. }) = (horizon, weights) {
        if !(*ratio > 0.0 && *ratio < 1.0) {
            return Err(Error::MissingDecayCertificate);
        }
    }
    let blocked = resolve_weights(weights, dim, config::TRUNCATION_EPS)?;
    let mut target = blocked.rows.clone();
    match horizon {
        Horizon::Finite(h) => {
            target.truncate(h + 1);
            while target.len() < h + 1 {
                target.push(vec![0.0; dim]);
            }
        }
        Horizon::Infinite => {
            // the v-sum reads b(0 .. n-1): keep enough rows materialized
            while target.len() < n {
                target.push(vec![0.0; dim]);
            }
        }
    }
    let h = target.len() - 1;
    let d = expand_inverse(&ispec, h)?;
    let mut lifted = vec![vec![0.0; dim]; h + 1];
    match (horizon, weights, blocked.geometric_ratio) {
        (Horizon::Infinite, FunctionalWeights::Geometric { base, ratio }, _) => {
            // exact rows past any truncation
            let s_d = inverse_generating(&ispec, *ratio);
            for (k, row) in lifted.iter_mut().enumerate() {
                let scale = ratio.powi(k as i32) * s_d;
                for p in 0..dim {
                    row[p] = scale * base[p];
                }
            }
        }
        _ => {
            for k in 0..=h {
                for m in k..=h {
                    let dv = d.values[m - k];
                    if dv == 0.0 {
                        continue;
                    }
                    for p in 0..dim {
                        lifted[k][p] += dv * target[m][p];
                    }
                }
            }
        }
    }
    let e = expand_operator(&ispec)?;
    let mut initial = vec![vec![0.0; dim]; n];
    for (i, row) in initial.iter_mut().enumerate() {
        let k = i as i64 - n as i64; // k = -n..-1
        let l_max = match horizon {
            Horizon::Finite(nn) => (k + n as i64).min(nn as i64),
            Horizon::Infinite => k + n as i64,
        };
        for l in 0..=l_max.max(-1) {
            let ev = e.values[(l - k) as usize];
            if ev == 0.0 {
                continue;
            }
            for p in 0..dim {
                row[p] += ev * lifted[l as usize][p];
            }
        }
    }
    Ok(LiftedFunctional {
        spec: spec.clone(),
        dim,
        target,
        lifted,
        initial,
        horizon: match horizon {
            Horizon::Finite(h) => Some(h),
            Horizon::Infinite => None,
        },
        geometric_ratio: blocked.geometric_ratio,
        tail_bound: blocked.tail_bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Classical,
    Factorized,
}

/// Solver tunables; defaults come from [`config`].
#[derive(Clone, Copy, Debug)]
pub struct SolveConfig {
    /// Truncation index of the operator equation (classical route).
    pub lags: usize,
    pub quad: QuadConfig,
    /// Number of time-domain predictor weights kept.
    pub predictor_len: usize,
    /// Truncation of the canonical factor series (factorized route).
    pub factor_len: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            lags: config::DEFAULT_LAGS,
            quad: QuadConfig::default(),
            predictor_len: config::DEFAULT_PREDICTOR_LEN,
            factor_len: 192,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub condition: Option<f64>,
    pub quad_error: Option<f64>,
    pub truncation_bound: f64,
    /// Largest imaginary residue discarded when realifying predictor weights.
    pub imag_residual: f64,
}

/// A solved forecasting problem, self-contained for application and
/// validation.
#[derive(Clone, Debug)]
pub struct ForecastSolution {
    pub method: Method,
    pub spec: IncrementSpec,
    pub dim: usize,
    /// Theoretical mean square error.
    pub mse: f64,
    /// Predictor weights `s(k)` on past increments; row `i` holds `s(i + 1)`.
    pub predictor: Vec<Vec<f64>>,
    /// Initial-value weights `v(-n..-1)`; index `i` holds `v(-n + i)`.
    pub initial: Vec<Vec<f64>>,
    /// Target rows, kept for Monte Carlo validation.
    pub target: Vec<Vec<f64>>,
    /// Classical: solved coefficients `c(k)`; factorized: the `r` stack.
    pub coefficients: Vec<Vec<C64>>,
    pub diagnostics: Diagnostics,
}

fn rows_to_c64(rows: &[Vec<f64>], dim: usize, blocks: usize) -> Vec<C64> {
    let mut out = vec![Complex::new(0.0, 0.0); blocks * dim];
    for (k, row) in rows.iter().enumerate().take(blocks) {
        for p in 0..dim {
            out[k * dim + p] = Complex::new(row[p], 0.0);
        }
    }
    out
}

/// Classical route: solve the truncated operator equation `F c = b` and
/// recover predictor weights from the spectral characteristic.
pub fn solve_classical(
    model: &SpectralModel,
    lifted: &LiftedFunctional,
    cfg: &SolveConfig,
) -> Result<ForecastSolution> {
    let t = model.dim;
    if lifted.dim != t {
        return Err(Error::InvalidModel("functional and model dimension differ".into()));
    }
    let minimality = minimality_check(model, &cfg.quad)?;
    if !minimality.minimal {
        return Err(Error::InvalidModel("spectral density violates the minimality condition".into()));
    }
    let k = cfg.lags;
    let support = lifted.lifted_support();
    if support > k {
        return Err(Error::TruncationTooShort(format!(
            "lifted weights extend to index {support}, beyond the truncation {k}"
        )));
    }
    if let Some(r) = lifted.geometric_ratio {
        let tail_at_k = r.powi(k as i32 + 1) / (1.0 - r);
        if tail_at_k > 1e-9 {
            return Err(Error::TruncationTooShort(format!(
                "geometric weight tail {tail_at_k:.3e} above 1e-9 at truncation {k}"
            )));
        }
    }
    let fb = fourier_coeffs(model, k, &cfg.quad)?;
    let rhs = rows_to_c64(&lifted.lifted, t, k + 1);
    let bt = fb.toeplitz(k + 1);
    let (c, cond) = bt.solve(&rhs)?;
    if cond > config::COND_LIMIT {
        return Err(Error::IllConditioned { cond, limit: config::COND_LIMIT });
    }
    let mse = dot_re(&rhs, &c).max(0.0);
    let (predictor, imag) = classical_predictor_weights(model, &fb, &c, t, cfg.predictor_len)?;
    let coefficients: Vec<Vec<C64>> = c.chunks(t).map(|ch| ch.to_vec()).collect();
    Ok(ForecastSolution {
        method: Method::Classical,
        spec: model.spec.clone(),
        dim: t,
        mse,
        predictor,
        initial: lifted.initial.clone(),
        target: lifted.target.clone(),
        coefficients,
        diagnostics: Diagnostics {
            condition: Some(cond),
            quad_error: Some(fb.est_error),
            truncation_bound: lifted.tail_bound,
            imag_residual: imag,
        },
    })
}

/// `s(k) = -(1/2pi) int conj(g(lambda)) C(e^{i lambda}) e^{i lambda k}
/// dlambda`, `k >= 1`, by quadrature on the model grid.
fn classical_predictor_weights(
    model: &SpectralModel,
    fb: &FourierBlock,
    c: &[C64],
    t: usize,
    s_len: usize,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let n = fb.grid;
    let blocks = c.len() / t;
    let mut acc = vec![vec![Complex::new(0.0, 0.0); t]; s_len];
    for j in 0..n {
        let lam = crate::spectral::grid_node(j, n);
        let g = model.fourier_integrand(lam)?;
        // C(e^{i lambda})
        let rot = Complex::from_polar(1.0, lam);
        let mut ph = Complex::new(1.0, 0.0);
        let mut cvec = vec![Complex::new(0.0, 0.0); t];
        for b in 0..blocks {
            for p in 0..t {
                cvec[p] += c[b * t + p] * ph;
            }
            ph *= rot;
        }
        // conj(g) * C
        let mut gc = vec![Complex::new(0.0, 0.0); t];
        for r in 0..t {
            let mut s = Complex::new(0.0, 0.0);
            for q in 0..t {
                s += g[(r, q)].conj() * cvec[q];
            }
            gc[r] = s;
        }
        let mut ph_k = rot; // e^{i lambda * 1}
        let scale = -1.0 / n as f64;
        for row in acc.iter_mut() {
            for p in 0..t {
                row[p] += gc[p] * ph_k * scale;
            }
            ph_k *= rot;
        }
    }
    let mut imag: f64 = 0.0;
    let predictor = acc
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|z| {
                    imag = imag.max(z.im.abs());
                    z.re
                })
                .collect()
        })
        .collect();
    Ok((predictor, imag))
}

/// Factorized route: `r(k) = sum_m sum_{l>=k} phi_mu(m)' a(m+l) d(l-k)`,
/// `Delta = sum_k ||r(k)||^2`, predictor weights
/// `s(m) = -sum_k psi(m+k)' r(k)`.
pub fn solve_factorized(
    model: &SpectralModel,
    lifted: &LiftedFunctional,
    cfg: &SolveConfig,
) -> Result<ForecastSolution> {
    let t = model.dim;
    if lifted.dim != t {
        return Err(Error::InvalidModel("functional and model dimension differ".into()));
    }
    let factor = mu_factor(model, cfg.factor_len)?;
    let ispec = model.spec.integer_part();
    let h = lifted.target.len() - 1;
    let d = expand_inverse(&ispec, h)?;

    // u(j) = sum_m phi(m)' a(m + j)
    let mut u = vec![vec![Complex::new(0.0, 0.0); t]; h + 1];
    for (j, slot) in u.iter_mut().enumerate() {
        for (m, phi_m) in factor.phi.iter().enumerate() {
            if m + j > h {
                break;
            }
            let a_row = &lifted.target[m + j];
            for col in 0..t {
                let mut s = Complex::new(0.0, 0.0);
                for row in 0..t {
                    s += phi_m[(row, col)] * a_row[row];
                }
                slot[col] += s;
            }
        }
    }
    // r(k) = sum_{j>=0} d(j) u(k + j)
    let mut r = vec![vec![Complex::new(0.0, 0.0); t]; h + 1];
    for (k, slot) in r.iter_mut().enumerate() {
        for j in 0..=(h - k) {
            let dv = d.values[j];
            if dv == 0.0 {
                continue;
            }
            for p in 0..t {
                slot[p] += u[k + j][p] * dv;
            }
        }
    }
    let mse: f64 = r.iter().flatten().map(|z| z.norm_sqr()).sum();

    let psi_len = cfg.predictor_len + h + 1;
    let psi = invert_factor(&factor.phi, psi_len)?;
    let mut imag: f64 = 0.0;
    let mut predictor = Vec::with_capacity(cfg.predictor_len);
    for m in 1..=cfg.predictor_len {
        let mut row = vec![0.0; t];
        for (k, rk) in r.iter().enumerate() {
            if m + k > psi_len {
                break;
            }
            let psim = &psi[m + k];
            for p in 0..t {
                let mut s = Complex::new(0.0, 0.0);
                for q in 0..t {
                    s += psim[(q, p)] * rk[q];
                }
                imag = imag.max(s.im.abs());
                row[p] -= s.re;
            }
        }
        predictor.push(row);
    }
    Ok(ForecastSolution {
        method: Method::Factorized,
        spec: model.spec.clone(),
        dim: t,
        mse,
        predictor,
        initial: lifted.initial.clone(),
        target: lifted.target.clone(),
        coefficients: r,
        diagnostics: Diagnostics {
            condition: None,
            quad_error: None,
            truncation_bound: lifted.tail_bound + factor.tail_bound,
            imag_residual: imag,
        },
    })
}

/// Forecast of the single value `xi_p(n_ahead)` (component `p`, zero-based).
///
/// When the model is in moving-average form and every effective lag exceeds
/// `n_ahead`, the factorized shortcut applies: the error is the first
/// `n_ahead + 1` innovation terms. Otherwise this falls back to the
/// classical route with impulse weights.
pub fn forecast_value(
    model: &SpectralModel,
    n_ahead: usize,
    p: usize,
    cfg: &SolveConfig,
) -> Result<ForecastSolution> {
    let t = model.dim;
    if p >= t {
        return Err(Error::InvalidModel(format!("component {p} out of range for dimension {t}")));
    }
    let mut rows = vec![vec![0.0; t]; n_ahead + 1];
    rows[n_ahead][p] = 1.0;
    let weights = FunctionalWeights::Blocked { rows };
    let lifted = lift_functional(&model.spec, &weights, t, Horizon::Finite(n_ahead))?;
    if model.is_ma() && model.spec.min_lag() > n_ahead {
        let factor = mu_factor(model, cfg.factor_len.max(cfg.predictor_len + n_ahead + 1))?;
        let mse: f64 = factor.phi[..=n_ahead.min(factor.phi.len() - 1)]
            .iter()
            .map(|m| (0..t).map(|j| m[(p, j)].norm_sqr()).sum::<f64>())
            .sum();
        let psi = invert_factor(&factor.phi, cfg.predictor_len)?;
        let mut predictor = Vec::with_capacity(cfg.predictor_len);
        let mut imag: f64 = 0.0;
        for k in 1..=cfg.predictor_len {
            let mut row = vec![0.0; t];
            for b in 0..k.min(psi.len()) {
                let a_idx = n_ahead + k - b;
                if a_idx >= factor.phi.len() {
                    continue;
                }
                // (psi(b)' phi(a)') delta_p, component q
                let phi_a = &factor.phi[a_idx];
                for q in 0..t {
                    let mut s = Complex::new(0.0, 0.0);
                    for m in 0..t {
                        s += psi[b][(m, q)] * phi_a[(p, m)];
                    }
                    imag = imag.max(s.im.abs());
                    row[q] += s.re;
                }
            }
            predictor.push(row);
        }
        return Ok(ForecastSolution {
            method: Method::Factorized,
            spec: model.spec.clone(),
            dim: t,
            mse,
            predictor,
            initial: lifted.initial.clone(),
            target: lifted.target.clone(),
            coefficients: Vec::new(),
            diagnostics: Diagnostics {
                truncation_bound: factor.tail_bound,
                ..Default::default()
            },
        });
    }
    solve_classical(model, &lifted, cfg)
}

/// Apply a solved predictor to observed history: the history must end at
/// block index `-1` and reach far enough back for the predictor weights and
/// the initial values.
pub fn apply_predictor(solution: &ForecastSolution, history: &VectorSeries) -> Result<f64> {
    if history.dim() != solution.dim {
        return Err(Error::InvalidModel("history dimension mismatch".into()));
    }
    if history.end() != -1 {
        return Err(Error::Misaligned(format!(
            "history must end at block index -1, ends at {}",
            history.end()
        )));
    }
    let n = solution.spec.degree();
    let e = expand_operator(&solution.spec.integer_part())?;
    let needed = solution.predictor.len() + n;
    if history.len() < needed {
        return Err(Error::InsufficientHistory { needed, have: history.len() });
    }
    let t = solution.dim;
    let mut acc = 0.0;
    for (i, s_row) in solution.predictor.iter().enumerate() {
        let k = (i + 1) as i64;
        // chi xi(-k) = sum_j e(j) xi(-k - j)
        for (j, &ev) in e.values.iter().enumerate() {
            if ev == 0.0 {
                continue;
            }
            let row = history.row(-k - j as i64).unwrap();
            for p in 0..t {
                acc += s_row[p] * ev * row[p];
            }
        }
    }
    for (i, v_row) in solution.initial.iter().enumerate() {
        let k = i as i64 - n as i64;
        let row = history.row(k).unwrap();
        for p in 0..t {
            acc -= v_row[p] * row[p];
        }
    }
    Ok(acc)
}

/// Forecast a functional of the scalar (unblocked) sequence: weights are
/// blocked over the model dimension and solved on the vector path. The
/// factorized route is preferred when the model is in moving-average form.
pub fn forecast_scalar_functional(
    model: &SpectralModel,
    weights: &FunctionalWeights,
    horizon: Horizon,
    cfg: &SolveConfig,
) -> Result<ForecastSolution> {
    let lifted = lift_functional(&model.spec, weights, model.dim, horizon)?;
    if model.is_ma() {
        solve_factorized(model, &lifted, cfg)
    } else {
        solve_classical(model, &lifted, cfg)
    }
}

/// Forecast the single scalar value `zeta(m_scalar)`, `m_scalar >= 0`, via
/// the blocking identity `zeta(m) = xi_{m mod T}(m div T)`.
pub fn forecast_scalar_value(model: &SpectralModel, m_scalar: usize, cfg: &SolveConfig) -> Result<ForecastSolution> {
    let t = model.dim;
    forecast_value(model, m_scalar / t, m_scalar % t, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocking::block;
    use crate::blocking::ScalarSeries;
    use crate::linalg::CMat;
    use crate::models;
    use crate::simulate::rng::SplitMix64;

    fn rand_spec(rng: &mut SplitMix64) -> IncrementSpec {
        let r = 1 + (rng.next_u64() % 2) as usize;
        let mut factors = Vec::new();
        for _ in 0..r {
            let mu = 1 + (rng.next_u64() % 2) as u32;
            let s = 1 + (rng.next_u64() % 3) as u32;
            let order = 1 + (rng.next_u64() % 2) as u32;
            factors.push(crate::increment::IncrementFactor::new(mu, s, order));
        }
        IncrementSpec::new(factors).unwrap()
    }

    #[test]
    fn representation_identity_on_random_paths() {
        let mut rng = SplitMix64::new(314159);
        for case in 0..200 {
            let spec = rand_spec(&mut rng);
            let t = 1 + (rng.next_u64() % 3) as usize;
            let n = spec.degree();
            let horizon = (rng.next_u64() % 6) as usize;
            let rows: Vec<Vec<f64>> = (0..=horizon)
                .map(|_| (0..t).map(|_| 2.0 * rng.next_f64() - 1.0).collect())
                .collect();
            let weights = FunctionalWeights::Blocked { rows: rows.clone() };
            let lifted = lift_functional(&spec, &weights, t, Horizon::Finite(horizon)).unwrap();

            // random path over block indices -n .. horizon
            let path: Vec<Vec<f64>> = (0..(n + horizon + 1))
                .map(|_| (0..t).map(|_| 2.0 * rng.next_f64() - 1.0).collect())
                .collect();
            let series = VectorSeries::new(path.clone(), -(n as i64)).unwrap();

            let a_direct: f64 = rows
                .iter()
                .enumerate()
                .map(|(m, row)| {
                    let x = series.row(m as i64).unwrap();
                    row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum();

            let inc = crate::blocking::gm_increment(&series, &spec.integer_part()).unwrap();
            let b_sum: f64 = lifted
                .lifted
                .iter()
                .enumerate()
                .map(|(k, row)| {
                    let x = inc.row(k as i64).unwrap();
                    row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum();
            let v_sum: f64 = (0..n)
                .map(|i| {
                    let k = i as i64 - n as i64;
                    let x = series.row(k).unwrap();
                    lifted.initial[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
                })
                .sum();
            let recon = b_sum - v_sum;
            assert!(
                (a_direct - recon).abs() <= 1e-10 * (1.0 + a_direct.abs()),
                "case {case}: {a_direct} vs {recon} for {spec:?}"
            );
        }
    }

    #[test]
    fn lift_discounted_functional_closed_form() {
        // discounted weights over T = 4, rho = 0.5, spec (1 - B)
        let t = 4usize;
        let rho: f64 = 0.5;
        let spec = IncrementSpec::integer(&[(1, 1, 1)]).unwrap();
        let base: Vec<f64> = (1..=t).map(|p| rho.powi(p as i32)).collect();
        let ratio = rho.powi(t as i32);
        let weights = FunctionalWeights::Geometric { base: base.clone(), ratio };
        let lifted = lift_functional(&spec, &weights, t, Horizon::Infinite).unwrap();
        let scale = 1.0 / (1.0 - ratio);
        for (m, row) in lifted.lifted.iter().enumerate() {
            for p in 0..t {
                let want = ratio.powi(m as i32) * scale * base[p];
                assert!((row[p] - want).abs() < 1e-12, "b({m})[{p}]");
            }
        }
        // v(-1) = -b(0)
        assert_eq!(lifted.initial.len(), 1);
        for p in 0..t {
            assert!((lifted.initial[0][p] + scale * base[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn lift_two_block_average_functional() {
        // spec (1-B)(1-B^u), two-row averaging weights; the v rows beyond the
        // stated support come out of the lemma formula, including v(-1) = -b(0)
        let s = 7usize;
        let u = 4u32;
        let alpha = 0.3;
        let spec = IncrementSpec::integer(&[(1, 1, 1), (1, u, 1)]).unwrap();
        let a0 = vec![alpha / s as f64; s];
        let a1 = vec![(1.0 - alpha) / s as f64; s];
        let weights = FunctionalWeights::Blocked { rows: vec![a0.clone(), a1.clone()] };
        let lifted = lift_functional(&spec, &weights, s, Horizon::Finite(1)).unwrap();

        let b0 = 1.0 / s as f64;
        let b1 = (1.0 - alpha) / s as f64;
        for p in 0..s {
            assert!((lifted.lifted[0][p] - b0).abs() < 1e-14);
            assert!((lifted.lifted[1][p] - b1).abs() < 1e-14);
        }
        let n = spec.degree() as i64; // u + 1
        assert_eq!(n, u as i64 + 1);
        for p in 0..s {
            assert!((lifted.initial_at(-(u as i64) - 1)[p] - b0).abs() < 1e-14, "v(-u-1) = b(0)");
            assert!((lifted.initial_at(-(u as i64))[p] - (b1 - b0)).abs() < 1e-14, "v(-u) = b(1) - b(0)");
            assert!((lifted.initial_at(-(u as i64) + 1)[p] + b1).abs() < 1e-14, "v(-u+1) = -b(1)");
            assert!((lifted.initial_at(-1)[p] + b0).abs() < 1e-14, "v(-1) = -b(0)");
        }
        for k in 2..u as i64 - 1 {
            for p in 0..s {
                assert!(lifted.initial_at(-k)[p].abs() < 1e-14, "v(-{k}) = 0");
            }
        }
    }

    #[test]
    fn lift_impulse_functional() {
        // spec with n(gamma) = 1, a = impulse at 0: b(k) = d(-k) impulse,
        // v(-1) = e(1) b(0) = -b(0)
        let spec = IncrementSpec::integer(&[(1, 1, 1)]).unwrap();
        let weights = FunctionalWeights::Blocked { rows: vec![vec![1.0]] };
        let lifted = lift_functional(&spec, &weights, 1, Horizon::Finite(0)).unwrap();
        assert!((lifted.lifted[0][0] - 1.0).abs() < 1e-15);
        assert!(lifted.lifted[1..].iter().all(|r| r[0].abs() < 1e-15));
        assert!((lifted.initial[0][0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn discounted_spar_solution_matches_closed_form() {
        // closed form of the discounted-functional forecast for the
        // integrated periodic autoregression
        let t = 4usize;
        let rho: f64 = 0.5;
        let phi = [0.4, -0.3, 0.2, 0.1];
        let (model, weights) = models::spar_discounted_fixture(&phi, rho);
        let lifted = lift_functional(&model.spec, &weights, t, Horizon::Infinite).unwrap();
        let cfg = SolveConfig { factor_len: 64, predictor_len: 16, ..Default::default() };
        let sol = solve_factorized(&model, &lifted, &cfg).unwrap();

        let (psi0, psi1) = models::spar_ar_matrices(&phi);
        let ratio = rho.powi(t as i32);
        let theta = psi0.add(&psi1.scale_re(ratio)).inverse().unwrap();
        let base: Vec<f64> = (1..=t).map(|p| rho.powi(p as i32)).collect();
        let mut theta_a = vec![0.0; t];
        for p in 0..t {
            for q in 0..t {
                theta_a[p] += theta[(q, p)].re * base[q];
            }
        }
        let norm_sq: f64 = theta_a.iter().map(|v| v * v).sum();
        let want = norm_sq / ((1.0 - ratio).powi(3) * (1.0 + ratio));
        assert!(
            (sol.mse - want).abs() <= 1e-8 * want,
            "mse {} vs closed form {want}",
            sol.mse
        );

        // predictor: s(1) = -(1/(1-rho^T)) Psi1' Theta' a, s(k>=2) = 0
        let scale = 1.0 / (1.0 - ratio);
        for p in 0..t {
            let mut want_s1 = 0.0;
            for q in 0..t {
                // (Psi1' Theta' a)_p = sum_q Psi1(q, p) (Theta' a)_q
                want_s1 -= scale * psi1[(q, p)].re * theta_a[q];
            }
            assert!((sol.predictor[0][p] - want_s1).abs() < 1e-10, "s(1)[{p}]");
        }
        for row in &sol.predictor[1..] {
            assert!(row.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn apply_predictor_matches_closed_form_estimate() {
        let t = 4usize;
        let rho: f64 = 0.5;
        let phi = [0.4, -0.3, 0.2, 0.1];
        let (model, weights) = models::spar_discounted_fixture(&phi, rho);
        let lifted = lift_functional(&model.spec, &weights, t, Horizon::Infinite).unwrap();
        let cfg = SolveConfig { factor_len: 64, predictor_len: 16, ..Default::default() };
        let sol = solve_factorized(&model, &lifted, &cfg).unwrap();

        let (psi0, psi1) = models::spar_ar_matrices(&phi);
        let ratio = rho.powi(t as i32);
        let theta = psi0.add(&psi1.scale_re(ratio)).inverse().unwrap();
        let base: Vec<f64> = (1..=t).map(|p| rho.powi(p as i32)).collect();
        let theta_psi1 = theta.mul(&psi1);

        let mut rng = SplitMix64::new(8);
        for _ in 0..20 {
            let hist_rows: Vec<Vec<f64>> = (0..20)
                .map(|_| (0..t).map(|_| 2.0 * rng.next_f64() - 1.0).collect())
                .collect();
            let history = VectorSeries::new(hist_rows, -20).unwrap();
            let got = apply_predictor(&sol, &history).unwrap();

            // (1/(1-rho^T)) a' ((E - Theta Psi1) X(-1) + Theta Psi1 X(-2))
            let x1 = history.row(-1).unwrap();
            let x2 = history.row(-2).unwrap();
            let mut want = 0.0;
            for p in 0..t {
                let mut mix = x1[p];
                for q in 0..t {
                    mix += theta_psi1[(p, q)].re * (x2[q] - x1[q]);
                }
                want += base[p] * mix;
            }
            want /= 1.0 - ratio;
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn two_block_average_mse_closed_form() {
        // second reference fixture with zero fractional orders
        let s = 7usize;
        let u = 4u32;
        let alpha = 0.3;
        let a0 = 0.4;
        let a: Vec<f64> = (1..=s).map(|k| 0.1 * k as f64 / s as f64).collect();
        let model = models::periodic_ma_two_seasonal_model(s, u, a0, &a, 0.0, 0.0).unwrap();
        let weights = models::two_block_average_weights(s, alpha);
        let lifted = lift_functional(&model.spec, &weights, s, Horizon::Finite(1)).unwrap();
        let cfg = SolveConfig::default();
        let sol = solve_factorized(&model, &lifted, &cfg).unwrap();

        let mut want = 0.0;
        for k in 1..=s {
            let a0_term = if k == s { (1.0 - alpha) * a0 } else { a0 };
            let v = 1.0 - a0_term - (1.0 - alpha) * a[k - 1];
            want += v * v;
        }
        want += (1.0 - alpha).powi(2) * (s as f64 - 1.0) * (1.0 - a0).powi(2);
        want += (1.0 - alpha).powi(2);
        want /= (s * s) as f64;
        assert!((sol.mse - want).abs() <= 1e-8 * want, "{} vs {}", sol.mse, want);
    }

    #[test]
    fn zero_functional_gives_zero_mse() {
        let model = models::periodic_ma_two_seasonal_model(3, 2, 0.2, &[0.1, 0.1, 0.1], 0.0, 0.0).unwrap();
        let weights = FunctionalWeights::Blocked { rows: vec![vec![0.0; 3]] };
        let lifted = lift_functional(&model.spec, &weights, 3, Horizon::Finite(0)).unwrap();
        let sol = solve_factorized(&model, &lifted, &SolveConfig::default()).unwrap();
        assert_eq!(sol.mse, 0.0);
        let sol_c = solve_classical(&model, &lifted, &SolveConfig { lags: 32, ..Default::default() }).unwrap();
        assert!(sol_c.mse.abs() < 1e-12);
    }

    #[test]
    fn cross_path_equivalence_small_model() {
        let mut rng = SplitMix64::new(70);
        for _ in 0..4 {
            let t = 1 + (rng.next_u64() % 2) as usize;
            let model = models::random_periodic_ma2(t, &mut rng).unwrap();
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..t).map(|_| rng.next_f64() - 0.5).collect())
                .collect();
            let weights = FunctionalWeights::Blocked { rows };
            let lifted = lift_functional(&model.spec, &weights, t, Horizon::Finite(2)).unwrap();
            let fac = solve_factorized(&model, &lifted, &SolveConfig::default()).unwrap();
            let cla = solve_classical(&model, &lifted, &SolveConfig { lags: 96, ..Default::default() }).unwrap();
            assert!(
                (fac.mse - cla.mse).abs() <= 1e-4 * fac.mse.max(1e-12),
                "factorized {} vs classical {}",
                fac.mse,
                cla.mse
            );
        }
    }

    #[test]
    fn classical_mse_monotone_in_truncation() {
        let model = models::periodic_ma_two_seasonal_model(2, 2, 0.3, &[0.1, 0.2], 0.0, 0.0).unwrap();
        let base = vec![0.5, 0.25];
        let weights = FunctionalWeights::Geometric { base, ratio: 0.2 };
        let lifted = lift_functional(&model.spec, &weights, 2, Horizon::Infinite).unwrap();
        let mut prev = f64::INFINITY;
        for k in [16usize, 32, 64, 128] {
            let sol = solve_classical(&model, &lifted, &SolveConfig { lags: k, ..Default::default() }).unwrap();
            assert!(sol.mse <= prev + 1e-10, "K={k}: {} vs {prev}", sol.mse);
            prev = sol.mse;
        }
    }

    #[test]
    fn forecast_value_shortcut_and_monotone() {
        // white-noise scalar factor: one-step error is the innovation variance
        let spec = IncrementSpec::integer(&[(1, 1, 1)]).unwrap();
        let sigma = 1.7f64;
        let model = SpectralModel::moving_average(spec, vec![CMat::scalar(Complex::new(sigma, 0.0))]).unwrap();
        let sol = forecast_value(&model, 0, 0, &SolveConfig::default()).unwrap();
        assert!((sol.mse - sigma * sigma).abs() < 1e-12);

        // Delta non-decreasing in the horizon
        let model2 = models::periodic_ma_two_seasonal_model(2, 3, 0.3, &[0.05, 0.1], 0.0, 0.0).unwrap();
        let mut prev = 0.0;
        for n_ahead in 0..4 {
            let sol = forecast_value(&model2, n_ahead, 1, &SolveConfig::default()).unwrap();
            assert!(sol.mse >= prev - 1e-12, "n={n_ahead}");
            prev = sol.mse;
        }
    }

    #[test]
    fn forecast_value_matches_classical_impulse() {
        let model = models::periodic_ma_two_seasonal_model(2, 3, 0.25, &[0.05, 0.15], 0.0, 0.0).unwrap();
        // min lag is 2, so n_ahead = 1 < 2 uses the shortcut
        let sol_f = forecast_value(&model, 1, 0, &SolveConfig::default()).unwrap();
        let mut rows = vec![vec![0.0; 2]; 2];
        rows[1][0] = 1.0;
        let lifted = lift_functional(
            &model.spec,
            &FunctionalWeights::Blocked { rows },
            2,
            Horizon::Finite(1),
        )
        .unwrap();
        let sol_c = solve_classical(&model, &lifted, &SolveConfig { lags: 128, ..Default::default() }).unwrap();
        assert!(
            (sol_f.mse - sol_c.mse).abs() <= 1e-4 * sol_f.mse,
            "{} vs {}",
            sol_f.mse,
            sol_c.mse
        );
    }

    #[test]
    fn scalar_functional_reduces_to_vector_path() {
        // T = 1: scalar weights == blocked rows
        let spec = IncrementSpec::integer(&[(1, 1, 1)]).unwrap();
        let model =
            SpectralModel::moving_average(spec, vec![CMat::scalar(Complex::new(1.0, 0.0)), CMat::scalar(Complex::new(0.4, 0.0))])
                .unwrap();
        let scalar = FunctionalWeights::Scalar { values: vec![1.0, 0.5, 0.25] };
        let sol_a = forecast_scalar_functional(&model, &scalar, Horizon::Finite(2), &SolveConfig::default()).unwrap();
        let blocked = FunctionalWeights::Blocked { rows: vec![vec![1.0], vec![0.5], vec![0.25]] };
        let lifted = lift_functional(&model.spec, &blocked, 1, Horizon::Finite(2)).unwrap();
        let sol_b = solve_factorized(&model, &lifted, &SolveConfig::default()).unwrap();
        assert!((sol_a.mse - sol_b.mse).abs() < 1e-14);
    }

    #[test]
    fn scalar_weekly_average_end_to_end() {
        // scalar weights of two averaged blocks equal the blocked fixture
        let s = 7usize;
        let alpha = 0.3;
        let a: Vec<f64> = (1..=s).map(|k| 0.1 * k as f64 / s as f64).collect();
        let model = models::periodic_ma_two_seasonal_model(s, 4, 0.4, &a, 0.0, 0.0).unwrap();
        let mut scalar = vec![alpha / s as f64; s];
        scalar.extend(vec![(1.0 - alpha) / s as f64; s]);
        let sol_scalar = forecast_scalar_functional(
            &model,
            &FunctionalWeights::Scalar { values: scalar },
            Horizon::Finite(1),
            &SolveConfig::default(),
        )
        .unwrap();
        let blocked = models::two_block_average_weights(s, alpha);
        let lifted = lift_functional(&model.spec, &blocked, s, Horizon::Finite(1)).unwrap();
        let sol_blocked = solve_factorized(&model, &lifted, &SolveConfig::default()).unwrap();
        assert!((sol_scalar.mse - sol_blocked.mse).abs() < 1e-14);
    }

    #[test]
    fn scalar_value_index_identity() {
        let model = models::periodic_ma_two_seasonal_model(3, 2, 0.2, &[0.1, 0.05, 0.15], 0.0, 0.0).unwrap();
        // zeta(M) with M = 4, T = 3: N = 1, p = 1
        let sol_scalar = forecast_scalar_value(&model, 4, &SolveConfig::default()).unwrap();
        let sol_vec = forecast_value(&model, 1, 1, &SolveConfig::default()).unwrap();
        assert!((sol_scalar.mse - sol_vec.mse).abs() < 1e-14);
    }

    #[test]
    fn apply_predictor_zero_history() {
        let model = models::periodic_ma_two_seasonal_model(2, 2, 0.3, &[0.1, 0.2], 0.0, 0.0).unwrap();
        let weights = FunctionalWeights::Blocked { rows: vec![vec![1.0, 1.0]] };
        let lifted = lift_functional(&model.spec, &weights, 2, Horizon::Finite(0)).unwrap();
        let sol = solve_factorized(&model, &lifted, &SolveConfig::default()).unwrap();
        let rows = vec![vec![0.0, 0.0]; 80];
        let history = VectorSeries::new(rows, -80).unwrap();
        assert_eq!(apply_predictor(&sol, &history).unwrap(), 0.0);

        let short = VectorSeries::new(vec![vec![0.0, 0.0]; 2], -2).unwrap();
        assert!(matches!(
            apply_predictor(&sol, &short),
            Err(Error::InsufficientHistory { .. })
        ));
    }

    #[test]
    fn blocked_scalar_series_consistency() {
        // sanity: functional on zeta equals functional on blocked xi
        let t = 3u32;
        let scalar_vals: Vec<f64> = (0..12).map(|i| (i as f64 * 0.37).sin()).collect();
        let zeta = ScalarSeries::new(scalar_vals.clone(), 0, t);
        let xi = block(&zeta, t, false).unwrap();
        let scalar_w = vec![0.4, 0.3, 0.2, 0.1, 0.05];
        let rows = crate::blocking::block_weights(&scalar_w, t as usize, scalar_w.len() - 1);
        let direct: f64 = scalar_w.iter().zip(&scalar_vals).map(|(a, b)| a * b).sum();
        let via_rows: f64 = rows
            .iter()
            .enumerate()
            .map(|(m, row)| {
                row.iter()
                    .zip(xi.row(m as i64).unwrap())
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
            })
            .sum();
        assert!((direct - via_rows).abs() < 1e-14);
    }
}

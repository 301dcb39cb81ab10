//! Minimax-robust machinery: admissible density classes, least-favorable
//! optimality-condition residuals, scalar least-favorable solvers, and
//! saddle-point verification.
//!
//! Densities here live on the offset grid of [`crate::spectral::grid_node`].
//! The moment weight is `w(lambda) = |chi|^2 / |beta|^2` of the integer part
//! of the spec, and every integral is `(1/2pi) int = (1/N) sum` over nodes.
//!
//! The optimality conditions are treated as residual systems: every class
//! variant has a residual evaluator so externally supplied candidates can be
//! verified; a constructive solver is provided for the scalar moment classes
//! and the scalar contaminated class.

use num_complex::Complex;

use crate::config;
use crate::error::{Error, Result};
use crate::forecast::LiftedFunctional;
use crate::increment::{chi_over_beta_sq, IncrementSpec};
use crate::linalg::{dot_re, BlockToeplitz, CMat, C64};
use crate::simulate::rng::SplitMix64;
use crate::spectral::grid_node;

/// Density samples on the offset grid.
pub type GridDensity = Vec<CMat>;

/// Admissible spectral density classes: four families, four variants each.
#[derive(Clone, Debug)]
pub enum DensityClass {
    // -- moment classes --
    /// Matrix moment: `(1/2pi) int w f = P`.
    D0Matrix { p: CMat },
    /// Trace moment: `(1/2pi) int w Tr f = p`.
    D0Trace { p: f64 },
    /// Per-component moments: `(1/2pi) int w f_kk = p_k`.
    D0Diagonal { p: Vec<f64> },
    /// Weighted moment: `(1/2pi) int w <B1, f> = p`.
    D0Weighted { b1: CMat, p: f64 },

    // -- banded classes (pointwise bounds plus a moment) --
    BandMatrix { v: GridDensity, u: GridDensity, q: CMat },
    BandTrace { v: GridDensity, u: GridDensity, q: f64 },
    BandDiagonal { v: GridDensity, u: GridDensity, q: Vec<f64> },
    BandWeighted { b2: CMat, v: GridDensity, u: GridDensity, q: f64 },

    // -- contaminated classes (mixture with a fixed anchor) --
    ContaminatedTrace { eps: f64, f1: GridDensity, p: f64 },
    ContaminatedDiagonal { eps: f64, f1: GridDensity, p: Vec<f64> },
    ContaminatedWeighted { eps: f64, f1: GridDensity, b1: CMat, p: f64 },
    ContaminatedMatrix { eps: f64, f1: GridDensity, p: CMat },

    // -- L1-neighborhood classes around an anchor --
    NeighborhoodTrace { f1: GridDensity, delta: f64 },
    NeighborhoodDiagonal { f1: GridDensity, delta: Vec<f64> },
    NeighborhoodWeighted { f1: GridDensity, b2: CMat, delta: f64 },
    NeighborhoodEntry { f1: GridDensity, delta: Vec<Vec<f64>> },
}

impl DensityClass {
    pub fn family_name(&self) -> &'static str {
        use DensityClass::*;
        match self {
            D0Matrix { .. } | D0Trace { .. } | D0Diagonal { .. } | D0Weighted { .. } => "d0",
            BandMatrix { .. } | BandTrace { .. } | BandDiagonal { .. } | BandWeighted { .. } => "band",
            ContaminatedTrace { .. } | ContaminatedDiagonal { .. } | ContaminatedWeighted { .. }
            | ContaminatedMatrix { .. } => "contaminated",
            NeighborhoodTrace { .. } | NeighborhoodDiagonal { .. } | NeighborhoodWeighted { .. }
            | NeighborhoodEntry { .. } => "neighborhood",
        }
    }
}

/// Moment weight `|chi|^2 / |beta|^2` of the integer part, over the grid.
pub fn moment_weights(spec: &IncrementSpec, n: usize) -> Vec<f64> {
    (0..n).map(|j| chi_over_beta_sq(spec, grid_node(j, n))).collect()
}


/// Smallest diagonal shift making the Hermitian part positive semidefinite;
/// zero for PSD matrices.
fn psd_violation(m: &CMat) -> f64 {
    if m.is_psd(1e-12) {
        return 0.0;
    }
    let mut lo = 0.0f64;
    let mut hi = m.max_abs().max(1e-12) * (m.rows() as f64 + 1.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if m.is_psd(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// One named constraint slack: zero means exactly satisfied; equality
/// constraints report `|value - target|`, inequalities the violation amount.
#[derive(Clone, Debug)]
pub struct ConstraintSlack {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug)]
pub struct MembershipReport {
    pub member: bool,
    pub slacks: Vec<ConstraintSlack>,
}

/// Evaluate the defining constraints of `cls` for a grid density.
pub fn class_membership(
    f: &GridDensity,
    cls: &DensityClass,
    spec: &IncrementSpec,
    tol: f64,
) -> Result<MembershipReport> {
    let n = f.len();
    let t = f[0].rows();
    let w = moment_weights(spec, n);
    let mut slacks = Vec::new();

    let moment_matrix = || -> CMat {
        let mut acc = CMat::zeros(t, t);
        for j in 0..n {
            acc = acc.add(&f[j].scale_re(w[j] / n as f64));
        }
        acc
    };
    let moment_trace = || -> f64 { (0..n).map(|j| w[j] * f[j].trace().re).sum::<f64>() / n as f64 };
    let moment_diag = |k: usize| -> f64 { (0..n).map(|j| w[j] * f[j][(k, k)].re).sum::<f64>() / n as f64 };
    let inner = |b: &CMat, m: &CMat| -> f64 {
        // <B, f> = Tr(B^H f), real for Hermitian operands
        b.adjoint().mul(m).trace().re
    };

    use DensityClass::*;
    match cls {
        D0Matrix { p } => {
            slacks.push(ConstraintSlack { name: "moment".into(), value: moment_matrix().sub(p).max_abs() });
        }
        D0Trace { p } => {
            slacks.push(ConstraintSlack { name: "moment".into(), value: (moment_trace() - p).abs() });
        }
        D0Diagonal { p } => {
            for (k, &pk) in p.iter().enumerate() {
                slacks.push(ConstraintSlack { name: format!("moment[{k}]"), value: (moment_diag(k) - pk).abs() });
            }
        }
        D0Weighted { b1, p } => {
            let m: f64 = (0..n).map(|j| w[j] * inner(b1, &f[j])).sum::<f64>() / n as f64;
            slacks.push(ConstraintSlack { name: "moment".into(), value: (m - p).abs() });
        }
        BandMatrix { v, u, q } => {
            let lower = (0..n).map(|j| psd_violation(&f[j].sub(&v[j]))).fold(0.0, f64::max);
            let upper = (0..n).map(|j| psd_violation(&u[j].sub(&f[j]))).fold(0.0, f64::max);
            slacks.push(ConstraintSlack { name: "lower".into(), value: lower });
            slacks.push(ConstraintSlack { name: "upper".into(), value: upper });
            slacks.push(ConstraintSlack { name: "moment".into(), value: moment_matrix().sub(q).max_abs() });
        }
        BandTrace { v, u, q } => {
            let lower = (0..n)
                .map(|j| (v[j].trace().re - f[j].trace().re).max(0.0))
                .fold(0.0, f64::max);
            let upper = (0..n)
                .map(|j| (f[j].trace().re - u[j].trace().re).max(0.0))
                .fold(0.0, f64::max);
            slacks.push(ConstraintSlack { name: "lower".into(), value: lower });
            slacks.push(ConstraintSlack { name: "upper".into(), value: upper });
            slacks.push(ConstraintSlack { name: "moment".into(), value: (moment_trace() - q).abs() });
        }
        BandDiagonal { v, u, q } => {
            for k in 0..t {
                let lower = (0..n)
                    .map(|j| (v[j][(k, k)].re - f[j][(k, k)].re).max(0.0))
                    .fold(0.0, f64::max);
                let upper = (0..n)
                    .map(|j| (f[j][(k, k)].re - u[j][(k, k)].re).max(0.0))
                    .fold(0.0, f64::max);
                slacks.push(ConstraintSlack { name: format!("lower[{k}]"), value: lower });
                slacks.push(ConstraintSlack { name: format!("upper[{k}]"), value: upper });
                slacks.push(ConstraintSlack { name: format!("moment[{k}]"), value: (moment_diag(k) - q[k]).abs() });
            }
        }
        BandWeighted { b2, v, u, q } => {
            let lower = (0..n)
                .map(|j| (inner(b2, &v[j]) - inner(b2, &f[j])).max(0.0))
                .fold(0.0, f64::max);
            let upper = (0..n)
                .map(|j| (inner(b2, &f[j]) - inner(b2, &u[j])).max(0.0))
                .fold(0.0, f64::max);
            let m: f64 = (0..n).map(|j| w[j] * inner(b2, &f[j])).sum::<f64>() / n as f64;
            slacks.push(ConstraintSlack { name: "lower".into(), value: lower });
            slacks.push(ConstraintSlack { name: "upper".into(), value: upper });
            slacks.push(ConstraintSlack { name: "moment".into(), value: (m - q).abs() });
        }
        ContaminatedTrace { eps, f1, p } => {
            let mix = (0..n)
                .map(|j| ((1.0 - eps) * f1[j].trace().re - f[j].trace().re).max(0.0))
                .fold(0.0, f64::max);
            slacks.push(ConstraintSlack { name: "mixture".into(), value: mix });
            slacks.push(ConstraintSlack { name: "moment".into(), value: (moment_trace() - p).abs() });
        }
        ContaminatedDiagonal { eps, f1, p } => {
            for k in 0..t {
                let mix = (0..n)
                    .map(|j| ((1.0 - eps) * f1[j][(k, k)].re - f[j][(k, k)].re).max(0.0))
                    .fold(0.0, f64::max);
                slacks.push(ConstraintSlack { name: format!("mixture[{k}]"), value: mix });
                slacks.push(ConstraintSlack { name: format!("moment[{k}]"), value: (moment_diag(k) - p[k]).abs() });
            }
        }
        ContaminatedWeighted { eps, f1, b1, p } => {
            let mix = (0..n)
                .map(|j| ((1.0 - eps) * inner(b1, &f1[j]) - inner(b1, &f[j])).max(0.0))
                .fold(0.0, f64::max);
            let m: f64 = (0..n).map(|j| w[j] * inner(b1, &f[j])).sum::<f64>() / n as f64;
            slacks.push(ConstraintSlack { name: "mixture".into(), value: mix });
            slacks.push(ConstraintSlack { name: "moment".into(), value: (m - p).abs() });
        }
        ContaminatedMatrix { eps, f1, p } => {
            let mix = (0..n)
                .map(|j| psd_violation(&f[j].sub(&f1[j].scale_re(1.0 - eps))))
                .fold(0.0, f64::max);
            slacks.push(ConstraintSlack { name: "mixture".into(), value: mix });
            slacks.push(ConstraintSlack { name: "moment".into(), value: moment_matrix().sub(p).max_abs() });
        }
        NeighborhoodTrace { f1, delta } => {
            let i: f64 = (0..n)
                .map(|j| w[j] * (f[j].trace().re - f1[j].trace().re).abs())
                .sum::<f64>()
                / n as f64;
            slacks.push(ConstraintSlack { name: "radius".into(), value: (i - delta).max(0.0) });
        }
        NeighborhoodDiagonal { f1, delta } => {
            for k in 0..t {
                let i: f64 = (0..n)
                    .map(|j| w[j] * (f[j][(k, k)].re - f1[j][(k, k)].re).abs())
                    .sum::<f64>()
                    / n as f64;
                slacks.push(ConstraintSlack { name: format!("radius[{k}]"), value: (i - delta[k]).max(0.0) });
            }
        }
        NeighborhoodWeighted { f1, b2, delta } => {
            let i: f64 = (0..n)
                .map(|j| w[j] * (inner(b2, &f[j]) - inner(b2, &f1[j])).abs())
                .sum::<f64>()
                / n as f64;
            slacks.push(ConstraintSlack { name: "radius".into(), value: (i - delta).max(0.0) });
        }
        NeighborhoodEntry { f1, delta } => {
            for r in 0..t {
                for c in 0..t {
                    let i: f64 = (0..n)
                        .map(|j| w[j] * (f[j][(r, c)] - f1[j][(r, c)]).norm())
                        .sum::<f64>()
                        / n as f64;
                    slacks.push(ConstraintSlack {
                        name: format!("radius[{r}][{c}]"),
                        value: (i - delta[r][c]).max(0.0),
                    });
                }
            }
        }
    }
    let member = slacks.iter().all(|s| s.value <= tol);
    Ok(MembershipReport { member, slacks })
}

/// Lagrange multipliers of a least-favorable candidate. Fields not used by a
/// class variant stay `None`; pointwise fields are indexed by grid node.
#[derive(Clone, Debug, Default)]
pub struct Multipliers {
    pub alpha_sq: Option<f64>,
    pub alpha_vec: Option<Vec<C64>>,
    pub alpha_diag: Option<Vec<f64>>,
    /// First scalar multiplier field (e.g. `gamma_1(lambda)`, or the product
    /// `beta^2 gamma_2(lambda)` for the neighborhood classes).
    pub scalar_field: Option<Vec<f64>>,
    /// Second scalar multiplier field (`gamma_2(lambda)`).
    pub scalar_field2: Option<Vec<f64>>,
    pub diag_field: Option<Vec<Vec<f64>>>,
    pub diag_field2: Option<Vec<Vec<f64>>>,
    pub matrix_field: Option<Vec<CMat>>,
    pub matrix_field2: Option<Vec<CMat>>,
    /// Entrywise field for the entrywise neighborhood class.
    pub entry_field: Option<Vec<CMat>>,
}

/// A least-favorable candidate: grid density, solved coefficients,
/// multipliers, and diagnostics.
#[derive(Clone, Debug)]
pub struct LfSolution {
    pub f0: GridDensity,
    /// Solved operator-equation coefficients `c(k)`, rows of length `T`.
    pub coefficients: Vec<Vec<C64>>,
    pub multipliers: Multipliers,
    /// `Delta(f0)`.
    pub mse: f64,
    pub residual_sup: f64,
    pub sweeps: usize,
}

impl LfSolution {
    fn c_transfer(&self, lambda: f64) -> Vec<C64> {
        let t = self.coefficients.first().map(|r| r.len()).unwrap_or(0);
        let mut out = vec![Complex::new(0.0, 0.0); t];
        let rot = Complex::from_polar(1.0, lambda);
        let mut ph = Complex::new(1.0, 0.0);
        for row in &self.coefficients {
            for p in 0..t {
                out[p] += row[p] * ph;
            }
            ph *= rot;
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub sup: f64,
    pub field: Vec<f64>,
}

fn outer(v: &[C64]) -> CMat {
    let t = v.len();
    CMat::from_fn(t, t, |i, j| v[i] * v[j].conj())
}

fn diag_mat(d: &[f64]) -> CMat {
    let t = d.len();
    CMat::from_fn(t, t, |i, j| if i == j { Complex::new(d[i], 0.0) } else { Complex::new(0.0, 0.0) })
}

macro_rules! need {
    ($opt:expr, $name:literal) => {
        $opt.as_ref().ok_or_else(|| Error::MissingMultipliers($name.into()))?
    };
}

/// Pointwise residual of the least-favorable optimality condition: the
/// rank-one left side built from the solved coefficients minus the family's
/// right side with the candidate multipliers.
pub fn lf_residual(
    cls: &DensityClass,
    sol: &LfSolution,
    spec: &IncrementSpec,
) -> Result<ResidualReport> {
    let n = sol.f0.len();
    let w = moment_weights(spec, n);
    let mul = &sol.multipliers;
    let mut field = Vec::with_capacity(n);
    let mut sup = 0.0f64;
    for j in 0..n {
        let lam = grid_node(j, n);
        let cvec = sol.c_transfer(lam);
        let lhs = outer(&cvec);
        let m0 = sol.f0[j].scale_re(w[j]);
        use DensityClass::*;
        let rhs = match cls {
            D0Matrix { .. } => m0.mul(&outer(need!(mul.alpha_vec, "alpha_vec"))).mul(&m0),
            D0Trace { .. } => m0.mul(&m0).scale_re(*need!(mul.alpha_sq, "alpha_sq")),
            D0Diagonal { .. } => m0.mul(&diag_mat(need!(mul.alpha_diag, "alpha_diag"))).mul(&m0),
            D0Weighted { b1, .. } => m0
                .mul(&b1.transpose())
                .mul(&m0)
                .scale_re(*need!(mul.alpha_sq, "alpha_sq")),
            BandMatrix { .. } => {
                let core = outer(need!(mul.alpha_vec, "alpha_vec"))
                    .add(&need!(mul.matrix_field, "matrix_field")[j])
                    .add(&need!(mul.matrix_field2, "matrix_field2")[j]);
                m0.mul(&core).mul(&m0)
            }
            BandTrace { .. } => {
                let s = need!(mul.alpha_sq, "alpha_sq")
                    + need!(mul.scalar_field, "scalar_field")[j]
                    + need!(mul.scalar_field2, "scalar_field2")[j];
                m0.mul(&m0).scale_re(s)
            }
            BandDiagonal { .. } => {
                let d1 = need!(mul.alpha_diag, "alpha_diag");
                let g1 = need!(mul.diag_field, "diag_field");
                let g2 = need!(mul.diag_field2, "diag_field2");
                let d: Vec<f64> = (0..d1.len()).map(|k| d1[k] + g1[j][k] + g2[j][k]).collect();
                m0.mul(&diag_mat(&d)).mul(&m0)
            }
            BandWeighted { b2, .. } => {
                let s = need!(mul.alpha_sq, "alpha_sq")
                    + need!(mul.scalar_field, "scalar_field")[j]
                    + need!(mul.scalar_field2, "scalar_field2")[j];
                m0.mul(&b2.transpose()).mul(&m0).scale_re(s)
            }
            ContaminatedTrace { .. } => {
                let s = need!(mul.alpha_sq, "alpha_sq") + need!(mul.scalar_field, "scalar_field")[j];
                m0.mul(&m0).scale_re(s)
            }
            ContaminatedDiagonal { .. } => {
                let d1 = need!(mul.alpha_diag, "alpha_diag");
                let g1 = need!(mul.diag_field, "diag_field");
                let d: Vec<f64> = (0..d1.len()).map(|k| d1[k] + g1[j][k]).collect();
                m0.mul(&diag_mat(&d)).mul(&m0)
            }
            ContaminatedWeighted { b1, .. } => {
                let s = need!(mul.alpha_sq, "alpha_sq") + need!(mul.scalar_field, "scalar_field")[j];
                m0.mul(&b1.transpose()).mul(&m0).scale_re(s)
            }
            ContaminatedMatrix { .. } => {
                let core = outer(need!(mul.alpha_vec, "alpha_vec"))
                    .add(&need!(mul.matrix_field, "matrix_field")[j]);
                m0.mul(&core).mul(&m0)
            }
            NeighborhoodTrace { .. } | NeighborhoodWeighted { .. } => {
                let s = need!(mul.scalar_field, "scalar_field")[j];
                let rhs = m0.mul(&m0).scale_re(s);
                if let NeighborhoodWeighted { b2, .. } = cls {
                    m0.mul(&b2.transpose()).mul(&m0).scale_re(s)
                } else {
                    rhs
                }
            }
            NeighborhoodDiagonal { .. } => {
                let g = need!(mul.diag_field, "diag_field");
                m0.mul(&diag_mat(&g[j])).mul(&m0)
            }
            NeighborhoodEntry { .. } => {
                let e = &need!(mul.entry_field, "entry_field")[j];
                m0.mul(e).mul(&m0)
            }
        };
        let r = lhs.sub(&rhs).max_abs();
        sup = sup.max(r);
        field.push(r);
    }
    Ok(ResidualReport { sup, field })
}

/// Multiplier sign/activity violations for the families with pointwise
/// conditions; empty when everything is consistent within `tol`.
pub fn multiplier_sign_violations(cls: &DensityClass, sol: &LfSolution, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if let DensityClass::ContaminatedTrace { eps, f1, .. } = cls {
        if let Some(gamma) = &sol.multipliers.scalar_field {
            for (j, &g) in gamma.iter().enumerate() {
                if g > tol {
                    out.push(format!("gamma_1({j}) = {g} > 0"));
                }
                let free = sol.f0[j].trace().re > (1.0 - eps) * f1[j].trace().re + tol;
                if free && g.abs() > tol {
                    out.push(format!("gamma_1({j}) nonzero on the free set"));
                }
            }
        }
    }
    if let DensityClass::BandTrace { v, u, .. } = cls {
        if let (Some(g1), Some(g2)) = (&sol.multipliers.scalar_field, &sol.multipliers.scalar_field2) {
            for j in 0..g1.len() {
                if g1[j] > tol {
                    out.push(format!("gamma_1({j}) > 0"));
                }
                if g2[j] < -tol {
                    out.push(format!("gamma_2({j}) < 0"));
                }
                let above_lower = sol.f0[j].trace().re > v[j].trace().re + tol;
                let below_upper = sol.f0[j].trace().re < u[j].trace().re - tol;
                if above_lower && g1[j].abs() > tol {
                    out.push(format!("gamma_1({j}) active off the lower bound"));
                }
                if below_upper && g2[j].abs() > tol {
                    out.push(format!("gamma_2({j}) active off the upper bound"));
                }
            }
        }
    }
    if matches!(
        cls,
        DensityClass::NeighborhoodTrace { .. } | DensityClass::NeighborhoodWeighted { .. }
    ) {
        if let Some(field) = &sol.multipliers.scalar_field {
            // field = beta^2 gamma_2 with |gamma_2| <= 1: sign-free, bounded
            let cap = field.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
            for (j, &g) in field.iter().enumerate() {
                if g.abs() > cap + tol {
                    out.push(format!("gamma_2({j}) above its bound"));
                }
            }
        }
    }
    out
}

/// Solver configuration for the scalar least-favorable iteration.
#[derive(Clone, Copy, Debug)]
pub struct LfConfig {
    pub grid: usize,
    /// Truncation of the operator equation solved each sweep.
    pub lags: usize,
    pub damping: f64,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LfConfig {
    fn default() -> Self {
        LfConfig {
            grid: 1 << 12,
            lags: 24,
            damping: config::LF_DAMPING,
            tol: config::LF_TOL,
            max_sweeps: config::LF_MAX_SWEEPS,
        }
    }
}

fn scalar_grid(values: &GridDensity) -> Vec<f64> {
    values.iter().map(|m| m[(0, 0)].re).collect()
}

/// Solve the scalar operator equation for a grid density and return
/// `(c, |C(e^{i lambda})|)` on the nodes.
fn scalar_sweep(
    w: &[f64],
    f: &[f64],
    rhs: &[C64],
    lags: usize,
) -> Result<(Vec<C64>, Vec<f64>)> {
    let n = w.len();
    // Toeplitz lags of 1 / (w f)
    let mut lag_vals = vec![Complex::new(0.0, 0.0); lags + 1];
    for j in 0..n {
        let lam = grid_node(j, n);
        let g = 1.0 / (w[j] * f[j]);
        let rot = Complex::from_polar(1.0, lam);
        let mut ph = Complex::new(g / n as f64, 0.0);
        for slot in lag_vals.iter_mut() {
            *slot += ph;
            ph *= rot;
        }
    }
    let blocks: Vec<CMat> = lag_vals.iter().map(|&z| CMat::scalar(z)).collect();
    let bt = BlockToeplitz::new(&blocks, lags + 1);
    let (c, _cond) = bt.solve_dense(rhs)?;
    let mut c_abs = Vec::with_capacity(n);
    for j in 0..n {
        let lam = grid_node(j, n);
        let rot = Complex::from_polar(1.0, lam);
        let mut ph = Complex::new(1.0, 0.0);
        let mut acc = Complex::new(0.0, 0.0);
        for &ck in &c {
            acc += ck * ph;
            ph *= rot;
        }
        c_abs.push(acc.norm());
    }
    Ok((c, c_abs))
}

/// Least-favorable density solver for the scalar (`T = 1`) moment and
/// contaminated classes: damped fixed-point iteration
/// `f0 <- (|beta|^2/|chi|^2) |C(e^{i lambda})| / alpha`, with `alpha`
/// renormalized to the class moment each sweep, and (for the contaminated
/// class) pointwise projection onto the mixture floor.
pub fn solve_lf_scalar(
    cls: &DensityClass,
    lifted: &LiftedFunctional,
    cfg: &LfConfig,
) -> Result<LfSolution> {
    if lifted.dim != 1 {
        return Err(Error::Unsupported("the constructive solver handles T = 1 only".into()));
    }
    let spec = lifted.spec.integer_part();
    let n = cfg.grid;
    let w = moment_weights(&spec, n);
    let mean_w: f64 = w.iter().sum::<f64>() / n as f64;

    // class-specific data reduced to: moment target and pointwise floor
    let (p_target, floor): (f64, Vec<f64>) = match cls {
        DensityClass::D0Trace { p } | DensityClass::D0Weighted { p, .. } => {
            let scale = if let DensityClass::D0Weighted { b1, .. } = cls { b1[(0, 0)].re } else { 1.0 };
            if scale <= 0.0 {
                return Err(Error::InfeasibleClass("weight must be positive".into()));
            }
            (p / scale, vec![0.0; n])
        }
        DensityClass::D0Matrix { p } => (p[(0, 0)].re, vec![0.0; n]),
        DensityClass::ContaminatedTrace { eps, f1, p } => {
            if f1.len() != n {
                return Err(Error::InvalidModel(format!(
                    "anchor density has {} nodes, solver grid is {n}",
                    f1.len()
                )));
            }
            let anchor = scalar_grid(f1);
            let floor: Vec<f64> = anchor.iter().map(|&v| (1.0 - eps) * v).collect();
            let floor_moment: f64 = floor.iter().zip(&w).map(|(f, w)| f * w).sum::<f64>() / n as f64;
            if *p < floor_moment - 1e-12 {
                return Err(Error::InfeasibleClass(format!(
                    "moment {p} below the anchor floor moment {floor_moment}"
                )));
            }
            (*p, floor)
        }
        _ => {
            return Err(Error::Unsupported(
                "constructive solver covers the scalar moment and contaminated classes".into(),
            ))
        }
    };
    if p_target <= 0.0 {
        return Err(Error::InfeasibleClass("moment must be positive".into()));
    }

    let support = lifted.lifted_support();
    let lags = cfg.lags.max(support);
    let mut rhs = vec![Complex::new(0.0, 0.0); lags + 1];
    for (k, row) in lifted.lifted.iter().enumerate().take(lags + 1) {
        rhs[k] = Complex::new(row[0], 0.0);
    }

    let floor_moment: f64 = floor.iter().zip(&w).map(|(f, w)| f * w).sum::<f64>() / n as f64;

    // Project a candidate shape onto the class: pick the multiplier `alpha`
    // so that `f = max(floor, C / (w alpha))` meets the moment exactly. The
    // moment is strictly decreasing in `alpha`, from +inf to the floor
    // moment, so bisection always lands.
    let project = |c_abs: &[f64]| -> (Vec<f64>, f64) {
        let mean_c: f64 = c_abs.iter().sum::<f64>() / n as f64;
        if mean_c <= 1e-300 {
            // zero characteristic: lift the floor uniformly onto the moment
            let lift = ((p_target - floor_moment) / mean_w).max(0.0);
            return (floor.iter().map(|&fl| fl + lift).collect(), 1.0);
        }
        let moment_at = |alpha: f64| -> f64 {
            c_abs
                .iter()
                .zip(&w)
                .zip(&floor)
                .map(|((&c, &wj), &fl)| (wj * fl).max(c / alpha))
                .sum::<f64>()
                / n as f64
        };
        // moment(mean_c / p) >= p always: a valid lower bracket
        let mut lo = mean_c / p_target;
        let mut hi = lo;
        while moment_at(hi) > p_target && hi < lo * 1e15 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if moment_at(mid) > p_target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let alpha = 0.5 * (lo + hi);
        let f: Vec<f64> = c_abs
            .iter()
            .zip(&w)
            .zip(&floor)
            .map(|((&c, &wj), &fl)| fl.max(c / (wj * alpha)))
            .collect();
        (f, alpha)
    };

    // feasible start: uniform lift of the floor onto the moment
    let start_lift = ((p_target - floor_moment) / mean_w).max(0.0);
    let mut f: Vec<f64> = floor.iter().map(|&fl| fl + start_lift).collect();
    let mut alpha = 1.0f64;
    let mut sweeps = 0usize;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    while sweeps < cfg.max_sweeps {
        sweeps += 1;
        let (_c, c_abs) = scalar_sweep(&w, &f, &rhs, lags)?;
        let (candidate, a) = project(&c_abs);
        alpha = a;
        let mut change = 0.0f64;
        let scale = f.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
        for j in 0..n {
            let next = (1.0 - cfg.damping) * f[j] + cfg.damping * candidate[j];
            change = change.max((next - f[j]).abs());
            f[j] = next;
        }
        last_change = change / scale;
        if last_change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::LfNotConverged { residual: last_change, sweeps });
    }

    // final solve and multipliers at the converged density
    let (c, c_abs) = scalar_sweep(&w, &f, &rhs, lags)?;
    let free = |j: usize| f[j] > floor[j] * (1.0 + 1e-10) + 1e-300;
    if !(0..n).any(&free) {
        // everything clamped: the bisection multiplier is arbitrary large;
        // report the tight one so the sign conditions stay meaningful
        alpha = (0..n)
            .map(|j| c_abs[j] / (w[j] * f[j]))
            .fold(0.0f64, f64::max)
            .max(1e-300);
    }
    let alpha_sq = alpha * alpha;
    let gamma: Vec<f64> = (0..n)
        .map(|j| {
            if free(j) {
                0.0
            } else {
                let ratio = c_abs[j] / (w[j] * f[j]);
                (ratio * ratio - alpha_sq).min(0.0)
            }
        })
        .collect();
    let mse = dot_re(&rhs, &c);
    let f0: GridDensity = f.iter().map(|&v| CMat::scalar(Complex::new(v, 0.0))).collect();
    let multipliers = match cls {
        DensityClass::D0Trace { .. } | DensityClass::D0Matrix { .. } | DensityClass::D0Weighted { .. } => {
            Multipliers { alpha_sq: Some(alpha_sq), ..Default::default() }
        }
        DensityClass::ContaminatedTrace { .. } => Multipliers {
            alpha_sq: Some(alpha_sq),
            scalar_field: Some(gamma),
            ..Default::default()
        },
        _ => unreachable!(),
    };
    let mut sol = LfSolution {
        f0,
        coefficients: c.iter().map(|&z| vec![z]).collect(),
        multipliers,
        mse,
        residual_sup: f64::NAN,
        sweeps,
    };
    let report = lf_residual(cls, &sol, &spec)?;
    sol.residual_sup = report.sup;
    Ok(sol)
}

/// `Delta(h0; f)`: the mean square error of the candidate characteristic
/// built from `f0`, applied under an arbitrary density `f` on the same grid.
/// Linear in `f`, and equal to `Delta(f0)` at `f = f0`.
pub fn delta_cross(sol: &LfSolution, f: &GridDensity, spec: &IncrementSpec) -> Result<f64> {
    let n = sol.f0.len();
    if f.len() != n {
        return Err(Error::InvalidModel("density grids differ".into()));
    }
    let w = moment_weights(&spec.integer_part(), n);
    let mut acc = 0.0f64;
    for j in 0..n {
        let lam = grid_node(j, n);
        let cvec = sol.c_transfer(lam);
        let cbar: Vec<C64> = cvec.iter().map(|z| z.conj()).collect();
        let f0_inv = sol.f0[j].inverse().map_err(|_| Error::SingularDensity { node: j })?;
        let y = f0_inv.mul_vec(&cbar);
        // y^* f y, real for Hermitian f
        let fy = f[j].mul_vec(&y);
        let quad: f64 = y.iter().zip(&fy).map(|(a, b)| (a.conj() * b).re).sum();
        acc += quad / (w[j] * n as f64);
    }
    Ok(acc)
}

#[derive(Clone, Debug)]
pub struct SaddleReport {
    pub checked: usize,
    pub violations: usize,
    pub max_excess: f64,
    pub vacuous: bool,
}

/// Sample admissible densities (trigonometric perturbations projected back
/// onto the class) and verify `Delta(h0; f) <= Delta(h0; f0) + tol`.
pub fn saddle_check(
    sol: &LfSolution,
    cls: &DensityClass,
    spec: &IncrementSpec,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<SaddleReport> {
    if samples == 0 {
        return Ok(SaddleReport { checked: 0, violations: 0, max_excess: 0.0, vacuous: true });
    }
    let n = sol.f0.len();
    let t = sol.f0[0].rows();
    let w = moment_weights(&spec.integer_part(), n);
    let mut rng = SplitMix64::new(seed);
    let mut violations = 0usize;
    let mut max_excess = f64::NEG_INFINITY;
    for _ in 0..samples {
        let f = match cls {
            DensityClass::D0Trace { .. } | DensityClass::D0Matrix { .. } | DensityClass::D0Weighted { .. } => {
                let target = match cls {
                    DensityClass::D0Trace { p } => *p,
                    DensityClass::D0Matrix { p } => p.trace().re,
                    DensityClass::D0Weighted { b1, p } => p / b1[(0, 0)].re.max(1e-300),
                    _ => unreachable!(),
                };
                let shape = random_shape(&mut rng, n);
                let mut f: GridDensity = (0..n).map(|j| sol.f0[j].scale_re(shape[j])).collect();
                let m: f64 = (0..n).map(|j| w[j] * f[j].trace().re).sum::<f64>() / n as f64;
                let scale = target / m;
                for v in f.iter_mut() {
                    *v = v.scale_re(scale);
                }
                f
            }
            DensityClass::ContaminatedTrace { eps, f1, p } => {
                let shape = random_shape(&mut rng, n);
                // f = (1 - eps) f1 + eps W with W a positive shape scaled to
                // hit the moment exactly
                let m1: f64 = (0..n).map(|j| w[j] * (1.0 - eps) * f1[j].trace().re).sum::<f64>() / n as f64;
                let mw: f64 = (0..n).map(|j| w[j] * shape[j]).sum::<f64>() / n as f64;
                let kappa = (p - m1) / (eps * mw);
                (0..n)
                    .map(|j| {
                        f1[j]
                            .scale_re(1.0 - eps)
                            .add(&CMat::identity(t).scale_re(eps * kappa * shape[j] / t as f64))
                    })
                    .collect()
            }
            _ => {
                return Err(Error::Unsupported(
                    "saddle sampling covers the moment and contaminated classes".into(),
                ))
            }
        };
        let value = delta_cross(sol, &f, spec)?;
        let excess = value - sol.mse;
        max_excess = max_excess.max(excess);
        if excess > tol {
            violations += 1;
        }
    }
    Ok(SaddleReport { checked: samples, violations, max_excess, vacuous: false })
}

/// Positive random trigonometric shape, mean about one, bounded away from
/// zero.
fn random_shape(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let harmonics = 4usize;
    let amps: Vec<f64> = (0..harmonics).map(|_| 0.15 * (2.0 * rng.next_f64() - 1.0)).collect();
    let phases: Vec<f64> = (0..harmonics).map(|_| 2.0 * std::f64::consts::PI * rng.next_f64()).collect();
    (0..n)
        .map(|j| {
            let lam = grid_node(j, n);
            let mut v = 1.0;
            for h in 0..harmonics {
                v += amps[h] * ((h as f64 + 1.0) * lam + phases[h]).cos();
            }
            v.max(0.05)
        })
        .collect()
}

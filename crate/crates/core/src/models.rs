//! Closed-form model constructors shared by the library, the CLI and the
//! validation suites.

use num_complex::Complex;

use crate::blocking::FunctionalWeights;
use crate::error::{Error, Result};
use crate::increment::{IncrementFactor, IncrementSpec};
use crate::linalg::CMat;
use crate::simulate::rng::SplitMix64;
use crate::spectral::SpectralModel;

/// Autoregressive matrices of the integrated periodic AR(1) in block form:
/// `Psi0 Delta X(m) + Psi1 Delta X(m-1) = eps(m)`, with `Psi0` unit lower
/// bidiagonal carrying `-phi(p)` under the diagonal and `Psi1` holding
/// `-phi(1)` in its upper-right corner.
pub fn spar_ar_matrices(phi: &[f64]) -> (CMat, CMat) {
    let t = phi.len();
    let mut psi0 = CMat::identity(t);
    for p in 1..t {
        psi0[(p, p - 1)] = Complex::new(-phi[p], 0.0);
    }
    let mut psi1 = CMat::zeros(t, t);
    psi1[(0, t - 1)] = Complex::new(-phi[0], 0.0);
    (psi0, psi1)
}

/// Moving-average model of the block increments of the integrated periodic
/// AR(1): the filter `(Psi0 + Psi1 z)^{-1}` truncated once the geometric tail
/// falls below `1e-18`.
pub fn spar_varima_model(phi: &[f64]) -> Result<SpectralModel> {
    let prod: f64 = phi.iter().map(|v| v.abs()).product();
    if !(prod < 1.0) {
        return Err(Error::UnstableParameters(format!(
            "product of |phi| must be below one, got {prod}"
        )));
    }
    let (psi0, psi1) = spar_ar_matrices(phi);
    let psi0_inv = psi0.inverse()?;
    let step = psi0_inv.mul(&psi1); // Psi0^{-1} Psi1
    let mut coeffs = vec![psi0_inv.clone()];
    let mut cur = psi0_inv;
    for _ in 0..96 {
        cur = step.mul(&cur).scale_re(-1.0);
        if cur.max_abs() < 1e-18 {
            break;
        }
        coeffs.push(cur.clone());
    }
    let spec = IncrementSpec::integer(&[(1, 1, 1)])?;
    SpectralModel::moving_average(spec, coeffs)
}

/// The discounted-future functional paired with the integrated periodic
/// AR(1) model: weights `rho^{k+1}` on the scalar sequence, blocked over the
/// period.
pub fn spar_discounted_fixture(phi: &[f64], rho: f64) -> (SpectralModel, FunctionalWeights) {
    let t = phi.len();
    let model = spar_varima_model(phi).expect("stable fixture parameters");
    let base: Vec<f64> = (1..=t).map(|p| rho.powi(p as i32)).collect();
    let weights = FunctionalWeights::Geometric { base, ratio: rho.powi(t as i32) };
    (model, weights)
}

/// Periodic MA model with two seasonal differencing layers: the block
/// increments of `(1 - B^s)^{1 + d0} (1 - B^{u s})^{1 + d1} x(t)
/// = eps(t) - a0 eps(t-1) - a_{i(t)} eps(t-s)`, where `i(t) = (t mod s) + 1`
/// cycles through `a`.
///
/// Block dimension is `s`; the block-time spec is
/// `(1 - B)^{1 + d0} (1 - B^u)^{1 + d1}`.
pub fn periodic_ma_two_seasonal_model(
    s: usize,
    u: u32,
    a0: f64,
    a: &[f64],
    d0: f64,
    d1: f64,
) -> Result<SpectralModel> {
    if a.len() != s {
        return Err(Error::InvalidModel(format!("need {s} seasonal coefficients, got {}", a.len())));
    }
    let spec = IncrementSpec::new(vec![
        IncrementFactor::fractional(1, 1, 1, d0),
        IncrementFactor::fractional(1, u, 1, d1),
    ])?;
    let (phi0, phi1) = periodic_ma_matrices(s, a0, a);
    SpectralModel::moving_average(spec, vec![phi0, phi1])
}

/// The two block MA matrices of [`periodic_ma_two_seasonal_model`].
pub fn periodic_ma_matrices(s: usize, a0: f64, a: &[f64]) -> (CMat, CMat) {
    let mut phi0 = CMat::identity(s);
    for p in 1..s {
        phi0[(p, p - 1)] = Complex::new(-a0, 0.0);
    }
    let mut phi1 = CMat::zeros(s, s);
    for p in 0..s {
        phi1[(p, p)] = Complex::new(-a[p], 0.0);
    }
    phi1[(0, s - 1)] = Complex::new(-a0, 0.0);
    (phi0, phi1)
}

/// Weighted sum of two successive block averages:
/// `alpha * mean(block 0) + (1 - alpha) * mean(block 1)`.
pub fn two_block_average_weights(s: usize, alpha: f64) -> FunctionalWeights {
    FunctionalWeights::Blocked {
        rows: vec![vec![alpha / s as f64; s], vec![(1.0 - alpha) / s as f64; s]],
    }
}

/// Random diagonally dominant MA(2) periodic model over a random small
/// integer spec; always minimal (the filter determinant stays away from the
/// unit circle).
pub fn random_periodic_ma2(t: usize, rng: &mut SplitMix64) -> Result<SpectralModel> {
    let season = 1 + (rng.next_u64() % 2) as u32;
    let step = 1 + (rng.next_u64() % 2) as u32;
    let spec = IncrementSpec::integer(&[(step, season, 1)])?;
    let spread = 0.2 / t as f64;
    let mut coeffs = Vec::with_capacity(3);
    for k in 0..3 {
        let m = CMat::from_fn(t, t, |i, j| {
            let base = if k == 0 && i == j { 1.0 } else { 0.0 };
            Complex::new(base + spread * (2.0 * rng.next_f64() - 1.0), 0.0)
        });
        coeffs.push(m);
    }
    SpectralModel::moving_average(spec, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spar_matrices_shapes() {
        let (psi0, psi1) = spar_ar_matrices(&[0.4, -0.3, 0.2, 0.1]);
        assert_eq!(psi0[(1, 0)].re, 0.3);
        assert_eq!(psi0[(3, 2)].re, -0.1);
        assert_eq!(psi1[(0, 3)].re, -0.4);
        assert!(psi0.inverse().is_ok());
    }

    #[test]
    fn spar_model_filter_inverts_ar() {
        let phi = [0.4, -0.3, 0.2, 0.1];
        let model = spar_varima_model(&phi).unwrap();
        let coeffs = model.ma_coeffs().unwrap();
        let (psi0, psi1) = spar_ar_matrices(&phi);
        // (Psi0 + Psi1 z) * Phi(z) = I up to the truncation tail
        for k in 0..coeffs.len() {
            let mut acc = psi0.mul(&coeffs[k]);
            if k >= 1 {
                acc = acc.add(&psi1.mul(&coeffs[k - 1]));
            }
            let want = if k == 0 { CMat::identity(4) } else { CMat::zeros(4, 4) };
            assert!(acc.sub(&want).max_abs() < 1e-14, "k={k}");
        }
    }

    #[test]
    fn spar_model_rejects_unstable() {
        assert!(spar_varima_model(&[1.2, 1.0]).is_err());
    }

    #[test]
    fn periodic_ma_matrices_layout() {
        let (phi0, phi1) = periodic_ma_matrices(3, 0.4, &[0.1, 0.2, 0.3]);
        assert_eq!(phi0[(0, 0)].re, 1.0);
        assert_eq!(phi0[(1, 0)].re, -0.4);
        assert_eq!(phi0[(0, 2)].re, 0.0);
        assert_eq!(phi1[(0, 0)].re, -0.1);
        assert_eq!(phi1[(2, 2)].re, -0.3);
        assert_eq!(phi1[(0, 2)].re, -0.4);
    }
}

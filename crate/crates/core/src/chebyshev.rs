//! Truncated Chebyshev series of a spectral density on `[0, λmax]`.
//!
//! The series is stored in the "folded" convention: the represented
//! polynomial is `a_0 T_0 + Σ_{k≥1} a_k T_k`, i.e. `a_0 = c_0 / 2` where
//! `c_k = (2/π) ⟨f, T_k⟩_c` are the classical coefficients. Evaluation (scalar
//! or matrix) is then a plain sum against `T_k`.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::psd::{PowerSpectralDensity, PsdError, Regularity};

/// Slack allowed on the mapped variable before evaluation is flagged.
pub const INTERVAL_SLACK: f64 = 1e-9;
/// First fitted order of the doubling search in [`select_order`].
pub const SELECT_START_ORDER: usize = 16;
/// Default ratio `|c_K| / max_k |c_k|` used to pick the order.
pub const DEFAULT_RATIO_TOL: f64 = 1e-12;
/// Default cap on the order search.
pub const DEFAULT_ORDER_CAP: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum ChebyshevError {
    #[error("lambda_max must be positive and finite, got {0}")]
    InvalidInterval(f64),
    #[error("spectral density evaluation failed: {0}")]
    Psd(#[from] PsdError),
    #[error("non-finite spectral density value {value} at lambda = {lambda}")]
    NonFinite { lambda: f64, value: f64 },
    #[error("ratio tolerance must lie in (0, 1), got {0}")]
    InvalidTolerance(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevSeries {
    coeffs: Vec<f64>,
    lambda_max: f64,
}

impl ChebyshevSeries {
    /// Builds a series from folded coefficients `a_0..a_K`.
    pub fn new(coeffs: Vec<f64>, lambda_max: f64) -> Result<Self, ChebyshevError> {
        if !(lambda_max.is_finite() && lambda_max > 0.0) {
            return Err(ChebyshevError::InvalidInterval(lambda_max));
        }
        assert!(!coeffs.is_empty(), "a series needs at least one coefficient");
        Ok(Self { coeffs, lambda_max })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Polynomial order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// Classical coefficient `c_k` (undoes the folding of `c_0`).
    pub fn classical_coeff(&self, k: usize) -> f64 {
        if k == 0 {
            2.0 * self.coeffs[0]
        } else {
            self.coeffs[k]
        }
    }

    /// Maps `λ ∈ [0, λmax]` to `t ∈ [-1, 1]`.
    #[inline]
    pub fn to_unit(&self, lambda: f64) -> f64 {
        2.0 * lambda / self.lambda_max - 1.0
    }

    /// Value of `P_{γ,K}(λ)` together with a flag that is set when `λ` had to
    /// be clamped into the approximation interval.
    pub fn eval_flagged(&self, lambda: f64) -> (f64, bool) {
        let t = self.to_unit(lambda);
        let clamped = t.clamp(-1.0 - INTERVAL_SLACK, 1.0 + INTERVAL_SLACK);
        (clenshaw(&self.coeffs, clamped), clamped != t)
    }

    /// `P_{γ,K}(λ)`; out-of-interval arguments are clamped with a warning.
    pub fn eval(&self, lambda: f64) -> f64 {
        let (value, clamped) = self.eval_flagged(lambda);
        if clamped {
            log::warn!(
                "Chebyshev series evaluated at {lambda} outside [0, {}]",
                self.lambda_max
            );
        }
        value
    }

    /// Evaluation directly in the unit variable `t`.
    pub fn eval_unit(&self, t: f64) -> f64 {
        clenshaw(&self.coeffs, t)
    }

    /// Truncates to order `k` (no-op when `k ≥ K`).
    pub fn truncated(&self, k: usize) -> Self {
        let len = (k + 1).min(self.coeffs.len());
        Self {
            coeffs: self.coeffs[..len].to_vec(),
            lambda_max: self.lambda_max,
        }
    }
}

/// Clenshaw summation of `Σ a_k T_k(t)`.
pub fn clenshaw(coeffs: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &a in coeffs[1..].iter().rev() {
        let b0 = 2.0 * t * b1 - b2 + a;
        b2 = b1;
        b1 = b0;
    }
    coeffs[0] + t * b1 - b2
}

/// `[T_0(t), …, T_k(t)]` via the three-term recurrence.
pub fn chebyshev_t_values(t: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    out.push(1.0);
    if k >= 1 {
        out.push(t);
    }
    for j in 1..k {
        out.push(2.0 * t * out[j] - out[j - 1]);
    }
    out
}

/// Chebyshev–Gauss nodes `cos(π (j + ½) / n)`, `j = 0..n`.
pub fn gauss_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| (PI * (j as f64 + 0.5) / n as f64).cos())
        .collect()
}

/// Unnormalized DCT-II, `X_k = Σ_j x_j cos(π k (j + ½) / n)`, through a
/// single complex FFT of length `n`.
fn dct2(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n == 1 {
        return vec![values[0]];
    }
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    for j in 0..n.div_ceil(2) {
        buf[j] = Complex::new(values[2 * j], 0.0);
    }
    for j in 0..n / 2 {
        buf[n - 1 - j] = Complex::new(values[2 * j + 1], 0.0);
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf.iter()
        .enumerate()
        .map(|(k, v)| {
            let angle = -PI * k as f64 / (2.0 * n as f64);
            (Complex::new(angle.cos(), angle.sin()) * v).re
        })
        .collect()
}

/// Fits the order-`order` Chebyshev interpolant of `f` on `[0, lambda_max]`
/// from samples at `order + 1` Chebyshev–Gauss nodes, in `O(K log K)`.
pub fn fit_fn<F>(f: F, lambda_max: f64, order: usize) -> Result<ChebyshevSeries, ChebyshevError>
where
    F: Fn(f64) -> Result<f64, ChebyshevError>,
{
    if !(lambda_max.is_finite() && lambda_max > 0.0) {
        return Err(ChebyshevError::InvalidInterval(lambda_max));
    }
    let n = order + 1;
    let samples = gauss_nodes(n)
        .into_iter()
        .map(|t| {
            let lambda = (0.5 * lambda_max * (1.0 + t)).max(0.0);
            let value = f(lambda)?;
            if value.is_finite() {
                Ok(value)
            } else {
                Err(ChebyshevError::NonFinite { lambda, value })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let scale = 2.0 / n as f64;
    let mut coeffs: Vec<f64> = dct2(&samples).into_iter().map(|c| c * scale).collect();
    coeffs[0] *= 0.5;
    ChebyshevSeries::new(coeffs, lambda_max)
}

/// Chebyshev series of `psd` on `[0, lambda_max]` truncated at `order`.
pub fn fit(
    psd: &PowerSpectralDensity,
    lambda_max: f64,
    order: usize,
) -> Result<ChebyshevSeries, ChebyshevError> {
    fit_fn(|l| Ok(psd.eval(l)?), lambda_max, order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub order: usize,
    /// False when the cap was reached without meeting the criterion.
    pub converged: bool,
}

/// Smallest `K ≤ cap` whose coefficient satisfies `|c_K| / max_{k≤K} |c_k| < ratio_tol`.
///
/// The fitted order doubles from [`SELECT_START_ORDER`] until a qualifying
/// index appears. The classical (unfolded) coefficients enter the ratio.
pub fn select_order(
    psd: &PowerSpectralDensity,
    lambda_max: f64,
    ratio_tol: f64,
    cap: usize,
) -> Result<OrderSelection, ChebyshevError> {
    if !(ratio_tol > 0.0 && ratio_tol < 1.0) {
        return Err(ChebyshevError::InvalidTolerance(ratio_tol));
    }
    let mut fitted = SELECT_START_ORDER.min(cap.max(1));
    loop {
        let series = fit(psd, lambda_max, fitted)?;
        let mut running_max = 0.0f64;
        for k in 0..=fitted.min(cap) {
            let c = series.classical_coeff(k).abs();
            running_max = running_max.max(c);
            if running_max == 0.0 || c < ratio_tol * running_max {
                return Ok(OrderSelection {
                    order: k,
                    converged: true,
                });
            }
        }
        if fitted >= cap {
            log::warn!("Chebyshev order search hit the cap K = {cap} without meeting ratio {ratio_tol}");
            return Ok(OrderSelection {
                order: cap,
                converged: false,
            });
        }
        fitted = (fitted * 2).min(cap);
    }
}

/// Bernstein parameter `ρ = 1 + ε_χ` for margin `χ` on `[0, λmax]`,
/// `ε_χ = 2(χ + √(χ(λmax + χ))) / λmax`.
pub fn bernstein_rho(margin: f64, lambda_max: f64) -> f64 {
    1.0 + 2.0 * (margin + (margin * (lambda_max + margin)).sqrt()) / lambda_max
}

/// A-priori bound on `sup_{[0, λmax]} |γ − P_{γ,K}|`.
///
/// Analytic densities use `2 sup|γ| / (ρ^K (ρ − 1))`; densities with a
/// `ν`-th derivative of bounded variation use `2 TV(f^{(ν)}) / (πν (K − ν)^ν)`
/// with `TV(f^{(ν)}) = (λmax/2)^ν TV(γ^{(ν)})`, which is infinite for `K ≤ ν`.
pub fn uniform_error_bound(
    psd: &PowerSpectralDensity,
    series: &ChebyshevSeries,
) -> Result<f64, ChebyshevError> {
    let k = series.order() as f64;
    let lambda_max = series.lambda_max();
    match psd.regularity() {
        Regularity::Analytic { margin, sup } => {
            if margin.is_infinite() {
                return Ok(0.0);
            }
            let rho = bernstein_rho(margin, lambda_max);
            Ok(2.0 * sup / ((rho - 1.0) * rho.powf(k)))
        }
        Regularity::Finite {
            order,
            derivative_variation,
        } => {
            let nu = order as f64;
            if order == 0 || k <= nu {
                return Ok(f64::INFINITY);
            }
            let tv = (0.5 * lambda_max).powi(order as i32) * derivative_variation;
            Ok(2.0 * tv / (PI * nu * (k - nu).powf(nu)))
        }
        Regularity::Unknown => Err(PsdError::MissingRegularity.into()),
    }
}

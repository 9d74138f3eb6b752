//! Exact oracles on the unit sphere: real spherical harmonics, spectral
//! sampling, the Legendre covariance series and truncation errors.
//!
//! Modes are enumerated by `k(l, m) = l² + l + m + 1`, so the first `n`
//! modes are the ones with `k ≤ n` and eigenvalue `λ = l(l+1)` appears
//! `2l + 1` times.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::psd::{PowerSpectralDensity, PsdKind};

const FOUR_PI: f64 = 4.0 * PI;
/// Degrees summed explicitly before the closed-form Matérn tail takes over.
const EXPLICIT_TAIL_DEGREES: usize = 20_000;
const TAIL_REL_INCREMENT: f64 = 1e-14;
const CUSTOM_TAIL_CAP: usize = 10_000_000;
pub const COVARIANCE_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum SphereError {
    #[error("order m = {m} out of range for degree l = {l}")]
    IndexOutOfRange { l: usize, m: i64 },
    #[error("mode index must be at least 1")]
    ZeroModeIndex,
    #[error("tail beyond degree {l_max} exceeds {tol:e}·C(0); degree {required} is needed")]
    TailTooLarge { l_max: usize, required: usize, tol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SphericalHarmonicIndex {
    pub l: usize,
    pub m: i64,
}

impl SphericalHarmonicIndex {
    pub fn new(l: usize, m: i64) -> Result<Self, SphereError> {
        if m.unsigned_abs() as usize > l {
            return Err(SphereError::IndexOutOfRange { l, m });
        }
        Ok(Self { l, m })
    }

    /// `l² + l + m + 1`
    pub fn linear_index(&self) -> usize {
        ((self.l * self.l + self.l) as i64 + self.m + 1) as usize
    }

    pub fn from_linear(k: usize) -> Result<Self, SphereError> {
        if k == 0 {
            return Err(SphereError::ZeroModeIndex);
        }
        let l = degree_of_mode(k);
        Ok(Self {
            l,
            m: k as i64 - (l * l + l) as i64 - 1,
        })
    }

    pub fn eigenvalue(&self) -> f64 {
        (self.l * (self.l + 1)) as f64
    }
}

/// Degree `l` of mode `k ≥ 1`, i.e. `l² < k ≤ (l+1)²`.
pub fn degree_of_mode(k: usize) -> usize {
    let mut l = ((k as f64).sqrt().ceil() as usize).saturating_sub(1);
    while (l + 1) * (l + 1) < k {
        l += 1;
    }
    while l > 0 && l * l >= k {
        l -= 1;
    }
    l
}

/// Legendre polynomials `P_0(x)..P_L(x)`.
pub fn legendre(l_max: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(l_max + 1);
    p.push(1.0);
    if l_max >= 1 {
        p.push(x);
    }
    for l in 2..=l_max {
        let lf = l as f64;
        let v = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
        p.push(v);
    }
    p
}

/// Orthonormalized associated Legendre functions
/// `P̄_l^m(x) = (−1)^m √((2l+1)/(4π) · (l−m)!/(l+m)!) P_l^m(x)` for
/// `0 ≤ m ≤ l ≤ L`, stored at `l(l+1)/2 + m`. The normalization lives in
/// the recurrence coefficients, so nothing overflows at high degree.
pub fn normalized_legendre(l_max: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; (l_max + 1) * (l_max + 2) / 2];
    let at = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let s = (1.0 - x * x).max(0.0).sqrt();
    p[0] = 1.0 / FOUR_PI.sqrt();
    for m in 0..=l_max {
        if m > 0 {
            let mf = m as f64;
            p[at(m, m)] = -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s * p[at(m - 1, m - 1)];
        }
        if m < l_max {
            p[at(m + 1, m)] = x * (2.0 * m as f64 + 3.0).sqrt() * p[at(m, m)];
        }
        for l in m + 2..=l_max {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            p[at(l, m)] = a * (x * p[at(l - 1, m)] - b * p[at(l - 2, m)]);
        }
    }
    p
}

/// All real spherical harmonics with `l ≤ L` at `(θ, φ)`, entry `k − 1`
/// holding mode `k`. `m > 0` pairs with `cos(mφ)`, `m < 0` with `sin(|m|φ)`.
pub fn ylm_all(l_max: usize, theta: f64, phi: f64) -> Vec<f64> {
    let p = normalized_legendre(l_max, theta.cos());
    let mut y = vec![0.0; (l_max + 1) * (l_max + 1)];
    let sqrt2 = std::f64::consts::SQRT_2;
    for l in 0..=l_max {
        let base = l * l + l;
        y[base] = p[l * (l + 1) / 2];
        for m in 1..=l {
            let v = sqrt2 * p[l * (l + 1) / 2 + m];
            let mphi = m as f64 * phi;
            y[base + m] = v * mphi.cos();
            y[base - m] = v * mphi.sin();
        }
    }
    y
}

pub fn eval_ylm(l: usize, m: i64, theta: f64, phi: f64) -> Result<f64, SphereError> {
    let index = SphericalHarmonicIndex::new(l, m)?;
    let p = normalized_legendre(l, theta.cos());
    let abs_m = m.unsigned_abs() as usize;
    let v = p[l * (l + 1) / 2 + abs_m];
    Ok(match index.m {
        0 => v,
        m if m > 0 => std::f64::consts::SQRT_2 * v * (m as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * v * (abs_m as f64 * phi).sin(),
    })
}

/// `(θ, φ)` of a point on (or projected to) the unit sphere.
pub fn spherical_coordinates(p: [f64; 3]) -> (f64, f64) {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let theta = (p[2] / r).clamp(-1.0, 1.0).acos();
    let phi = p[1].atan2(p[0]).rem_euclid(2.0 * PI);
    (theta, phi)
}

/// `Z(x) = Σ_{l ≤ L} Σ_m γ(l(l+1)) W_{l,m} Y_{l,m}(x)` at each `(θ, φ)`,
/// with the `(L+1)²` weights drawn in mode order.
pub fn sample_spectral<R: Rng + ?Sized>(
    l_trunc: usize,
    psd: &PowerSpectralDensity,
    rng: &mut R,
    points: &[(f64, f64)],
) -> Vec<f64> {
    let modes = (l_trunc + 1) * (l_trunc + 1);
    let coeffs: Vec<f64> = (0..modes)
        .map(|k| {
            let w: f64 = rng.sample(StandardNormal);
            w * psd.value(SphericalHarmonicIndex::from_linear(k + 1).unwrap().eigenvalue())
        })
        .collect();
    points
        .iter()
        .map(|&(theta, phi)| {
            ylm_all(l_trunc, theta, phi)
                .iter()
                .zip(&coeffs)
                .map(|(y, c)| y * c)
                .sum()
        })
        .collect()
}

fn degree_weight(psd: &PowerSpectralDensity, l: usize) -> f64 {
    let g = psd.value((l * (l + 1)) as f64);
    (2 * l + 1) as f64 * g * g
}

/// `Σ_{l > L} (2l+1) γ(l(l+1))²`.
///
/// Matérn densities sum a block of degrees explicitly and close with the
/// midpoint-rule integral `∫_{L'+½}^∞ (2x+1)(κ²+x(x+1))^{−2β} dx =
/// (κ² + (L'+½)(L'+3/2))^{1−2β}/(2β−1)`; other densities are summed until
/// the relative increment drops below 1e-14.
pub fn degree_tail(psd: &PowerSpectralDensity, l_max: usize) -> f64 {
    match psd.kind() {
        PsdKind::Matern { kappa, beta } => {
            let end = l_max + EXPLICIT_TAIL_DEGREES;
            let explicit: f64 = (l_max + 1..=end).map(|l| degree_weight(psd, l)).sum();
            let u = (end as f64 + 0.5) * (end as f64 + 1.5);
            let exponent = 1.0 - 2.0 * beta;
            explicit + (kappa * kappa + u).powf(exponent) / (2.0 * beta - 1.0)
        }
        PsdKind::Custom { .. } => {
            let mut total = 0.0;
            for l in l_max + 1..CUSTOM_TAIL_CAP {
                let term = degree_weight(psd, l);
                total += term;
                if term <= TAIL_REL_INCREMENT * total || total == 0.0 {
                    break;
                }
            }
            total
        }
    }
}

/// Coefficients `(2l+1)/(4π) γ(l(l+1))²` of the covariance series.
pub fn covariance_coefficients(psd: &PowerSpectralDensity, l_max: usize) -> Vec<f64> {
    (0..=l_max).map(|l| degree_weight(psd, l) / FOUR_PI).collect()
}

/// Smallest degree whose tail stays below `tol · C(0)`.
pub fn required_lmax(psd: &PowerSpectralDensity, tol: f64) -> usize {
    let total = degree_weight(psd, 0) + degree_tail(psd, 0);
    let ok = |l: usize| degree_tail(psd, l) <= tol * total;
    if ok(0) {
        return 0;
    }
    let mut hi = 16;
    while !ok(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `C(θ) = Σ_{l≤L} (2l+1)/(4π) γ(l(l+1))² P_l(cos θ)` at each angle; fails
/// (reporting the needed degree) when the neglected tail exceeds 1e-12·C(0).
pub fn covariance_series(thetas: &[f64], psd: &PowerSpectralDensity, l_max: usize) -> Result<Vec<f64>, SphereError> {
    let tail = degree_tail(psd, l_max);
    let total = degree_weight(psd, 0) + degree_tail(psd, 0);
    if tail > COVARIANCE_TAIL_TOL * total {
        return Err(SphereError::TailTooLarge {
            l_max,
            required: required_lmax(psd, COVARIANCE_TAIL_TOL),
            tol: COVARIANCE_TAIL_TOL,
        });
    }
    let coeffs = covariance_coefficients(psd, l_max);
    let xs: Vec<f64> = thetas.iter().map(|t| t.cos()).collect();
    Ok(legendre_sums(&coeffs, &xs))
}

/// `Σ_l c_l P_l(x)` by the three-term recurrence.
pub fn legendre_sum(coeffs: &[f64], x: f64) -> f64 {
    let mut sum = coeffs[0];
    if coeffs.len() == 1 {
        return sum;
    }
    let (mut p0, mut p1) = (1.0, x);
    sum += coeffs[1] * x;
    for (l, c) in coeffs.iter().enumerate().skip(2) {
        let lf = l as f64;
        let p2 = ((2.0 * lf - 1.0) * x * p1 - (lf - 1.0) * p0) / lf;
        sum += c * p2;
        p0 = p1;
        p1 = p2;
    }
    sum
}

const LANES: usize = 8;

/// [`legendre_sum`] at many abscissae, eight at a time so the recurrences
/// interleave.
pub fn legendre_sums(coeffs: &[f64], xs: &[f64]) -> Vec<f64> {
    if coeffs.len() < 3 {
        return xs.iter().map(|&x| legendre_sum(coeffs, x)).collect();
    }
    let ratios: Vec<(f64, f64)> = (2..coeffs.len())
        .map(|l| {
            let lf = l as f64;
            ((2.0 * lf - 1.0) / lf, (lf - 1.0) / lf)
        })
        .collect();
    let mut out = Vec::with_capacity(xs.len());
    for chunk in xs.chunks(LANES) {
        let mut x = [0.0; LANES];
        x[..chunk.len()].copy_from_slice(chunk);
        let mut p0 = [1.0; LANES];
        let mut p1 = x;
        let mut sum = [0.0; LANES];
        for k in 0..LANES {
            sum[k] = coeffs[0] + coeffs[1] * x[k];
        }
        for (c, &(a, b)) in coeffs[2..].iter().zip(&ratios) {
            for k in 0..LANES {
                let p2 = a * x[k] * p1[k] - b * p0[k];
                sum[k] += c * p2;
                p0[k] = p1[k];
                p1[k] = p2;
            }
        }
        out.extend_from_slice(&sum[..chunk.len()]);
    }
    out
}

pub fn covariance_exact(theta: f64, psd: &PowerSpectralDensity, l_max: usize) -> Result<f64, SphereError> {
    Ok(covariance_series(&[theta], psd, l_max)?[0])
}

/// `√(Σ_{k > n} γ(λ_k)²)`, the L²(Ω; L²(S²)) distance between the field and
/// its first `n` modes.
pub fn truncation_error_exact(n_modes: usize, psd: &PowerSpectralDensity) -> f64 {
    let first = degree_of_mode(n_modes + 1);
    let g = psd.value((first * (first + 1)) as f64);
    let partial_block = ((first + 1) * (first + 1) - n_modes) as f64 * g * g;
    (partial_block + degree_tail(psd, first)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// The Monte Carlo estimate `√(mean ‖Z_ref − Z^{(n)}‖²)` with `Z_ref`
/// truncated at degree `l_ref`. In the orthonormal basis the squared
/// distance of one draw is `Σ_{n<k≤(l_ref+1)²} W_k² γ(λ_k)²`; the standard
/// error follows by the delta method.
pub fn truncation_error_mc<R: Rng + ?Sized>(
    n_modes: usize,
    psd: &PowerSpectralDensity,
    l_ref: usize,
    samples: usize,
    rng: &mut R,
) -> MonteCarloEstimate {
    let total = (l_ref + 1) * (l_ref + 1);
    let g2: Vec<f64> = (n_modes + 1..=total)
        .map(|k| {
            let g = psd.value(SphericalHarmonicIndex::from_linear(k).unwrap().eigenvalue());
            g * g
        })
        .collect();
    let draws: Vec<f64> = (0..samples)
        .map(|_| {
            g2.iter()
                .map(|c| {
                    let w: f64 = rng.sample(StandardNormal);
                    w * w * c
                })
                .sum()
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / samples as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (samples as f64 - 1.0);
    let estimate = mean.sqrt();
    let std_error = if estimate > 0.0 {
        0.5 * (var / samples as f64).sqrt() / estimate
    } else {
        0.0
    };
    MonteCarloEstimate {
        estimate,
        std_error,
        samples,
    }
}

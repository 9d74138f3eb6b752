use std::time::Instant;

use crate::chebyshev::{bernstein_rho, fit, select_order};
use crate::psd::PowerSpectralDensity;
use crate::sphere::degree_of_mode;

use super::config::ChebErrorConfig;
use super::report::{ConvergenceReport, FitKind, ReportPoint};
use super::ExperimentError;

/// The first `n_modes` Laplace–Beltrami eigenvalues of the unit sphere,
/// `l(l+1)` repeated `2l+1` times.
pub fn sphere_eigenvalues(n_modes: usize) -> Vec<f64> {
    (1..=n_modes)
        .map(|k| {
            let l = degree_of_mode(k) as f64;
            l * (l + 1.0)
        })
        .collect()
}

/// `Σ_k (γ(λ_k) − P_{γ,K}(λ_k))²` over `eigenvalues`, with `P_{γ,K}` fitted
/// on `[0, λmax]`.
pub fn polynomial_error(
    psd: &PowerSpectralDensity,
    eigenvalues: &[f64],
    lambda_max: f64,
    order: usize,
) -> Result<f64, ExperimentError> {
    let series = fit(psd, lambda_max, order)?;
    Ok(eigenvalues
        .iter()
        .map(|&l| (psd.value(l) - series.eval(l)).powi(2))
        .sum())
}

/// Polynomial error against `K` on the sphere spectrum. Passes when the
/// pre-floor points lie on a line in `(K, log error)` with
/// `R² ≥ min_r_squared` and the criterion-selected order reduces the error
/// at `K = 1` by `reduction`.
pub fn run_cheb_error_study(cfg: &ChebErrorConfig) -> Result<ConvergenceReport, ExperimentError> {
    let start = Instant::now();
    if cfg.n_modes == 0 || cfg.orders.is_empty() {
        return Err(ExperimentError::Config("need n_modes ≥ 1 and at least one order".into()));
    }
    let psd = PowerSpectralDensity::matern_from_range(cfg.nu, cfg.range)?;
    let eigenvalues = sphere_eigenvalues(cfg.n_modes);
    let lambda_max = eigenvalues.last().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let config = serde_json::to_value(cfg).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut report = ConvergenceReport::new("cheb_error", "order", FitKind::SemiLog, config);

    let gamma_max = eigenvalues.iter().map(|&l| psd.value(l).abs()).fold(0.0, f64::max);
    let floor = cfg.n_modes as f64 * (cfg.floor_factor * f64::EPSILON * gamma_max).powi(2);
    let mut orders = cfg.orders.clone();
    orders.sort_unstable();
    orders.dedup();
    let mut in_window = true;
    let mut previous = f64::INFINITY;
    let mut increases = 0;
    for &k in &orders {
        let error = polynomial_error(&psd, &eigenvalues, lambda_max, k)?;
        if error <= floor {
            in_window = false;
        }
        if in_window && error > previous {
            increases += 1;
        }
        previous = error;
        let mut p = ReportPoint::new(k as f64, error);
        p.order = Some(k);
        p.lambda_max = Some(lambda_max);
        p.in_fit = in_window;
        report.points.push(p);
    }
    if increases > 0 {
        report.notes.push(format!("error increased {increases} times before the floor"));
    }
    report.fit_flagged();

    let selection = select_order(&psd, lambda_max, cfg.ratio_tol, cfg.order_cap)?;
    let error_k1 = polynomial_error(&psd, &eigenvalues, lambda_max, 1)?;
    let error_sel = polynomial_error(&psd, &eigenvalues, lambda_max, selection.order)?;
    let ratio = error_sel / error_k1;
    // squared uniform error decays at least like ρ^{−2K}
    let bound_slope = psd
        .analyticity_margin()
        .map(|chi| -2.0 * bernstein_rho(chi, lambda_max).ln());
    let r_squared = report.fit.map(|f| f.r_squared).unwrap_or(f64::NAN);
    report.passed = r_squared >= cfg.min_r_squared && ratio <= cfg.reduction && selection.converged;
    report.extras.insert("lambda_max".into(), lambda_max);
    report.extras.insert("floor".into(), floor);
    report.extras.insert("selected_order".into(), selection.order as f64);
    report.extras.insert("error_k1".into(), error_k1);
    report.extras.insert("error_selected".into(), error_sel);
    report.extras.insert("selected_reduction".into(), ratio);
    report.extras.insert("r_squared".into(), r_squared);
    report.extras.insert("monotone_increases".into(), increases as f64);
    if let Some(s) = bound_slope {
        report.extras.insert("bound_slope".into(), s);
    }
    if let Some(k) = report
        .points
        .iter()
        .find(|p| p.error <= 1e-8 * error_k1)
        .and_then(|p| p.order)
    {
        report.extras.insert("first_order_below_1e-8".into(), k as f64);
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    log::info!(
        "polynomial error study: R² = {r_squared:.5}, K_selected = {}, reduction {ratio:e}",
        selection.order
    );
    Ok(report)
}

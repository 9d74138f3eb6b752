use std::time::Instant;

use crate::psd::PowerSpectralDensity;
use crate::sphere::truncation_error_exact;

use super::config::TruncationConfig;
use super::report::{ConvergenceReport, FitKind, ReportPoint};
use super::ExperimentError;

/// Exact truncation error of `psd` at each mode count, fitted on log-log
/// axes against `expected`.
pub fn truncation_report(
    psd: &PowerSpectralDensity,
    orders: &[usize],
    expected: f64,
    tolerance: f64,
    config: serde_json::Value,
) -> ConvergenceReport {
    let start = Instant::now();
    let mut report = ConvergenceReport::new("truncation", "n_modes", FitKind::LogLog, config);
    for &n in orders {
        let mut p = ReportPoint::new(n as f64, truncation_error_exact(n, psd));
        p.in_fit = n > 0;
        report.points.push(p);
    }
    report.fit_flagged();
    report.judge_slope(expected, tolerance);
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report
}

/// Matérn truncation study; the expected slope is `−ν/2`.
pub fn run_truncation_study(cfg: &TruncationConfig) -> Result<ConvergenceReport, ExperimentError> {
    if cfg.orders.is_empty() {
        return Err(ExperimentError::Config("no truncation orders".into()));
    }
    let psd = PowerSpectralDensity::matern_from_range(cfg.nu, cfg.range)?;
    let config = serde_json::to_value(cfg).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let report = truncation_report(&psd, &cfg.orders, -cfg.nu / 2.0, cfg.tolerance, config);
    log::info!(
        "truncation study ν = {}: slope {:?} (expected {})",
        cfg.nu,
        report.slope(),
        -cfg.nu / 2.0
    );
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psd::Regularity;

    #[test]
    fn matern_slopes() {
        for (nu, range) in [(1.0, std::f64::consts::PI / 6.0), (0.75, std::f64::consts::PI / 3.0)] {
            let r = run_truncation_study(&TruncationConfig {
                nu,
                range,
                ..Default::default()
            })
            .unwrap();
            assert!(r.passed, "ν = {nu}: {:?}", r.fit);
            assert_eq!(r.points.len(), 5);
        }
    }

    #[test]
    fn compact_support_is_flagged_degenerate() {
        let psd = PowerSpectralDensity::custom("low", 1.0, Regularity::Unknown, |l| if l <= 2.0 { 1.0 } else { 0.0 }).unwrap();
        let r = truncation_report(&psd, &[1, 4, 9, 16], -0.5, 0.05, serde_json::Value::Null);
        assert_eq!(r.points[1].error, 0.0);
        assert!(r.fit.is_none() && !r.passed);
        assert!(r.notes[0].starts_with("degenerate fit"));
    }
}

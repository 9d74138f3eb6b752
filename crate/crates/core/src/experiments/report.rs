use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

/// Axis transform of a convergence fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `log(error)` against `log(resolution)`: algebraic rates.
    LogLog,
    /// `log(error)` against `resolution`: exponential rates.
    SemiLog,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportPoint {
    pub resolution: f64,
    pub error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_max: Option<f64>,
    pub in_fit: bool,
}

impl ReportPoint {
    pub fn new(resolution: f64, error: f64) -> Self {
        Self {
            resolution,
            error,
            level: None,
            order: None,
            lambda_max: None,
            in_fit: false,
        }
    }
}

/// Ordinary least-squares line `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    /// Standard error of the slope; `NaN` with only two points.
    pub std_error: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

/// Fits a line through `(x, y)`; `None` with fewer than two points or no
/// spread in `x`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let m = x.len();
    if m < 2 || y.len() != m {
        return None;
    }
    let mf = m as f64;
    let xm = x.iter().sum::<f64>() / mf;
    let ym = y.iter().sum::<f64>() / mf;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let syy: f64 = y.iter().map(|v| (v - ym).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let std_error = if m > 2 { (sse / (mf - 2.0) / sxx).sqrt() } else { f64::NAN };
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Some(LineFit {
        slope,
        std_error,
        intercept,
        r_squared,
        points_used: m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub study: String,
    /// Name of the resolution parameter (`n_modes`, `vertices`, `order`).
    pub resolution: String,
    pub fit_kind: FitKind,
    pub points: Vec<ReportPoint>,
    pub fit: Option<LineFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected_slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub passed: bool,
    pub notes: Vec<String>,
    pub extras: BTreeMap<String, f64>,
    pub config: serde_json::Value,
    pub wall_clock_seconds: f64,
}

/// Minimum number of points for a rate fit.
pub const MIN_FIT_POINTS: usize = 3;

impl ConvergenceReport {
    pub fn new(study: &str, resolution: &str, fit_kind: FitKind, config: serde_json::Value) -> Self {
        Self {
            study: study.to_string(),
            resolution: resolution.to_string(),
            fit_kind,
            points: Vec::new(),
            fit: None,
            expected_slope: None,
            tolerance: None,
            passed: false,
            notes: Vec::new(),
            extras: BTreeMap::new(),
            config,
            wall_clock_seconds: 0.0,
        }
    }

    /// Fits the points flagged `in_fit`. Needs [`MIN_FIT_POINTS`] positive
    /// errors; otherwise the fit is left empty and a note explains why.
    pub fn fit_flagged(&mut self) {
        let used: Vec<&ReportPoint> = self.points.iter().filter(|p| p.in_fit).collect();
        if used.len() < MIN_FIT_POINTS || used.iter().any(|p| !(p.error > 0.0)) {
            self.fit = None;
            self.notes.push(format!(
                "degenerate fit: {} usable points with positive error (need {MIN_FIT_POINTS})",
                used.iter().filter(|p| p.error > 0.0).count()
            ));
            return;
        }
        let x: Vec<f64> = used
            .iter()
            .map(|p| match self.fit_kind {
                FitKind::LogLog => p.resolution.ln(),
                FitKind::SemiLog => p.resolution,
            })
            .collect();
        let y: Vec<f64> = used.iter().map(|p| p.error.ln()).collect();
        self.fit = fit_line(&x, &y);
    }

    /// Sets `passed` from `|slope − expected| ≤ tolerance`.
    pub fn judge_slope(&mut self, expected: f64, tolerance: f64) {
        self.expected_slope = Some(expected);
        self.tolerance = Some(tolerance);
        self.passed = self
            .fit
            .map(|f| (f.slope - expected).abs() <= tolerance)
            .unwrap_or(false);
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    /// The data table. Contains no timing, so equal configs give equal bytes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{},error,level,order,lambda_max,in_fit", self.resolution)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for p in &self.points {
            writeln!(
                w,
                "{},{:e},{},{},{},{}",
                p.resolution,
                p.error,
                opt(p.level.map(|v| v.to_string())),
                opt(p.order.map(|v| v.to_string())),
                opt(p.lambda_max.map(|v| format!("{v:e}"))),
                p.in_fit
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Writes `report.csv` and `report.json` into `dir`, creating it.
    pub fn save(&self, dir: impl AsRef<Path>) -> io::Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut csv = Vec::new();
        self.write_csv(&mut csv)?;
        std::fs::write(dir.join("report.csv"), csv)?;
        let json = self.to_json().map_err(io::Error::other)?;
        std::fs::write(dir.join("report.json"), json + "\n")
    }
}

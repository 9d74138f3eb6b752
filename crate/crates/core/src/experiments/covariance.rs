use std::f64::consts::PI;
use std::time::Instant;

use log::{info, warn};

use crate::chebyshev::{fit, select_order};
use crate::mesh::{hyperboloid, icosphere, TriangleMesh, Vec3};
use crate::operators::GalerkinOperator;
use crate::psd::PowerSpectralDensity;
use crate::sampler::{chebyshev_covariance_column, covariance_column_from_eigs, mc_covariance_column};
use crate::sphere::{covariance_series, required_lmax, COVARIANCE_TAIL_TOL};

use super::config::{ColumnSettings, CovarianceMode, HyperCovConfig, SphereCovConfig};
use super::report::{ConvergenceReport, FitKind, ReportPoint};
use super::ExperimentError;

/// Covariance between vertex `base` and every vertex, for the
/// Galerkin–Chebyshev field on one mesh.
#[derive(Debug, Clone)]
pub struct LevelColumn {
    pub column: Vec<f64>,
    pub order: usize,
    pub lambda_max: f64,
    /// Method actually used, after any cap fallback.
    pub mode: CovarianceMode,
    /// Per-vertex empirical variances in Monte Carlo mode.
    pub mc_variances: Option<Vec<f64>>,
}

/// Builds the operator on `mesh` and computes covariance column `base` of
/// the field with the criterion-selected Chebyshev order.
pub fn level_covariance_column(
    mesh: &TriangleMesh,
    psd: &PowerSpectralDensity,
    base: usize,
    mode: CovarianceMode,
    settings: &ColumnSettings,
) -> Result<LevelColumn, ExperimentError> {
    let op = GalerkinOperator::from_mesh(mesh, settings.mass, settings.ordering)?;
    let n = op.n();
    let lambda_max = op.lambda_max();
    let selection = select_order(psd, lambda_max, settings.cheb_tol, settings.cheb_cap)?;
    let series = fit(psd, lambda_max, selection.order)?;
    let mode = if mode == CovarianceMode::Dense && n > settings.dense_cap {
        warn!(
            "n = {n} exceeds the dense cap {}; using {:?} instead",
            settings.dense_cap, settings.fallback
        );
        settings.fallback
    } else {
        mode
    };
    let mut mc_variances = None;
    let column = match mode {
        CovarianceMode::Dense => {
            let eig = op.dense_eigs(settings.dense_cap)?;
            covariance_column_from_eigs(&op, &eig, |l| series.eval(l), base)
        }
        CovarianceMode::MatrixFree => chebyshev_covariance_column(&op, &series, base)?,
        CovarianceMode::Mc => {
            let (col, var) =
                mc_covariance_column(&op, &series, base, settings.mc_samples, settings.seed, settings.workers)?;
            mc_variances = Some(var);
            col
        }
    };
    Ok(LevelColumn {
        column,
        order: selection.order,
        lambda_max,
        mode,
        mc_variances,
    })
}

/// Hat-basis interpolation of `column` at each point.
fn interpolate(mesh: &TriangleMesh, column: &[f64], points: &[Vec3]) -> Vec<f64> {
    points
        .iter()
        .map(|&p| {
            mesh.interpolation_weights(p)
                .iter()
                .map(|&(v, w)| w * column[v])
                .sum()
        })
        .collect()
}

/// Index of the vertex at `p`.
fn vertex_at(mesh: &TriangleMesh, p: Vec3) -> Result<usize, ExperimentError> {
    let (index, dist) = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, v)| (i, ((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2) + (v[2] - p[2]).powi(2)).sqrt()))
        .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
    if dist > 1e-9 {
        return Err(ExperimentError::Config(format!(
            "base point {p:?} is not a mesh vertex (nearest at distance {dist:e})"
        )));
    }
    Ok(index)
}

/// `angles` equispaced angles `θ_i = πi/(angles+1)` and the points at those
/// angles from `base` along a great circle.
pub fn great_circle_points(base: Vec3, angles: usize) -> (Vec<f64>, Vec<Vec3>) {
    // any direction not parallel to base works; take the least aligned axis
    let axis = (0..3)
        .min_by(|&a, &b| base[a].abs().total_cmp(&base[b].abs()))
        .unwrap_or(2);
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let d = base[axis];
    let mut t = [e[0] - d * base[0], e[1] - d * base[1], e[2] - d * base[2]];
    let norm = (t[0] * t[0] + t[1] * t[1] + t[2] * t[2]).sqrt();
    t.iter_mut().for_each(|v| *v /= norm);
    let thetas: Vec<f64> = (1..=angles).map(|i| PI * i as f64 / (angles + 1) as f64).collect();
    let points = thetas
        .iter()
        .map(|&th| {
            let (s, c) = th.sin_cos();
            [c * base[0] + s * t[0], c * base[1] + s * t[1], c * base[2] + s * t[2]]
        })
        .collect();
    (thetas, points)
}

/// The heights `z = −2 + 0.04 i`, `i = 0..=100`, and the points
/// `(√(1+z²), 0, z)` on the hyperboloid.
pub fn hyperboloid_points() -> (Vec<f64>, Vec<Vec3>) {
    let zs: Vec<f64> = (0..=100).map(|i| -2.0 + 0.04 * i as f64).collect();
    let points = zs.iter().map(|&z| [(1.0 + z * z).sqrt(), 0.0, z]).collect();
    (zs, points)
}

fn fit_window(report: &mut ConvergenceReport, drop_first: bool) {
    for (i, p) in report.points.iter_mut().enumerate() {
        p.in_fit = !(drop_first && i == 0);
    }
    report.fit_flagged();
}

fn level_point(mesh: &TriangleMesh, level: u32, error: f64, col: &LevelColumn) -> ReportPoint {
    let mut p = ReportPoint::new(mesh.vertex_count() as f64, error);
    p.level = Some(level);
    p.order = Some(col.order);
    p.lambda_max = Some(col.lambda_max);
    p
}

/// Maximum covariance error along a great circle of the icosphere against
/// the Legendre series, per level; expected slope `−ν` in the vertex count.
pub fn run_sphere_covariance_study(cfg: &SphereCovConfig) -> Result<ConvergenceReport, ExperimentError> {
    let start = Instant::now();
    if cfg.levels.is_empty() || cfg.angles == 0 {
        return Err(ExperimentError::Config("need at least one level and one angle".into()));
    }
    let psd = PowerSpectralDensity::matern_from_range(cfg.nu, cfg.range)?;
    let config = serde_json::to_value(cfg).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut report = ConvergenceReport::new("sphere_covariance", "vertices", FitKind::LogLog, config);

    let l_max = required_lmax(&psd, COVARIANCE_TAIL_TOL);
    let mut exact: Option<(Vec3, Vec<f64>, Vec<Vec3>)> = None;
    for &level in &cfg.levels {
        let t0 = Instant::now();
        let mesh = icosphere(level)?;
        let base_point = *mesh.vertices().get(cfg.base_vertex).ok_or_else(|| {
            ExperimentError::Config(format!("level {level} has no vertex {}", cfg.base_vertex))
        })?;
        if exact.as_ref().map(|e| e.0 != base_point).unwrap_or(true) {
            let (thetas, points) = great_circle_points(base_point, cfg.angles);
            let values = covariance_series(&thetas, &psd, l_max)?;
            exact = Some((base_point, values, points));
        }
        let (_, values, points) = exact.as_ref().expect("set above");
        let col = level_covariance_column(&mesh, &psd, cfg.base_vertex, cfg.column.mode, &cfg.column)?;
        if col.mode != cfg.column.mode {
            report
                .notes
                .push(format!("level {level}: dense cap exceeded, used {:?}", col.mode));
        }
        let approx = interpolate(&mesh, &col.column, points);
        let error = approx
            .iter()
            .zip(values)
            .map(|(a, e)| (a - e).abs())
            .fold(0.0, f64::max);
        info!(
            "sphere level {level}: n = {}, K = {}, error {error:e} ({:.1} s)",
            mesh.vertex_count(),
            col.order,
            t0.elapsed().as_secs_f64()
        );
        report.points.push(level_point(&mesh, level, error, &col));
    }
    let (_, values, _) = exact.expect("at least one level");
    report.extras.insert("legendre_degree".into(), l_max as f64);
    report.extras.insert("exact_variance".into(), psd_variance(&psd, l_max)?);
    report.extras.insert("exact_max_abs".into(), values.iter().fold(0.0, |m: f64, v| m.max(v.abs())));
    fit_window(&mut report, cfg.drop_first);
    report.judge_slope(-cfg.nu, cfg.tolerance);
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

fn psd_variance(psd: &PowerSpectralDensity, l_max: usize) -> Result<f64, ExperimentError> {
    Ok(covariance_series(&[0.0], psd, l_max)?[0])
}

/// Self-convergence on the hyperboloid: covariance between `(1, 0, 0)` and
/// the 101 points `(√(1+z²), 0, z)` per level, against the reference level.
pub fn run_hyperboloid_covariance_study(cfg: &HyperCovConfig) -> Result<ConvergenceReport, ExperimentError> {
    let start = Instant::now();
    if cfg.levels.is_empty() {
        return Err(ExperimentError::Config("need at least one level".into()));
    }
    if let Some(&l) = cfg.levels.iter().find(|&&l| l >= cfg.reference_level) {
        return Err(ExperimentError::Config(format!(
            "level {l} is not coarser than the reference level {}",
            cfg.reference_level
        )));
    }
    let psd = PowerSpectralDensity::matern_from_range(cfg.nu, cfg.range)?;
    let config = serde_json::to_value(cfg).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut report = ConvergenceReport::new("hyperboloid_covariance", "vertices", FitKind::LogLog, config);
    let (_, points) = hyperboloid_points();
    let base_point = [1.0, 0.0, 0.0];
    // symmetric pair z = ±2 are the first and last points
    let asymmetry = |v: &[f64]| (v[0] - v[100]).abs() / v[0].abs().max(v[100].abs());

    let t0 = Instant::now();
    let mesh = hyperboloid(cfg.reference_level)?;
    let col = level_covariance_column(&mesh, &psd, vertex_at(&mesh, base_point)?, cfg.reference_mode, &cfg.column)?;
    let reference = interpolate(&mesh, &col.column, &points);
    info!(
        "hyperboloid reference level {}: n = {}, K = {}, {:?} ({:.1} s)",
        cfg.reference_level,
        mesh.vertex_count(),
        col.order,
        col.mode,
        t0.elapsed().as_secs_f64()
    );
    if col.mode != cfg.reference_mode {
        report.notes.push(format!(
            "reference level {}: dense cap exceeded, used {:?}",
            cfg.reference_level, col.mode
        ));
    }
    report.extras.insert("reference_vertices".into(), mesh.vertex_count() as f64);
    report.extras.insert("reference_order".into(), col.order as f64);
    report
        .extras
        .insert("reference_variance".into(), col.column[vertex_at(&mesh, base_point)?]);
    report.extras.insert("reference_asymmetry".into(), asymmetry(&reference));

    let mut worst_asymmetry: f64 = 0.0;
    for &level in &cfg.levels {
        let t0 = Instant::now();
        let mesh = hyperboloid(level)?;
        let base = vertex_at(&mesh, base_point)?;
        let col = level_covariance_column(&mesh, &psd, base, cfg.column.mode, &cfg.column)?;
        if col.mode != cfg.column.mode {
            report
                .notes
                .push(format!("level {level}: dense cap exceeded, used {:?}", col.mode));
        }
        let values = interpolate(&mesh, &col.column, &points);
        worst_asymmetry = worst_asymmetry.max(asymmetry(&values));
        let error = values
            .iter()
            .zip(&reference)
            .map(|(a, r)| (a - r).abs())
            .fold(0.0, f64::max);
        info!(
            "hyperboloid level {level}: n = {}, K = {}, error {error:e} ({:.1} s)",
            mesh.vertex_count(),
            col.order,
            t0.elapsed().as_secs_f64()
        );
        report.points.push(level_point(&mesh, level, error, &col));
    }
    report.extras.insert("max_level_asymmetry".into(), worst_asymmetry);
    fit_window(&mut report, cfg.drop_first);
    report.judge_slope(-cfg.nu, cfg.tolerance);
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

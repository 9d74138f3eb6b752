//! Acceptance criteria 1–10, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`). The exit status is zero
//! unless `GRF_ACCEPTANCE_STRICT=1` is set and a criterion failed, so the
//! report can be read from `cargo test` output without aborting the run.

use std::error::Error;
use std::f64::consts::PI;
use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use grf_core::chebyshev::{fit, select_order, DEFAULT_ORDER_CAP, DEFAULT_RATIO_TOL};
use grf_core::cholesky::{Ordering, SparseCholesky};
use grf_core::experiments::{
    run_cheb_error_study, run_hyperboloid_covariance_study, run_sphere_covariance_study, run_truncation_study,
    ChebErrorConfig, HyperCovConfig, SphereCovConfig, TruncationConfig,
};
use grf_core::fem::{assemble_mass, assemble_stiffness, lumped_mass};
use grf_core::mesh::{hyperboloid, icosphere, TriangleMesh};
use grf_core::sampler::{
    apply_chebyshev, empirical_covariance, exact_weight_covariance, max_standardized_deviation, sample_batch,
    standard_normals, stream_rng,
};
use grf_core::{GalerkinOperator, MassMode, PowerSpectralDensity};

type Outcome = Result<(bool, String), Box<dyn Error>>;

fn matern_pi6() -> PowerSpectralDensity {
    PowerSpectralDensity::matern_from_range(1.0, PI / 6.0).expect("valid parameters")
}

fn sphere_op(level: u32, mode: MassMode) -> Result<GalerkinOperator, Box<dyn Error>> {
    Ok(GalerkinOperator::from_mesh(&icosphere(level)?, mode, Ordering::ReverseCuthillMcKee)?)
}

fn symmetric_eigenvalues(m: &Mat<f64>) -> Result<Vec<f64>, Box<dyn Error>> {
    let values = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| format!("eigensolver: {e:?}"))?;
    Ok(values)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = Vec::new();
    for (nu, range) in [(0.75, PI / 3.0), (1.0, PI / 6.0)] {
        let report = run_truncation_study(&TruncationConfig {
            nu,
            range,
            ..Default::default()
        })?;
        let slope = report.slope().unwrap_or(f64::NAN);
        let expected = -nu / 2.0;
        ok &= (slope - expected).abs() <= 0.05;
        detail.push(format!("ν={nu}: slope {slope:.4} (expected {expected} ± 0.05)"));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 10.0;
    detail.push(format!("{secs:.2} s < 10 s"));
    Ok((ok, detail.join("; ")))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let op = sphere_op(1, MassMode::Cholesky)?;
    let n = op.n();
    let lambda_max = op.lambda_max();
    // oracle: T_k(M) = V cos(k arccos μ) Vᵀ from a dense eigendecomposition of M
    let s = op.dense_s(n)?;
    let m = Mat::from_fn(n, n, |i, j| 2.0 / lambda_max * s[(i, j)] - if i == j { 1.0 } else { 0.0 });
    let eig = m.self_adjoint_eigen(Side::Lower).map_err(|e| format!("{e:?}"))?;
    let mu: Vec<f64> = eig.S().column_vector().iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    let v = eig.U();
    let w = standard_normals(&mut stream_rng(2, 0), n);
    let vw: Vec<f64> = (0..n).map(|k| (0..n).map(|i| v[(i, k)] * w[i]).sum()).collect();
    let psd = matern_pi6();
    let mut worst = 0.0f64;
    for order in [0usize, 1, 5, 20] {
        let series = fit(&psd, lambda_max, order)?;
        let x = apply_chebyshev(&op, &series, &w)?;
        let coeffs = series.coeffs();
        let weights: Vec<f64> = mu
            .iter()
            .zip(&vw)
            .map(|(&m, &c)| {
                let theta = m.acos();
                c * coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, a)| a * (k as f64 * theta).cos())
                    .sum::<f64>()
            })
            .collect();
        let dense: Vec<f64> = (0..n).map(|i| (0..n).map(|k| v[(i, k)] * weights[k]).sum()).collect();
        let norm = dense.iter().map(|d| d * d).sum::<f64>().sqrt();
        let diff = x.iter().zip(&dense).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(diff / norm);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-10 && secs < 1.0,
        format!("max relative difference {worst:.2e} ≤ 1e-10 for K ∈ {{0,1,5,20}}; {secs:.3} s < 1 s"),
    ))
}

/// Fraction of upper-triangle entries beyond 3 standard errors; about
/// 0.0027 when the deviations are standard normal.
fn beyond_three_sigma(empirical: &Mat<f64>, exact: &Mat<f64>, count: usize) -> f64 {
    let n = exact.nrows();
    let mut hits = 0usize;
    for i in 0..n {
        for j in i..n {
            let sigma = ((exact[(i, i)] * exact[(j, j)] + exact[(i, j)].powi(2)) / count as f64).sqrt();
            if (empirical[(i, j)] - exact[(i, j)]).abs() > 3.0 * sigma {
                hits += 1;
            }
        }
    }
    hits as f64 / (n * (n + 1) / 2) as f64
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let count = 100_000;
    let mesh = icosphere(2)?;
    let op = GalerkinOperator::from_mesh(&mesh, MassMode::Cholesky, Ordering::ReverseCuthillMcKee)?;
    let n = op.n();

    let psd = matern_pi6();
    let order = select_order(&psd, op.lambda_max(), DEFAULT_RATIO_TOL, DEFAULT_ORDER_CAP)?.order;
    let series = fit(&psd, op.lambda_max(), order)?;
    let samples = sample_batch(&op, &series, count, 31, 1)?;
    let exact = exact_weight_covariance(&op, &psd, n)?;
    let empirical = empirical_covariance(&samples);
    drop(samples);
    let matern_dev = max_standardized_deviation(&empirical, &exact, count);
    let matern_tail = beyond_three_sigma(&empirical, &exact, count);

    // white noise: γ ≡ 1 gives C⁻¹, inverted here from the assembled mass
    let white = fit(&PowerSpectralDensity::constant(1.0), op.lambda_max(), 0)?;
    let samples = sample_batch(&op, &white, count, 32, 1)?;
    let c = assemble_mass(&mesh)?.to_dense();
    let c_inv = c.partial_piv_lu().solve(Mat::<f64>::identity(n, n));
    let empirical = empirical_covariance(&samples);
    let white_dev = max_standardized_deviation(&empirical, &c_inv, count);
    let white_tail = beyond_three_sigma(&empirical, &c_inv, count);

    let secs = start.elapsed().as_secs_f64();
    Ok((
        matern_dev <= 4.0 && white_dev <= 4.0 && secs < 120.0,
        format!(
            "n={n}, K={order}, 10⁵ samples: Matérn max deviation {matern_dev:.3}σ, white noise {white_dev:.3}σ (≤ 4σ); \
             entries beyond 3σ: {:.2}‰ and {:.2}‰ (2.7‰ for a calibrated estimator); {secs:.1} s < 120 s",
            1e3 * matern_tail,
            1e3 * white_tail
        ),
    ))
}

fn sphere_study(mass: MassMode) -> Result<(f64, f64), Box<dyn Error>> {
    let mut cfg = SphereCovConfig::default();
    cfg.column.mass = mass;
    let start = Instant::now();
    let report = run_sphere_covariance_study(&cfg)?;
    let errors: Vec<String> = report.points.iter().map(|p| format!("{:.2e}", p.error)).collect();
    eprintln!("  sphere covariance ({mass:?}) errors by level 1–4: {}", errors.join(", "));
    Ok((report.slope().unwrap_or(f64::NAN), start.elapsed().as_secs_f64()))
}

fn criterion_4_5() -> Result<[(bool, String); 2], Box<dyn Error>> {
    let (chol, chol_secs) = sphere_study(MassMode::Cholesky)?;
    let (lumped, _) = sphere_study(MassMode::Lumped)?;
    Ok([
        (
            (chol + 1.0).abs() <= 0.15 && chol_secs < 600.0,
            format!("dense, levels 1–4: slope {chol:.4} (expected −1 ± 0.15); {chol_secs:.1} s < 600 s"),
        ),
        (
            (lumped - chol).abs() <= 0.1,
            format!(
                "lumped slope {lumped:.4} vs Cholesky slope {chol:.4}: difference {:.4} (≤ 0.1)",
                (lumped - chol).abs()
            ),
        ),
    ])
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let report = run_hyperboloid_covariance_study(&HyperCovConfig {
        levels: vec![0, 1, 2, 3, 4],
        reference_level: 6,
        ..Default::default()
    })?;
    let errors: Vec<String> = report.points.iter().map(|p| format!("{:.2e}", p.error)).collect();
    eprintln!("  hyperboloid errors by level 0–4: {}", errors.join(", "));
    let slope = report.slope().unwrap_or(f64::NAN);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        (slope + 1.0).abs() <= 0.2 && secs < 900.0,
        format!(
            "lumped, levels 0–4 against level 6 (n={}): slope {slope:.4} (expected −1 ± 0.2); {secs:.1} s < 900 s",
            report.extras["reference_vertices"]
        ),
    ))
}

fn criterion_7() -> Outcome {
    let report = run_cheb_error_study(&ChebErrorConfig::default())?;
    let r2 = report.extras["r_squared"];
    let reduction = report.extras["selected_reduction"];
    let window = report.points.iter().filter(|p| p.in_fit).count();
    Ok((
        r2 >= 0.98 && reduction <= 1e-10 && report.passed,
        format!(
            "n=1024: R² {r2:.5} (≥ 0.98) over {window} pre-floor orders; error(K={}) / error(K=1) = {reduction:.2e} (≤ 1e-10)",
            report.extras["selected_order"]
        ),
    ))
}

fn check_mesh(name: &str, mesh: &TriangleMesh, failures: &mut Vec<String>) -> Result<(), Box<dyn Error>> {
    let c = assemble_mass(mesh)?;
    let r = assemble_stiffness(mesh)?;
    let l = lumped_mass(mesh)?;
    let n = mesh.vertex_count();
    if !c.is_symmetric() {
        failures.push(format!("{name}: C not symmetric"));
    }
    if !r.is_symmetric() {
        failures.push(format!("{name}: R not symmetric"));
    }
    if SparseCholesky::factorize(&c, Ordering::ReverseCuthillMcKee).is_err() {
        failures.push(format!("{name}: Cholesky failed"));
    }
    let r_max = r.max_abs();
    let r1 = r.mul_vec(&vec![1.0; n]);
    if r1.iter().any(|v| v.abs() > 1e-10 * r_max) {
        failures.push(format!("{name}: R·1 ≠ 0"));
    }
    let area = mesh.surface_area();
    let trace: f64 = l.diagonal().iter().sum();
    if (trace - area).abs() > 1e-12 * area {
        failures.push(format!("{name}: trace(Ĉ) = {trace} vs area {area}"));
    }
    if n <= 500 {
        let min = symmetric_eigenvalues(&r.to_dense())?.into_iter().fold(f64::INFINITY, f64::min);
        if min < -1e-10 * r_max {
            failures.push(format!("{name}: R has eigenvalue {min:e}"));
        }
        for mode in [MassMode::Cholesky, MassMode::Lumped] {
            let op = GalerkinOperator::from_mesh(mesh, mode, Ordering::Natural)?;
            let top = symmetric_eigenvalues(&op.dense_s(n)?)?.into_iter().fold(f64::NEG_INFINITY, f64::max);
            if op.lambda_max() < top {
                failures.push(format!("{name} {mode:?}: λmax bound {} < {top}", op.lambda_max()));
            }
        }
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let mut failures = Vec::new();
    let mut count = 0;
    for level in 0..=5 {
        check_mesh(&format!("icosphere {level}"), &icosphere(level)?, &mut failures)?;
        count += 1;
    }
    for level in 0..=3 {
        check_mesh(&format!("hyperboloid {level}"), &hyperboloid(level)?, &mut failures)?;
        count += 1;
    }
    let detail = if failures.is_empty() {
        format!("{count} meshes (icosphere 0–5, hyperboloid 0–3): all matrix properties hold")
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

fn criterion_9() -> Outcome {
    let op = sphere_op(3, MassMode::Cholesky)?;
    let eig = op.dense_eigs(op.n())?;
    let lambda = &eig.values;
    let top = lambda.last().copied().unwrap_or(0.0);
    let first_ok = lambda[0].abs() <= 1e-8 * top;
    let mut ok = first_ok;
    let mut detail = vec![format!("|λ₁| = {:.1e} (≤ 1e-8·{top:.0})", lambda[0].abs())];
    let mut start = 1;
    for l in 1..=3usize {
        let mult = 2 * l + 1;
        let target = (l * (l + 1)) as f64;
        let mean = lambda[start..start + mult].iter().sum::<f64>() / mult as f64;
        let rel = (mean - target).abs() / target;
        ok &= rel <= 0.03;
        detail.push(format!("group {l}: mean {mean:.4} vs {target} ({:.2}%)", 100.0 * rel));
        start += mult;
    }
    // the groups are separated: the next eigenvalue belongs to l = 4
    let gap_ok = lambda[16] > 0.5 * (12.0 + 20.0);
    ok &= gap_ok;
    detail.push(format!("λ₁₇ = {:.3}", lambda[16]));
    Ok((ok, detail.join("; ")))
}

fn criterion_10() -> Outcome {
    let op = sphere_op(2, MassMode::Cholesky)?;
    let psd = matern_pi6();
    let order = select_order(&psd, op.lambda_max(), DEFAULT_RATIO_TOL, DEFAULT_ORDER_CAP)?.order;
    let series = fit(&psd, op.lambda_max(), order)?;
    let bytes = |workers: usize| -> Result<Vec<u8>, Box<dyn Error>> {
        Ok(sample_batch(&op, &series, 96, 7, workers)?
            .iter()
            .flat_map(|s| s.weights.iter().flat_map(|v| v.to_le_bytes()))
            .collect())
    };
    let one = bytes(1)?;
    let same = [4, 8].iter().map(|&w| bytes(w)).collect::<Result<Vec<_>, _>>()?;
    let ok = same.iter().all(|b| *b == one);
    Ok((ok, format!("96 samples, {} bytes, workers 1/4/8 identical: {ok}", one.len())))
}

fn report(number: usize, name: &str, outcome: Outcome, failed: &mut usize) {
    let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if !ok {
        *failed += 1;
    }
    println!("{} {number:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
}

fn main() {
    let mut failed = 0;
    report(1, "truncation-error rates", criterion_1(), &mut failed);
    report(2, "Chebyshev recurrence vs dense", criterion_2(), &mut failed);
    report(3, "weight law", criterion_3(), &mut failed);
    match criterion_4_5() {
        Ok([four, five]) => {
            report(4, "sphere covariance convergence", Ok(four), &mut failed);
            report(5, "mass-lumping rate preservation", Ok(five), &mut failed);
        }
        Err(e) => {
            let msg = e.to_string();
            report(4, "sphere covariance convergence", Err(msg.clone().into()), &mut failed);
            report(5, "mass-lumping rate preservation", Err(msg.into()), &mut failed);
        }
    }
    report(6, "hyperboloid self-convergence", criterion_6(), &mut failed);
    report(7, "polynomial-error decay", criterion_7(), &mut failed);
    report(8, "matrix properties", criterion_8(), &mut failed);
    report(9, "sphere spectrum", criterion_9(), &mut failed);
    report(10, "batch determinism", criterion_10(), &mut failed);
    println!("{} of 10 criteria passed", 10 - failed);
    if failed > 0 && std::env::var("GRF_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}

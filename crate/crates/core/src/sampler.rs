//! Galerkin–Chebyshev sampling of the field weights plus dense covariance
//! oracles for small meshes.
//!
//! Random streams: sample `i` of a batch with base seed `s` draws from
//! `ChaCha20Rng::seed_from_u64(s)` switched to stream `i`, and converts
//! uniforms to normals with the ziggurat sampler of `rand_distr::StandardNormal`.
//! A batch is therefore a function of `s` alone, whatever the thread count.

use std::io::{self, Write};

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chebyshev::ChebyshevSeries;
use crate::mesh::TriangleMesh;
use crate::operators::{DenseEigen, GalerkinOperator, MassMode, OperatorError, Workspace};
use crate::psd::{PowerSpectralDensity, PsdParams};

pub const RNG_DESCRIPTION: &str = "ChaCha20Rng::seed_from_u64(seed), stream = sample index; normals by rand_distr::StandardNormal (ziggurat)";

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("series targets [0, {series}] but the operator bound is λmax = {operator}")]
    LambdaMaxMismatch { series: f64, operator: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sample count must be at least 1")]
    EmptyBatch,
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error("thread pool: {0}")]
    ThreadPool(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMetadata {
    pub seed: u64,
    pub stream: u64,
    pub order: usize,
    pub lambda_max: f64,
    pub mass_mode: MassMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psd: Option<PsdParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh_hash: Option<String>,
}

/// Weights of one field in the hat basis, i.e. its nodal values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub weights: Vec<f64>,
    pub metadata: SampleMetadata,
}

impl FieldSample {
    pub fn with_labels(mut self, psd: Option<PsdParams>, mesh_hash: Option<String>) -> Self {
        self.metadata.psd = psd;
        self.metadata.mesh_hash = mesh_hash;
        self
    }
}

/// The generator for sample `stream` of a batch seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn standard_normals<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn check_series(op: &GalerkinOperator, series: &ChebyshevSeries) -> Result<(), SamplerError> {
    if series.lambda_max() != op.lambda_max() {
        return Err(SamplerError::LambdaMaxMismatch {
            series: series.lambda_max(),
            operator: op.lambda_max(),
        });
    }
    Ok(())
}

/// Vectors reused across Chebyshev applications.
#[derive(Debug, Clone)]
pub struct RecurrenceWork {
    prev: Vec<f64>,
    curr: Vec<f64>,
    next: Vec<f64>,
    op: Workspace,
}

impl RecurrenceWork {
    pub fn new(n: usize) -> Self {
        Self {
            prev: vec![0.0; n],
            curr: vec![0.0; n],
            next: vec![0.0; n],
            op: Workspace::new(n),
        }
    }
}

/// `out = Σ_k a_k T_k((2/λmax) S − I) w` by the three-term recurrence, one
/// application of `S` per order.
pub fn apply_chebyshev_into(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    w: &[f64],
    out: &mut [f64],
    work: &mut RecurrenceWork,
) {
    let a = series.coeffs();
    let scale = 2.0 / series.lambda_max();
    let RecurrenceWork { prev, curr, next, op: opw } = work;
    prev.copy_from_slice(w);
    out.iter_mut().zip(w).for_each(|(o, x)| *o = a[0] * x);
    if a.len() == 1 {
        return;
    }
    op.apply_s_into(w, curr, opw);
    for (c, x) in curr.iter_mut().zip(w) {
        *c = scale * *c - x;
    }
    out.iter_mut().zip(curr.iter()).for_each(|(o, c)| *o += a[1] * c);
    for &ak in &a[2..] {
        op.apply_s_into(curr, next, opw);
        for i in 0..next.len() {
            next[i] = 2.0 * (scale * next[i] - curr[i]) - prev[i];
            out[i] += ak * next[i];
        }
        std::mem::swap(prev, curr);
        std::mem::swap(curr, next);
    }
}

pub fn apply_chebyshev(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    w: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    check_series(op, series)?;
    if w.len() != op.n() {
        return Err(SamplerError::DimensionMismatch {
            expected: op.n(),
            got: w.len(),
        });
    }
    let mut out = vec![0.0; op.n()];
    apply_chebyshev_into(op, series, w, &mut out, &mut RecurrenceWork::new(op.n()));
    Ok(out)
}

/// `Ẑ = (√C)⁻ᵀ P(S) W` for the given white noise `W`.
pub fn weights_from_noise(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    noise: &[f64],
) -> Result<Vec<f64>, SamplerError> {
    let x = apply_chebyshev(op, series, noise)?;
    Ok(op.solve_sqrt_c_t(&x))
}

fn draw(op: &GalerkinOperator, series: &ChebyshevSeries, seed: u64, stream: u64, work: &mut RecurrenceWork) -> FieldSample {
    let n = op.n();
    let noise = standard_normals(&mut stream_rng(seed, stream), n);
    let mut x = vec![0.0; n];
    apply_chebyshev_into(op, series, &noise, &mut x, work);
    let mut weights = vec![0.0; n];
    op.solve_sqrt_c_t_into(&x, &mut weights, &mut work.prev);
    FieldSample {
        weights,
        metadata: SampleMetadata {
            seed,
            stream,
            order: series.order(),
            lambda_max: series.lambda_max(),
            mass_mode: op.mode(),
            psd: None,
            mesh_hash: None,
        },
    }
}

/// One sample from stream `stream` of seed `seed`.
pub fn sample_weights(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    seed: u64,
    stream: u64,
) -> Result<FieldSample, SamplerError> {
    check_series(op, series)?;
    Ok(draw(op, series, seed, stream, &mut RecurrenceWork::new(op.n())))
}

/// `count` samples on streams `0..count`, computed by `workers` threads.
pub fn sample_batch(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    count: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<FieldSample>, SamplerError> {
    check_series(op, series)?;
    if count == 0 {
        return Err(SamplerError::EmptyBatch);
    }
    if workers == 0 {
        return Err(SamplerError::NoWorkers);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SamplerError::ThreadPool(e.to_string()))?;
    Ok(pool.install(|| {
        (0..count as u64)
            .into_par_iter()
            .map_init(
                || RecurrenceWork::new(op.n()),
                |work, stream| draw(op, series, base_seed, stream, work),
            )
            .collect()
    }))
}

/// `(√C)⁻ᵀ V diag(g(λ)) ` for the dense eigenpairs of `S`; its Gram
/// matrix `G Gᵀ` is the weight covariance for the spectral function `g`.
pub fn covariance_factor(op: &GalerkinOperator, eig: &DenseEigen, g: impl Fn(f64) -> f64) -> Mat<f64> {
    let n = op.n();
    let gains: Vec<f64> = eig.values.iter().map(|&l| g(l.max(0.0))).collect();
    let columns: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let v: Vec<f64> = (0..n).map(|i| eig.vectors[(i, k)] * gains[k]).collect();
            op.solve_sqrt_c_t(&v)
        })
        .collect();
    Mat::from_fn(n, n, |i, k| columns[k][i])
}

/// Weight covariance `(√C)⁻ᵀ g(S)² (√C)⁻¹` from dense eigenpairs.
pub fn weight_covariance(op: &GalerkinOperator, eig: &DenseEigen, g: impl Fn(f64) -> f64) -> Mat<f64> {
    let f = covariance_factor(op, eig, g);
    let c = &f * f.transpose();
    Mat::from_fn(c.nrows(), c.ncols(), |i, j| 0.5 * (c[(i, j)] + c[(j, i)]))
}

pub fn exact_weight_covariance(
    op: &GalerkinOperator,
    psd: &PowerSpectralDensity,
    cap: usize,
) -> Result<Mat<f64>, SamplerError> {
    let eig = op.dense_eigs(cap)?;
    Ok(weight_covariance(op, &eig, |l| psd.value(l)))
}

/// Covariance of the Chebyshev-approximated field, `(√C)⁻ᵀ P²(S) (√C)⁻¹`.
pub fn chebyshev_weight_covariance(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    cap: usize,
) -> Result<Mat<f64>, SamplerError> {
    check_series(op, series)?;
    let eig = op.dense_eigs(cap)?;
    Ok(weight_covariance(op, &eig, |l| series.eval(l)))
}

/// Entries of [`exact_weight_covariance`] at vertex pairs.
pub fn galerkin_covariance_at(
    op: &GalerkinOperator,
    psd: &PowerSpectralDensity,
    pairs: &[(usize, usize)],
    cap: usize,
) -> Result<Vec<f64>, SamplerError> {
    let eig = op.dense_eigs(cap)?;
    let f = covariance_factor(op, &eig, |l| psd.value(l));
    Ok(pairs
        .iter()
        .map(|&(i, j)| (0..op.n()).map(|k| f[(i, k)] * f[(j, k)]).sum())
        .collect())
}

/// Column `j` of `G Gᵀ` for a factor from [`covariance_factor`].
pub fn factor_column(factor: &Mat<f64>, j: usize) -> Vec<f64> {
    let n = factor.nrows();
    let row: Vec<f64> = (0..factor.ncols()).map(|k| factor[(j, k)]).collect();
    (0..n)
        .map(|i| (0..factor.ncols()).map(|k| factor[(i, k)] * row[k]).sum())
        .collect()
}

/// Column `j` of `(√C)⁻ᵀ V g(Λ)² Vᵀ (√C)⁻¹` in `O(n²)`.
pub fn covariance_column_from_eigs(
    op: &GalerkinOperator,
    eig: &DenseEigen,
    g: impl Fn(f64) -> f64,
    j: usize,
) -> Vec<f64> {
    let n = op.n();
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    let a = op.solve_sqrt_c(&e);
    let v = &eig.vectors;
    let proj: Vec<f64> = (0..n)
        .map(|k| {
            let gk = g(eig.values[k].max(0.0));
            gk * gk * (0..n).map(|i| v[(i, k)] * a[i]).sum::<f64>()
        })
        .collect();
    let c: Vec<f64> = (0..n).map(|i| (0..n).map(|k| v[(i, k)] * proj[k]).sum()).collect();
    op.solve_sqrt_c_t(&c)
}

/// Streams per deterministic accumulation block in [`mc_covariance_column`].
const MC_BLOCK: u64 = 256;

/// Monte Carlo estimate of column `j` of the weight covariance,
/// `(1/N) Σ_s z_s[j] z_s`, from streams `0..count` of `seed`. Returns the
/// estimate and the diagonal `(1/N) Σ_s z_s²`. Blocks are summed in a fixed
/// order, so the result does not depend on `workers`.
pub fn mc_covariance_column(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    j: usize,
    count: usize,
    seed: u64,
    workers: usize,
) -> Result<(Vec<f64>, Vec<f64>), SamplerError> {
    check_series(op, series)?;
    if count == 0 {
        return Err(SamplerError::EmptyBatch);
    }
    if workers == 0 {
        return Err(SamplerError::NoWorkers);
    }
    let n = op.n();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SamplerError::ThreadPool(e.to_string()))?;
    let blocks: Vec<(u64, u64)> = (0..count as u64)
        .step_by(MC_BLOCK as usize)
        .map(|start| (start, (start + MC_BLOCK).min(count as u64)))
        .collect();
    let partial: Vec<(Vec<f64>, Vec<f64>)> = pool.install(|| {
        blocks
            .par_iter()
            .map(|&(start, end)| {
                let mut work = RecurrenceWork::new(n);
                let mut col = vec![0.0; n];
                let mut diag = vec![0.0; n];
                for stream in start..end {
                    let z = draw(op, series, seed, stream, &mut work).weights;
                    let zj = z[j];
                    for i in 0..n {
                        col[i] += zj * z[i];
                        diag[i] += z[i] * z[i];
                    }
                }
                (col, diag)
            })
            .collect()
    });
    let mut col = vec![0.0; n];
    let mut diag = vec![0.0; n];
    for (c, d) in partial {
        col.iter_mut().zip(c).for_each(|(a, b)| *a += b);
        diag.iter_mut().zip(d).for_each(|(a, b)| *a += b);
    }
    let scale = 1.0 / count as f64;
    col.iter_mut().for_each(|v| *v *= scale);
    diag.iter_mut().for_each(|v| *v *= scale);
    Ok((col, diag))
}

/// Column `j` of the Chebyshev-field covariance without forming `S`:
/// `(√C)⁻ᵀ P(S) P(S) (√C)⁻¹ e_j`.
pub fn chebyshev_covariance_column(
    op: &GalerkinOperator,
    series: &ChebyshevSeries,
    j: usize,
) -> Result<Vec<f64>, SamplerError> {
    let mut e = vec![0.0; op.n()];
    e[j] = 1.0;
    let a = op.solve_sqrt_c(&e);
    let b = apply_chebyshev(op, series, &a)?;
    let c = apply_chebyshev(op, series, &b)?;
    Ok(op.solve_sqrt_c_t(&c))
}

/// Sample covariance `(1/N) Σ z zᵀ` of centred fields (the mean is known to be 0).
pub fn empirical_covariance(samples: &[FieldSample]) -> Mat<f64> {
    let n = samples.first().map_or(0, |s| s.weights.len());
    let count = samples.len() as f64;
    let data = Mat::from_fn(n, samples.len(), |i, s| samples[s].weights[i]);
    let c = &data * data.transpose();
    Mat::from_fn(n, n, |i, j| c[(i, j)] / count)
}

/// Largest `|Ĉ_ij − Σ_ij| / σ_ij` with `σ_ij² = (Σ_ii Σ_jj + Σ_ij²)/N`,
/// the standard error of a Gaussian second moment.
pub fn max_standardized_deviation(empirical: &Mat<f64>, exact: &Mat<f64>, count: usize) -> f64 {
    let n = exact.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let sigma = ((exact[(i, i)] * exact[(j, j)] + exact[(i, j)].powi(2)) / count as f64).sqrt();
            worst = worst.max((empirical[(i, j)] - exact[(i, j)]).abs() / sigma);
        }
    }
    worst
}

/// `vertex_index,x,y,z,value` rows.
pub fn write_sample_csv<W: Write>(mesh: &TriangleMesh, sample: &FieldSample, writer: W) -> Result<(), SamplerError> {
    if sample.weights.len() != mesh.vertex_count() {
        return Err(SamplerError::DimensionMismatch {
            expected: mesh.vertex_count(),
            got: sample.weights.len(),
        });
    }
    let mut w = io::BufWriter::new(writer);
    writeln!(w, "vertex_index,x,y,z,value")?;
    for (i, (v, value)) in mesh.vertices().iter().zip(&sample.weights).enumerate() {
        writeln!(w, "{i},{:e},{:e},{:e},{:e}", v[0], v[1], v[2], value)?;
    }
    w.flush()?;
    Ok(())
}

/// Row-major `count × n` little-endian `f64` matrix, no header.
pub fn write_samples_binary<W: Write>(samples: &[FieldSample], writer: W) -> Result<(), SamplerError> {
    let mut w = io::BufWriter::new(writer);
    for s in samples {
        for v in &s.weights {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// JSON sidecar describing a batch written to disk.
#[derive(Debug, Clone, Serialize)]
pub struct BatchMetadata {
    pub seed: u64,
    pub count: usize,
    pub n: usize,
    pub order: usize,
    pub lambda_max: f64,
    pub mass_mode: MassMode,
    pub psd: PsdParams,
    pub mesh_hash: String,
    pub rng: &'static str,
    pub format: String,
}

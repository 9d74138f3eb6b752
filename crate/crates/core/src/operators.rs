//! The operator `S = (√C)⁻¹ R (√C)⁻ᵀ` and everything needed to apply it.

use faer::{Mat, Side};
use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cholesky::{CholeskyError, Ordering, SparseCholesky};
use crate::fem::{self, FemError};
use crate::mesh::TriangleMesh;
use crate::sparse::SparseSymMatrix;

pub const POWER_TOL: f64 = 1e-6;
pub const POWER_MAX_ITER: usize = 10_000;
pub const POWER_MIN_ITER: usize = 20;
pub const SAFETY_FACTOR: f64 = 1.01;
pub const DEFAULT_DENSE_CAP: usize = 3000;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Cholesky(#[from] CholeskyError),
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("lumped mass entry {index} is not positive ({value})")]
    NonPositiveLumpedMass { index: usize, value: f64 },
    #[error("lumped mode needs a diagonal mass matrix")]
    NotDiagonal,
    #[error("dense operation on n = {n} exceeds the cap {cap}")]
    DenseCap { n: usize, cap: usize },
    #[error("dense eigendecomposition failed")]
    Eigen,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MassMode {
    #[default]
    Cholesky,
    Lumped,
}

#[derive(Debug, Clone)]
enum MassRoot {
    Cholesky(SparseCholesky),
    /// `√Ĉ_ii`
    Lumped(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InverseMassMethod {
    /// `1 / min Ĉ_ii`, exact for a diagonal mass.
    Diagonal,
    PowerIteration,
    /// `4 / min_i Σ_j C_ij`, valid for linear-element mass matrices.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaMaxBound {
    pub stiffness_gershgorin: f64,
    pub inverse_mass_max: f64,
    pub method: InverseMassMethod,
    pub iterations: usize,
    pub safety_factor: f64,
    pub bound: f64,
}

/// Scratch vectors for [`GalerkinOperator::apply_s_into`].
#[derive(Debug, Clone)]
pub struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Workspace {
    pub fn new(n: usize) -> Self {
        Self {
            a: vec![0.0; n],
            b: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone)]
pub struct GalerkinOperator {
    n: usize,
    mode: MassMode,
    root: MassRoot,
    stiffness: SparseSymMatrix,
    bound: LambdaMaxBound,
}

/// Eigenpairs of the explicitly formed `S`, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct DenseEigen {
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors as columns.
    pub vectors: Mat<f64>,
}

impl GalerkinOperator {
    pub fn factorize(
        mass: &SparseSymMatrix,
        stiffness: SparseSymMatrix,
        mode: MassMode,
    ) -> Result<Self, OperatorError> {
        Self::factorize_with(mass, stiffness, mode, Ordering::Natural)
    }

    /// `ordering` only affects Cholesky mode.
    pub fn factorize_with(
        mass: &SparseSymMatrix,
        stiffness: SparseSymMatrix,
        mode: MassMode,
        ordering: Ordering,
    ) -> Result<Self, OperatorError> {
        let n = mass.n();
        if stiffness.n() != n {
            return Err(OperatorError::DimensionMismatch {
                expected: n,
                got: stiffness.n(),
            });
        }
        let root = match mode {
            MassMode::Cholesky => MassRoot::Cholesky(SparseCholesky::factorize(mass, ordering)?),
            MassMode::Lumped => {
                if !mass.is_diagonal() {
                    return Err(OperatorError::NotDiagonal);
                }
                let diag = mass.diagonal();
                if let Some(index) = diag.iter().position(|&d| !(d > 0.0)) {
                    return Err(OperatorError::NonPositiveLumpedMass {
                        index,
                        value: diag[index],
                    });
                }
                MassRoot::Lumped(diag.iter().map(|d| d.sqrt()).collect())
            }
        };
        let bound = lambda_max_bound_with_root(mass, &stiffness, &root);
        Ok(Self {
            n,
            mode,
            root,
            stiffness,
            bound,
        })
    }

    /// Assembles `C` (or `Ĉ`) and `R` on `mesh` and factorizes.
    pub fn from_mesh(mesh: &TriangleMesh, mode: MassMode, ordering: Ordering) -> Result<Self, OperatorError> {
        let mass = match mode {
            MassMode::Cholesky => fem::assemble_mass(mesh)?,
            MassMode::Lumped => fem::lumped_mass(mesh)?,
        };
        Self::factorize_with(&mass, fem::assemble_stiffness(mesh)?, mode, ordering)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> MassMode {
        self.mode
    }

    pub fn lambda_max(&self) -> f64 {
        self.bound.bound
    }

    pub fn lambda_max_details(&self) -> &LambdaMaxBound {
        &self.bound
    }

    pub fn stiffness(&self) -> &SparseSymMatrix {
        &self.stiffness
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.n)
    }

    fn check_len(&self, len: usize) {
        assert_eq!(len, self.n, "vector length {len} does not match operator size {}", self.n);
    }

    /// `y` with `(√C)ᵀ y = x`.
    pub fn solve_sqrt_c_t_into(&self, x: &[f64], y: &mut [f64], scratch: &mut [f64]) {
        self.check_len(x.len());
        match &self.root {
            MassRoot::Cholesky(f) => f.solve_root_transpose_into(x, y, scratch),
            MassRoot::Lumped(d) => y.iter_mut().zip(x.iter().zip(d)).for_each(|(y, (x, d))| *y = x / d),
        }
    }

    /// `y` with `√C y = x`.
    pub fn solve_sqrt_c_into(&self, x: &[f64], y: &mut [f64]) {
        self.check_len(x.len());
        match &self.root {
            MassRoot::Cholesky(f) => f.solve_root_into(x, y),
            MassRoot::Lumped(d) => y.iter_mut().zip(x.iter().zip(d)).for_each(|(y, (x, d))| *y = x / d),
        }
    }

    pub fn solve_sqrt_c_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let mut scratch = vec![0.0; self.n];
        self.solve_sqrt_c_t_into(x, &mut y, &mut scratch);
        y
    }

    pub fn solve_sqrt_c(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.solve_sqrt_c_into(x, &mut y);
        y
    }

    /// `(√C)ᵀ x`
    pub fn mul_sqrt_c_t(&self, x: &[f64]) -> Vec<f64> {
        self.check_len(x.len());
        let mut y = vec![0.0; self.n];
        match &self.root {
            MassRoot::Cholesky(f) => f.mul_root_transpose_into(x, &mut y, &mut vec![0.0; self.n]),
            MassRoot::Lumped(d) => y.iter_mut().zip(x.iter().zip(d)).for_each(|(y, (x, d))| *y = x * d),
        }
        y
    }

    /// `√C x`
    pub fn mul_sqrt_c(&self, x: &[f64]) -> Vec<f64> {
        self.check_len(x.len());
        let mut y = vec![0.0; self.n];
        match &self.root {
            MassRoot::Cholesky(f) => f.mul_root_into(x, &mut y, &mut vec![0.0; self.n]),
            MassRoot::Lumped(d) => y.iter_mut().zip(x.iter().zip(d)).for_each(|(y, (x, d))| *y = x * d),
        }
        y
    }

    /// `y = S x`: backward solve, stiffness product, forward solve.
    pub fn apply_s_into(&self, x: &[f64], y: &mut [f64], work: &mut Workspace) {
        self.check_len(x.len());
        let Workspace { a, b } = work;
        self.solve_sqrt_c_t_into(x, a, b);
        self.stiffness.mul_vec_into(a, b);
        self.solve_sqrt_c_into(b, y);
    }

    pub fn apply_s(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply_s_into(x, &mut y, &mut self.workspace());
        y
    }

    /// Explicit `S`, one column per application (columns in parallel).
    pub fn dense_s(&self, cap: usize) -> Result<Mat<f64>, OperatorError> {
        if self.n > cap {
            return Err(OperatorError::DenseCap { n: self.n, cap });
        }
        let n = self.n;
        let columns: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map_init(
                || (vec![0.0; n], self.workspace()),
                |(e, work), j| {
                    e.fill(0.0);
                    e[j] = 1.0;
                    let mut col = vec![0.0; n];
                    self.apply_s_into(e, &mut col, work);
                    col
                },
            )
            .collect();
        // symmetrize away rounding so the eigensolver sees an exactly symmetric matrix
        Ok(Mat::from_fn(n, n, |i, j| 0.5 * (columns[j][i] + columns[i][j])))
    }

    pub fn dense_eigs(&self, cap: usize) -> Result<DenseEigen, OperatorError> {
        let s = self.dense_s(cap)?;
        let eig = s.self_adjoint_eigen(Side::Lower).map_err(|_| OperatorError::Eigen)?;
        let values: Vec<f64> = eig.S().column_vector().iter().copied().collect();
        let vectors = eig.U().to_owned();
        Ok(DenseEigen { values, vectors })
    }
}

/// Certified upper bound on the spectrum of `S` given a factorized mass.
pub fn lambda_max_bound(op: &GalerkinOperator, mass: &SparseSymMatrix) -> LambdaMaxBound {
    lambda_max_bound_with_root(mass, &op.stiffness, &op.root)
}

fn lambda_max_bound_with_root(mass: &SparseSymMatrix, stiffness: &SparseSymMatrix, root: &MassRoot) -> LambdaMaxBound {
    let stiffness_gershgorin = stiffness.gershgorin_upper().max(0.0);
    match root {
        MassRoot::Lumped(d) => {
            let min = d.iter().fold(f64::INFINITY, |m, v| m.min(v * v));
            let inverse_mass_max = 1.0 / min;
            LambdaMaxBound {
                stiffness_gershgorin,
                inverse_mass_max,
                method: InverseMassMethod::Diagonal,
                iterations: 0,
                safety_factor: 1.0,
                bound: stiffness_gershgorin * inverse_mass_max,
            }
        }
        MassRoot::Cholesky(f) => {
            let (estimate, iterations, converged) = power_iteration_inverse(f);
            let (inverse_mass_max, method, safety_factor) = if converged {
                (estimate, InverseMassMethod::PowerIteration, SAFETY_FACTOR)
            } else {
                let min_row = mass.row_sums().into_iter().fold(f64::INFINITY, f64::min);
                warn!("power iteration on C⁻¹ did not converge in {POWER_MAX_ITER} iterations; using 4/min Ĉ_ii");
                (4.0 / min_row, InverseMassMethod::Fallback, 1.0)
            };
            LambdaMaxBound {
                stiffness_gershgorin,
                inverse_mass_max,
                method,
                iterations,
                safety_factor,
                bound: stiffness_gershgorin * inverse_mass_max * safety_factor,
            }
        }
    }
}

/// Rayleigh-quotient power iteration for `λmax(A⁻¹)`; returns
/// `(estimate, iterations, converged)`.
fn power_iteration_inverse(f: &SparseCholesky) -> (f64, usize, bool) {
    let n = f.n();
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let normalize = |v: &mut Vec<f64>| {
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        v.iter_mut().for_each(|a| *a /= norm);
    };
    normalize(&mut x);
    let mut previous = f64::NAN;
    for iteration in 1..=POWER_MAX_ITER {
        let y = f.solve(&x);
        let rayleigh: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        x = y;
        normalize(&mut x);
        if iteration >= POWER_MIN_ITER && ((rayleigh - previous) / rayleigh).abs() < POWER_TOL {
            return (rayleigh, iteration, true);
        }
        previous = rayleigh;
    }
    (previous, POWER_MAX_ITER, false)
}

//! Convergence studies: truncation error on the sphere, polynomial
//! approximation error, and covariance error on the icosphere and the
//! hyperboloid. Every study returns a [`ConvergenceReport`] whose CSV part is
//! a pure function of the configuration.

mod cheb_error;
mod config;
mod covariance;
mod report;
mod truncation;

use thiserror::Error;

use crate::chebyshev::ChebyshevError;
use crate::mesh::MeshError;
use crate::operators::OperatorError;
use crate::psd::PsdError;
use crate::sampler::SamplerError;
use crate::sphere::SphereError;

pub use cheb_error::{polynomial_error, run_cheb_error_study, sphere_eigenvalues};
pub use config::{
    parse_config, ChebErrorConfig, ColumnSettings, CovarianceMode, HyperCovConfig, SphereCovConfig, TruncationConfig,
};
pub use covariance::{
    great_circle_points, hyperboloid_points, level_covariance_column, run_hyperboloid_covariance_study,
    run_sphere_covariance_study, LevelColumn,
};
pub use report::{fit_line, ConvergenceReport, FitKind, LineFit, ReportPoint, MIN_FIT_POINTS};
pub use truncation::{run_truncation_study, truncation_report};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Psd(#[from] PsdError),
    #[error(transparent)]
    Chebyshev(#[from] ChebyshevError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

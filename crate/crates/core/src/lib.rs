//! Sampling of Gaussian random fields on closed (and free-boundary) triangulated
//! surfaces by a Galerkin finite element discretization of the Laplace–Beltrami
//! operator combined with a Chebyshev polynomial approximation of the power
//! spectral density.
//!
//! The pipeline is:
//!
//! 1. build or load a [`mesh::TriangleMesh`];
//! 2. assemble the mass and stiffness matrices ([`fem`]);
//! 3. factorize the mass matrix and bound the spectrum ([`operators::GalerkinOperator`]);
//! 4. fit a [`chebyshev::ChebyshevSeries`] to the [`psd::PowerSpectralDensity`];
//! 5. draw weights with [`sampler::sample_weights`] or [`sampler::sample_batch`].
//!
//! [`sphere`] holds the exact spherical-harmonic oracles and [`experiments`] the
//! convergence studies built on top of everything else.

pub mod chebyshev;
pub mod cholesky;
pub mod experiments;
pub mod fem;
pub mod mesh;
pub mod operators;
pub mod psd;
pub mod sampler;
pub mod sparse;
pub mod sphere;

pub use chebyshev::ChebyshevSeries;
pub use mesh::TriangleMesh;
pub use operators::{GalerkinOperator, MassMode};
pub use psd::PowerSpectralDensity;
pub use sparse::SparseSymMatrix;

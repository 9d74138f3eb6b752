use std::f64::consts::PI;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::ExperimentError;

use crate::chebyshev::{DEFAULT_ORDER_CAP, DEFAULT_RATIO_TOL};
use crate::cholesky::Ordering;
use crate::operators::{MassMode, DEFAULT_DENSE_CAP};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TruncationConfig {
    pub nu: f64,
    pub range: f64,
    pub orders: Vec<usize>,
    pub tolerance: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            range: PI / 6.0,
            orders: vec![100, 1_000, 10_000, 50_000, 100_000],
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChebErrorConfig {
    pub nu: f64,
    pub range: f64,
    pub n_modes: usize,
    pub orders: Vec<usize>,
    /// Errors at or below `n_modes · (floor_factor · ε · max γ)²` count as
    /// round-off and end the fit window.
    pub floor_factor: f64,
    pub ratio_tol: f64,
    pub order_cap: usize,
    pub min_r_squared: f64,
    /// Required `error(K_selected) / error(K = 1)`.
    pub reduction: f64,
}

impl Default for ChebErrorConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            range: PI / 6.0,
            n_modes: 1024,
            orders: (1..=200).collect(),
            floor_factor: 1e3,
            ratio_tol: DEFAULT_RATIO_TOL,
            order_cap: DEFAULT_ORDER_CAP,
            min_r_squared: 0.98,
            reduction: 1e-10,
        }
    }
}

/// How a covariance column of the discrete field is obtained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// Dense eigendecomposition of `S` with `P_{γ,K}` applied to the spectrum.
    #[default]
    Dense,
    /// `(√C)⁻ᵀ P(S)² (√C)⁻¹ e_j` by the Chebyshev recurrence, no dense matrices.
    MatrixFree,
    /// Empirical covariance of sampled fields.
    Mc,
}

/// Per-level settings shared by the covariance studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSettings {
    pub mode: CovarianceMode,
    /// Used instead of `dense` when a level exceeds `dense_cap`.
    pub fallback: CovarianceMode,
    pub mass: MassMode,
    pub ordering: Ordering,
    pub dense_cap: usize,
    pub cheb_tol: f64,
    pub cheb_cap: usize,
    pub mc_samples: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ColumnSettings {
    fn default() -> Self {
        Self {
            mode: CovarianceMode::Dense,
            fallback: CovarianceMode::Mc,
            mass: MassMode::Cholesky,
            ordering: Ordering::ReverseCuthillMcKee,
            dense_cap: DEFAULT_DENSE_CAP,
            cheb_tol: DEFAULT_RATIO_TOL,
            cheb_cap: DEFAULT_ORDER_CAP,
            mc_samples: 100_000,
            seed: 0,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SphereCovConfig {
    pub nu: f64,
    pub range: f64,
    pub levels: Vec<u32>,
    /// Vertex the covariance is measured from. Vertex 12 is the first
    /// valence-6 vertex and keeps its position from level 1 on.
    pub base_vertex: usize,
    /// Number of equispaced angles in `(0, π)`.
    pub angles: usize,
    pub tolerance: f64,
    /// Leave the coarsest level out of the slope fit.
    pub drop_first: bool,
    #[serde(flatten)]
    pub column: ColumnSettings,
}

impl Default for SphereCovConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            range: PI / 6.0,
            levels: vec![1, 2, 3, 4],
            base_vertex: 12,
            angles: 500,
            tolerance: 0.15,
            drop_first: false,
            column: ColumnSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperCovConfig {
    pub nu: f64,
    pub range: f64,
    pub levels: Vec<u32>,
    pub reference_level: u32,
    /// Column method for the reference level; it falls back to
    /// `fallback` above `dense_cap` like every other level.
    pub reference_mode: CovarianceMode,
    pub tolerance: f64,
    pub drop_first: bool,
    #[serde(flatten)]
    pub column: ColumnSettings,
}

impl Default for HyperCovConfig {
    fn default() -> Self {
        Self {
            nu: 1.0,
            range: 0.5,
            levels: vec![0, 1, 2],
            reference_level: 5,
            reference_mode: CovarianceMode::Dense,
            tolerance: 0.2,
            drop_first: false,
            column: ColumnSettings {
                mass: MassMode::Lumped,
                fallback: CovarianceMode::MatrixFree,
                ..ColumnSettings::default()
            },
        }
    }
}

/// Parses a JSON study configuration, filling omitted keys from
/// `T::default()` and rejecting keys the configuration does not have.
pub fn parse_config<T>(text: &str) -> Result<T, ExperimentError>
where
    T: Default + Serialize + DeserializeOwned,
{
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
    let mut merged = serde_json::to_value(T::default()).map_err(|e| ExperimentError::Config(e.to_string()))?;
    // defaults are merged key by key so flattened sections keep the
    // defaults of the outer configuration
    if let (Some(given), Some(known)) = (value.as_object(), merged.as_object_mut()) {
        for (key, v) in given {
            match known.get_mut(key) {
                Some(slot) => *slot = v.clone(),
                None => return Err(ExperimentError::Config(format!("unknown key `{key}`"))),
            }
        }
    } else {
        return Err(ExperimentError::Config("configuration must be a JSON object".into()));
    }
    serde_json::from_value(merged).map_err(|e| ExperimentError::Config(e.to_string()))
}

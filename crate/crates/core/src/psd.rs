//! Power spectral densities: the function of the Laplacian eigenvalues that
//! shapes a field's smoothness and correlation length.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constant of the practical-range rule `a = 3.6527 κ^{-1} ν^{0.4874}`.
pub const RANGE_SCALE: f64 = 3.6527;
/// Exponent of `ν` in the practical-range rule.
pub const RANGE_NU_EXPONENT: f64 = 0.4874;

#[derive(Debug, Error, PartialEq)]
pub enum PsdError {
    #[error("spectral density evaluated at negative eigenvalue {0}")]
    NegativeEigenvalue(f64),
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("operation requires a Matérn spectral density")]
    NotMatern,
    #[error("spectral density declares neither finite smoothness nor an analyticity margin")]
    MissingRegularity,
}

/// Regularity metadata used only by the a-priori Chebyshev error bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Regularity {
    /// The `order`-th derivative of γ has bounded variation on `[0, ∞)`,
    /// with total variation at most `derivative_variation`.
    Finite { order: u32, derivative_variation: f64 },
    /// γ extends holomorphically to the ellipse with foci `0`, `λmax` and
    /// semi-major axis `λmax/2 + margin`, where `|γ| ≤ sup`.
    Analytic { margin: f64, sup: f64 },
    Unknown,
}

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PsdKind {
    /// `γ(λ) = (κ² + λ)^{-β}`.
    Matern { kappa: f64, beta: f64 },
    Custom {
        name: String,
        eval: Evaluator,
        /// Declared algebraic decay exponent.
        beta: f64,
        regularity: Regularity,
    },
}

impl fmt::Debug for PsdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PsdKind::Matern { kappa, beta } => f
                .debug_struct("Matern")
                .field("kappa", kappa)
                .field("beta", beta)
                .finish(),
            PsdKind::Custom {
                name,
                beta,
                regularity,
                ..
            } => f
                .debug_struct("Custom")
                .field("name", name)
                .field("beta", beta)
                .field("regularity", regularity)
                .finish(),
        }
    }
}

/// A power spectral density γ : [0, ∞) → ℝ.
///
/// Immutable once built; cloning shares the evaluator of custom densities.
#[derive(Debug, Clone)]
pub struct PowerSpectralDensity {
    kind: PsdKind,
}

/// Serializable description, used in metadata sidecars and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PsdParams {
    Matern {
        kappa: f64,
        kappa2: f64,
        beta: f64,
        nu: f64,
        practical_range: f64,
    },
    Custom {
        name: String,
        beta: f64,
    },
}

fn positive(name: &'static str, value: f64) -> Result<f64, PsdError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(PsdError::InvalidParameter {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

impl PowerSpectralDensity {
    /// Whittle–Matérn density with inverse range `kappa` and exponent `beta`.
    ///
    /// On a 2-surface the field only has finite variance when `beta > 1/2`.
    pub fn matern(kappa: f64, beta: f64) -> Result<Self, PsdError> {
        positive("kappa", kappa)?;
        positive("beta", beta)?;
        if beta <= 0.5 {
            return Err(PsdError::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must exceed 1/2 on a two-dimensional surface",
            });
        }
        Ok(Self {
            kind: PsdKind::Matern { kappa, beta },
        })
    }

    pub fn matern_kappa2(kappa2: f64, beta: f64) -> Result<Self, PsdError> {
        Self::matern(positive("kappa2", kappa2)?.sqrt(), beta)
    }

    /// Matérn density from smoothness `nu` and practical range `range`.
    ///
    /// `κ = 3.6527 ν^{0.4874} / a` and `β = (ν + 1)/2`. The β(ν) link is chosen
    /// so that the truncation rate `β − 1/2` equals `ν/2` on a 2-surface; it is
    /// inferred from the reported rates rather than stated outright.
    pub fn matern_from_range(nu: f64, range: f64) -> Result<Self, PsdError> {
        positive("nu", nu)?;
        positive("range", range)?;
        let kappa = RANGE_SCALE * nu.powf(RANGE_NU_EXPONENT) / range;
        Self::matern(kappa, (nu + 1.0) / 2.0)
    }

    pub fn custom<F>(
        name: impl Into<String>,
        beta: f64,
        regularity: Regularity,
        eval: F,
    ) -> Result<Self, PsdError>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(PsdError::InvalidParameter {
                name: "beta",
                value: beta,
                reason: "must be non-negative and finite",
            });
        }
        Ok(Self {
            kind: PsdKind::Custom {
                name: name.into(),
                eval: Arc::new(eval),
                beta,
                regularity,
            },
        })
    }

    /// γ ≡ `value`: white noise scaled by a constant.
    pub fn constant(value: f64) -> Self {
        let regularity = Regularity::Analytic {
            margin: f64::INFINITY,
            sup: value.abs(),
        };
        Self::custom(format!("constant({value})"), 0.0, regularity, move |_| value)
            .expect("beta = 0 is valid")
    }

    pub fn kind(&self) -> &PsdKind {
        &self.kind
    }

    pub fn is_matern(&self) -> bool {
        matches!(self.kind, PsdKind::Matern { .. })
    }

    pub fn beta(&self) -> f64 {
        match self.kind {
            PsdKind::Matern { beta, .. } | PsdKind::Custom { beta, .. } => beta,
        }
    }

    /// Matérn smoothness `ν = 2β − 1`.
    pub fn nu(&self) -> Option<f64> {
        match self.kind {
            PsdKind::Matern { beta, .. } => Some(2.0 * beta - 1.0),
            PsdKind::Custom { .. } => None,
        }
    }

    pub fn kappa(&self) -> Option<f64> {
        match self.kind {
            PsdKind::Matern { kappa, .. } => Some(kappa),
            PsdKind::Custom { .. } => None,
        }
    }

    /// Practical range re-derived from κ and ν.
    pub fn practical_range(&self) -> Option<f64> {
        let nu = self.nu()?;
        Some(RANGE_SCALE * nu.powf(RANGE_NU_EXPONENT) / self.kappa()?)
    }

    pub fn regularity(&self) -> Regularity {
        match self.kind {
            PsdKind::Matern { kappa, beta } => {
                let margin = kappa * kappa / 2.0;
                Regularity::Analytic {
                    margin,
                    sup: margin.powf(-beta),
                }
            }
            PsdKind::Custom { regularity, .. } => regularity,
        }
    }

    /// χ such that γ is holomorphic in the ellipse `E_χ`; κ²/2 for Matérn.
    pub fn analyticity_margin(&self) -> Option<f64> {
        match self.regularity() {
            Regularity::Analytic { margin, .. } => Some(margin),
            _ => None,
        }
    }

    pub fn eval(&self, lambda: f64) -> Result<f64, PsdError> {
        if lambda < 0.0 || lambda.is_nan() {
            return Err(PsdError::NegativeEigenvalue(lambda));
        }
        Ok(self.value(lambda))
    }

    /// Unchecked evaluation for hot loops; callers guarantee `lambda ≥ 0`
    /// up to rounding.
    #[inline]
    pub fn value(&self, lambda: f64) -> f64 {
        match &self.kind {
            PsdKind::Matern { kappa, beta } => (kappa * kappa + lambda).powf(-beta),
            PsdKind::Custom { eval, .. } => eval(lambda),
        }
    }

    /// Supremum of |γ| over the ellipse `E_χ` with `χ = κ²/2`: `(κ²/2)^{-β}`.
    ///
    /// Independent of `lambda_max` since every point of the ellipse has real
    /// part at least `-κ²/2`.
    pub fn analytic_sup_on_ellipse(&self, _lambda_max: f64) -> Result<f64, PsdError> {
        match self.kind {
            PsdKind::Matern { kappa, beta } => Ok((kappa * kappa / 2.0).powf(-beta)),
            PsdKind::Custom { .. } => Err(PsdError::NotMatern),
        }
    }

    pub fn params(&self) -> PsdParams {
        match &self.kind {
            PsdKind::Matern { kappa, beta } => PsdParams::Matern {
                kappa: *kappa,
                kappa2: kappa * kappa,
                beta: *beta,
                nu: 2.0 * beta - 1.0,
                practical_range: self.practical_range().unwrap_or(f64::NAN),
            },
            PsdKind::Custom { name, beta, .. } => PsdParams::Custom {
                name: name.clone(),
                beta: *beta,
            },
        }
    }
}

//! The three attitude estimators. All share the state `(q̂, b̂)` with the
//! error state `δx = [δa; δb]`, where `q = q̂ ⊗ q(δa)` and `b = b̂ + δb`.

pub mod cf;
pub mod ekf;
pub mod ukf;

use nalgebra::{Matrix3, Matrix6, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cf::{cf_propagate, cf_update, simplified_ekf_weights, CfState, CfWeights};
pub use ekf::{ekf_propagate, ekf_update, EkfState};
pub use ukf::{ukf_propagate, ukf_sigma_points, ukf_update, SigmaPoints, SigmaSet, UkfState, UKF_STATES};

/// Smallest eigenvalue a covariance may have before it is rejected.
pub const PSD_TOLERANCE: f64 = -1e-9;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FilterError {
    #[error("covariance lost positive semi-definiteness (min eigenvalue {min_eigenvalue:e})")]
    Covariance { min_eigenvalue: f64 },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("sigma-point covariance has no Cholesky factor")]
    Cholesky,
    #[error("sigma quaternion diverged (top element {top})")]
    QuaternionDivergence { top: f64 },
    #[error("invalid argument: {0}")]
    Domain(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Cf,
    Ekf,
    Ukf,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 3] = [EstimatorKind::Cf, EstimatorKind::Ekf, EstimatorKind::Ukf];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Cf => "cf",
            EstimatorKind::Ekf => "ekf",
            EstimatorKind::Ukf => "ukf",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cf" => Ok(EstimatorKind::Cf),
            "ekf" => Ok(EstimatorKind::Ekf),
            "ukf" => Ok(EstimatorKind::Ukf),
            _ => Err(format!("unknown estimator '{s}' (expected cf, ekf or ukf)")),
        }
    }
}

/// `diag(α², α², α², β², β², β²)`.
pub fn process_noise(alpha: f64, beta: f64) -> Matrix6<f64> {
    let a = alpha * alpha;
    let b = beta * beta;
    Matrix6::from_diagonal(&nalgebra::Vector6::new(a, a, a, b, b, b))
}

/// `α² I₃`.
pub fn measurement_noise(alpha: f64) -> Matrix3<f64> {
    Matrix3::identity() * (alpha * alpha)
}

/// Initial covariance with independent attitude and bias errors.
pub fn initial_covariance(attitude_std: f64, bias_std: f64) -> Matrix6<f64> {
    process_noise(attitude_std, bias_std)
}

/// Symmetrizes `p` and rejects it if it is non-finite or has an eigenvalue
/// below [`PSD_TOLERANCE`].
pub fn guard_covariance(p: &Matrix6<f64>) -> Result<Matrix6<f64>, FilterError> {
    let sym = (p + p.transpose()) * 0.5;
    if !sym.iter().all(|x| x.is_finite()) {
        return Err(FilterError::Covariance {
            min_eigenvalue: f64::NAN,
        });
    }
    let min = SymmetricEigen::new(sym).eigenvalues.min();
    if min < PSD_TOLERANCE {
        return Err(FilterError::Covariance { min_eigenvalue: min });
    }
    Ok(sym)
}

fn finite3(v: &Vector3<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}

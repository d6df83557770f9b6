//! Attitude algebra: quaternions, 3-parameter vectors (Euler vector, Gibbs
//! vector, MRP), direction cosine matrices and their kinematics.
//!
//! Conventions used throughout the crate:
//! - quaternions are scalar first, `q = [q0, q1, q2, q3]`;
//! - an attitude `ᴺqᴮ` (and its DCM `C`) maps body-frame vectors into the
//!   inertial frame, so `v_N = C(q) v_B`;
//! - small perturbations compose on the right, `q = q̂ ⊗ q(δa)`.

mod dcm;
mod kinematics;
mod quaternion;
mod vec3;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub use dcm::{dcm_rate, perturbation_dcm, Dcm};
pub use kinematics::{
    quat_delta_update, quat_integrate_step, quat_rate, quat_rate_matrix, small_angle_quat, TaylorOrder,
};
pub use quaternion::{omega_matrix, Quaternion};
pub use vec3::{
    kinematic_rate, quat_to_vec3, vec3_to_dcm, vec3_to_quat, AttitudeVec3, Representation, GIBBS_SINGULARITY_MARGIN,
};

/// Body angular velocity, rad/s.
pub type AngularVelocity = Vector3<f64>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AttitudeError {
    #[error("outside representation domain: {0}")]
    Domain(&'static str),
}

/// Skew-symmetric matrix with `[v×] u = v × u`.
pub fn cross_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

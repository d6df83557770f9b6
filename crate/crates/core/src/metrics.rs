//! Attitude-error series and the four scalar performance metrics.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::Quaternion;
use crate::units::to_deg;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("cannot compute metrics of an empty series")]
    EmptySeries,
}

/// Error Euler vector of the estimate, in the estimated body frame:
/// `δq = q̂* ⊗ q`, then angle times axis. Exact zero for zero error.
pub fn error_euler_vector(q_hat: &Quaternion, q_true: &Quaternion) -> Vector3<f64> {
    let dq = q_hat.conjugate().compose(q_true).canonical();
    let s = dq.qv.norm();
    if s == 0.0 {
        return Vector3::zeros();
    }
    let phi = 2.0 * s.atan2(dq.q0);
    dq.qv * (phi / s)
}

/// ZYX heading, pitch and roll in radians. At gimbal lock the pitch is
/// clamped to ±π/2 and heading and roll follow from `atan2`.
pub fn euler_angles(q: &Quaternion) -> (f64, f64, f64) {
    let q = q.normalize();
    let (q0, q1, q2, q3) = (q.q0, q.qv.x, q.qv.y, q.qv.z);
    let heading = (2.0 * (q0 * q3 + q1 * q2)).atan2(1.0 - 2.0 * (q2 * q2 + q3 * q3));
    let pitch = (2.0 * (q0 * q2 - q3 * q1)).clamp(-1.0, 1.0).asin();
    let roll = (2.0 * (q0 * q1 + q2 * q3)).atan2(1.0 - 2.0 * (q1 * q1 + q2 * q2));
    (heading, pitch, roll)
}

/// Quaternion of ZYX heading, pitch and roll.
pub fn quat_from_euler(heading: f64, pitch: f64, roll: f64) -> Quaternion {
    Quaternion::from_axis_angle(&Vector3::z(), heading)
        * Quaternion::from_axis_angle(&Vector3::y(), pitch)
        * Quaternion::from_axis_angle(&Vector3::x(), roll)
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let w = a - tau * (a / tau).round();
    if w <= -std::f64::consts::PI {
        w + tau
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    /// error Euler vector, rad
    pub dav: Vector3<f64>,
    /// heading, pitch and roll errors (truth minus estimate, wrapped), rad
    pub euler_err: [f64; 3],
    /// true minus estimated gyro bias, rad/s
    pub bias_err: Vector3<f64>,
}

impl ErrorSample {
    pub fn new(t: f64, q_hat: &Quaternion, q_true: &Quaternion, b_hat: &Vector3<f64>, b_true: &Vector3<f64>) -> Self {
        let e_hat = euler_angles(q_hat);
        let e_true = euler_angles(q_true);
        Self {
            t,
            dav: error_euler_vector(q_hat, q_true),
            euler_err: [
                wrap_angle(e_true.0 - e_hat.0),
                wrap_angle(e_true.1 - e_hat.1),
                wrap_angle(e_true.2 - e_hat.2),
            ],
            bias_err: b_true - b_hat,
        }
    }
}

/// Scalar metrics in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// largest `|z|` of the error Euler vector over the run
    pub max_ev_z: f64,
    /// largest `|x|` or `|y|` of the error Euler vector over the run
    pub max_ev_xy: f64,
    /// absolute heading error at the final sample
    pub fin_h: f64,
    /// larger absolute pitch or roll error at the final sample
    pub fin_pr: f64,
}

pub fn compute_metrics(series: &[ErrorSample]) -> Result<MetricsReport, MetricsError> {
    let last = series.last().ok_or(MetricsError::EmptySeries)?;
    let (mut z, mut xy) = (0.0f64, 0.0f64);
    for s in series {
        z = z.max(s.dav.z.abs());
        xy = xy.max(s.dav.x.abs()).max(s.dav.y.abs());
    }
    Ok(MetricsReport {
        max_ev_z: to_deg(z),
        max_ev_xy: to_deg(xy),
        fin_h: to_deg(last.euler_err[0].abs()),
        fin_pr: to_deg(last.euler_err[1].abs().max(last.euler_err[2].abs())),
    })
}

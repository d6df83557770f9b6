//! Unscented Kalman filter with multiplicative quaternion sigma points.

use nalgebra::{Cholesky, Matrix3, Matrix6, SMatrix, Vector3, Vector6};

use super::{guard_covariance, FilterError};
use crate::attitude::{quat_delta_update, Quaternion};
use crate::frontend::VectorObservation;

/// Number of error states.
pub const UKF_STATES: usize = 6;

const SIGMA_COUNT: usize = 2 * UKF_STATES;

/// Diagonal jitter added once when the sigma covariance has no Cholesky factor.
pub const CHOLESKY_JITTER: f64 = 1e-12;

/// Smallest normalized scalar part accepted when recovering a perturbation
/// from a propagated sigma quaternion.
pub const DIVERGENCE_LIMIT: f64 = 0.9;

/// The `2n` perturbations `±√((n+λ)(P + ΔtQ))` column by column: entry `i`
/// and `i + n` are the positive and negative `i`th column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaPoints {
    pub points: [Vector6<f64>; SIGMA_COUNT],
    /// Set when the spread matrix was exactly zero and every point collapsed
    /// onto the estimate.
    pub degenerate: bool,
}

/// Propagated sigma points: quaternions `q̲(i)`, perturbations `δx̲(i)`
/// relative to `q̲(0)` and their weighted mean `δx̂`. Index 0 is the centre.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaSet {
    pub q: [Quaternion; SIGMA_COUNT + 1],
    pub dx: [Vector6<f64>; SIGMA_COUNT + 1],
    pub dx_mean: Vector6<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UkfState {
    pub q_hat: Quaternion,
    pub b_hat: Vector3<f64>,
    pub p: Matrix6<f64>,
    /// Sigma set from the latest propagation, consumed by the next update.
    pub sigma: Option<SigmaSet>,
}

impl UkfState {
    pub fn new(q_hat: Quaternion, b_hat: Vector3<f64>, p: Matrix6<f64>) -> Self {
        Self {
            q_hat: q_hat.normalize(),
            b_hat,
            p,
            sigma: None,
        }
    }
}

fn spread(lambda: f64) -> Result<f64, FilterError> {
    let nl = UKF_STATES as f64 + lambda;
    if nl > 0.0 && nl.is_finite() {
        Ok(nl)
    } else {
        Err(FilterError::Domain("n + lambda must be positive"))
    }
}

/// Sigma-point perturbations from a lower-triangular Cholesky factor of
/// `(n+λ)(P + ΔtQ)`.
pub fn ukf_sigma_points(p: &Matrix6<f64>, q: &Matrix6<f64>, dt: f64, lambda: f64) -> Result<SigmaPoints, FilterError> {
    let nl = spread(lambda)?;
    let m = (p + q * dt) * nl;
    let mut points = [Vector6::zeros(); SIGMA_COUNT];
    if m.iter().all(|&x| x == 0.0) {
        return Ok(SigmaPoints { points, degenerate: true });
    }
    let l = Cholesky::new(m)
        .or_else(|| Cholesky::new(m + Matrix6::identity() * CHOLESKY_JITTER))
        .ok_or(FilterError::Cholesky)?
        .l();
    for i in 0..UKF_STATES {
        let col = l.column(i).into_owned();
        points[i] = col;
        points[i + UKF_STATES] = -col;
    }
    Ok(SigmaPoints { points, degenerate: false })
}

fn attitude_part(x: &Vector6<f64>) -> Vector3<f64> {
    x.fixed_rows::<3>(0).into_owned()
}

fn bias_part(x: &Vector6<f64>) -> Vector3<f64> {
    x.fixed_rows::<3>(3).into_owned()
}

/// Builds sigma quaternions `q̂ ⊗ [1, δa(i)/2]`, optionally propagates each with
/// its own bias, and recovers the perturbations relative to the centre.
fn sigma_set(
    q_hat: &Quaternion,
    b_hat: &Vector3<f64>,
    pts: &SigmaPoints,
    motion: Option<(&Vector3<f64>, f64)>,
    lambda: f64,
) -> Result<SigmaSet, FilterError> {
    let nl = spread(lambda)?;
    let mut q = [*q_hat; SIGMA_COUNT + 1];
    let mut offsets = [Vector6::zeros(); SIGMA_COUNT + 1];
    offsets[1..].copy_from_slice(&pts.points);
    for (qi, dx) in q.iter_mut().zip(&offsets) {
        let da = attitude_part(dx);
        let start = q_hat.compose(&Quaternion::from_parts(1.0, da * 0.5)).normalize();
        *qi = match motion {
            Some((omega_g, dt)) => {
                let w = omega_g - (b_hat + bias_part(dx));
                quat_delta_update(&start, &(w * dt), 2)
            }
            None => start,
        };
    }
    let centre_conj = q[0].conjugate();
    let mut dx = [Vector6::zeros(); SIGMA_COUNT + 1];
    let mut sum = Vector6::zeros();
    for i in 1..=SIGMA_COUNT {
        let r = centre_conj.compose(&q[i]);
        let top = r.q0 / r.norm();
        if !(top >= DIVERGENCE_LIMIT) {
            return Err(FilterError::QuaternionDivergence { top });
        }
        let da = r.qv * (2.0 / r.q0);
        dx[i].fixed_rows_mut::<3>(0).copy_from(&da);
        dx[i].fixed_rows_mut::<3>(3).copy_from(&bias_part(&offsets[i]));
        sum += dx[i];
    }
    Ok(SigmaSet {
        q,
        dx,
        dx_mean: sum * (0.5 / nl),
    })
}

/// Propagates the sigma quaternions through the gyro model and refits the
/// estimate and covariance to them.
pub fn ukf_propagate(
    state: &UkfState,
    omega_g: &Vector3<f64>,
    dt: f64,
    lambda: f64,
    q: &Matrix6<f64>,
) -> Result<UkfState, FilterError> {
    if !(dt > 0.0) {
        return Err(FilterError::Domain("dt must be positive"));
    }
    let nl = spread(lambda)?;
    let pts = ukf_sigma_points(&state.p, q, dt, lambda)?;
    let set = sigma_set(&state.q_hat, &state.b_hat, &pts, Some((omega_g, dt)), lambda)?;
    let mean = set.dx_mean;
    let mut p = mean * mean.transpose() * lambda;
    for x in &set.dx[1..] {
        let d = x - mean;
        p += d * d.transpose() * 0.5;
    }
    p /= nl;
    Ok(UkfState {
        q_hat: quat_delta_update(&set.q[0], &attitude_part(&mean), 1),
        b_hat: state.b_hat + bias_part(&mean),
        p: guard_covariance(&p)?,
        sigma: Some(set),
    })
}

/// Statistical measurement update from the propagated sigma set.
///
/// When the state carries no sigma set (a second update within one tick),
/// one is regenerated from the current estimate and covariance without
/// propagation. The returned state carries no sigma set.
pub fn ukf_update(state: &UkfState, obs: &VectorObservation, r: &Matrix3<f64>, lambda: f64) -> Result<UkfState, FilterError> {
    let nl = spread(lambda)?;
    let set = match &state.sigma {
        Some(s) => *s,
        None => {
            let pts = ukf_sigma_points(&state.p, &Matrix6::zeros(), 0.0, lambda)?;
            sigma_set(&state.q_hat, &state.b_hat, &pts, None, lambda)?
        }
    };
    let xi: Vec<Vector3<f64>> = set.q.iter().map(|q| obs.predicted(q)).collect();
    let weight = |i: usize| if i == 0 { lambda / nl } else { 0.5 / nl };
    let xi_mean: Vector3<f64> = xi.iter().enumerate().map(|(i, x)| x * weight(i)).sum();
    let mut p_xixi = Matrix3::zeros();
    let mut p_xxi = SMatrix::<f64, 6, 3>::zeros();
    for (i, x) in xi.iter().enumerate() {
        let dxi = x - xi_mean;
        p_xixi += dxi * dxi.transpose() * weight(i);
        p_xxi += (set.dx[i] - set.dx_mean) * dxi.transpose() * weight(i);
    }
    let s = p_xixi + r;
    let s_inv = s.try_inverse().filter(|m| m.iter().all(|x| x.is_finite())).ok_or(FilterError::SingularInnovation)?;
    let k = p_xxi * s_inv;
    let predicted = xi_mean.try_normalize(0.0).ok_or(FilterError::SingularInnovation)?;
    let dx = k * (obs.xi_bar - predicted);
    let p = state.p - k * s * k.transpose();
    Ok(UkfState {
        q_hat: quat_delta_update(&state.q_hat, &attitude_part(&dx), 1),
        b_hat: state.b_hat + bias_part(&dx),
        p: guard_covariance(&p)?,
        sigma: None,
    })
}

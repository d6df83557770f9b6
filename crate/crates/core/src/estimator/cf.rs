//! Complementary filter with fixed per-axis weights.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{finite3, FilterError};
use crate::attitude::{quat_delta_update, Quaternion};
use crate::frontend::VectorObservation;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfState {
    pub q_hat: Quaternion,
    pub b_hat: Vector3<f64>,
}

impl CfState {
    pub fn new(q_hat: Quaternion, b_hat: Vector3<f64>) -> Self {
        Self {
            q_hat: q_hat.normalize(),
            b_hat,
        }
    }
}

/// Attitude and bias weights for one observation kind, applied per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CfWeights {
    pub w_a: [f64; 3],
    pub w_b: [f64; 3],
}

impl CfWeights {
    pub fn uniform(w_a: f64, w_b: f64) -> Self {
        Self {
            w_a: [w_a; 3],
            w_b: [w_b; 3],
        }
    }

    pub fn validate(&self) -> Result<(), FilterError> {
        if self.w_a.iter().chain(&self.w_b).all(|w| (0.0..=1.0).contains(w)) {
            Ok(())
        } else {
            Err(FilterError::Domain("complementary filter weights must lie in [0, 1]"))
        }
    }
}

/// Integrates `q̂` with `ω = ω_g − b̂` over `dt`; `b̂` is unchanged.
pub fn cf_propagate(state: &CfState, omega_g: &Vector3<f64>, dt: f64) -> CfState {
    let w = omega_g - state.b_hat;
    CfState {
        q_hat: quat_delta_update(&state.q_hat, &(w * dt), 2),
        b_hat: state.b_hat,
    }
}

/// Geometric update `δθᵢ = ξ̄ᵢ × v̄ᵢ`, `δa = Σ w_a,ᵢ ∘ δθᵢ`,
/// `δb = −Σ w_b,ᵢ ∘ (w_a,ᵢ ∘ δθᵢ)`.
///
/// With equal bias weights for every observation the bias step is exactly
/// `−w_b ∘ δa`.
pub fn cf_update(state: &CfState, obs: &[(VectorObservation, CfWeights)]) -> CfState {
    let mut da = Vector3::zeros();
    let mut db = Vector3::zeros();
    for (o, w) in obs {
        let v = o.predicted(&state.q_hat);
        let dtheta = o.xi_bar.cross(&v);
        let step = dtheta.component_mul(&Vector3::from(w.w_a));
        da += step;
        db -= step.component_mul(&Vector3::from(w.w_b));
    }
    if !finite3(&da) || da == Vector3::zeros() && db == Vector3::zeros() {
        return *state;
    }
    CfState {
        q_hat: quat_delta_update(&state.q_hat, &da, 1),
        b_hat: state.b_hat + db,
    }
}

/// CF weights equivalent to an EKF whose covariances have settled at
/// `P_aa = φI`, `P_ab = −ψI` with `R = ρI`: `w_a = 1/(1 + ρ/φ)`, `w_b = ψ/φ`.
pub fn simplified_ekf_weights(phi: f64, psi: f64, rho: f64) -> Result<(f64, f64), FilterError> {
    if !(phi > 0.0) || !(rho > 0.0) {
        return Err(FilterError::Domain("phi and rho must be positive"));
    }
    if !(psi >= 0.0) {
        return Err(FilterError::Domain("psi must be non-negative"));
    }
    Ok((1.0 / (1.0 + rho / phi), psi / phi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attitude::cross_matrix;
    use crate::frontend::{accel_observation, ObservationKind};
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, SMatrix};

    fn obs(xi: Vector3<f64>, v: Vector3<f64>) -> VectorObservation {
        VectorObservation {
            xi_bar: xi,
            v_ref_n: v,
            kind: ObservationKind::Accel,
            projection: None,
        }
    }

    #[test]
    fn propagate_with_bias_matched_gyro_is_identity() {
        let s = CfState::new(Quaternion::new(0.9, 0.1, 0.2, 0.3), Vector3::new(0.01, -0.02, 0.03));
        let p = cf_propagate(&s, &s.b_hat, 0.01);
        assert_abs_diff_eq!(p.q_hat.as_vector4(), s.q_hat.as_vector4(), epsilon = 1e-15);
        assert_eq!(p.b_hat, s.b_hat);
    }

    #[test]
    fn propagate_heading_matches_closed_form() {
        let w = Vector3::new(0.0, 0.0, 0.3);
        let dt = 0.01;
        let mut s = CfState::new(Quaternion::identity(), Vector3::zeros());
        for _ in 0..1000 {
            s = cf_propagate(&s, &w, dt);
            assert!((s.q_hat.norm() - 1.0).abs() < 1e-12);
        }
        let exact = Quaternion::from_axis_angle(&Vector3::z(), 3.0);
        // local error O(dt³) per step, so O(dt²) accumulated
        assert!(s.q_hat.angle_to(&exact) < 1e-5);
    }

    #[test]
    fn update_with_matching_measurement_is_noop() {
        let s = CfState::new(Quaternion::new(0.9, 0.1, 0.2, 0.3), Vector3::new(0.01, 0.0, 0.0));
        let g = Vector3::new(0.0, 0.0, 9.81);
        let o = accel_observation(&s.q_hat.inverse_transform(&g), &g, None).unwrap();
        let u = cf_update(&s, &[(o, CfWeights::uniform(0.5, 0.5))]);
        assert_abs_diff_eq!(u.q_hat.as_vector4(), s.q_hat.as_vector4(), epsilon = 1e-15);
        assert_abs_diff_eq!(u.b_hat, s.b_hat, epsilon = 1e-15);
    }

    #[test]
    fn update_direction_is_cross_product() {
        let s = CfState::new(Quaternion::identity(), Vector3::zeros());
        let o = obs(Vector3::x(), Vector3::y());
        let u = cf_update(&s, &[(o, CfWeights::uniform(1.0, 0.0))]);
        let expected = quat_delta_update(&Quaternion::identity(), &Vector3::x().cross(&Vector3::y()), 1);
        assert_abs_diff_eq!(u.q_hat.as_vector4(), expected.as_vector4(), epsilon = 1e-15);
        assert_eq!(u.b_hat, Vector3::zeros());
        let u = cf_update(&s, &[(o, CfWeights::uniform(0.5, 0.1))]);
        assert_abs_diff_eq!(u.b_hat, Vector3::new(0.0, 0.0, -0.05), epsilon = 1e-15);
    }

    #[test]
    fn simplified_weights() {
        assert_eq!(simplified_ekf_weights(0.3, 0.1, 0.3).unwrap().0, 0.5);
        assert_eq!(simplified_ekf_weights(0.3, 0.0, 1.0).unwrap().1, 0.0);
        assert!(simplified_ekf_weights(0.0, 0.1, 1.0).is_err());
        assert!(simplified_ekf_weights(1.0, 0.1, -1.0).is_err());
        assert!(simplified_ekf_weights(1.0, -0.1, 1.0).is_err());
    }

    #[test]
    fn simplified_weights_match_full_gain() {
        // Oracle: the Kalman gain evaluated numerically from its definition.
        let (phi, psi, rho) = (1e-2, 1e-3, 1.0);
        let v = Vector3::new(0.3, -0.5, 0.8).normalize();
        let h = cross_matrix(&v);
        let p_aa = Matrix3::identity() * phi;
        let p_ab = Matrix3::identity() * -psi;
        let s = h * p_aa * h.transpose() + Matrix3::identity() * rho;
        let mut stacked = SMatrix::<f64, 6, 3>::zeros();
        stacked.fixed_view_mut::<3, 3>(0, 0).copy_from(&p_aa);
        stacked.fixed_view_mut::<3, 3>(3, 0).copy_from(&p_ab.transpose());
        let k = stacked * h.transpose() * s.try_inverse().unwrap();
        let (w_a, w_b) = simplified_ekf_weights(phi, psi, rho).unwrap();
        let mut closed = SMatrix::<f64, 6, 3>::zeros();
        closed.fixed_view_mut::<3, 3>(0, 0).copy_from(&(h.transpose() * w_a));
        closed.fixed_view_mut::<3, 3>(3, 0).copy_from(&(h.transpose() * (-w_a * w_b)));
        assert!((k - closed).amax() < 1e-12);
    }
}

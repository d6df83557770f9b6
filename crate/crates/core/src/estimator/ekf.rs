//! Multiplicative extended Kalman filter on the 6-element error state.

use nalgebra::{Matrix3, Matrix6, SMatrix, Vector3};

use super::{finite3, guard_covariance, FilterError};
use crate::attitude::{cross_matrix, quat_delta_update, Quaternion};
use crate::frontend::VectorObservation;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EkfState {
    pub q_hat: Quaternion,
    pub b_hat: Vector3<f64>,
    pub p: Matrix6<f64>,
}

impl EkfState {
    pub fn new(q_hat: Quaternion, b_hat: Vector3<f64>, p: Matrix6<f64>) -> Self {
        Self {
            q_hat: q_hat.normalize(),
            b_hat,
            p,
        }
    }

    pub fn p_aa(&self) -> Matrix3<f64> {
        self.p.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn p_ab(&self) -> Matrix3<f64> {
        self.p.fixed_view::<3, 3>(0, 3).into_owned()
    }
}

/// `F = [[−½[ω×], −I], [0, 0]]` with `ω = ω_g − b̂`.
pub fn error_dynamics(w: &Vector3<f64>) -> Matrix6<f64> {
    let mut f = Matrix6::zeros();
    f.fixed_view_mut::<3, 3>(0, 0).copy_from(&(cross_matrix(w) * -0.5));
    f.fixed_view_mut::<3, 3>(0, 3).copy_from(&-Matrix3::identity());
    f
}

/// Quaternion propagation as in the complementary filter, then
/// `P += Δt (FP + PFᵀ + Q)`.
pub fn ekf_propagate(state: &EkfState, omega_g: &Vector3<f64>, dt: f64, q: &Matrix6<f64>) -> Result<EkfState, FilterError> {
    if !(dt > 0.0) {
        return Err(FilterError::Domain("dt must be positive"));
    }
    let w = omega_g - state.b_hat;
    let f = error_dynamics(&w);
    let fp = f * state.p;
    let p = state.p + (fp + fp.transpose() + q) * dt;
    Ok(EkfState {
        q_hat: quat_delta_update(&state.q_hat, &(w * dt), 2),
        b_hat: state.b_hat,
        p: guard_covariance(&p)?,
    })
}

/// One vector-measurement update.
///
/// `K = [P_aa; P_abᵀ] H_aᵀ (H_a P_aa H_aᵀ + R)⁻¹`, `[δa; δb] = K (ξ̄ − v̄)` and
/// `δP = −K H_a [P_aa P_ab]`. The quaternion takes the first-order additive
/// step and is renormalized.
pub fn ekf_update(state: &EkfState, obs: &VectorObservation, r: &Matrix3<f64>) -> Result<EkfState, FilterError> {
    let v = obs.predicted(&state.q_hat);
    let h = obs.sensitivity(&state.q_hat);
    let p_aa = state.p_aa();
    let top = state.p.fixed_view::<6, 3>(0, 0).into_owned();
    let s = h * p_aa * h.transpose() + r;
    let s_inv = s.try_inverse().filter(|m| m.iter().all(|x| x.is_finite())).ok_or(FilterError::SingularInnovation)?;
    let k: SMatrix<f64, 6, 3> = top * h.transpose() * s_inv;
    let dx = k * (obs.xi_bar - v);
    let rows: SMatrix<f64, 3, 6> = state.p.fixed_view::<3, 6>(0, 0).into_owned();
    let p = state.p - k * h * rows;
    let da = dx.fixed_rows::<3>(0).into_owned();
    let db = dx.fixed_rows::<3>(3).into_owned();
    if !finite3(&da) || !finite3(&db) {
        return Err(FilterError::SingularInnovation);
    }
    Ok(EkfState {
        q_hat: quat_delta_update(&state.q_hat, &da, 1),
        b_hat: state.b_hat + db,
        p: guard_covariance(&p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{cf_update, process_noise, simplified_ekf_weights, CfState, CfWeights};
    use crate::frontend::ObservationKind;
    use crate::units::DEG;
    use approx::assert_abs_diff_eq;

    fn obs_for(q_true: &Quaternion, v_ref: Vector3<f64>) -> VectorObservation {
        VectorObservation {
            xi_bar: q_true.inverse_transform(&v_ref).normalize(),
            v_ref_n: v_ref,
            kind: ObservationKind::Accel,
            projection: None,
        }
    }

    fn spd(seed: u64) -> Matrix6<f64> {
        let mut x = seed as f64;
        let a = Matrix6::from_fn(|_, _| {
            x = (x * 1.61803 + 0.137).fract();
            x - 0.5
        });
        a * a.transpose() * 1e-2 + Matrix6::identity() * 1e-4
    }

    #[test]
    fn propagate_with_no_cross_terms_adds_q() {
        let mut p = Matrix6::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * 0.1));
        let s = EkfState::new(Quaternion::identity(), Vector3::zeros(), p);
        let q = process_noise(DEG, 0.5 * DEG / 60f64.sqrt());
        let dt = 0.01;
        let out = ekf_propagate(&s, &Vector3::new(0.4, -2.0, 1.0), dt, &q).unwrap();
        // [ω×] is skew, so −½[ω×]P_aa + its transpose vanishes for P_aa ∝ I
        assert_abs_diff_eq!(out.p, p + q * dt, epsilon = 1e-16);
    }

    #[test]
    fn propagate_matches_dense_oracle() {
        let p = spd(3);
        let b = Vector3::new(0.01, 0.02, -0.01);
        let s = EkfState::new(Quaternion::new(0.7, 0.1, 0.5, 0.2), b, p);
        let q = process_noise(0.02, 0.001);
        let dt = 0.01;
        for omega in [b, Vector3::new(1.0, -0.5, 0.25)] {
            let out = ekf_propagate(&s, &omega, dt, &q).unwrap();
            let w = omega - b;
            let mut f = Matrix6::<f64>::zeros();
            for i in 0..3 {
                f[(i, i + 3)] = -1.0;
            }
            let wx = Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0);
            for i in 0..3 {
                for j in 0..3 {
                    f[(i, j)] = -0.5 * wx[(i, j)];
                }
            }
            let expected = p + (f * p + p * f.transpose() + q) * dt;
            assert_abs_diff_eq!(out.p, expected, epsilon = 1e-15);
        }
        // with ω = b̂ the attitude block moves by −(P_ab + P_abᵀ) Δt
        let out = ekf_propagate(&s, &b, dt, &Matrix6::zeros()).unwrap();
        let dpaa = (out.p_aa() - s.p_aa()) / dt;
        assert_abs_diff_eq!(dpaa, -(s.p_ab() + s.p_ab().transpose()), epsilon = 1e-12);
    }

    #[test]
    fn propagate_rejects_bad_dt() {
        let s = EkfState::new(Quaternion::identity(), Vector3::zeros(), Matrix6::identity());
        assert!(ekf_propagate(&s, &Vector3::zeros(), 0.0, &Matrix6::zeros()).is_err());
    }

    #[test]
    fn zero_innovation_still_shrinks_covariance() {
        let q = Quaternion::new(0.9, -0.2, 0.3, 0.1);
        let s = EkfState::new(q, Vector3::new(0.001, 0.0, 0.0), spd(7));
        let o = obs_for(&s.q_hat, Vector3::new(0.0, 0.0, 9.81));
        let out = ekf_update(&s, &o, &(Matrix3::identity() * 0.01)).unwrap();
        assert_abs_diff_eq!(out.q_hat.as_vector4(), s.q_hat.as_vector4(), epsilon = 1e-15);
        assert_abs_diff_eq!(out.b_hat, s.b_hat, epsilon = 1e-15);
        assert!(out.p.trace() < s.p.trace());
    }

    #[test]
    fn singular_innovation_is_reported() {
        let s = EkfState::new(Quaternion::identity(), Vector3::zeros(), Matrix6::zeros());
        let o = obs_for(&Quaternion::identity(), Vector3::z());
        assert_eq!(ekf_update(&s, &o, &Matrix3::zeros()), Err(FilterError::SingularInnovation));
    }

    #[test]
    fn diagonal_covariance_reproduces_cf_step() {
        let (phi, psi, rho) = (1e-2, 1e-3, 0.5);
        let mut p = Matrix6::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&(Matrix3::identity() * phi));
        p.fixed_view_mut::<3, 3>(0, 3).copy_from(&(Matrix3::identity() * -psi));
        p.fixed_view_mut::<3, 3>(3, 0).copy_from(&(Matrix3::identity() * -psi));
        p.fixed_view_mut::<3, 3>(3, 3).copy_from(&(Matrix3::identity() * 1.0));
        let q_hat = Quaternion::new(0.8, 0.3, -0.1, 0.5);
        let truth = q_hat * Quaternion::from_axis_angle(&Vector3::new(1.0, 2.0, -1.0), 0.05);
        let o = obs_for(&truth, Vector3::new(0.2, 0.1, 0.9));
        let e = ekf_update(&EkfState::new(q_hat, Vector3::zeros(), p), &o, &(Matrix3::identity() * rho)).unwrap();
        let (w_a, w_b) = simplified_ekf_weights(phi, psi, rho).unwrap();
        let c = cf_update(&CfState::new(q_hat, Vector3::zeros()), &[(o, CfWeights::uniform(w_a, w_b))]);
        assert_abs_diff_eq!(e.q_hat.as_vector4(), c.q_hat.as_vector4(), epsilon = 1e-10);
        assert_abs_diff_eq!(e.b_hat, c.b_hat, epsilon = 1e-10);
    }
}

use nalgebra::{Vector3, Vector4};

use super::quaternion::omega_matrix;
use super::Quaternion;

/// Quaternion for a small rotation `δa`, truncated at first or second order.
///
/// Order 1 gives `[1, δa/2]`, order 2 gives `[1 − |δa|²/8, δa/2]`. Neither is
/// normalized.
pub fn small_angle_quat(da: &Vector3<f64>, order: u8) -> Quaternion {
    let q0 = match order {
        1 => 1.0,
        _ => 1.0 - da.norm_squared() / 8.0,
    };
    Quaternion::from_parts(q0, da * 0.5)
}

/// `q̇ = ½ q ⊗ [0, ω]`.
pub fn quat_rate(q: &Quaternion, w: &Vector3<f64>) -> Vector4<f64> {
    q.compose(&Quaternion::pure(w)).as_vector4() * 0.5
}

/// `q̇ = ½ Ω(ω) q`, the matrix form of [`quat_rate`].
pub fn quat_rate_matrix(q: &Quaternion, w: &Vector3<f64>) -> Vector4<f64> {
    omega_matrix(w) * q.as_vector4() * 0.5
}

/// Applies a small body-frame rotation `da` to `q` and renormalizes.
///
/// Order 1 is the additive `q + ½ q ⊗ [0, da]`; order 2 composes with
/// [`small_angle_quat`] at second order.
pub fn quat_delta_update(q: &Quaternion, da: &Vector3<f64>, order: u8) -> Quaternion {
    let updated = match order {
        1 => q.add(&q.compose(&Quaternion::pure(da)).scale(0.5)),
        _ => q.compose(&small_angle_quat(da, 2)),
    };
    updated.normalize()
}

/// Truncation order of [`quat_integrate_step`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaylorOrder {
    First,
    Second,
}

/// One Taylor step of `q̇ = ½ q ⊗ [0, ω]` with angular acceleration `wdot`.
///
/// The second-order form adds `[−Δt²|ω|²/4, ω̇Δt²/2]` inside the product. The
/// result is renormalized.
pub fn quat_integrate_step(
    q: &Quaternion,
    w: &Vector3<f64>,
    wdot: &Vector3<f64>,
    dt: f64,
    order: TaylorOrder,
) -> Quaternion {
    let mut inner = Quaternion::pure(&(w * dt));
    if order == TaylorOrder::Second {
        let dt2 = dt * dt;
        inner = inner.add(&Quaternion::from_parts(-dt2 * w.norm_squared() / 4.0, wdot * (dt2 / 2.0)));
    }
    q.add(&q.compose(&inner).scale(0.5)).normalize()
}

use std::ops::Mul;

use nalgebra::{Matrix4, Vector3, Vector4};

use super::{cross_matrix, Dcm};

/// Scalar-first attitude quaternion `ᴺqᴮ`.
///
/// A quaternion built from an attitude transforms vectors coordinatized in the
/// body frame into the inertial frame. Multiplication follows the Hamilton
/// convention so that `ᴺqᴬ ⊗ ᴬqᴮ = ᴺqᴮ`, the same order used to cascade
/// direction cosine matrices.
///
/// `q` and `-q` describe the same rotation. Compare attitudes through
/// [`Quaternion::angle_to`] or their DCMs rather than element-wise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quaternion {
    pub q0: f64,
    pub qv: Vector3<f64>,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl Quaternion {
    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self {
            q0,
            qv: Vector3::new(q1, q2, q3),
        }
    }

    pub fn from_parts(q0: f64, qv: Vector3<f64>) -> Self {
        Self { q0, qv }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Pure quaternion `[0, v]`.
    pub fn pure(v: &Vector3<f64>) -> Self {
        Self { q0: 0.0, qv: *v }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::identity();
        }
        let half = 0.5 * angle;
        Self {
            q0: half.cos(),
            qv: axis * (half.sin() / n),
        }
    }

    pub fn from_vector4(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.q0, self.qv.x, self.qv.y, self.qv.z)
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.q0, self.qv.x, self.qv.y, self.qv.z]
    }

    pub fn norm(&self) -> f64 {
        self.as_vector4().norm()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.q0 * other.q0 + self.qv.dot(&other.qv)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            q0: self.q0 * s,
            qv: self.qv * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            q0: self.q0 + other.q0,
            qv: self.qv + other.qv,
        }
    }

    pub fn normalize(&self) -> Self {
        self.scale(1.0 / self.norm())
    }

    pub fn is_finite(&self) -> bool {
        self.q0.is_finite() && self.qv.iter().all(|x| x.is_finite())
    }

    /// Same rotation with a non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.q0 < 0.0 {
            self.scale(-1.0)
        } else {
            *self
        }
    }

    pub fn conjugate(&self) -> Self {
        Self {
            q0: self.q0,
            qv: -self.qv,
        }
    }

    /// Hamilton product `self ⊗ p`.
    pub fn compose(&self, p: &Self) -> Self {
        Self {
            q0: self.q0 * p.q0 - self.qv.dot(&p.qv),
            qv: p.qv * self.q0 + self.qv * p.q0 + self.qv.cross(&p.qv),
        }
    }

    /// Body-frame vector expressed in the inertial frame via `q ⊗ [0,v] ⊗ q*`.
    pub fn transform(&self, v_body: &Vector3<f64>) -> Vector3<f64> {
        self.compose(&Self::pure(v_body)).compose(&self.conjugate()).qv
    }

    /// Inertial vector expressed in the body frame (`ᴮCᴺ v`).
    pub fn inverse_transform(&self, v_inertial: &Vector3<f64>) -> Vector3<f64> {
        self.conjugate().transform(v_inertial)
    }

    /// `C(q) = I + 2 q0 [q×] + 2 [q×]²`, mapping body vectors to inertial.
    pub fn to_dcm(&self) -> Dcm {
        let qx = cross_matrix(&self.qv);
        Dcm::new_unchecked(nalgebra::Matrix3::identity() + qx * (2.0 * self.q0) + qx * qx * 2.0)
    }

    /// Rotation angle in `[0, π]` between two attitudes.
    pub fn angle_to(&self, other: &Self) -> f64 {
        let d = self.conjugate().compose(other);
        2.0 * d.qv.norm().atan2(d.q0.abs())
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(&self, other: &Self, t: f64) -> Self {
        let mut target = *other;
        let mut cos = self.dot(other);
        if cos < 0.0 {
            target = target.scale(-1.0);
            cos = -cos;
        }
        if t == 0.0 {
            return *self;
        }
        if t == 1.0 {
            return target;
        }
        if cos > 1.0 - 1e-12 {
            return self.scale(1.0 - t).add(&target.scale(t)).normalize();
        }
        let theta = cos.min(1.0).acos();
        let s = theta.sin();
        let a = ((1.0 - t) * theta).sin() / s;
        let b = (t * theta).sin() / s;
        self.scale(a).add(&target.scale(b)).normalize()
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Self) -> Self::Output {
        self.compose(&rhs)
    }
}

impl Mul<&Quaternion> for &Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: &Quaternion) -> Self::Output {
        self.compose(rhs)
    }
}

/// `Ω(ω)` such that `q̇ = ½ Ω q`.
pub fn omega_matrix(w: &Vector3<f64>) -> Matrix4<f64> {
    Matrix4::new(
        0.0, -w.x, -w.y, -w.z, //
        w.x, 0.0, w.z, -w.y, //
        w.y, -w.z, 0.0, w.x, //
        w.z, w.y, -w.x, 0.0,
    )
}

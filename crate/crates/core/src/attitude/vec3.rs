use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};

use super::{cross_matrix, AttitudeError, Dcm, Quaternion};

/// Closest approach to the half-turn at which the Gibbs vector is rejected.
pub const GIBBS_SINGULARITY_MARGIN: f64 = 1e-6;

/// Which 3-parameter attitude representation an [`AttitudeVec3`] holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Representation {
    /// `φ e`
    EulerVector,
    /// `2 tan(φ/2) e`
    Gibbs,
    /// Modified Rodrigues parameters, `4 tan(φ/4) e`
    Mrp,
}

impl Representation {
    pub const ALL: [Representation; 3] = [Self::EulerVector, Self::Gibbs, Self::Mrp];
}

/// Tagged 3-vector attitude.
///
/// Every representation is scaled so its magnitude approaches the rotation
/// angle for small rotations; the first and second order expansions of all
/// three therefore coincide.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttitudeVec3 {
    rep: Representation,
    a: Vector3<f64>,
}

impl AttitudeVec3 {
    /// Validates the vector against its representation's domain.
    ///
    /// Euler vectors are reduced to a rotation angle below 2π. Gibbs vectors
    /// within [`GIBBS_SINGULARITY_MARGIN`] of a half turn are rejected.
    pub fn new(rep: Representation, a: Vector3<f64>) -> Result<Self, AttitudeError> {
        if !a.iter().all(|x| x.is_finite()) {
            return Err(AttitudeError::Domain("non-finite attitude vector"));
        }
        let a = match rep {
            Representation::EulerVector => {
                let phi = a.norm();
                if phi >= TAU {
                    a * (phi.rem_euclid(TAU) / phi)
                } else {
                    a
                }
            }
            Representation::Gibbs => {
                let phi = 2.0 * (0.5 * a.norm()).atan();
                if PI - phi < GIBBS_SINGULARITY_MARGIN {
                    return Err(AttitudeError::Domain("Gibbs vector at a half-turn rotation"));
                }
                a
            }
            Representation::Mrp => a,
        };
        Ok(Self { rep, a })
    }

    pub fn zero(rep: Representation) -> Self {
        Self {
            rep,
            a: Vector3::zeros(),
        }
    }

    pub fn representation(&self) -> Representation {
        self.rep
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.a
    }

    /// Rotation angle `φ`.
    pub fn angle(&self) -> f64 {
        let n = self.a.norm();
        match self.rep {
            Representation::EulerVector => n,
            Representation::Gibbs => 2.0 * (0.5 * n).atan(),
            Representation::Mrp => 4.0 * (0.25 * n).atan(),
        }
    }

    pub fn to_quat(&self) -> Quaternion {
        let a = &self.a;
        match self.rep {
            Representation::EulerVector => {
                let alpha = 0.5 * a.norm();
                // sin(α)/(2α), with the α → 0 limit ½
                let k = if alpha < 1e-6 {
                    0.5 * (1.0 - alpha * alpha / 6.0)
                } else {
                    alpha.sin() / (2.0 * alpha)
                };
                Quaternion::from_parts(alpha.cos(), a * k)
            }
            Representation::Gibbs => {
                let alpha = 0.25 * a.norm_squared();
                Quaternion::from_parts(1.0, a * 0.5).scale(1.0 / (1.0 + alpha).sqrt())
            }
            Representation::Mrp => {
                let alpha = a.norm_squared() / 16.0;
                Quaternion::from_parts(1.0 - alpha, a * 0.5).scale(1.0 / (1.0 + alpha))
            }
        }
    }

    /// Closed-form DCM for the representation (no quaternion round trip).
    pub fn to_dcm(&self) -> Result<Dcm, AttitudeError> {
        let a = &self.a;
        let ax = cross_matrix(a);
        let ax2 = ax * ax;
        let c = match self.rep {
            Representation::EulerVector => {
                let phi = a.norm();
                // sin φ / φ and (1 − cos φ)/φ² written against [a×]
                let (s1, s2) = if phi < 1e-5 {
                    let p2 = phi * phi;
                    (1.0 - p2 / 6.0, 0.5 - p2 / 24.0)
                } else {
                    (phi.sin() / phi, (1.0 - phi.cos()) / (phi * phi))
                };
                Matrix3::identity() + ax * s1 + ax2 * s2
            }
            Representation::Gibbs => {
                let alpha = 0.25 * a.norm_squared();
                Matrix3::identity() + ax / (1.0 + alpha) + ax2 / (2.0 * (1.0 + alpha))
            }
            Representation::Mrp => {
                let alpha = a.norm_squared() / 16.0;
                let d = (1.0 + alpha) * (1.0 + alpha);
                Matrix3::identity() + ax * ((1.0 - alpha) / d) + ax2 / (2.0 * d)
            }
        };
        Ok(Dcm::new_unchecked(c))
    }

    /// Inverse of [`AttitudeVec3::to_quat`], choosing the rotation with `q0 ≥ 0`.
    pub fn from_quat(rep: Representation, q: &Quaternion) -> Result<Self, AttitudeError> {
        let q = q.canonical();
        let s = q.qv.norm();
        let c = q.q0;
        let a = match rep {
            Representation::EulerVector => {
                // φ / sin(φ/2) → 2/q0 as the rotation vanishes
                let k = if s < 1e-8 {
                    2.0 / c
                } else {
                    2.0 * s.atan2(c) / s
                };
                q.qv * k
            }
            Representation::Gibbs => {
                if c < (0.5 * GIBBS_SINGULARITY_MARGIN).sin() {
                    return Err(AttitudeError::Domain("Gibbs vector at a half-turn rotation"));
                }
                q.qv * (2.0 / c)
            }
            Representation::Mrp => q.qv * (4.0 / (1.0 + c)),
        };
        Self::new(rep, a)
    }

    /// Exact time derivative of the attitude vector for body rate `w`.
    ///
    /// The MRP quadratic term uses ⅛, which is what differentiating
    /// `a_p = 4 tan(φ/4) e` gives.
    pub fn kinematic_rate(&self, w: &Vector3<f64>) -> Result<Vector3<f64>, AttitudeError> {
        let a = &self.a;
        let base = a.cross(w) * 0.5;
        let rate = match self.rep {
            Representation::EulerVector => {
                let alpha = 0.5 * a.norm();
                let coef = if alpha < 1e-4 {
                    1.0 / 12.0 + alpha * alpha / 180.0
                } else {
                    if alpha.sin().abs() < 1e-9 {
                        return Err(AttitudeError::Domain("Euler vector kinematics at φ = 2kπ"));
                    }
                    (1.0 - alpha / alpha.tan()) / (4.0 * alpha * alpha)
                };
                w + base + a.cross(&a.cross(w)) * coef
            }
            Representation::Gibbs => w + base + a * (0.25 * w.dot(a)),
            Representation::Mrp => {
                let alpha = a.norm_squared() / 16.0;
                w * (1.0 - alpha) + base + a * (0.125 * w.dot(a))
            }
        };
        Ok(rate)
    }
}

/// Free-function form of [`AttitudeVec3::to_quat`].
pub fn vec3_to_quat(v: &AttitudeVec3) -> Quaternion {
    v.to_quat()
}

/// Free-function form of [`AttitudeVec3::from_quat`].
pub fn quat_to_vec3(rep: Representation, q: &Quaternion) -> Result<AttitudeVec3, AttitudeError> {
    AttitudeVec3::from_quat(rep, q)
}

/// Free-function form of [`AttitudeVec3::to_dcm`].
pub fn vec3_to_dcm(v: &AttitudeVec3) -> Result<Dcm, AttitudeError> {
    v.to_dcm()
}

/// Free-function form of [`AttitudeVec3::kinematic_rate`].
pub fn kinematic_rate(v: &AttitudeVec3, w: &Vector3<f64>) -> Result<Vector3<f64>, AttitudeError> {
    v.kinematic_rate(w)
}

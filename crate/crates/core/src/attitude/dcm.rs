use nalgebra::{Matrix3, Vector3};

use super::cross_matrix;

/// Direction cosine matrix transforming final-frame (body) vectors into the
/// initial frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dcm(Matrix3<f64>);

impl Dcm {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix without checking orthonormality.
    pub fn new_unchecked(c: Matrix3<f64>) -> Self {
        Self(c)
    }

    /// Wraps a matrix after checking `CᵀC = I` and `det C = +1` within `tol`.
    pub fn try_new(c: Matrix3<f64>, tol: f64) -> Option<Self> {
        let ortho = (c.transpose() * c - Matrix3::identity()).amax();
        let det = (c.determinant() - 1.0).abs();
        (ortho <= tol && det <= tol).then_some(Self(c))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Largest element of `|CᵀC − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).amax()
    }
}

/// Small-rotation DCM `I + [δa×]` (order 1) or `I + [δa×] + ½[δa×]²` (order 2).
///
/// Both orders are shared by every 3-vector representation.
pub fn perturbation_dcm(da: &Vector3<f64>, order: u8) -> Dcm {
    let ax = cross_matrix(da);
    let c = match order {
        1 => Matrix3::identity() + ax,
        _ => Matrix3::identity() + ax + ax * ax * 0.5,
    };
    Dcm(c)
}

/// `Ċ = C [ω×]`.
pub fn dcm_rate(c: &Dcm, w: &Vector3<f64>) -> Matrix3<f64> {
    c.0 * cross_matrix(w)
}

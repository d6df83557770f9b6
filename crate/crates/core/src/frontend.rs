//! Measurement front end shared by every estimator.
//!
//! Raw accelerometer and magnetometer readings become normalized
//! [`VectorObservation`]s here, so the CF, EKF and UKF consume identical inputs
//! on every tick. The dynamics detector and gain scheduling also live here.

use std::collections::VecDeque;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{cross_matrix, Quaternion};

/// Norm below which a vector is treated as having no direction.
pub const DEGENERATE_NORM: f64 = 1e-6;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("dynamic gains requested but no low-dynamics parameter set is configured")]
    MissingLowDynamicsGains,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    Accel,
    MagHorizontal,
    Mag3D,
}

/// How the magnetometer is used by the estimators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagUsage {
    None,
    Horizontal,
    Xyz,
}

/// What the estimator knows about the local magnetic field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagFieldKnowledge {
    DeclinationOnly,
    Xyz,
}

/// Projection chain for a magnetometer reading restricted to the plane
/// perpendicular to `mu` (inertial vertical).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub mu: Vector3<f64>,
    /// `C_μ = I − μμᵀ`
    pub c_mu: Matrix3<f64>,
    /// `ᴮ̂Cᴺ C_μ ᴺCᴮ̂` evaluated at the estimate used to build the observation.
    pub chain: Matrix3<f64>,
    /// Normalized, unprojected body-frame measurement.
    pub raw: Vector3<f64>,
    /// `|chain · raw|`, the norm removed when renormalizing the projection.
    pub scale: f64,
}

/// A unit vector measured in the body frame paired with its known inertial
/// reference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorObservation {
    /// Measured direction in the (estimated) body frame, unit norm.
    pub xi_bar: Vector3<f64>,
    /// Known inertial reference vector. Not necessarily unit norm.
    pub v_ref_n: Vector3<f64>,
    pub kind: ObservationKind,
    pub projection: Option<Projection>,
}

impl VectorObservation {
    /// Unit prediction of the measurement for attitude `q`: `ᴮCᴺ(q) v̄_N`.
    pub fn predicted(&self, q: &Quaternion) -> Vector3<f64> {
        q.inverse_transform(&self.v_ref_n).normalize()
    }

    /// The projection chain, identity for unprojected kinds.
    pub fn projection_matrix(&self) -> Matrix3<f64> {
        self.projection.map_or_else(Matrix3::identity, |p| p.chain)
    }

    /// Re-evaluates the projection chain at a new estimate. Unprojected kinds
    /// are returned unchanged.
    pub fn reprojected(&self, q_hat: &Quaternion) -> Result<Self, FrontendError> {
        match &self.projection {
            None => Ok(*self),
            Some(p) => project(&p.raw, q_hat, &p.mu, self.v_ref_n, self.kind),
        }
    }

    /// Linearized measurement sensitivity `∂δξ/∂δa` at `q_hat`.
    ///
    /// Plain vector observations give `[v̄×]`. Horizontal magnetometer
    /// observations give `ᴮ̂CᴺC_μᴺCᴮ̂ [ξ̄×]` with the projected `ξ̄`, which has
    /// no response to tilt.
    pub fn sensitivity(&self, q_hat: &Quaternion) -> Matrix3<f64> {
        match &self.projection {
            None => cross_matrix(&self.predicted(q_hat)),
            Some(p) => p.chain * cross_matrix(&self.xi_bar),
        }
    }
}

fn unit(v: &Vector3<f64>, what: &'static str) -> Result<Vector3<f64>, FrontendError> {
    let n = v.norm();
    if !(n >= DEGENERATE_NORM) {
        return Err(FrontendError::DegenerateInput(what));
    }
    Ok(v / n)
}

/// `C_μ = I − μμᵀ`
pub fn perpendicular_projector(mu: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::identity() - mu * mu.transpose()
}

fn project(
    raw: &Vector3<f64>,
    q_hat: &Quaternion,
    mu: &Vector3<f64>,
    v_ref_n: Vector3<f64>,
    kind: ObservationKind,
) -> Result<VectorObservation, FrontendError> {
    let c = q_hat.to_dcm().into_inner();
    let c_mu = perpendicular_projector(mu);
    let chain = c.transpose() * c_mu * c;
    let projected = chain * raw;
    let scale = projected.norm();
    if !(scale >= DEGENERATE_NORM) {
        return Err(FrontendError::DegenerateInput("magnetometer reading is nearly vertical"));
    }
    Ok(VectorObservation {
        xi_bar: projected / scale,
        v_ref_n,
        kind,
        projection: Some(Projection {
            mu: *mu,
            c_mu,
            chain,
            raw: *raw,
            scale,
        }),
    })
}

/// Accelerometer observation against `g + r̈_est`.
///
/// A sample with (nearly) zero norm, such as free fall, is rejected so the
/// caller can skip the update.
pub fn accel_observation(
    xi_accel: &Vector3<f64>,
    gravity: &Vector3<f64>,
    rddot_est: Option<&Vector3<f64>>,
) -> Result<VectorObservation, FrontendError> {
    let xi_bar = unit(xi_accel, "accelerometer reading has no direction")?;
    let v_ref_n = gravity + rddot_est.copied().unwrap_or_else(Vector3::zeros);
    unit(&v_ref_n, "accelerometer reference has no direction")?;
    Ok(VectorObservation {
        xi_bar,
        v_ref_n,
        kind: ObservationKind::Accel,
        projection: None,
    })
}

/// Magnetometer observation.
///
/// With [`MagUsage::Horizontal`] the measurement is mapped into the inertial
/// frame with `q_hat`, stripped of its vertical component, renormalized and
/// mapped back; the reference becomes the unit horizontal component of
/// `field`. With [`MagUsage::Xyz`] both vectors are simply normalized.
pub fn mag_observation(
    xi_mag: &Vector3<f64>,
    q_hat: &Quaternion,
    field: &Vector3<f64>,
    usage: MagUsage,
) -> Result<VectorObservation, FrontendError> {
    let raw = unit(xi_mag, "magnetometer reading has no direction")?;
    match usage {
        MagUsage::Xyz => Ok(VectorObservation {
            xi_bar: raw,
            v_ref_n: unit(field, "magnetic reference has no direction")?,
            kind: ObservationKind::Mag3D,
            projection: None,
        }),
        MagUsage::Horizontal => {
            let mu = Vector3::z();
            let reference = unit(&(perpendicular_projector(&mu) * field), "magnetic reference is vertical")?;
            project(&raw, q_hat, &mu, reference, ObservationKind::MagHorizontal)
        }
        MagUsage::None => Err(FrontendError::DegenerateInput("magnetometer usage is none")),
    }
}

/// Horizontal unit reference pointing `declination` radians from +x toward +y.
pub fn declination_reference(declination: f64) -> Vector3<f64> {
    Vector3::new(declination.cos(), declination.sin(), 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// m/s²; a deviation above this resets the filtered value
    pub high_threshold: f64,
    /// m/s²; low dynamics is declared while the filtered value is below this
    pub low_threshold: f64,
    /// moving-average window, s
    pub window_s: f64,
    /// m/s²
    pub gravity_norm: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            high_threshold: 2.0,
            low_threshold: 0.7,
            window_s: 5.0,
            gravity_norm: 9.81,
        }
    }
}

/// Dynamics detector on the accelerometer norm deviation `μ = ||a| − |g||`.
///
/// `μ_f` is a moving average over the window. A sample with `μ > T_H` flushes
/// the whole window to `μ`. The window starts filled with `T_H`, so low
/// dynamics is only declared after the window has filled with quiet samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorState {
    cfg: DetectorConfig,
    window: VecDeque<f64>,
    capacity: usize,
    pub mu_f: f64,
    pub low_dynamics: bool,
}

impl DetectorState {
    pub fn new(cfg: DetectorConfig, rate: f64) -> Self {
        let capacity = ((cfg.window_s * rate).round() as usize).max(1);
        let window = std::iter::repeat_n(cfg.high_threshold, capacity).collect();
        Self {
            mu_f: cfg.high_threshold,
            low_dynamics: false,
            window,
            capacity,
            cfg,
        }
    }

    pub fn window_len(&self) -> usize {
        self.capacity
    }

    pub fn update(&mut self, accel: &Vector3<f64>) {
        let mu = (accel.norm() - self.cfg.gravity_norm).abs();
        if mu > self.cfg.high_threshold {
            self.window.iter_mut().for_each(|x| *x = mu);
        } else {
            self.window.pop_front();
            self.window.push_back(mu);
        }
        self.mu_f = self.window.iter().sum::<f64>() / self.capacity as f64;
        self.low_dynamics = self.mu_f < self.cfg.low_threshold;
    }
}

/// Value-semantics form of [`DetectorState::update`].
pub fn detector_update(state: &DetectorState, accel: &Vector3<f64>) -> DetectorState {
    let mut next = state.clone();
    next.update(accel);
    next
}

/// Nominal and low-dynamics parameter sets for one estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainSchedule<T> {
    pub nominal: T,
    pub low_dyn: Option<T>,
}

impl<T> GainSchedule<T> {
    pub fn new(nominal: T, low_dyn: T) -> Self {
        Self {
            nominal,
            low_dyn: Some(low_dyn),
        }
    }

    /// The low-dynamics set iff dynamic gains are on and low dynamics is
    /// detected; the nominal set otherwise.
    pub fn select(&self, low_dynamics: bool, dynamic_gains_on: bool) -> Result<&T, FrontendError> {
        if dynamic_gains_on && low_dynamics {
            self.low_dyn.as_ref().ok_or(FrontendError::MissingLowDynamicsGains)
        } else {
            Ok(&self.nominal)
        }
    }
}

/// Free-function form of [`GainSchedule::select`].
pub fn select_gains<T>(
    schedule: &GainSchedule<T>,
    low_dynamics: bool,
    dynamic_gains_on: bool,
) -> Result<&T, FrontendError> {
    schedule.select(low_dynamics, dynamic_gains_on)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const G: Vector3<f64> = Vector3::new(0.0, 0.0, 9.81);

    #[test]
    fn accel_observation_normalizes() {
        let obs = accel_observation(&Vector3::new(0.0, 0.0, 9.81), &G, None).unwrap();
        assert_eq!(obs.xi_bar, Vector3::z());
        assert_eq!(obs.v_ref_n, G);
        let doubled = accel_observation(&Vector3::new(0.0, 0.0, 19.62), &G, None).unwrap();
        assert_eq!(doubled.xi_bar, obs.xi_bar);
    }

    #[test]
    fn accel_observation_rejects_degenerate() {
        assert!(matches!(
            accel_observation(&Vector3::zeros(), &G, None),
            Err(FrontendError::DegenerateInput(_))
        ));
        assert!(matches!(
            accel_observation(&Vector3::new(0.0, 0.0, 9.81), &G, Some(&-G)),
            Err(FrontendError::DegenerateInput(_))
        ));
    }

    #[test]
    fn horizontal_mag_reference_level() {
        let m = Vector3::new(0.21, 0.0, 0.43);
        let obs = mag_observation(&m, &Quaternion::identity(), &m, MagUsage::Horizontal).unwrap();
        assert_abs_diff_eq!(obs.v_ref_n, Vector3::x(), epsilon = 1e-15);
        assert_abs_diff_eq!(obs.xi_bar, Vector3::x(), epsilon = 1e-15);
        assert_eq!(obs.kind, ObservationKind::MagHorizontal);
        let p = obs.projection.unwrap();
        assert_eq!(p.c_mu, Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0)));
    }

    #[test]
    fn xyz_mag_is_unprojected() {
        let m = Vector3::new(0.21, 0.0, 0.43);
        let q = Quaternion::new(0.8, 0.1, 0.5, -0.2).normalize();
        let xi = q.inverse_transform(&m);
        let obs = mag_observation(&xi, &q, &m, MagUsage::Xyz).unwrap();
        assert_eq!(obs.projection_matrix(), Matrix3::identity());
        assert_abs_diff_eq!(obs.v_ref_n, m.normalize(), epsilon = 1e-15);
        assert_eq!(obs.kind, ObservationKind::Mag3D);
    }

    #[test]
    fn vertical_mag_is_degenerate() {
        let m = Vector3::new(0.0, 0.0, 0.5);
        assert!(mag_observation(&m, &Quaternion::identity(), &Vector3::new(0.2, 0.0, 0.4), MagUsage::Horizontal).is_err());
        assert!(mag_observation(&Vector3::x(), &Quaternion::identity(), &m, MagUsage::Horizontal).is_err());
    }

    #[test]
    fn horizontal_projection_only_senses_heading_at_level() {
        // At q̂ = q_I the chain reduces to C_μ, so C_μ [ξ̄×] has a zero third row.
        let m = Vector3::new(0.21, 0.05, 0.43);
        let obs = mag_observation(&m, &Quaternion::identity(), &m, MagUsage::Horizontal).unwrap();
        let p = obs.projection.unwrap();
        let h = p.chain * cross_matrix(&p.raw);
        assert_eq!(h.row(2).amax(), 0.0);
        let sens = obs.sensitivity(&Quaternion::identity());
        assert_eq!(sens.row(2).amax(), 0.0);
    }

    #[test]
    fn horizontal_sensitivity_tracks_heading_and_ignores_tilt() {
        let field = Vector3::new(0.21, 0.0, 0.43);
        let truth = Quaternion::new(0.95, 0.1, -0.15, 0.25).normalize();
        let q_hat = truth;
        let xi = truth.inverse_transform(&field);
        let obs = mag_observation(&xi, &q_hat, &field, MagUsage::Horizontal).unwrap();
        let h = obs.sensitivity(&q_hat);
        // body-frame images of the inertial axes
        let axis = |v: Vector3<f64>| q_hat.inverse_transform(&v);
        assert_abs_diff_eq!(h * axis(Vector3::x()), Vector3::zeros(), epsilon = 1e-15);
        assert_abs_diff_eq!(h * axis(Vector3::y()), Vector3::zeros(), epsilon = 1e-15);
        let eps = 1e-7;
        let da = axis(Vector3::z()) * eps;
        let perturbed = truth * crate::attitude::small_angle_quat(&da, 2).normalize();
        let xi_p = perturbed.inverse_transform(&field);
        let obs_p = mag_observation(&xi_p, &q_hat, &field, MagUsage::Horizontal).unwrap();
        assert_abs_diff_eq!((obs_p.xi_bar - obs.xi_bar) / eps, h * axis(Vector3::z()), epsilon = 1e-6);
    }

    #[test]
    fn detector_declares_low_dynamics_in_hover() {
        let mut d = DetectorState::new(DetectorConfig::default(), 100.0);
        assert_eq!(d.window_len(), 500);
        for _ in 0..499 {
            d.update(&G);
        }
        assert!(d.low_dynamics);
        for _ in 0..100 {
            d.update(&G);
        }
        assert!(d.low_dynamics);
        assert_eq!(d.mu_f, 0.0);
    }

    #[test]
    fn detector_reset_on_large_deviation() {
        let mut d = DetectorState::new(DetectorConfig::default(), 100.0);
        for _ in 0..600 {
            d.update(&G);
        }
        d.update(&Vector3::new(0.0, 0.0, 9.81 + 3.0));
        assert_abs_diff_eq!(d.mu_f, 3.0, epsilon = 1e-12);
        assert!(!d.low_dynamics);
    }

    #[test]
    fn detector_hysteresis_requires_refill() {
        let cfg = DetectorConfig::default();
        let mut d = DetectorState::new(cfg.clone(), 100.0);
        d.update(&Vector3::new(0.0, 0.0, 9.81 + 2.5));
        // with μ = 0 afterwards, μ_f = 2.5 (N − k)/N drops below 0.7 only after k > 0.72 N
        let mut first_true = None;
        for k in 1..=600 {
            d.update(&G);
            if d.low_dynamics && first_true.is_none() {
                first_true = Some(k);
            }
        }
        assert_eq!(first_true, Some(361));
    }

    #[test]
    fn detector_hover_noise_is_quiet() {
        // Oracle: Monte Carlo of E||g + ν| − |g|| with ν ~ N(0, 0.5² I).
        let normal = Normal::new(0.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| {
                let v = G + Vector3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
                (v.norm() - 9.81).abs()
            })
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.4).abs() < 0.02, "E|μ| = {mean}");
        let mut d = DetectorState::new(DetectorConfig::default(), 100.0);
        for _ in 0..2000 {
            let v = G + Vector3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng));
            d.update(&v);
        }
        assert!(d.mu_f < 0.7 && d.low_dynamics);
        assert!((d.mu_f - mean).abs() < 0.06);
    }

    #[test]
    fn gain_selection() {
        let s = GainSchedule::new(1, 2);
        assert_eq!(*select_gains(&s, true, false).unwrap(), 1);
        assert_eq!(*select_gains(&s, false, false).unwrap(), 1);
        assert_eq!(*select_gains(&s, true, true).unwrap(), 2);
        assert_eq!(*select_gains(&s, false, true).unwrap(), 1);
        let only = GainSchedule { nominal: 1, low_dyn: None };
        assert_eq!(select_gains(&only, true, true), Err(FrontendError::MissingLowDynamicsGains));
        let v = detector_update(&DetectorState::new(DetectorConfig::default(), 10.0), &G);
        assert_eq!(v.window_len(), 50);
    }
}

//! Sensor corruption models: turns ground-truth kinematics into accelerometer,
//! gyroscope and magnetometer readings.
//!
//! Every sensor draws from its own ChaCha stream derived from the run seed, so
//! turning one sensor's noise on or off never shifts another sensor's draws.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attitude::Quaternion;
use crate::units::{DEG, SECONDS_PER_MINUTE};

/// Ground-truth kinematic state at one instant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthSample {
    pub t: f64,
    /// `ᴺqᴮ`
    pub q: Quaternion,
    /// Body angular velocity, rad/s.
    pub w: Vector3<f64>,
    /// Inertial translational acceleration, m/s².
    pub rddot: Vector3<f64>,
    pub position: Option<Vector3<f64>>,
    pub velocity: Option<Vector3<f64>>,
}

impl TruthSample {
    pub fn new(t: f64, q: Quaternion, w: Vector3<f64>, rddot: Vector3<f64>) -> Self {
        Self {
            t,
            q,
            w,
            rddot,
            position: None,
            velocity: None,
        }
    }
}

/// Noise and environment parameters for the simulated sensors. SI units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    /// m/s² per axis
    pub accel_noise_std: f64,
    /// rad/s per axis
    pub gyro_noise_std: f64,
    /// rad/s of bias drift standard deviation accumulated per minute
    pub gyro_bias_walk_std: f64,
    /// s
    pub gyro_bias_lpf_tau: f64,
    /// rad/s, initial value of both bias states
    pub gyro_bias_initial: [f64; 3],
    /// gauss per axis
    pub mag_noise_std: f64,
    /// m/s², the inertial reference the accelerometer senses at rest
    pub gravity: [f64; 3],
    /// gauss, inertial frame
    pub mag_field: [f64; 3],
    /// Hz
    pub sample_rate: f64,
    pub seed: u64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            accel_noise_std: 0.5,
            gyro_noise_std: 0.05 * DEG,
            gyro_bias_walk_std: 0.2 * DEG,
            gyro_bias_lpf_tau: 5.0,
            gyro_bias_initial: [0.0; 3],
            mag_noise_std: 0.015,
            gravity: [0.0, 0.0, 9.81],
            mag_field: [0.21, 0.0, 0.43],
            sample_rate: 100.0,
            seed: 1,
        }
    }
}

impl SensorConfig {
    /// Same environment with every noise source switched off.
    pub fn noiseless(&self) -> Self {
        Self {
            accel_noise_std: 0.0,
            gyro_noise_std: 0.0,
            gyro_bias_walk_std: 0.0,
            mag_noise_std: 0.0,
            ..self.clone()
        }
    }

    pub fn gravity(&self) -> Vector3<f64> {
        Vector3::from(self.gravity)
    }

    pub fn mag_field(&self) -> Vector3<f64> {
        Vector3::from(self.mag_field)
    }

    pub fn validate(&self) -> Result<(), String> {
        let stds = [
            ("accel_noise_std", self.accel_noise_std),
            ("gyro_noise_std", self.gyro_noise_std),
            ("gyro_bias_walk_std", self.gyro_bias_walk_std),
            ("gyro_bias_lpf_tau", self.gyro_bias_lpf_tau),
            ("mag_noise_std", self.mag_noise_std),
        ];
        for (name, v) in stds {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(format!("{name} must be finite and non-negative, got {v}"));
            }
        }
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(format!("sample_rate must be positive, got {}", self.sample_rate));
        }
        if self.mag_field().norm() == 0.0 {
            return Err("mag_field must be non-zero".into());
        }
        Ok(())
    }
}

/// Gyro bias random walk and its low-pass filtered output.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GyroBiasState {
    /// random-walk state, rad/s
    pub b_raw: Vector3<f64>,
    /// filtered bias added to the gyro output, rad/s
    pub b: Vector3<f64>,
}

impl GyroBiasState {
    pub fn new(initial: Vector3<f64>) -> Self {
        Self {
            b_raw: initial,
            b: initial,
        }
    }
}

/// One reading of every sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorSample {
    pub t: f64,
    pub accel: Vector3<f64>,
    pub gyro: Vector3<f64>,
    pub mag: Vector3<f64>,
    /// bias actually present in `gyro`
    pub true_bias: Vector3<f64>,
}

fn gaussian3<R: Rng>(rng: &mut R, std: f64) -> Vector3<f64> {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    let z: f64 = rng.sample(StandardNormal);
    Vector3::new(x, y, z) * std
}

/// Advances the bias random walk by `dt` and low-pass filters it.
///
/// The walk's per-step std is `walk_std·√(dt/60 s)`. The filter is
/// `b += (dt/τ)(b_raw − b)`, with the gain clamped to 1 so `τ → 0` tracks the
/// raw walk exactly.
pub fn step_gyro_bias<R: Rng>(state: &GyroBiasState, cfg: &SensorConfig, dt: f64, rng: &mut R) -> GyroBiasState {
    let step_std = cfg.gyro_bias_walk_std * (dt / SECONDS_PER_MINUTE).sqrt();
    let b_raw = state.b_raw + gaussian3(rng, step_std);
    let gain = if cfg.gyro_bias_lpf_tau > 0.0 {
        (dt / cfg.gyro_bias_lpf_tau).min(1.0)
    } else {
        1.0
    };
    GyroBiasState {
        b_raw,
        b: state.b + (b_raw - state.b) * gain,
    }
}

/// `ξ = ᴮCᴺ(q)(g + r̈) + ν`
pub fn simulate_accel<R: Rng>(truth: &TruthSample, cfg: &SensorConfig, rng: &mut R) -> Vector3<f64> {
    truth.q.inverse_transform(&(cfg.gravity() + truth.rddot)) + gaussian3(rng, cfg.accel_noise_std)
}

/// `ω_g = ω + b + ν`
pub fn simulate_gyro<R: Rng>(
    truth: &TruthSample,
    bias: &GyroBiasState,
    cfg: &SensorConfig,
    rng: &mut R,
) -> Vector3<f64> {
    truth.w + bias.b + gaussian3(rng, cfg.gyro_noise_std)
}

/// `ξ = ᴮCᴺ(q) m + ν`
pub fn simulate_mag<R: Rng>(truth: &TruthSample, cfg: &SensorConfig, rng: &mut R) -> Vector3<f64> {
    truth.q.inverse_transform(&cfg.mag_field()) + gaussian3(rng, cfg.mag_noise_std)
}

const STREAM_ACCEL: u64 = 1;
const STREAM_GYRO: u64 = 2;
const STREAM_BIAS: u64 = 3;
const STREAM_MAG: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Stateful sensor simulator for one run.
#[derive(Clone, Debug)]
pub struct SensorSimulator {
    cfg: SensorConfig,
    bias: GyroBiasState,
    last_t: Option<f64>,
    accel_rng: ChaCha8Rng,
    gyro_rng: ChaCha8Rng,
    bias_rng: ChaCha8Rng,
    mag_rng: ChaCha8Rng,
}

impl SensorSimulator {
    pub fn new(cfg: SensorConfig) -> Self {
        let seed = cfg.seed;
        Self {
            bias: GyroBiasState::new(Vector3::from(cfg.gyro_bias_initial)),
            cfg,
            last_t: None,
            accel_rng: stream(seed, STREAM_ACCEL),
            gyro_rng: stream(seed, STREAM_GYRO),
            bias_rng: stream(seed, STREAM_BIAS),
            mag_rng: stream(seed, STREAM_MAG),
        }
    }

    pub fn config(&self) -> &SensorConfig {
        &self.cfg
    }

    pub fn bias(&self) -> &GyroBiasState {
        &self.bias
    }

    /// Produces the sensor reading at `truth.t`. The bias advances by the
    /// time elapsed since the previous sample.
    pub fn sample(&mut self, truth: &TruthSample) -> SensorSample {
        if let Some(prev) = self.last_t {
            let dt = truth.t - prev;
            if dt > 0.0 {
                self.bias = step_gyro_bias(&self.bias, &self.cfg, dt, &mut self.bias_rng);
            }
        }
        self.last_t = Some(truth.t);
        SensorSample {
            t: truth.t,
            accel: simulate_accel(truth, &self.cfg, &mut self.accel_rng),
            gyro: simulate_gyro(truth, &self.bias, &self.cfg, &mut self.gyro_rng),
            mag: simulate_mag(truth, &self.cfg, &mut self.mag_rng),
            true_bias: self.bias.b,
        }
    }
}

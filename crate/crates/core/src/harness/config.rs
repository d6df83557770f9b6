//! Harness configuration file and the per-run configuration derived from it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Matrix6, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::{initial_covariance, measurement_noise, process_noise, CfWeights, EstimatorKind};
use crate::frontend::{DetectorConfig, GainSchedule, MagFieldKnowledge, MagUsage};
use crate::sensors::SensorConfig;
use crate::trajectory::MockupCase;
use crate::units::{DEG, SECONDS_PER_MINUTE};

/// The canonical configuration shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../../config/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDefaults {
    /// Hz
    pub rate: f64,
    pub seed: u64,
    pub scenarios: Vec<String>,
    pub testcases: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitParams {
    pub attitude_std_deg: f64,
    pub bias_std_dps: f64,
}

impl InitParams {
    pub fn covariance(&self) -> Matrix6<f64> {
        initial_covariance(self.attitude_std_deg * DEG, self.bias_std_dps * DEG)
    }
}

/// Sensor model in the units the noise figures are usually quoted in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorParams {
    pub accel_noise_std: f64,
    pub gyro_noise_std_dps: f64,
    pub gyro_bias_walk_dps_per_min: f64,
    pub gyro_bias_lpf_tau_s: f64,
    pub gyro_bias_initial_dps: [f64; 3],
    pub mag_noise_std: f64,
    pub gravity: [f64; 3],
    pub mag_field: [f64; 3],
}

impl SensorParams {
    pub fn to_sensor_config(&self, rate: f64, seed: u64) -> SensorConfig {
        SensorConfig {
            accel_noise_std: self.accel_noise_std,
            gyro_noise_std: self.gyro_noise_std_dps * DEG,
            gyro_bias_walk_std: self.gyro_bias_walk_dps_per_min * DEG,
            gyro_bias_lpf_tau: self.gyro_bias_lpf_tau_s,
            gyro_bias_initial: self.gyro_bias_initial_dps.map(|b| b * DEG),
            mag_noise_std: self.mag_noise_std,
            gravity: self.gravity,
            mag_field: self.mag_field,
            sample_rate: rate,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorParams {
    pub high_threshold: f64,
    pub low_threshold: f64,
    pub window_s: f64,
}

impl DetectorParams {
    pub fn to_detector_config(&self, gravity: &Vector3<f64>) -> DetectorConfig {
        DetectorConfig {
            high_threshold: self.high_threshold,
            low_threshold: self.low_threshold,
            window_s: self.window_s,
            gravity_norm: gravity.norm(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CfParams {
    pub accel: CfWeights,
    pub accel_low_dyn: CfWeights,
    pub mag: CfWeights,
    pub mag_low_dyn: CfWeights,
}

/// Measurement and process noise for the Kalman filters. Each measurement
/// covariance is `α² I`; the process noise is `diag(α²·I, β²·I)` with `β`
/// the bias drift accumulated per minute, converted to a per-second density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KalmanParams {
    pub accel_alpha: f64,
    pub accel_low_dyn_alpha: f64,
    pub mag_alpha: f64,
    pub mag_low_dyn_alpha: f64,
    pub q_alpha_dps: f64,
    pub q_beta_dps_per_min: f64,
    /// Sigma-point spread, UKF only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl KalmanParams {
    pub fn process_noise(&self) -> Matrix6<f64> {
        process_noise(
            self.q_alpha_dps * DEG,
            self.q_beta_dps_per_min * DEG / SECONDS_PER_MINUTE.sqrt(),
        )
    }

    /// Accelerometer covariance for unit-vector innovations. `α` is quoted in
    /// m/s², so it is divided by the norm of the vector being normalized.
    pub fn accel_noise(&self, reference_norm: f64) -> GainSchedule<Matrix3<f64>> {
        GainSchedule::new(
            measurement_noise(self.accel_alpha / reference_norm),
            measurement_noise(self.accel_low_dyn_alpha / reference_norm),
        )
    }

    /// Magnetometer covariance for unit-vector innovations; `α` is in gauss.
    pub fn mag_noise(&self, reference_norm: f64) -> GainSchedule<Matrix3<f64>> {
        GainSchedule::new(
            measurement_noise(self.mag_alpha / reference_norm),
            measurement_noise(self.mag_low_dyn_alpha / reference_norm),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub mag_field_knowledge: MagFieldKnowledge,
    pub mag_meas_usage: MagUsage,
    pub dynamic_gains: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub spec: ScenarioSpec,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.spec.mag_meas_usage == MagUsage::Xyz && self.spec.mag_field_knowledge != MagFieldKnowledge::Xyz {
            return Err(ConfigError::Invalid(format!(
                "scenario {}: xyz magnetometer usage needs xyz field knowledge",
                self.name
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestcaseSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mockup: Option<MockupCase>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestcaseSource {
    Mockup(MockupCase),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestcaseConfig {
    pub name: String,
    pub source: TestcaseSource,
}

/// Everything one run needs. Serialized verbatim into the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub estimator: EstimatorKind,
    pub scenario: ScenarioConfig,
    pub testcase: TestcaseConfig,
    pub seed: u64,
    /// Hz
    pub rate: f64,
    pub init: InitParams,
    pub sensors: SensorParams,
    pub detector: DetectorParams,
    pub cf: CfParams,
    pub ekf: KalmanParams,
    pub ukf: KalmanParams,
}

impl RunConfig {
    pub fn sensor_config(&self) -> SensorConfig {
        self.sensors.to_sensor_config(self.rate, self.seed)
    }

    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.scenario.name, self.testcase.name, self.estimator)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(format!("{}: {m}", self.label()));
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(invalid(format!("rate must be positive, got {}", self.rate)));
        }
        self.scenario.validate()?;
        self.sensor_config().validate().map_err(invalid)?;
        for w in [&self.cf.accel, &self.cf.accel_low_dyn, &self.cf.mag, &self.cf.mag_low_dyn] {
            w.validate().map_err(|e| invalid(e.to_string()))?;
        }
        for (name, k) in [("ekf", &self.ekf), ("ukf", &self.ukf)] {
            let vals = [
                k.accel_alpha,
                k.accel_low_dyn_alpha,
                k.mag_alpha,
                k.mag_low_dyn_alpha,
                k.q_alpha_dps,
                k.q_beta_dps_per_min,
            ];
            if !vals.iter().all(|v| *v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} noise parameters must be finite and non-negative")));
            }
        }
        let lambda = self.ukf.lambda.ok_or_else(|| invalid("ukf.lambda is required".into()))?;
        if !(6.0 + lambda > 0.0) {
            return Err(invalid(format!("ukf.lambda must exceed -6, got {lambda}")));
        }
        if self.ekf.lambda.is_some() {
            return Err(invalid("ekf.lambda is not a parameter of the EKF".into()));
        }
        let d = &self.detector;
        if !(d.window_s > 0.0 && d.low_threshold >= 0.0 && d.high_threshold >= d.low_threshold) {
            return Err(invalid("detector needs window_s > 0 and 0 <= low_threshold <= high_threshold".into()));
        }
        if !(self.init.attitude_std_deg >= 0.0 && self.init.bias_std_dps >= 0.0) {
            return Err(invalid("initial standard deviations must be non-negative".into()));
        }
        Ok(())
    }
}

/// The parsed configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub run: RunDefaults,
    pub init: InitParams,
    pub sensors: SensorParams,
    pub detector: DetectorParams,
    pub cf: CfParams,
    pub ekf: KalmanParams,
    pub ukf: KalmanParams,
    pub scenarios: BTreeMap<String, ScenarioSpec>,
    pub testcases: BTreeMap<String, TestcaseSpec>,
    /// Directory that relative trajectory paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self::parse(DEFAULT_CONFIG, Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/config")))
            .expect("shipped configuration parses")
    }
}

impl HarnessConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: HarnessConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base).map_err(|e| match e {
            ConfigError::Parse(m) => ConfigError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    fn check(&self) -> Result<(), ConfigError> {
        for name in &self.run.scenarios {
            self.scenario(name)?;
        }
        for name in &self.run.testcases {
            self.testcase(name)?;
        }
        for name in self.testcases.keys() {
            self.testcase(name)?;
        }
        for name in self.scenarios.keys() {
            self.scenario(name)?.validate()?;
        }
        Ok(())
    }

    pub fn scenario(&self, name: &str) -> Result<ScenarioConfig, ConfigError> {
        let spec = self
            .scenarios
            .get(name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown scenario '{name}'")))?;
        Ok(ScenarioConfig {
            name: name.to_string(),
            spec: spec.clone(),
        })
    }

    pub fn testcase(&self, name: &str) -> Result<TestcaseConfig, ConfigError> {
        let spec = self
            .testcases
            .get(name)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown test case '{name}'")))?;
        let source = match (&spec.mockup, &spec.file) {
            (Some(m), None) => TestcaseSource::Mockup(*m),
            (None, Some(f)) => TestcaseSource::File(if f.is_absolute() { f.clone() } else { self.base_dir.join(f) }),
            _ => {
                return Err(ConfigError::Invalid(format!(
                    "test case '{name}' needs exactly one of 'mockup' or 'file'"
                )))
            }
        };
        Ok(TestcaseConfig {
            name: name.to_string(),
            source,
        })
    }

    /// Run configuration for one matrix cell.
    pub fn run_config(&self, scenario: &str, testcase: &str, estimator: EstimatorKind) -> Result<RunConfig, ConfigError> {
        let cfg = RunConfig {
            estimator,
            scenario: self.scenario(scenario)?,
            testcase: self.testcase(testcase)?,
            seed: self.run.seed,
            rate: self.run.rate,
            init: self.init.clone(),
            sensors: self.sensors.clone(),
            detector: self.detector.clone(),
            cf: self.cf.clone(),
            ekf: self.ekf.clone(),
            ukf: self.ukf.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The cross product of scenarios, test cases and estimators, in that
    /// nesting order. Empty selections fall back to the configured lists and
    /// all three estimators.
    pub fn matrix(
        &self,
        scenarios: &[String],
        testcases: &[String],
        estimators: &[EstimatorKind],
    ) -> Result<Vec<RunConfig>, ConfigError> {
        let scenarios = if scenarios.is_empty() { &self.run.scenarios[..] } else { scenarios };
        let testcases = if testcases.is_empty() { &self.run.testcases[..] } else { testcases };
        let estimators = if estimators.is_empty() { &EstimatorKind::ALL[..] } else { estimators };
        let mut out = Vec::with_capacity(scenarios.len() * testcases.len() * estimators.len());
        for s in scenarios {
            for t in testcases {
                for e in estimators {
                    out.push(self.run_config(s, t, *e)?);
                }
            }
        }
        Ok(out)
    }
}

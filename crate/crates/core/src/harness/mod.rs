//! Batch simulation harness: runs scenario × test case × estimator cells and
//! writes summary tables, per-run time series and a reproducible manifest.

mod config;
mod output;

use std::path::Path;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    CfParams, ConfigError, DetectorParams, HarnessConfig, InitParams, KalmanParams, RunConfig, RunDefaults,
    ScenarioConfig, ScenarioSpec, SensorParams, TestcaseConfig, TestcaseSource, TestcaseSpec, DEFAULT_CONFIG,
};
pub use output::{
    emit_outputs, read_manifest, timeseries_path, write_summary, write_timeseries, Manifest, SUMMARY_HEADER,
    TIMESERIES_HEADER,
};

use crate::attitude::Quaternion;
use crate::estimator::{
    cf_propagate, cf_update, ekf_propagate, ekf_update, ukf_propagate, ukf_update, CfState, CfWeights, EkfState,
    EstimatorKind, FilterError, UkfState,
};
use crate::frontend::{
    accel_observation, declination_reference, mag_observation, DetectorState, FrontendError, GainSchedule,
    MagFieldKnowledge, MagUsage, VectorObservation,
};
use crate::metrics::{compute_metrics, ErrorSample, MetricsReport};
use crate::sensors::{SensorSample, SensorSimulator};
use crate::trajectory::{gen_mockup, load_trajectory, resample, MockupSpec, Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{label}: {source}")]
    Config {
        label: String,
        #[source]
        source: ConfigError,
    },
    #[error("{label}: {source}")]
    Trajectory {
        label: String,
        #[source]
        source: TrajectoryError,
    },
    #[error("{label}: at t={t} s: {source}")]
    Filter {
        label: String,
        t: f64,
        #[source]
        source: FilterError,
    },
    #[error("{label}: at t={t} s: {source}")]
    Frontend {
        label: String,
        t: f64,
        #[source]
        source: FrontendError,
    },
}

/// How often each measurement path ran during a run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounters {
    pub propagations: u64,
    pub accel_updates: u64,
    pub mag_updates: u64,
    /// Measurements dropped because they carried no usable direction.
    pub skipped: u64,
    /// Ticks on which the low-dynamics parameter set was active.
    pub low_dyn_ticks: u64,
}

/// One tick of a run, as written to the time-series file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TickRecord {
    pub sensors: SensorSample,
    pub q_true: Quaternion,
    pub q_est: Quaternion,
    pub error: ErrorSample,
    pub low_dynamics: bool,
    pub mu_f: f64,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub config: RunConfig,
    pub metrics: MetricsReport,
    pub series: Vec<TickRecord>,
    pub counters: UpdateCounters,
    pub wall_time: Duration,
}

/// Results compare equal when everything but the wall time matches.
impl PartialEq for RunResult {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config
            && self.metrics == other.metrics
            && self.series == other.series
            && self.counters == other.counters
    }
}

enum Filter {
    Cf(CfState),
    Ekf(EkfState),
    Ukf(UkfState),
}

impl Filter {
    fn attitude(&self) -> Quaternion {
        match self {
            Filter::Cf(s) => s.q_hat,
            Filter::Ekf(s) => s.q_hat,
            Filter::Ukf(s) => s.q_hat,
        }
    }

    fn bias(&self) -> Vector3<f64> {
        match self {
            Filter::Cf(s) => s.b_hat,
            Filter::Ekf(s) => s.b_hat,
            Filter::Ukf(s) => s.b_hat,
        }
    }
}

/// Builds or loads the ground truth for a run at the run's rate.
pub fn load_truth(cfg: &RunConfig) -> Result<Trajectory, TrajectoryError> {
    match &cfg.testcase.source {
        TestcaseSource::Mockup(case) => {
            let mut t = gen_mockup(&MockupSpec::new(*case), cfg.rate)?;
            t.name = cfg.testcase.name.clone();
            Ok(t)
        }
        TestcaseSource::File(path) => {
            let mut t = resample(&load_trajectory(path)?, cfg.rate)?;
            t.name = cfg.testcase.name.clone();
            Ok(t)
        }
    }
}

/// Runs one cell.
///
/// Every tick: sense, update the dynamics detector, select the parameter set,
/// propagate with the gyro reading, update with the accelerometer, then with
/// the magnetometer when the scenario uses it, and record the error. The
/// complementary filter folds both measurements into one combined update.
pub fn run_case(cfg: &RunConfig) -> Result<RunResult, RunError> {
    let label = cfg.label();
    cfg.validate().map_err(|source| RunError::Config {
        label: label.clone(),
        source,
    })?;
    let truth = load_truth(cfg).map_err(|source| RunError::Trajectory {
        label: label.clone(),
        source,
    })?;
    let started = Instant::now();
    let sensor_cfg = cfg.sensor_config();
    let gravity = sensor_cfg.gravity();
    let field = sensor_cfg.mag_field();
    let mag_reference = match cfg.scenario.spec.mag_field_knowledge {
        MagFieldKnowledge::Xyz => field,
        MagFieldKnowledge::DeclinationOnly => declination_reference(field.y.atan2(field.x)),
    };
    let usage = cfg.scenario.spec.mag_meas_usage;
    let dynamic = cfg.scenario.spec.dynamic_gains;
    let mut sim = SensorSimulator::new(sensor_cfg);
    let mut detector = DetectorState::new(cfg.detector.to_detector_config(&gravity), cfg.rate);

    let cf_accel = GainSchedule::new(cfg.cf.accel, cfg.cf.accel_low_dyn);
    let cf_mag = GainSchedule::new(cfg.cf.mag, cfg.cf.mag_low_dyn);
    let kalman = match cfg.estimator {
        EstimatorKind::Ukf => &cfg.ukf,
        _ => &cfg.ekf,
    };
    let q_noise = kalman.process_noise();
    let r_accel = kalman.accel_noise(gravity.norm());
    let r_mag = kalman.mag_noise(match usage {
        MagUsage::Horizontal => field.xy().norm(),
        _ => field.norm(),
    });
    let lambda = cfg.ukf.lambda.unwrap_or(1.0);

    let q0 = truth.samples[0].q.normalize();
    let b0 = Vector3::zeros();
    let p0 = cfg.init.covariance();
    let mut filter = match cfg.estimator {
        EstimatorKind::Cf => Filter::Cf(CfState::new(q0, b0)),
        EstimatorKind::Ekf => Filter::Ekf(EkfState::new(q0, b0, p0)),
        EstimatorKind::Ukf => Filter::Ukf(UkfState::new(q0, b0, p0)),
    };

    let mut counters = UpdateCounters::default();
    let mut series = Vec::with_capacity(truth.samples.len());
    let mut prev_t: Option<f64> = None;
    for sample in &truth.samples {
        let t = sample.t;
        let filter_err = |source| RunError::Filter {
            label: label.clone(),
            t,
            source,
        };
        let frontend_err = |source| RunError::Frontend {
            label: label.clone(),
            t,
            source,
        };
        let meas = sim.sample(sample);
        detector.update(&meas.accel);
        let low = detector.low_dynamics;
        if dynamic && low {
            counters.low_dyn_ticks += 1;
        }

        if let Some(dt) = prev_t.map(|p| t - p) {
            filter = match filter {
                Filter::Cf(s) => Filter::Cf(cf_propagate(&s, &meas.gyro, dt)),
                Filter::Ekf(s) => Filter::Ekf(ekf_propagate(&s, &meas.gyro, dt, &q_noise).map_err(filter_err)?),
                Filter::Ukf(s) => Filter::Ukf(ukf_propagate(&s, &meas.gyro, dt, lambda, &q_noise).map_err(filter_err)?),
            };
            counters.propagations += 1;
        }
        prev_t = Some(t);

        let accel_obs = match accel_observation(&meas.accel, &gravity, None) {
            Ok(o) => Some(o),
            Err(FrontendError::DegenerateInput(_)) => {
                counters.skipped += 1;
                None
            }
            Err(e) => return Err(frontend_err(e)),
        };
        let mag_obs = |q_hat: &Quaternion, counters: &mut UpdateCounters| -> Option<VectorObservation> {
            if usage == MagUsage::None {
                return None;
            }
            match mag_observation(&meas.mag, q_hat, &mag_reference, usage) {
                Ok(o) => Some(o),
                Err(_) => {
                    counters.skipped += 1;
                    None
                }
            }
        };

        filter = match filter {
            Filter::Cf(s) => {
                let mut obs: Vec<(VectorObservation, CfWeights)> = Vec::with_capacity(2);
                if let Some(o) = accel_obs {
                    obs.push((o, *cf_accel.select(low, dynamic).map_err(frontend_err)?));
                    counters.accel_updates += 1;
                }
                if let Some(o) = mag_obs(&s.q_hat, &mut counters) {
                    obs.push((o, *cf_mag.select(low, dynamic).map_err(frontend_err)?));
                    counters.mag_updates += 1;
                }
                Filter::Cf(cf_update(&s, &obs))
            }
            Filter::Ekf(mut s) => {
                if let Some(o) = accel_obs {
                    s = ekf_update(&s, &o, r_accel.select(low, dynamic).map_err(frontend_err)?).map_err(filter_err)?;
                    counters.accel_updates += 1;
                }
                if let Some(o) = mag_obs(&s.q_hat, &mut counters) {
                    s = ekf_update(&s, &o, r_mag.select(low, dynamic).map_err(frontend_err)?).map_err(filter_err)?;
                    counters.mag_updates += 1;
                }
                Filter::Ekf(s)
            }
            Filter::Ukf(mut s) => {
                let r: &Matrix3<f64>;
                if let Some(o) = accel_obs {
                    r = r_accel.select(low, dynamic).map_err(frontend_err)?;
                    s = ukf_update(&s, &o, r, lambda).map_err(filter_err)?;
                    counters.accel_updates += 1;
                }
                if let Some(o) = mag_obs(&s.q_hat, &mut counters) {
                    let r = r_mag.select(low, dynamic).map_err(frontend_err)?;
                    s = ukf_update(&s, &o, r, lambda).map_err(filter_err)?;
                    counters.mag_updates += 1;
                }
                s.sigma = None;
                Filter::Ukf(s)
            }
        };

        let q_est = filter.attitude();
        let q_true = sample.q.normalize();
        series.push(TickRecord {
            sensors: meas,
            q_true,
            q_est,
            error: ErrorSample::new(t, &q_est, &q_true, &filter.bias(), &meas.true_bias),
            low_dynamics: low,
            mu_f: detector.mu_f,
        });
    }
    let errors: Vec<ErrorSample> = series.iter().map(|r| r.error).collect();
    let metrics = compute_metrics(&errors).map_err(|_| RunError::Trajectory {
        label: label.clone(),
        source: TrajectoryError::Validation {
            path: cfg.testcase.name.clone(),
            message: "trajectory has no samples".into(),
        },
    })?;
    Ok(RunResult {
        config: cfg.clone(),
        metrics,
        series,
        counters,
        wall_time: started.elapsed(),
    })
}

/// A matrix cell that did not produce a result.
#[derive(Clone, Debug, PartialEq)]
pub struct CellError {
    pub config: RunConfig,
    pub message: String,
}

/// Every cell of a matrix in input order, split into successful results and
/// failed cells, each also in input order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MatrixReport {
    pub configs: Vec<RunConfig>,
    pub results: Vec<RunResult>,
    pub failures: Vec<CellError>,
}

/// Runs every cell in parallel. A failed cell is recorded and the rest of the
/// matrix continues. `on_result` sees each result before it is collected, for
/// example to stream its time series to disk and drop it from memory.
pub fn run_matrix_with<F>(configs: &[RunConfig], on_result: F) -> MatrixReport
where
    F: Fn(&mut RunResult) -> Result<(), String> + Sync,
{
    let outcomes: Vec<Result<RunResult, CellError>> = configs
        .par_iter()
        .map(|cfg| {
            let mut result = run_case(cfg).map_err(|e| CellError {
                config: cfg.clone(),
                message: e.to_string(),
            })?;
            on_result(&mut result).map_err(|message| CellError {
                config: cfg.clone(),
                message,
            })?;
            Ok(result)
        })
        .collect();
    let mut report = MatrixReport {
        configs: configs.to_vec(),
        ..Default::default()
    };
    for o in outcomes {
        match o {
            Ok(r) => report.results.push(r),
            Err(e) => report.failures.push(e),
        }
    }
    report
}

pub fn run_matrix(configs: &[RunConfig]) -> MatrixReport {
    run_matrix_with(configs, |_| Ok(()))
}

/// Re-runs the cells recorded in a manifest.
pub fn rerun_manifest(path: &Path) -> Result<MatrixReport, ConfigError> {
    let manifest = read_manifest(path)?;
    Ok(run_matrix(&manifest.runs))
}

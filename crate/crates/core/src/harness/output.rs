//! Output files of a matrix run.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ConfigError, RunConfig};
use super::{MatrixReport, RunResult};

pub const SUMMARY_HEADER: [&str; 7] = ["scenario", "testcase", "estimator", "MaxEVz", "MaxEVxy", "FinH", "FinPR"];

pub const TIMESERIES_HEADER: [&str; 29] = [
    "t", "q_true_0", "q_true_1", "q_true_2", "q_true_3", "q_est_0", "q_est_1", "q_est_2", "q_est_3", "dav_x",
    "dav_y", "dav_z", "err_heading", "err_pitch", "err_roll", "bias_err_x", "bias_err_y", "bias_err_z", "accel_x",
    "accel_y", "accel_z", "gyro_x", "gyro_y", "gyro_z", "mag_x", "mag_y", "mag_z", "mu_f", "low_dynamics",
];

const MANIFEST_VERSION: u32 = 1;

/// Everything needed to reproduce a matrix run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub crate_version: String,
    pub runs: Vec<RunConfig>,
}

impl Manifest {
    pub fn new(runs: Vec<RunConfig>) -> Self {
        Self {
            version: MANIFEST_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            runs,
        }
    }
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> ConfigError + '_ {
    move |source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ConfigError + '_ {
    move |e| ConfigError::Io {
        path: path.display().to_string(),
        source: e.into(),
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest, ConfigError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    if m.version != MANIFEST_VERSION {
        return Err(ConfigError::Invalid(format!(
            "{}: manifest version {} is not supported",
            path.display(),
            m.version
        )));
    }
    Ok(m)
}

/// Path of a run's time series below `outdir`.
pub fn timeseries_path(outdir: &Path, cfg: &RunConfig) -> PathBuf {
    outdir
        .join("runs")
        .join(&cfg.scenario.name)
        .join(&cfg.testcase.name)
        .join(cfg.estimator.name())
        .join("timeseries.csv")
}

pub fn write_timeseries(result: &RunResult, outdir: &Path) -> Result<PathBuf, ConfigError> {
    let path = timeseries_path(outdir, &result.config);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(TIMESERIES_HEADER).map_err(csv_err(&path))?;
    for r in &result.series {
        let e = &r.error;
        let s = &r.sensors;
        let mut row: Vec<String> = Vec::with_capacity(TIMESERIES_HEADER.len());
        row.push(e.t.to_string());
        for q in [&r.q_true, &r.q_est] {
            row.extend([q.q0, q.qv.x, q.qv.y, q.qv.z].iter().map(f64::to_string));
        }
        row.extend(e.dav.iter().map(f64::to_string));
        row.extend(e.euler_err.iter().map(f64::to_string));
        row.extend(e.bias_err.iter().map(f64::to_string));
        for v in [&s.accel, &s.gyro, &s.mag] {
            row.extend(v.iter().map(f64::to_string));
        }
        row.push(r.mu_f.to_string());
        row.push(u8::from(r.low_dynamics).to_string());
        w.write_record(&row).map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

pub fn write_summary<W: Write>(results: &[RunResult], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(SUMMARY_HEADER)?;
    for r in results {
        let c = &r.config;
        let m = &r.metrics;
        w.write_record([
            c.scenario.name.clone(),
            c.testcase.name.clone(),
            c.estimator.name().to_string(),
            m.max_ev_z.to_string(),
            m.max_ev_xy.to_string(),
            m.fin_h.to_string(),
            m.fin_pr.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `summary.csv`, `errors.csv`, `manifest.json` and the time series
/// of every result that still holds one.
pub fn emit_outputs(report: &MatrixReport, outdir: &Path) -> Result<(), ConfigError> {
    fs::create_dir_all(outdir).map_err(io_err(outdir))?;

    let path = outdir.join("summary.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_summary(&report.results, file).map_err(csv_err(&path))?;

    let path = outdir.join("errors.csv");
    let mut w = csv::Writer::from_path(&path).map_err(csv_err(&path))?;
    w.write_record(["scenario", "testcase", "estimator", "message"]).map_err(csv_err(&path))?;
    for f in &report.failures {
        let c = &f.config;
        w.write_record([c.scenario.name.as_str(), c.testcase.name.as_str(), c.estimator.name(), f.message.as_str()])
            .map_err(csv_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;

    for r in report.results.iter().filter(|r| !r.series.is_empty()) {
        write_timeseries(r, outdir)?;
    }

    let path = outdir.join("manifest.json");
    let manifest = Manifest::new(report.configs.clone());
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| ConfigError::Parse(e.to_string()))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

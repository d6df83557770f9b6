use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use qattitude::estimator::EstimatorKind;
use qattitude::harness::{
    emit_outputs, read_manifest, run_case, run_matrix_with, write_summary, write_timeseries, HarnessConfig,
    MatrixReport, RunConfig,
};
use qattitude::trajectory::{gen_mockup, load_trajectory, save_trajectory, MockupCase, MockupSpec};

/// Attitude estimator comparison harness.
#[derive(Parser)]
#[command(name = "qattitude", version)]
struct Cli {
    /// Harness configuration file; defaults to the built-in configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single scenario / test case / estimator cell.
    Run {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        testcase: String,
        #[arg(long)]
        estimator: EstimatorKind,
        #[command(flatten)]
        common: Common,
    },
    /// Run a scenario × test case × estimator matrix.
    Matrix {
        /// Scenarios to run (repeatable or comma separated); default from the config.
        #[arg(long, value_delimiter = ',')]
        scenario: Vec<String>,
        /// Test cases to run; default from the config.
        #[arg(long, value_delimiter = ',')]
        testcase: Vec<String>,
        /// Estimators to run; default all three.
        #[arg(long, value_delimiter = ',')]
        estimator: Vec<EstimatorKind>,
        /// Re-run the cells recorded in a manifest instead of building a matrix.
        #[arg(long, conflicts_with_all = ["scenario", "testcase", "estimator", "seed", "rate"])]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Write a mockup trajectory to a CSV file.
    GenMockup {
        case: MockupCase,
        /// Hz
        #[arg(long, default_value_t = 100.0)]
        rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a trajectory file.
    ValidateTrajectory { file: PathBuf },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Simulation rate, Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Output directory for summary.csv, manifest.json and time series.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to the process exit code.
enum Failure {
    Run(anyhow::Error),
    Config(anyhow::Error),
}

fn config_err<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Config(e.into())
}

fn load_config(path: Option<&Path>, common: &Common) -> Result<HarnessConfig, Failure> {
    let mut cfg = match path {
        Some(p) => HarnessConfig::load(p).map_err(config_err)?,
        None => HarnessConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.run.seed = seed;
    }
    if let Some(rate) = common.rate {
        cfg.run.rate = rate;
    }
    Ok(cfg)
}

fn print_summary(report: &MatrixReport) -> Result<()> {
    write_summary(&report.results, std::io::stdout().lock())?;
    for f in &report.failures {
        eprintln!("FAILED {}", f.message);
    }
    Ok(())
}

fn run_cells(configs: &[RunConfig], out: Option<&Path>) -> Result<(), Failure> {
    let report = run_matrix_with(configs, |result| {
        if let Some(dir) = out {
            write_timeseries(result, dir).map_err(|e| e.to_string())?;
            result.series = Vec::new();
        }
        Ok(())
    });
    if let Some(dir) = out {
        emit_outputs(&report, dir)
            .with_context(|| format!("writing outputs to {}", dir.display()))
            .map_err(Failure::Run)?;
    }
    print_summary(&report).map_err(Failure::Run)?;
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Run(anyhow::anyhow!(
            "{} of {} cells failed",
            report.failures.len(),
            configs.len()
        )))
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            scenario,
            testcase,
            estimator,
            common,
        } => {
            let cfg = load_config(cli.config.as_deref(), &common)?;
            let run = cfg.run_config(&scenario, &testcase, estimator).map_err(config_err)?;
            if common.out.is_some() {
                return run_cells(&[run], common.out.as_deref());
            }
            let result = run_case(&run).map_err(|e| Failure::Run(e.into()))?;
            let report = MatrixReport {
                configs: vec![run],
                results: vec![result],
                failures: Vec::new(),
            };
            print_summary(&report).map_err(Failure::Run)
        }
        Command::Matrix {
            scenario,
            testcase,
            estimator,
            manifest,
            common,
        } => {
            let configs = match manifest {
                Some(path) => read_manifest(&path).map_err(config_err)?.runs,
                None => load_config(cli.config.as_deref(), &common)?
                    .matrix(&scenario, &testcase, &estimator)
                    .map_err(config_err)?,
            };
            run_cells(&configs, common.out.as_deref())
        }
        Command::GenMockup { case, rate, out } => {
            let traj = gen_mockup(&MockupSpec::new(case), rate).map_err(config_err)?;
            save_trajectory(&traj, &out).map_err(|e| Failure::Run(e.into()))?;
            eprintln!("wrote {} samples to {}", traj.samples.len(), out.display());
            Ok(())
        }
        Command::ValidateTrajectory { file } => {
            let traj = load_trajectory(&file).map_err(|e| Failure::Run(e.into()))?;
            println!(
                "{}: {} samples, {} s, {} Hz",
                file.display(),
                traj.samples.len(),
                traj.duration(),
                traj.rate
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
    }
}

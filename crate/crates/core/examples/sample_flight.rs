//! Writes the synthetic flight shipped as `data/flights/sample_flight.csv`:
//! 5 s of hover, a 35 s banked turn through 90° of heading with pitch and
//! roll oscillations and thrust-consistent translational acceleration, then
//! 20 s of hover.
//!
//! `cargo run -p qattitude --example sample_flight > data/flights/sample_flight.csv`

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::Vector3;
use qattitude::metrics::quat_from_euler;
use qattitude::sensors::TruthSample;
use qattitude::trajectory::{write_trajectory, Trajectory};
use qattitude::units::DEG;
use qattitude::Quaternion;

const RATE: f64 = 50.0;
const DURATION: f64 = 60.0;
const GRAVITY: f64 = 9.81;
const START: f64 = 5.0;
const END: f64 = 40.0;

fn phase(t: f64) -> f64 {
    ((t - START) / (END - START)).clamp(0.0, 1.0)
}

fn window(t: f64) -> f64 {
    (PI * phase(t)).sin().powi(2)
}

fn euler(t: f64) -> (f64, f64, f64) {
    let heading = 90.0 * DEG * (1.0 - (PI * phase(t)).cos()) / 2.0;
    let pitch = 15.0 * DEG * (2.0 * PI * (t - START) / 11.0).sin() * window(t);
    let roll = 25.0 * DEG * (2.0 * PI * (t - START) / 7.0).sin() * window(t);
    (heading, pitch, roll)
}

fn attitude(t: f64) -> Quaternion {
    let (h, p, r) = euler(t);
    quat_from_euler(h, p, r)
}

/// Body rate from `ω = 2 vec(q* ⊗ q̇)` with a central difference.
fn body_rate(t: f64) -> Vector3<f64> {
    let h = 1e-6;
    let q = attitude(t);
    let dq = attitude(t + h).add(&attitude(t - h).scale(-1.0)).scale(0.5 / h);
    q.conjugate().compose(&dq).qv * 2.0
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = (DURATION * RATE).round() as usize;
    let samples = (0..=n)
        .map(|k| {
            let t = k as f64 / RATE;
            let q = attitude(t);
            let (_, p, r) = euler(t);
            // thrust holds altitude on average and bobs during the maneuver
            let thrust = GRAVITY / (p.cos() * r.cos()) * (1.0 + 0.1 * (2.0 * PI * t / 9.0).sin() * window(t));
            let rddot = q.transform(&Vector3::new(0.0, 0.0, thrust)) - Vector3::new(0.0, 0.0, GRAVITY);
            let w = if phase(t) > 0.0 && phase(t) < 1.0 { body_rate(t) } else { Vector3::zeros() };
            TruthSample::new(t, q, w, rddot)
        })
        .collect();
    let traj = Trajectory {
        name: "sample_flight".into(),
        rate: RATE,
        samples,
    };
    let mut out = std::io::stdout().lock();
    writeln!(out, "# Synthetic quadrotor flight: 5 s hover, 35 s banked turn through 90 deg")?;
    writeln!(out, "# of heading with pitch/roll oscillations, 20 s hover. Generated by")?;
    writeln!(out, "# `cargo run -p qattitude --example sample_flight`.")?;
    write_trajectory(&traj, out)?;
    Ok(())
}

//! Ground-truth trajectories: synthetic mockup cases and recorded flights.
//!
//! Trajectory files are CSV with the header `t,qw,qx,qy,qz,wx,wy,wz,ax,ay,az`
//! (seconds, unit quaternion `ᴺqᴮ`, body angular velocity in rad/s, inertial
//! translation acceleration in m/s²). Lines starting with `#` are comments.

use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attitude::{quat_rate, Quaternion};
use crate::sensors::TruthSample;
use crate::units::DEG;

pub const CSV_HEADER: [&str; 11] = ["t", "qw", "qx", "qy", "qz", "wx", "wy", "wz", "ax", "ay", "az"];

/// Largest accepted deviation of a file quaternion from unit norm.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: u64,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub name: String,
    pub rate: f64,
    pub samples: Vec<TruthSample>,
}

impl Trajectory {
    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    /// Checks strictly increasing time, finite values and unit quaternions.
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let fail = |message: String| TrajectoryError::Validation {
            path: self.name.clone(),
            message,
        };
        if self.samples.is_empty() {
            return Err(fail("trajectory has no samples".into()));
        }
        for (i, s) in self.samples.iter().enumerate() {
            let finite = s.t.is_finite() && s.q.is_finite() && s.w.iter().chain(s.rddot.iter()).all(|x| x.is_finite());
            if !finite {
                return Err(fail(format!("sample {i} has a non-finite value")));
            }
            let dev = (s.q.norm() - 1.0).abs();
            if dev > QUATERNION_NORM_TOLERANCE {
                return Err(fail(format!("sample {i} at t={} has quaternion norm {}", s.t, s.q.norm())));
            }
            if i > 0 && !(s.t > self.samples[i - 1].t) {
                return Err(fail(format!("time is not strictly increasing at sample {i} (t={})", s.t)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockupCase {
    LongHover,
    Easy,
    Slowrot,
    Mockup,
}

impl MockupCase {
    pub const ALL: [MockupCase; 4] = [MockupCase::LongHover, MockupCase::Easy, MockupCase::Slowrot, MockupCase::Mockup];

    /// Test-case name, e.g. `mockup_long_hover`.
    pub fn name(self) -> &'static str {
        match self {
            MockupCase::LongHover => "mockup_long_hover",
            MockupCase::Easy => "mockup_easy",
            MockupCase::Slowrot => "mockup_slowrot",
            MockupCase::Mockup => "mockup",
        }
    }
}

impl fmt::Display for MockupCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MockupCase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.strip_prefix("mockup_").unwrap_or(s);
        match key {
            "long_hover" => Ok(MockupCase::LongHover),
            "easy" => Ok(MockupCase::Easy),
            "slowrot" => Ok(MockupCase::Slowrot),
            "mockup" => Ok(MockupCase::Mockup),
            _ => Err(format!("unknown mockup case '{s}'")),
        }
    }
}

/// Angular-rate profile `ω_i(t) = A_i sin(2π f_i t + φ_i) + c_i` during the
/// maneuver, then exact hover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MockupSpec {
    pub case: MockupCase,
    /// rad/s
    pub amplitude: [f64; 3],
    /// Hz
    pub frequency: [f64; 3],
    /// rad
    pub phase: [f64; 3],
    /// rad/s
    pub constant: [f64; 3],
    /// s
    pub maneuver_s: f64,
    /// s
    pub duration_s: f64,
}

impl MockupSpec {
    pub fn new(case: MockupCase) -> Self {
        let zero = [0.0; 3];
        let (amplitude, frequency, constant) = match case {
            MockupCase::LongHover => (zero, zero, zero),
            MockupCase::Easy => ([4.0 * DEG, 3.0 * DEG, 5.0 * DEG], [0.11, 0.17, 0.23], zero),
            MockupCase::Slowrot => (zero, zero, [6.0 * DEG, 0.0, 0.0]),
            MockupCase::Mockup => ([300.0 * DEG, 200.0 * DEG, 150.0 * DEG], [0.20, 0.31, 0.47], zero),
        };
        Self {
            case,
            amplitude,
            frequency,
            phase: zero,
            constant,
            maneuver_s: 60.0,
            duration_s: 120.0,
        }
    }

    fn maneuver_rate(&self, t: f64) -> Vector3<f64> {
        Vector3::from_fn(|i, _| {
            self.amplitude[i] * (2.0 * std::f64::consts::PI * self.frequency[i] * t + self.phase[i]).sin() + self.constant[i]
        })
    }

    /// Angular velocity at time `t`: the profile before `maneuver_s`, zero after.
    pub fn rate_at(&self, t: f64) -> Vector3<f64> {
        if t < self.maneuver_s {
            self.maneuver_rate(t)
        } else {
            Vector3::zeros()
        }
    }
}

fn rk4_step(q: &Quaternion, t: f64, dt: f64, w: impl Fn(f64) -> Vector3<f64>) -> Quaternion {
    let f = |q: &Quaternion, t: f64| quat_rate(q, &w(t));
    let at = |k: &nalgebra::Vector4<f64>, h: f64| Quaternion::from_vector4(&(q.as_vector4() + k * h));
    let k1 = f(q, t);
    let k2 = f(&at(&k1, dt / 2.0), t + dt / 2.0);
    let k3 = f(&at(&k2, dt / 2.0), t + dt / 2.0);
    let k4 = f(&at(&k3, dt), t + dt);
    Quaternion::from_vector4(&(q.as_vector4() + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))).normalize()
}

/// Synthesizes a mockup case starting level at `q_I`, integrating the
/// attitude with fixed-step RK4 and renormalizing every step. Each step uses
/// the rate profile of the segment it starts in, so the hover half begins at
/// the attitude reached by the full maneuver.
pub fn gen_mockup(spec: &MockupSpec, rate: f64) -> Result<Trajectory, TrajectoryError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(TrajectoryError::Validation {
            path: spec.case.name().into(),
            message: format!("rate must be positive, got {rate}"),
        });
    }
    let n = (spec.duration_s * rate).round() as usize;
    let n_maneuver = (spec.maneuver_s * rate).round() as usize;
    let dt = 1.0 / rate;
    let mut q = Quaternion::identity();
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = k as f64 / rate;
        let w = if k < n_maneuver { spec.maneuver_rate(t) } else { Vector3::zeros() };
        samples.push(TruthSample::new(t, q, w, Vector3::zeros()));
        if k < n_maneuver {
            q = rk4_step(&q, t, dt, |s| spec.maneuver_rate(s));
        }
    }
    Ok(Trajectory {
        name: spec.case.name().into(),
        rate,
        samples,
    })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> TrajectoryError + '_ {
    move |source| TrajectoryError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Parses trajectory CSV text. `name` labels errors and the result.
pub fn parse_trajectory<R: Read>(reader: R, name: &str) -> Result<Trajectory, TrajectoryError> {
    let parse_err = |line: u64, column: usize, message: String| TrajectoryError::Parse {
        path: name.into(),
        line,
        column,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(e.position().map_or(1, |p| p.line()), 1, e.to_string()))?;
    if headers.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(parse_err(1, 1, format!("expected header '{}'", CSV_HEADER.join(","))));
    }
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), 1, e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut v = [0.0; 11];
        for (i, field) in rec.iter().enumerate() {
            v[i] = field
                .parse::<f64>()
                .map_err(|e| parse_err(line, i + 1, format!("'{field}': {e}")))?;
        }
        samples.push(TruthSample::new(
            v[0],
            Quaternion::new(v[1], v[2], v[3], v[4]),
            Vector3::new(v[5], v[6], v[7]),
            Vector3::new(v[8], v[9], v[10]),
        ));
    }
    let rate = if samples.len() > 1 {
        (samples.len() - 1) as f64 / (samples[samples.len() - 1].t - samples[0].t)
    } else {
        0.0
    };
    let traj = Trajectory {
        name: name.into(),
        rate,
        samples,
    };
    traj.validate()?;
    Ok(traj)
}

/// Loads and validates a trajectory file.
pub fn load_trajectory(path: &Path) -> Result<Trajectory, TrajectoryError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut traj = parse_trajectory(file, &path.display().to_string())?;
    if let Some(stem) = path.file_stem() {
        traj.name = stem.to_string_lossy().into_owned();
    }
    Ok(traj)
}

/// Writes a trajectory in the CSV format read by [`load_trajectory`]. Values
/// use the shortest representation that parses back to the same `f64`.
pub fn write_trajectory<W: Write>(traj: &Trajectory, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_HEADER)?;
    for s in &traj.samples {
        let q = s.q.as_array();
        let row = [s.t, q[0], q[1], q[2], q[3], s.w.x, s.w.y, s.w.z, s.rddot.x, s.rddot.y, s.rddot.z];
        w.write_record(row.iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trajectory(traj: &Trajectory, path: &Path) -> Result<(), TrajectoryError> {
    let file = File::create(path).map_err(io_err(path))?;
    write_trajectory(traj, file).map_err(|e| TrajectoryError::Io {
        path: path.display().to_string(),
        source: e.into(),
    })
}

/// Resamples onto a uniform grid starting at the first sample: spherical
/// interpolation for the attitude, linear for the rates and accelerations.
/// The last grid point snaps to the final sample when it lies within 1e-9 s.
pub fn resample(traj: &Trajectory, rate: f64) -> Result<Trajectory, TrajectoryError> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(TrajectoryError::Validation {
            path: traj.name.clone(),
            message: format!("rate must be positive, got {rate}"),
        });
    }
    traj.validate()?;
    let src = &traj.samples;
    let t0 = src[0].t;
    let t_end = src[src.len() - 1].t;
    let n = ((t_end - t0) * rate + 1e-9).floor() as usize;
    let lerp = |a: &Vector3<f64>, b: &Vector3<f64>, u: f64| a + (b - a) * u;
    let samples = (0..=n)
        .map(|k| {
            let mut t = t0 + k as f64 / rate;
            if (t - t_end).abs() < 1e-9 {
                t = t_end;
            }
            let j = src.partition_point(|s| s.t <= t);
            if j == 0 {
                return src[0].clone();
            }
            let a = &src[j - 1];
            if j == src.len() || a.t == t {
                let mut s = a.clone();
                s.t = t;
                return s;
            }
            let b = &src[j];
            let u = (t - a.t) / (b.t - a.t);
            let mut s = TruthSample::new(t, a.q.slerp(&b.q, u), lerp(&a.w, &b.w, u), lerp(&a.rddot, &b.rddot, u));
            if let (Some(pa), Some(pb)) = (a.position, b.position) {
                s.position = Some(lerp(&pa, &pb, u));
            }
            if let (Some(va), Some(vb)) = (a.velocity, b.velocity) {
                s.velocity = Some(lerp(&va, &vb, u));
            }
            s
        })
        .collect();
    Ok(Trajectory {
        name: traj.name.clone(),
        rate,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn long_hover_is_static() {
        let t = gen_mockup(&MockupSpec::new(MockupCase::LongHover), 100.0).unwrap();
        assert_eq!(t.samples.len(), 12001);
        assert!(t.samples.iter().all(|s| s.q == Quaternion::identity() && s.w == Vector3::zeros()));
        assert_eq!(t.samples.last().unwrap().t, 120.0);
    }

    #[test]
    fn slowrot_closes_full_turn() {
        let t = gen_mockup(&MockupSpec::new(MockupCase::Slowrot), 100.0).unwrap();
        let mid = &t.samples[6000];
        assert_eq!(mid.t, 60.0);
        assert_eq!(mid.w, Vector3::zeros());
        assert!(mid.q.angle_to(&Quaternion::identity()) < 1e-9);
        let quarter = &t.samples[1500];
        assert!((quarter.q.angle_to(&Quaternion::identity()) - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!(t.samples[6000..].iter().all(|s| s.q == mid.q));
    }

    #[test]
    fn mockup_peak_rate() {
        let t = gen_mockup(&MockupSpec::new(MockupCase::Mockup), 100.0).unwrap();
        let peak = t.samples.iter().map(|s| s.w.amax()).fold(0.0, f64::max);
        assert!((peak / DEG - 300.0).abs() < 0.01, "peak {}", peak / DEG);
        assert!(t.samples.iter().all(|s| s.rddot == Vector3::zeros()));
        let easy = gen_mockup(&MockupSpec::new(MockupCase::Easy), 100.0).unwrap();
        assert!(easy.samples.iter().all(|s| s.w.amax() <= 5.0 * DEG));
    }

    #[test]
    fn generated_attitude_is_kinematically_consistent() {
        for case in MockupCase::ALL {
            let t = gen_mockup(&MockupSpec::new(case), 1000.0).unwrap();
            for w in t.samples.windows(3).step_by(37) {
                if w[2].t > 60.0 {
                    break;
                }
                let dt = w[2].t - w[0].t;
                let fd = (w[2].q.as_vector4() - w[0].q.as_vector4()) / dt;
                let analytic = quat_rate(&w[1].q, &w[1].w);
                let wn = w[1].w.norm();
                assert!((fd - analytic).norm() <= 1e-4 * wn.max(1e-12), "{case}: t={}", w[1].t);
            }
        }
    }

    #[test]
    fn case_names_parse() {
        for c in MockupCase::ALL {
            assert_eq!(c.name().parse::<MockupCase>().unwrap(), c);
        }
        assert!("longturn".parse::<MockupCase>().is_err());
    }

    #[test]
    fn resample_native_rate_is_identity() {
        let t = gen_mockup(&MockupSpec::new(MockupCase::Easy), 50.0).unwrap();
        let r = resample(&t, 50.0).unwrap();
        assert_eq!(r.samples.len(), t.samples.len());
        for (a, b) in r.samples.iter().zip(&t.samples) {
            assert!((a.t - b.t).abs() < 1e-12);
            assert!((a.q.as_vector4() - b.q.as_vector4()).amax() < 1e-12);
            assert!((a.w - b.w).amax() < 1e-12);
        }
    }

    #[test]
    fn resample_constant_rate_matches_closed_form() {
        let w = Vector3::new(0.2, -0.4, 0.3);
        let samples = (0..=10)
            .map(|k| {
                let t = k as f64;
                TruthSample::new(t, Quaternion::from_axis_angle(&w, w.norm() * t), w, Vector3::zeros())
            })
            .collect();
        let t = Trajectory {
            name: "const".into(),
            rate: 1.0,
            samples,
        };
        let r = resample(&t, 10.0).unwrap();
        assert_eq!(r.samples.len(), 101);
        for s in &r.samples {
            let exact = Quaternion::from_axis_angle(&w, w.norm() * s.t);
            assert!(s.q.angle_to(&exact) < 1e-6);
            assert_abs_diff_eq!(s.w, w, epsilon = 1e-15);
        }
        assert_eq!(r.samples.last().unwrap().t, 10.0);
    }

    #[test]
    fn resample_hover_is_constant() {
        let t = gen_mockup(&MockupSpec::new(MockupCase::LongHover), 10.0).unwrap();
        let r = resample(&t, 33.0).unwrap();
        assert!(r.samples.iter().all(|s| s.q == Quaternion::identity() && s.w == Vector3::zeros()));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let t = Trajectory {
            name: "pair".into(),
            rate: 10.0,
            samples: vec![
                TruthSample::new(0.0, Quaternion::new(0.6, 0.0, 0.8, 0.0), Vector3::new(0.1, 0.2, 0.3), Vector3::zeros()),
                TruthSample::new(
                    0.1,
                    Quaternion::new(0.5, 0.5, 0.5, 0.5),
                    Vector3::new(1.0 / 3.0, -2e-17, 7.0),
                    Vector3::new(0.0, 1.5, -9.0),
                ),
            ],
        };
        let mut buf = Vec::new();
        write_trajectory(&t, &mut buf).unwrap();
        let back = parse_trajectory(buf.as_slice(), "pair").unwrap();
        assert_eq!(back.samples, t.samples);
    }

    #[test]
    fn parse_errors_locate_the_field() {
        let text = "t,qw,qx,qy,qz,wx,wy,wz,ax,ay,az\n# comment\n0,1,0,0,0,0,0,0,0,0,0\n0.1,1,0,0,0,0,x,0,0,0,0\n";
        match parse_trajectory(text.as_bytes(), "bad") {
            Err(TrajectoryError::Parse { line, column, .. }) => {
                assert_eq!(line, 4);
                assert_eq!(column, 7);
            }
            other => panic!("{other:?}"),
        }
        let header = "t,qw,qx,qy,qz,wx,wy,wz\n0,1,0,0,0,0,0,0\n";
        assert!(matches!(parse_trajectory(header.as_bytes(), "h"), Err(TrajectoryError::Parse { .. })));
        let short = "t,qw,qx,qy,qz,wx,wy,wz,ax,ay,az\n0,1,0,0\n";
        assert!(matches!(parse_trajectory(short.as_bytes(), "s"), Err(TrajectoryError::Parse { .. })));
    }

    #[test]
    fn validation_errors() {
        let norm = "t,qw,qx,qy,qz,wx,wy,wz,ax,ay,az\n0,0.9,0,0,0,0,0,0,0,0,0\n";
        assert!(matches!(parse_trajectory(norm.as_bytes(), "n"), Err(TrajectoryError::Validation { .. })));
        let time = "t,qw,qx,qy,qz,wx,wy,wz,ax,ay,az\n1,1,0,0,0,0,0,0,0,0,0\n0.5,1,0,0,0,0,0,0,0,0,0\n";
        assert!(matches!(parse_trajectory(time.as_bytes(), "t"), Err(TrajectoryError::Validation { .. })));
        assert!(matches!(
            load_trajectory(Path::new("/nonexistent/flight.csv")),
            Err(TrajectoryError::Io { .. })
        ));
    }
}

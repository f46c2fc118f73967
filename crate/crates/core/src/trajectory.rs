//! Desired-trajectory generators: position, velocity and acceleration
//! plus desired attitude with its body angular velocity and acceleration.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{exp_so3, log_so3, GeomError, Mat3, RotationMatrix, Vec3};

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("time {t} is outside the sampled range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("sampled table needs at least two rows, got {0}")]
    TooShort(usize),
    #[error("sampled times must be strictly increasing (row {row}: {prev} then {next})")]
    NotIncreasing { row: usize, prev: f64, next: f64 },
    #[error("non-finite trajectory parameter `{0}`")]
    NonFinite(&'static str),
    #[error("invalid parameter `{name}`: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("row {row}: {source}")]
    BadRotation { row: usize, source: GeomError },
    #[error("trajectory table {path}: {message}")]
    Table { path: String, message: String },
    #[error("negative time {0}")]
    NegativeTime(f64),
}

/// Desired motion at one instant. `omega`, `omega_dot` are body rates of `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryCommand {
    pub x: Vec3,
    pub v: Vec3,
    pub a: Vec3,
    pub r: RotationMatrix,
    pub omega: Vec3,
    pub omega_dot: Vec3,
}

/// Horizontal circle flown at constant speed with a sinusoidal roll about
/// the path tangent superimposed on a Frenet-like frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularSpec {
    /// m
    pub radius: f64,
    /// rad/s, sign selects the direction of travel
    pub rate: f64,
    /// m
    pub height: f64,
    /// rad
    pub roll_amplitude: f64,
    /// rad/s
    pub roll_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    /// Constant pose; `heading` is a rotation about e3, rad.
    Hover { position: Vec3, heading: f64 },
    Circular(CircularSpec),
    Sampled(SampledTrajectory),
}

impl TrajectorySpec {
    pub fn hover(position: Vec3, heading: f64) -> Result<Self, TrajectoryError> {
        if !position.iter().all(|v| v.is_finite()) {
            return Err(TrajectoryError::NonFinite("position"));
        }
        if !heading.is_finite() {
            return Err(TrajectoryError::NonFinite("heading"));
        }
        Ok(Self::Hover { position, heading })
    }

    pub fn circular(spec: CircularSpec) -> Result<Self, TrajectoryError> {
        let CircularSpec { radius, rate, height, roll_amplitude, roll_rate } = spec;
        for (name, v) in [
            ("radius", radius),
            ("rate", rate),
            ("height", height),
            ("roll_amplitude", roll_amplitude),
            ("roll_rate", roll_rate),
        ] {
            if !v.is_finite() {
                return Err(TrajectoryError::NonFinite(name));
            }
        }
        if !(radius > 0.0) {
            return Err(TrajectoryError::Invalid { name: "radius", reason: "must be positive".into() });
        }
        // The path tangent is undefined at zero speed.
        if rate == 0.0 {
            return Err(TrajectoryError::Invalid { name: "rate", reason: "must be non-zero".into() });
        }
        Ok(Self::Circular(spec))
    }

    pub fn sample(&self, t: f64) -> Result<TrajectoryCommand, TrajectoryError> {
        if t < 0.0 {
            return Err(TrajectoryError::NegativeTime(t));
        }
        self.sample_any(t)
    }

    /// Sampling without the `t ≥ 0` precondition; analytic specs are
    /// defined for all times and the finite-difference checks use it.
    fn sample_any(&self, t: f64) -> Result<TrajectoryCommand, TrajectoryError> {
        match self {
            Self::Hover { position, heading } => Ok(TrajectoryCommand {
                x: *position,
                v: Vec3::zeros(),
                a: Vec3::zeros(),
                r: exp_so3(&(*heading * Vec3::z())),
                omega: Vec3::zeros(),
                omega_dot: Vec3::zeros(),
            }),
            Self::Circular(c) => Ok(sample_circular(c, t)),
            Self::Sampled(table) => table.sample(t),
        }
    }
}

fn rot_z(theta: f64) -> Mat3 {
    let (s, c) = theta.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn sample_circular(c: &CircularSpec, t: f64) -> TrajectoryCommand {
    let phi = c.rate * t;
    let (s, co) = phi.sin_cos();
    let x = Vec3::new(c.radius * co, c.radius * s, c.height);
    let v = c.radius * c.rate * Vec3::new(-s, co, 0.0);
    let a = -c.radius * c.rate * c.rate * Vec3::new(co, s, 0.0);

    let tangent = v / v.norm();
    let binormal = Vec3::new(0.0, 0.0, -1.0);
    let normal = binormal.cross(&tangent);
    let frame = Mat3::from_columns(&[-normal, -binormal, tangent]);

    let (rs, rc) = (c.roll_rate * t).sin_cos();
    let theta = c.roll_amplitude * rs;
    let theta_dot = c.roll_amplitude * c.roll_rate * rc;
    let theta_ddot = -c.roll_amplitude * c.roll_rate * c.roll_rate * rs;
    let r = RotationMatrix::from_matrix_unchecked(frame * rot_z(theta));

    // The frame is rot_z(φ)·F0 with F0ᵀe3 = e2, so its body rate is φ̇·e2;
    // composing with rot_z(θ) on the right gives
    // ω = φ̇ rot_z(θ)ᵀ e2 + θ̇ e3.
    let (ts, tc) = theta.sin_cos();
    let omega = Vec3::new(c.rate * ts, c.rate * tc, theta_dot);
    let omega_dot = Vec3::new(c.rate * theta_dot * tc, -c.rate * theta_dot * ts, theta_ddot);

    TrajectoryCommand { x, v, a, r, omega, omega_dot }
}

/// Tabulated trajectory interpolated with cubic Hermite segments.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    times: Vec<f64>,
    rows: Vec<TrajectoryCommand>,
}

/// Column names of a sampled trajectory table.
pub const TABLE_HEADER: [&str; 25] = [
    "t", "xd1", "xd2", "xd3", "vd1", "vd2", "vd3", "ad1", "ad2", "ad3", "Rd11", "Rd12", "Rd13", "Rd21",
    "Rd22", "Rd23", "Rd31", "Rd32", "Rd33", "wd1", "wd2", "wd3", "wdd1", "wdd2", "wdd3",
];

impl SampledTrajectory {
    pub fn new(times: Vec<f64>, rows: Vec<TrajectoryCommand>) -> Result<Self, TrajectoryError> {
        if times.len() != rows.len() || times.len() < 2 {
            return Err(TrajectoryError::TooShort(times.len().min(rows.len())));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(TrajectoryError::NotIncreasing { row: i + 1, prev: w[0], next: w[1] });
            }
        }
        if !times.iter().all(|t| t.is_finite()) {
            return Err(TrajectoryError::NonFinite("t"));
        }
        Ok(Self { times, rows })
    }

    /// Parses a table with [`TABLE_HEADER`] columns (rotation row-major).
    pub fn from_csv_reader<R: std::io::Read>(reader: R, origin: &str) -> Result<Self, TrajectoryError> {
        let table_err = |message: String| TrajectoryError::Table { path: origin.to_string(), message };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| table_err(e.to_string()))?.clone();
        if header.iter().ne(TABLE_HEADER.iter().copied()) {
            return Err(table_err(format!("expected header {}", TABLE_HEADER.join(","))));
        }
        let mut times = Vec::new();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| table_err(e.to_string()))?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| table_err(format!("row {}: {e}", i + 1)))?;
            if vals.len() != TABLE_HEADER.len() {
                return Err(table_err(format!("row {}: expected {} fields", i + 1, TABLE_HEADER.len())));
            }
            let v3 = |k: usize| Vec3::new(vals[k], vals[k + 1], vals[k + 2]);
            let mut rot = [0.0; 9];
            rot.copy_from_slice(&vals[10..19]);
            let r = RotationMatrix::from_row_slice(&rot)
                .map_err(|source| TrajectoryError::BadRotation { row: i + 1, source })?;
            times.push(vals[0]);
            rows.push(TrajectoryCommand {
                x: v3(1),
                v: v3(4),
                a: v3(7),
                r,
                omega: v3(19),
                omega_dot: v3(22),
            });
        }
        Self::new(times, rows)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, TrajectoryError> {
        let file = std::fs::File::open(path).map_err(|e| TrajectoryError::Table {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv_reader(file, &path.display().to_string())
    }

    /// Tabulates `spec` at the given times.
    pub fn tabulate(spec: &TrajectorySpec, times: &[f64]) -> Result<Self, TrajectoryError> {
        let rows = times.iter().map(|&t| spec.sample(t)).collect::<Result<Vec<_>, _>>()?;
        Self::new(times.to_vec(), rows)
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(TABLE_HEADER)?;
        for (t, c) in self.times.iter().zip(&self.rows) {
            let mut rec: Vec<String> = vec![format!("{t:.16e}")];
            for v in [c.x, c.v, c.a] {
                rec.extend(v.iter().map(|x| format!("{x:.16e}")));
            }
            rec.extend(c.r.to_row_array().iter().map(|x| format!("{x:.16e}")));
            for v in [c.omega, c.omega_dot] {
                rec.extend(v.iter().map(|x| format!("{x:.16e}")));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn sample(&self, t: f64) -> Result<TrajectoryCommand, TrajectoryError> {
        let (start, end) = (self.start(), self.end());
        if !(t >= start && t <= end) {
            return Err(TrajectoryError::OutOfRange { t, start, end });
        }
        let k = match self.times.partition_point(|&ti| ti <= t) {
            0 => 0,
            n if n >= self.times.len() => self.times.len() - 2,
            n => n - 1,
        };
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (p, q) = (&self.rows[k], &self.rows[k + 1]);

        let x = hermite(s, h, &p.x, &p.v, &q.x, &q.v);
        let v = hermite(s, h, &p.v, &p.a, &q.v, &q.a);
        let a = p.a + s * (q.a - p.a);
        let omega = hermite(s, h, &p.omega, &p.omega_dot, &q.omega, &q.omega_dot);
        let omega_dot = p.omega_dot + s * (q.omega_dot - p.omega_dot);

        // Cubic in the tangent space at the left knot: φ(0) = 0,
        // φ(1) = log(R_kᵀ R_{k+1}), endpoint slopes from the body rates.
        let end = log_so3(&(p.r.transpose() * q.r));
        let phi = hermite(s, h, &Vec3::zeros(), &p.omega, &end, &q.omega);
        let r = p.r * exp_so3(&phi);

        Ok(TrajectoryCommand { x, v, a, r, omega, omega_dot })
    }
}

fn hermite(s: f64, h: f64, p0: &Vec3, m0: &Vec3, p1: &Vec3, m1: &Vec3) -> Vec3 {
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * p0 + (h10 * h) * m0 + h01 * p1 + (h11 * h) * m1
}

/// Body rate and acceleration of the desired attitude by central finite
/// differences with step `h` (1e-6 by default in callers).
pub fn finite_difference_rates(spec: &TrajectorySpec, t: f64, h: f64) -> Result<(Vec3, Vec3), TrajectoryError> {
    let rate = |tc: f64| -> Result<Vec3, TrajectoryError> {
        let a = spec.sample_any(tc - h)?;
        let b = spec.sample_any(tc + h)?;
        Ok(log_so3(&(a.r.transpose() * b.r)) / (2.0 * h))
    };
    let w = rate(t)?;
    let w_dot = (rate(t + h)? - rate(t - h)?) / (2.0 * h);
    Ok((w, w_dot))
}

/// Largest kinematic-consistency residuals over a time window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConsistencyReport {
    /// max ‖Δx/Δt − v‖
    pub position: f64,
    /// max ‖Δv/Δt − a‖
    pub velocity: f64,
    /// max ‖log(R(t−h)ᵀR(t+h))/(2h) − ω‖
    pub attitude: f64,
    /// max ‖Δω/Δt − ω̇‖
    pub angular_velocity: f64,
    pub samples: usize,
}

/// Central-difference check of `v`, `a`, `ω`, `ω̇` against the sampled
/// positions and attitudes on `[t0, t1]` with step `dt`.
pub fn consistency_check(
    spec: &TrajectorySpec,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Result<ConsistencyReport, TrajectoryError> {
    if !(t1 > t0) || !(dt > 0.0) {
        return Err(TrajectoryError::Invalid { name: "window", reason: format!("[{t0}, {t1}] step {dt}") });
    }
    let mut rep = ConsistencyReport::default();
    let n = ((t1 - t0) / dt).floor() as usize;
    let mut prev = spec.sample_any(t0)?;
    let mut cur = spec.sample_any(t0 + dt)?;
    for k in 2..=n {
        let next = spec.sample_any(t0 + k as f64 * dt)?;
        let inv = 1.0 / (2.0 * dt);
        rep.position = rep.position.max(((next.x - prev.x) * inv - cur.v).norm());
        rep.velocity = rep.velocity.max(((next.v - prev.v) * inv - cur.a).norm());
        let w_fd = log_so3(&(prev.r.transpose() * next.r)) * inv;
        rep.attitude = rep.attitude.max((w_fd - cur.omega).norm());
        rep.angular_velocity = rep.angular_velocity.max(((next.omega - prev.omega) * inv - cur.omega_dot).norm());
        rep.samples += 1;
        prev = cur;
        cur = next;
    }
    Ok(rep)
}

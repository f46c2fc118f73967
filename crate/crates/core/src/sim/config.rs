//! Scenario files.
//!
//! TOML with seven sections. Angles are given in degrees, everything else
//! in SI units. Matrix-valued gains accept a scalar (`k·I`), a diagonal
//! `[a, b, c]` or a full row-major `[[..], [..], [..]]`.
//!
//! ```toml
//! [body]
//! mass = 1.9                         # kg
//! inertia = [0.0074, 0.0074, 0.05]   # kg·m²
//! gravity = 9.81                     # m/s², optional
//!
//! [gains]
//! k_x = 15.0        # N/m
//! k_v = 10.0        # N·s/m
//! k_r = 10.0        # J, diagonal only
//! k_omega = 1.0     # N·m·s
//! psi_max = 60.0    # J, scaling ceiling
//! psi = 12.0        # J, attitude sublevel
//!
//! [limits]
//! theta_max_deg = 60.0   # cone half-angle, 0 locks thrust to the body axis
//! f_max = 60.0           # N
//!
//! [planner]
//! k_dc = 20.0       # J, diagonal only
//! epsilon = 0.01
//! gamma = 10.0      # scalar or [[a, b], [b, d]]
//!
//! [trajectory]
//! kind = "circular"         # or "hover", "sampled"
//! radius = 1.0              # m
//! rate = 1.0                # rad/s
//! height = 1.0              # m
//! roll_amplitude_deg = 60.0
//! roll_rate = 1.0           # rad/s
//! # hover: position = [x, y, z] (m), heading_deg
//! # sampled: path = "table.csv" (relative to the config file)
//!
//! [initial]
//! position = [1.1, 0.1, -0.1]   # m
//! velocity = [0.0, 0.0, 0.0]    # m/s, optional
//! omega = [0.0, 0.0, 0.0]       # rad/s body, optional
//! attitude_axis = [1.0, 0.0, 0.0]
//! attitude_angle_deg = -100.0
//! attitude_frame = "reference"  # body axis of the first reference, or "inertial"
//!
//! [run]
//! t_final = 20.0          # s
//! dt = 0.001              # s, optional
//! settle_threshold = 0.02 # m, optional
//! telemetry = "telemetry.csv"
//! summary = "summary.json"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml::{Table, Value};

use crate::controller::{ActuationLimits, ControlGains};
use crate::dynamics::{RigidBodyParams, DEFAULT_GRAVITY};
use crate::eig::Mat2;
use crate::geom::{Mat3, NavGains, Vec3};
use crate::planner::PlannerParams;
use crate::trajectory::{CircularSpec, SampledTrajectory, TrajectorySpec};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SETTLE_THRESHOLD: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Diagonal([f64; 3]),
    Full([[f64; 3]; 3]),
}

impl MatrixSpec {
    pub fn to_matrix(&self) -> Mat3 {
        match self {
            Self::Scalar(k) => Mat3::identity() * *k,
            Self::Diagonal(d) => Mat3::from_diagonal(&Vec3::from(*d)),
            Self::Full(rows) => Mat3::from_fn(|i, j| rows[i][j]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiagonalSpec {
    Scalar(f64),
    Diagonal([f64; 3]),
}

impl DiagonalSpec {
    fn to_gains(self, key: &str) -> Result<NavGains, ConfigError> {
        let d = match self {
            Self::Scalar(k) => [k; 3],
            Self::Diagonal(d) => d,
        };
        NavGains::new(d[0], d[1], d[2]).map_err(|e| ConfigError::new(key, e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matrix2Spec {
    Scalar(f64),
    Full([[f64; 2]; 2]),
}

impl Matrix2Spec {
    fn to_matrix(self) -> Mat2 {
        match self {
            Self::Scalar(k) => Mat2::identity() * k,
            Self::Full(r) => Mat2::new(r[0][0], r[0][1], r[1][0], r[1][1]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySection {
    pub mass: f64,
    pub inertia: MatrixSpec,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsSection {
    pub k_x: MatrixSpec,
    pub k_v: MatrixSpec,
    pub k_r: DiagonalSpec,
    pub k_omega: MatrixSpec,
    pub psi_max: f64,
    pub psi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitsSection {
    pub theta_max_deg: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSection {
    pub k_dc: DiagonalSpec,
    pub epsilon: f64,
    pub gamma: Matrix2Spec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TrajectorySection {
    Hover {
        position: [f64; 3],
        #[serde(default)]
        heading_deg: f64,
    },
    Circular {
        radius: f64,
        rate: f64,
        height: f64,
        roll_amplitude_deg: f64,
        roll_rate: f64,
    },
    Sampled {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttitudeFrame {
    /// `R(0) = R_dc(0) exp(angle · axis)`.
    #[default]
    Reference,
    /// `R(0) = exp(angle · axis)`.
    Inertial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub position: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    #[serde(default)]
    pub omega: [f64; 3],
    #[serde(default = "default_axis")]
    pub attitude_axis: [f64; 3],
    #[serde(default)]
    pub attitude_angle_deg: f64,
    #[serde(default)]
    pub attitude_frame: AttitudeFrame,
}

fn default_axis() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_final: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_settle")]
    pub settle_threshold: f64,
    #[serde(default = "default_telemetry")]
    pub telemetry: PathBuf,
    #[serde(default = "default_summary")]
    pub summary: PathBuf,
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_settle() -> f64 {
    DEFAULT_SETTLE_THRESHOLD
}

fn default_telemetry() -> PathBuf {
    PathBuf::from("telemetry.csv")
}

fn default_summary() -> PathBuf {
    PathBuf::from("summary.json")
}

/// The file as written, before unit conversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub body: BodySection,
    pub gains: GainsSection,
    pub limits: LimitsSection,
    pub planner: PlannerSection,
    pub trajectory: TrajectorySection,
    pub initial: InitialSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialCondition {
    pub position: Vec3,
    pub velocity: Vec3,
    pub omega: Vec3,
    /// Rotation vector, rad.
    pub attitude: Vec3,
    pub frame: AttitudeFrame,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub file: ConfigFile,
    pub params: RigidBodyParams,
    pub gains: ControlGains,
    pub limits: ActuationLimits,
    pub planner: PlannerParams,
    pub trajectory: TrajectorySpec,
    pub initial: InitialCondition,
    pub dt: f64,
    pub t_final: f64,
    pub settle_threshold: f64,
}

const SECTIONS: [(&str, &[&str], &[&str]); 6] = [
    ("body", &["mass", "inertia"], &["gravity"]),
    ("gains", &["k_x", "k_v", "k_r", "k_omega", "psi_max", "psi"], &[]),
    ("limits", &["theta_max_deg", "f_max"], &[]),
    ("planner", &["k_dc", "epsilon", "gamma"], &[]),
    (
        "initial",
        &["position"],
        &["velocity", "omega", "attitude_axis", "attitude_angle_deg", "attitude_frame"],
    ),
    ("run", &["t_final"], &["dt", "settle_threshold", "telemetry", "summary"]),
];

const TRAJECTORY_KINDS: [(&str, &[&str], &[&str]); 3] = [
    ("hover", &["position"], &["heading_deg"]),
    ("circular", &["radius", "rate", "height", "roll_amplitude_deg", "roll_rate"], &[]),
    ("sampled", &["path"], &[]),
];

fn check_keys(section: &str, table: &Table, required: &[&str], optional: &[&str]) -> Result<(), ConfigError> {
    for key in required {
        if !table.contains_key(*key) {
            return Err(ConfigError::new(format!("{section}.{key}"), "missing required key"));
        }
    }
    for key in table.keys() {
        if (key != "kind" || section != "trajectory")
            && !required.contains(&key.as_str())
            && !optional.contains(&key.as_str())
        {
            return Err(ConfigError::new(format!("{section}.{key}"), "unknown key"));
        }
    }
    Ok(())
}

/// Walks the raw table so that unknown and missing keys are reported with
/// their full path before any typed decoding.
fn check_schema(root: &Table) -> Result<(), ConfigError> {
    for key in root.keys() {
        if key != "trajectory" && !SECTIONS.iter().any(|(s, _, _)| s == key) {
            return Err(ConfigError::new(key.clone(), "unknown section"));
        }
    }
    let section = |name: &str| -> Result<&Table, ConfigError> {
        match root.get(name) {
            Some(Value::Table(t)) => Ok(t),
            Some(_) => Err(ConfigError::new(name, "expected a table")),
            None => Err(ConfigError::new(name, "missing required section")),
        }
    };
    for (name, required, optional) in SECTIONS {
        check_keys(name, section(name)?, required, optional)?;
    }
    let traj = section("trajectory")?;
    let kind = match traj.get("kind") {
        Some(Value::String(k)) => k.as_str(),
        Some(_) => return Err(ConfigError::new("trajectory.kind", "expected a string")),
        None => return Err(ConfigError::new("trajectory.kind", "missing required key")),
    };
    let Some((_, required, optional)) = TRAJECTORY_KINDS.iter().find(|(k, _, _)| *k == kind) else {
        return Err(ConfigError::new("trajectory.kind", format!("unknown kind `{kind}` (hover, circular, sampled)")));
    };
    check_keys("trajectory", traj, required, optional)
}

/// Decodes one value and reports type errors at its key path.
fn decode<T: serde::de::DeserializeOwned>(root: &Table, section: &str) -> Result<T, ConfigError> {
    let value = root.get(section).cloned().unwrap_or(Value::Table(Table::new()));
    if let Value::Table(t) = &value {
        for (k, v) in t {
            check_value_type(&format!("{section}.{k}"), v)?;
        }
    }
    value.try_into().map_err(|e: toml::de::Error| ConfigError::new(section, e.message().trim().to_string()))
}

fn check_value_type(key: &str, v: &Value) -> Result<(), ConfigError> {
    if let Value::Float(f) = v {
        if !f.is_finite() {
            return Err(ConfigError::new(key, "must be finite"));
        }
    }
    if let Value::Array(items) = v {
        for (i, item) in items.iter().enumerate() {
            check_value_type(&format!("{key}[{i}]"), item)?;
        }
    }
    Ok(())
}

impl ScenarioConfig {
    /// Parses config text; relative table paths resolve against `base`.
    pub fn parse(text: &str, base: Option<&Path>) -> Result<Self, ConfigError> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("<document>", e.to_string().trim().to_string()))?;
        check_schema(&root)?;
        let file = ConfigFile {
            body: decode(&root, "body")?,
            gains: decode(&root, "gains")?,
            limits: decode(&root, "limits")?,
            planner: decode(&root, "planner")?,
            trajectory: decode(&root, "trajectory")?,
            initial: decode(&root, "initial")?,
            run: decode(&root, "run")?,
        };
        Self::from_file(file, base)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent())
    }

    pub fn from_file(file: ConfigFile, base: Option<&Path>) -> Result<Self, ConfigError> {
        let b = &file.body;
        if !(b.mass > 0.0) {
            return Err(ConfigError::new("body.mass", format!("must be positive, got {}", b.mass)));
        }
        if !(b.gravity >= 0.0) {
            return Err(ConfigError::new("body.gravity", format!("must be non-negative, got {}", b.gravity)));
        }
        let params = RigidBodyParams::new(b.mass, b.inertia.to_matrix(), b.gravity)
            .map_err(|e| ConfigError::new("body.inertia", e.to_string()))?;

        let g = &file.gains;
        let k_r = g.k_r.to_gains("gains.k_r")?;
        let gains = ControlGains::new(
            g.k_x.to_matrix(),
            g.k_v.to_matrix(),
            k_r,
            g.k_omega.to_matrix(),
            g.psi_max,
            g.psi,
        )
        .map_err(|e| {
            let key = match &e {
                crate::controller::ControlError::NotPositiveDefinite(name) => format!("gains.{name}"),
                crate::controller::ControlError::InvalidGain { name, .. } => format!("gains.{name}"),
                _ => "gains.psi".to_string(),
            };
            ConfigError::new(key, e.to_string())
        })?;

        let theta_max = file.limits.theta_max_deg.to_radians();
        let limits = ActuationLimits::new(theta_max, file.limits.f_max).map_err(|e| {
            let key = match &e {
                crate::controller::ControlError::InvalidLimit { name: "f_max", .. } => "limits.f_max",
                _ => "limits.theta_max_deg",
            };
            ConfigError::new(key, e.to_string())
        })?;

        let p = &file.planner;
        let planner = PlannerParams::new(p.k_dc.to_gains("planner.k_dc")?, p.epsilon, p.gamma.to_matrix(), theta_max)
            .map_err(|e| {
                let key = match &e {
                    crate::planner::PlannerError::BadEpsilon(_) => "planner.epsilon",
                    crate::planner::PlannerError::BadWeighting => "planner.gamma",
                    _ => "limits.theta_max_deg",
                };
                ConfigError::new(key, e.to_string())
            })?;

        let trajectory = match &file.trajectory {
            TrajectorySection::Hover { position, heading_deg } => {
                TrajectorySpec::hover(Vec3::from(*position), heading_deg.to_radians())
            }
            TrajectorySection::Circular { radius, rate, height, roll_amplitude_deg, roll_rate } => {
                TrajectorySpec::circular(CircularSpec {
                    radius: *radius,
                    rate: *rate,
                    height: *height,
                    roll_amplitude: roll_amplitude_deg.to_radians(),
                    roll_rate: *roll_rate,
                })
            }
            TrajectorySection::Sampled { path } => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                SampledTrajectory::from_csv_path(&full).map(TrajectorySpec::Sampled)
            }
        }
        .map_err(|e| ConfigError::new("trajectory", e.to_string()))?;

        let i = &file.initial;
        let axis = Vec3::from(i.attitude_axis);
        let attitude = if i.attitude_angle_deg == 0.0 {
            Vec3::zeros()
        } else {
            let n = axis.norm();
            if !(n > 0.0) {
                return Err(ConfigError::new("initial.attitude_axis", "must be non-zero"));
            }
            axis / n * i.attitude_angle_deg.to_radians()
        };
        let initial = InitialCondition {
            position: Vec3::from(i.position),
            velocity: Vec3::from(i.velocity),
            omega: Vec3::from(i.omega),
            attitude,
            frame: i.attitude_frame,
        };

        let r = &file.run;
        if !(r.dt > 0.0) {
            return Err(ConfigError::new("run.dt", format!("must be positive, got {}", r.dt)));
        }
        if !(r.t_final > r.dt) {
            return Err(ConfigError::new("run.t_final", format!("must exceed dt = {}, got {}", r.dt, r.t_final)));
        }
        if !(r.settle_threshold > 0.0) {
            return Err(ConfigError::new("run.settle_threshold", "must be positive"));
        }
        let (dt, t_final, settle_threshold) = (r.dt, r.t_final, r.settle_threshold);

        Ok(Self { file, params, gains, limits, planner, trajectory, initial, dt, t_final, settle_threshold })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.file).expect("config sections serialise to TOML")
    }

    /// Number of integration steps; the last record sits at `steps · dt`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Replaces the value at a dotted key (`gains.k_x`) in config text.
/// `literal` is any TOML value (`20.0`, `[1, 2, 3]`, `"hover"`).
pub fn override_key(text: &str, key: &str, literal: &str) -> Result<String, ConfigError> {
    let mut root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::new("<document>", e.to_string().trim().to_string()))?;
    let value: Value = format!("v = {literal}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .ok_or_else(|| ConfigError::new(key, format!("`{literal}` is not a TOML value")))?;
    let parts: Vec<&str> = key.split('.').collect();
    let (last, path) = parts.split_last().filter(|(l, _)| !l.is_empty()).ok_or_else(|| ConfigError::new(key, "empty key"))?;
    let mut table = &mut root;
    for part in path {
        table = match table.get_mut(*part) {
            Some(Value::Table(t)) => t,
            _ => return Err(ConfigError::new(key, format!("no section `{part}`"))),
        };
    }
    table.insert((*last).to_string(), value);
    Ok(toml::to_string(&root).expect("table serialises"))
}

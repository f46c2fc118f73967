//! Scenario configs, the closed loop, telemetry, Lyapunov monitoring,
//! parameter sweeps and the command-line front end.

use std::path::PathBuf;

use thiserror::Error;

pub mod cli;
pub mod config;
pub mod monitor;
pub mod runner;
pub mod sweep;
pub mod telemetry;

pub use config::{ConfigError, ScenarioConfig};
pub use monitor::{lyapunov_monitor, MonitorResult, LYAPUNOV_TOL};
pub use runner::{run_scenario, RunOutput, RunSummary};
pub use telemetry::{write_csv, TelemetryRecord};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config {0}")]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("t = {t:.6} s, {component}: {message}")]
    Step { t: f64, component: &'static str, message: String },
    #[error("{0}")]
    Usage(String),
}

impl SimError {
    /// 2 for a violated constraint or invariant during the run, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Step { .. } => 2,
            _ => 1,
        }
    }
}

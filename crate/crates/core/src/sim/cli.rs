//! `geoctl simulate | certify | sweep`.
//!
//! Exit codes: 0 success, 2 a constraint or invariant was violated,
//! 1 usage or I/O error.

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::certify::{check_initial_condition, CertificationReport, InitialConditionVerdict};
use crate::controller::FeasibilityReport;
use crate::par::Execution;
use crate::planner::{planner_step, PlannerState};

use super::config::ScenarioConfig;
use super::runner::{analyse, initial_state, run_scenario_with, write_outputs};
use super::sweep::{run_sweep, split_values};
use super::SimError;

#[derive(Debug, Parser)]
#[command(name = "geoctl", version, about = "Geometric tracking control simulator and gain certifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write telemetry CSV plus a JSON summary.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the certification report for the scenario's gains as JSON.
    Certify {
        #[arg(long)]
        config: PathBuf,
        /// Evaluate the p1/p2 grid on one thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Run the scenario once per value of a dotted config key.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Dotted key, e.g. `gains.k_x`.
        #[arg(long)]
        param: String,
        /// Comma-separated TOML values, e.g. `10,15,20` or `[1,0,0],[0,1,0]`.
        #[arg(long)]
        values: String,
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
        /// Run the scenarios one after another.
        #[arg(long)]
        sequential: bool,
    },
}

#[derive(Serialize)]
struct CertifyOutput {
    feasibility: FeasibilityReport,
    certification: Option<CertificationReport>,
    initial_region: Option<InitialConditionVerdict>,
}

fn exec(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn io_err(e: std::io::Error) -> SimError {
    SimError::Io { path: PathBuf::from("<stdout>"), message: e.to_string() }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32, SimError> {
    match cmd {
        Command::Simulate { config, out: dir } => {
            let cfg = ScenarioConfig::load(&config)?;
            let run = run_scenario_with(&cfg, Execution::Parallel)?;
            write_outputs(&cfg, &run, &dir)?;
            let s = &run.summary;
            writeln!(
                out,
                "steps {} | final |e_x| {:.3e} m | max |f_c| {:.3} N | min cos {:.6} | V_R increases {} | settled {}",
                s.steps,
                s.final_ex_norm,
                s.max_fc_norm,
                s.min_cos_theta,
                s.lyapunov_violations,
                s.settled_time.map_or("never".to_string(), |t| format!("{t:.3} s")),
            )
            .map_err(io_err)?;
            Ok(if s.constraints_hold() { 0 } else { 2 })
        }
        Command::Certify { config, sequential } => {
            let cfg = ScenarioConfig::load(&config)?;
            let (feasibility, certification) = analyse(&cfg, exec(sequential))?;
            let initial_region = match &certification {
                Some(rep) => {
                    let s0 = initial_state(&cfg)?;
                    let cmd = cfg.trajectory.sample(0.0).map_err(|e| SimError::Step {
                        t: 0.0,
                        component: "trajectory",
                        message: e.to_string(),
                    })?;
                    let f_d = crate::controller::desired_force(&cfg.gains, &cfg.params, &(s0.x - cmd.x), &(s0.v - cmd.v), &cmd.a);
                    let (_, p) = planner_step(&PlannerState::new(), &f_d, &cmd, &cfg.planner, cfg.dt)
                        .map_err(|e| SimError::Step { t: 0.0, component: "planner", message: e.to_string() })?;
                    Some(check_initial_condition(rep, &s0, &p.r_dc, &p.omega_dc, &cmd, &cfg.gains, &cfg.params))
                }
                None => None,
            };
            let force_ok = feasibility.force_feasible;
            let report = CertifyOutput { feasibility, certification, initial_region };
            writeln!(out, "{}", serde_json::to_string_pretty(&report).expect("report serialises")).map_err(io_err)?;
            Ok(if force_ok { 0 } else { 2 })
        }
        Command::Sweep { config, param, values, out: dir, sequential } => {
            let text = std::fs::read_to_string(&config).map_err(|e| SimError::Io { path: config.clone(), message: e.to_string() })?;
            let values = split_values(&values);
            let entries = run_sweep(&text, config.parent(), &param, &values, &dir, exec(sequential))?;
            for e in &entries {
                match (&e.telemetry, &e.error) {
                    (Some(p), _) => writeln!(out, "{} = {}: {}", param, e.value, p.display()),
                    (None, Some(msg)) => writeln!(out, "{} = {}: error: {}", param, e.value, msg),
                    _ => Ok(()),
                }
                .map_err(io_err)?;
            }
            Ok(entries.iter().map(|e| e.exit_code).max().unwrap_or(0))
        }
    }
}

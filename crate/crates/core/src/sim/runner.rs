//! The closed loop: trajectory → planner → controller → dynamics at one rate.

use std::path::Path;

use serde::Serialize;

use crate::certify::{
    certify, check_initial_condition, lyapunov_values, CertificationInput, CertificationReport, InitialConditionVerdict,
};
use crate::controller::{control_force, control_torque, desired_force, feasibility_check, scaling, FeasibilityReport};
use crate::dynamics::{integrate_step, RigidBodyParams, RigidBodyState, Wrench};
use crate::geom::{attitude_error_vector, exp_so3, nav_error, RotationMatrix, Vec3};
use crate::par::Execution;
use crate::planner::{base_rotation, planner_step, PlannerState};

use super::config::{AttitudeFrame, ScenarioConfig};
use super::monitor::{lyapunov_monitor, MonitorResult, LYAPUNOV_TOL};
use super::telemetry::{write_csv, TelemetryRecord};
use super::SimError;

/// Slack on the cone check in the summary.
pub const CONE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct RunSummary {
    pub steps: usize,
    pub dt: f64,
    pub t_final: f64,
    pub final_ex_norm: f64,
    pub max_fc_norm: f64,
    pub min_cos_theta: f64,
    pub max_psi: f64,
    pub max_psi_d: f64,
    pub max_bp_norm: f64,
    pub delta: f64,
    pub settle_threshold: f64,
    /// First time after which `‖e_x‖` stays below the threshold.
    pub settled_time: Option<f64>,
    pub lyapunov_violations: usize,
    pub lyapunov: MonitorResult,
    pub initial_region: Option<InitialConditionVerdict>,
    pub certified: bool,
    pub f_M_d: f64,
    pub force_feasible: bool,
    pub attitude_feasible: bool,
    /// Steps with `cos θ < cos θ_M − 1e-6`.
    pub cone_violations: usize,
    /// Steps with `‖f_c‖ > f_M`.
    pub force_violations: usize,
    pub projection_steps: usize,
    pub force_hold_steps: usize,
    pub fallback_axis_steps: usize,
    pub cone_clamp_steps: usize,
}

impl RunSummary {
    pub fn constraints_hold(&self) -> bool {
        self.cone_violations == 0 && self.force_violations == 0
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TelemetryRecord>,
    pub summary: RunSummary,
    pub certification: Option<CertificationReport>,
    pub feasibility: FeasibilityReport,
}

fn step_err(t: f64, component: &'static str) -> impl Fn(String) -> SimError {
    move |message| SimError::Step { t, component, message }
}

/// Initial state with the attitude offset applied in the requested frame.
pub fn initial_state(cfg: &ScenarioConfig) -> Result<RigidBodyState, SimError> {
    let ic = &cfg.initial;
    let offset = exp_so3(&ic.attitude);
    let r = match ic.frame {
        AttitudeFrame::Inertial => offset,
        AttitudeFrame::Reference => {
            let cmd = cfg.trajectory.sample(0.0).map_err(|e| step_err(0.0, "trajectory")(e.to_string()))?;
            let f = desired_force(&cfg.gains, &cfg.params, &(ic.position - cmd.x), &(ic.velocity - cmd.v), &cmd.a);
            let base = base_rotation(&f, &cmd.r.column(0), &cmd.r.column(1))
                .map_err(|e| step_err(0.0, "planner")(e.to_string()))?;
            base.rotation * offset
        }
    };
    Ok(RigidBodyState { x: ic.position, r, v: ic.velocity, omega: ic.omega })
}

/// Feasibility over the run horizon and, when the force budget allows,
/// the certification report for the configured gains.
pub fn analyse(cfg: &ScenarioConfig, exec: Execution) -> Result<(FeasibilityReport, Option<CertificationReport>), SimError> {
    let feas = feasibility_check(&cfg.trajectory, &cfg.limits, &cfg.params, cfg.t_final, cfg.dt)
        .map_err(|e| step_err(0.0, "feasibility")(e.to_string()))?;
    let report = CertificationInput::with_full_budget(cfg.params, cfg.gains, cfg.limits, feas.f_m_d)
        .ok()
        .map(|input| certify(&input, exec))
        .transpose()
        .map_err(|e| step_err(0.0, "certify")(e.to_string()))?;
    Ok((feas, report))
}

pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    run_scenario_with(cfg, Execution::Sequential)
}

/// `exec` only affects the certification grid; the loop itself is sequential.
pub fn run_scenario_with(cfg: &ScenarioConfig, exec: Execution) -> Result<RunOutput, SimError> {
    let (feasibility, certification) = analyse(cfg, exec)?;
    let (p1, p2) = certification.as_ref().map_or((0.0, 0.0), |r| (r.p1, r.p2));
    let params = &cfg.params;
    let gains = &cfg.gains;
    let dt = cfg.dt;
    let steps = cfg.steps();
    let cos_max = cfg.limits.theta_max.cos();

    let mut state = initial_state(cfg)?;
    let mut planner = PlannerState::new();
    let mut records = Vec::with_capacity(steps + 1);
    let mut initial_region = None;
    let (mut hold, mut fallback, mut clamp) = (0, 0, 0);

    for k in 0..=steps {
        let t = k as f64 * dt;
        let cmd = cfg.trajectory.sample(t).map_err(|e| step_err(t, "trajectory")(e.to_string()))?;
        let e_x = state.x - cmd.x;
        let e_v = state.v - cmd.v;
        let f_d = desired_force(gains, params, &e_x, &e_v, &cmd.a);
        let (next_planner, out) =
            planner_step(&planner, &f_d, &cmd, &cfg.planner, dt).map_err(|e| step_err(t, "planner")(e.to_string()))?;
        hold += out.force_hold as usize;
        fallback += out.fallback_axis as usize;
        clamp += out.clamped as usize;

        let r_e = state.r * out.r_dc.transpose();
        let psi = nav_error(&gains.k_r, &r_e);
        let c = scaling(psi, gains.psi_max).map_err(|e| step_err(t, "controller")(e.to_string()))?;
        let f_c = control_force(gains, &f_d, &out.r_dc, psi).map_err(|e| step_err(t, "controller")(e.to_string()))?;
        let tau = control_torque(gains, params, &state.r, &state.omega, &out.r_dc, &out.omega_dc, &out.omega_dc_dot);

        let e_r = attitude_error_vector(&gains.k_r, &r_e);
        let e_omega = state.omega - out.omega_dc;
        let lyap = lyapunov_values(params, gains, &e_x, &e_v, &r_e, &e_omega, p1, p2);
        if k == 0 {
            initial_region = certification
                .as_ref()
                .map(|rep| check_initial_condition(rep, &state, &out.r_dc, &out.omega_dc, &cmd, gains, params));
        }

        let f_c_norm = f_c.norm();
        let f_d_norm = f_d.norm();
        records.push(TelemetryRecord {
            t,
            x: state.x,
            v: state.v,
            omega: state.omega,
            r: state.r,
            x_d: cmd.x,
            r_dc: out.r_dc,
            e_x_norm: e_x.norm(),
            e_v_norm: e_v.norm(),
            e_r_norm: e_r.norm(),
            e_omega_norm: e_omega.norm(),
            psi_d: nav_error(&gains.k_r, &(state.r * cmd.r.transpose())),
            psi_dc: out.psi_dc,
            psi,
            c,
            cos_theta_d: f_d.dot(&out.r_dc.column(2)) / f_d_norm,
            cos_theta: f_c.z / f_c_norm,
            f_c_norm,
            e_f: f_d - state.r * f_c,
            alpha_tilt: tilt(&state.r),
            alpha_tilt_d: tilt(&cmd.r),
            v_r: lyap.v_r_basic,
            v_x: lyap.v_x,
            v_total: lyap.v,
            projection_active: out.projection_active,
            f_c,
            bp_norm: out.cone_radius,
            omega_dc: out.omega_dc,
        });

        planner = next_planner;
        if k < steps {
            let wrench = Wrench { force: f_c, torque: tau };
            state = integrate_step(params, &state, &wrench, dt).map_err(|e| step_err(t, "dynamics")(e.to_string()))?;
        }
    }

    let lyapunov = lyapunov_monitor(&records, certification.as_ref(), LYAPUNOV_TOL);
    let summary = summarise(cfg, &records, lyapunov, initial_region, &certification, &feasibility, cos_max, (hold, fallback, clamp));
    Ok(RunOutput { records, summary, certification, feasibility })
}

fn tilt(r: &RotationMatrix) -> f64 {
    r.column(2).z.clamp(-1.0, 1.0).acos()
}

#[allow(clippy::too_many_arguments)]
fn summarise(
    cfg: &ScenarioConfig,
    records: &[TelemetryRecord],
    lyapunov: MonitorResult,
    initial_region: Option<InitialConditionVerdict>,
    certification: &Option<CertificationReport>,
    feas: &FeasibilityReport,
    cos_max: f64,
    (hold, fallback, clamp): (usize, usize, usize),
) -> RunSummary {
    let max = |f: fn(&TelemetryRecord) -> f64| records.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let min = |f: fn(&TelemetryRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    let threshold = cfg.settle_threshold;
    let settled_time = match records.iter().rposition(|r| !(r.e_x_norm < threshold)) {
        None => records.first().map(|r| r.t),
        Some(i) => records.get(i + 1).map(|r| r.t),
    };
    let lyapunov_violations = match &lyapunov {
        MonitorResult::Monitored { increases, .. } => *increases,
        MonitorResult::NotApplicable => 0,
    };
    RunSummary {
        steps: records.len().saturating_sub(1),
        dt: cfg.dt,
        t_final: cfg.t_final,
        final_ex_norm: records.last().map_or(f64::NAN, |r| r.e_x_norm),
        max_fc_norm: max(|r| r.f_c_norm),
        min_cos_theta: min(|r| r.cos_theta),
        max_psi: max(|r| r.psi),
        max_psi_d: max(|r| r.psi_d),
        max_bp_norm: max(|r| r.bp_norm),
        delta: cfg.planner.delta(),
        settle_threshold: threshold,
        settled_time,
        lyapunov_violations,
        lyapunov,
        initial_region,
        certified: certification.as_ref().is_some_and(|r| r.certified),
        f_M_d: feas.f_m_d,
        force_feasible: feas.force_feasible,
        attitude_feasible: feas.attitude_feasible,
        cone_violations: records.iter().filter(|r| r.cos_theta < cos_max - CONE_SLACK).count(),
        force_violations: records.iter().filter(|r| r.f_c_norm > cfg.limits.f_max).count(),
        projection_steps: records.iter().filter(|r| r.projection_active).count(),
        force_hold_steps: hold,
        fallback_axis_steps: fallback,
        cone_clamp_steps: clamp,
    }
}

/// Telemetry of a torque- and force-free body; Lyapunov columns are NaN.
pub fn open_loop_records(params: &RigidBodyParams, s0: &RigidBodyState, dt: f64, steps: usize) -> Result<Vec<TelemetryRecord>, SimError> {
    let mut s = *s0;
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        out.push(TelemetryRecord {
            t,
            x: s.x,
            v: s.v,
            omega: s.omega,
            r: s.r,
            x_d: s.x,
            r_dc: s.r,
            e_x_norm: 0.0,
            e_v_norm: 0.0,
            e_r_norm: 0.0,
            e_omega_norm: 0.0,
            psi_d: f64::NAN,
            psi_dc: f64::NAN,
            psi: f64::NAN,
            c: f64::NAN,
            cos_theta_d: f64::NAN,
            cos_theta: f64::NAN,
            f_c_norm: 0.0,
            e_f: Vec3::zeros(),
            alpha_tilt: tilt(&s.r),
            alpha_tilt_d: tilt(&s.r),
            v_r: f64::NAN,
            v_x: f64::NAN,
            v_total: f64::NAN,
            projection_active: false,
            f_c: Vec3::zeros(),
            bp_norm: 0.0,
            omega_dc: Vec3::zeros(),
        });
        if k < steps {
            s = integrate_step(params, &s, &Wrench::zero(), dt).map_err(|e| step_err(t, "dynamics")(e.to_string()))?;
        }
    }
    Ok(out)
}

/// Writes telemetry and summary into `out_dir` using the configured names.
pub fn write_outputs(cfg: &ScenarioConfig, run: &RunOutput, out_dir: &Path) -> Result<(), SimError> {
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::Io { path: out_dir.to_path_buf(), message: e.to_string() })?;
    write_csv(&run.records, &out_dir.join(&cfg.file.run.telemetry))?;
    write_json(&run.summary, &out_dir.join(&cfg.file.run.summary))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), SimError> {
    let text = serde_json::to_string_pretty(value).expect("summary serialises");
    std::fs::write(path, text + "\n").map_err(|e| SimError::Io { path: path.to_path_buf(), message: e.to_string() })
}

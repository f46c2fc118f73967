//! Feasible reference attitude `R_dc = R_c R_r`.
//!
//! `R_c` aligns the body thrust axis with the desired force and keeps the
//! desired heading. The relative rotation `R_r` is driven by a rate that
//! makes `Ψ_dc = ½ tr(K_dc (I − R_dc R_dᵀ))` decrease, with the planar part
//! of its third column `b_r3` kept inside the disc of radius `δ = sin θ_M`
//! by a weighted projection operator. `R_r` evolves by left multiplication,
//! `Ṙ_r = ω̂_r R_r`, while `ω_c` and `ω_dc` are body rates.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eig::{sym2_min, Mat2};
use crate::geom::{attitude_error_vector, exp_so3, log_so3, nav_error, project_to_so3, GeomError, NavGains, RotationMatrix, Vec3};
use crate::trajectory::TrajectoryCommand;

pub type Vec2 = Vector2<f64>;

/// Below this desired-force magnitude (N) the thrust axis is undefined.
pub const FORCE_EPS: f64 = 1e-6;
/// Below this `‖b_c3 × b_d1‖` the heading axis falls back to `b_d2`.
pub const AXIS_EPS: f64 = 1e-6;
/// Slack on the cone invariant after the discrete clamp.
pub const CONE_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("desired force magnitude {0:.3e} N is below the thrust-axis threshold")]
    DegenerateForce(f64),
    #[error("projection margin epsilon = {0} must lie in (0, 1)")]
    BadEpsilon(f64),
    #[error("weighting matrix must be symmetric positive definite")]
    BadWeighting,
    #[error("maximum tilt {0} rad must lie in [0, π/2)")]
    BadTilt(f64),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("cone invariant violated: ‖b_r3^p‖ = {norm} > δ = {delta}")]
    ConeViolation { norm: f64, delta: f64 },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    k_dc: NavGains,
    epsilon: f64,
    gamma: [[f64; 2]; 2],
    theta_max: f64,
}

impl PlannerParams {
    /// `theta_max = 0` locks the thrust axis to the body third axis
    /// (co-planar configuration): only rotations about `b_c3` remain.
    pub fn new(k_dc: NavGains, epsilon: f64, gamma: Mat2, theta_max: f64) -> Result<Self, PlannerError> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(PlannerError::BadEpsilon(epsilon));
        }
        let asym = (gamma - gamma.transpose()).norm();
        if asym > 1e-12 || !(sym2_min(&gamma) > 0.0) {
            return Err(PlannerError::BadWeighting);
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_max) {
            return Err(PlannerError::BadTilt(theta_max));
        }
        Ok(Self {
            k_dc,
            epsilon,
            gamma: [[gamma[(0, 0)], gamma[(0, 1)]], [gamma[(1, 0)], gamma[(1, 1)]]],
            theta_max,
        })
    }

    pub fn k_dc(&self) -> &NavGains {
        &self.k_dc
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> Mat2 {
        Mat2::new(self.gamma[0][0], self.gamma[0][1], self.gamma[1][0], self.gamma[1][1])
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn delta(&self) -> f64 {
        self.theta_max.sin()
    }
}

/// Base rotation and whether the heading fallback was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseRotation {
    pub rotation: RotationMatrix,
    pub fallback_axis: bool,
}

/// `b_c3 = f/‖f‖`, `b_c2 = b_c3 × b_d1 / ‖·‖`, `b_c1 = b_c2 × b_c3`.
/// When `b_c3 ∥ b_d1`, `b_c1` is built from `b_d2` instead.
pub fn base_rotation(f_c_d: &Vec3, b_d1: &Vec3, b_d2: &Vec3) -> Result<BaseRotation, PlannerError> {
    let norm = f_c_d.norm();
    if !(norm >= FORCE_EPS) {
        return Err(PlannerError::DegenerateForce(norm));
    }
    Ok(base_rotation_from_axis(&(f_c_d / norm), b_d1, b_d2))
}

fn base_rotation_from_axis(b3: &Vec3, b_d1: &Vec3, b_d2: &Vec3) -> BaseRotation {
    let cross = b3.cross(b_d1);
    let cross_norm = cross.norm();
    let (b1, b2, fallback_axis) = if cross_norm >= AXIS_EPS {
        let b2 = cross / cross_norm;
        (b2.cross(b3), b2, false)
    } else {
        let c = b_d2.cross(b3);
        let b1 = c / c.norm();
        (b1, b3.cross(&b1), true)
    };
    let m = crate::geom::Mat3::from_columns(&[b1, b2, *b3]);
    // Columns are orthonormal up to rounding; a projection removes the ulps.
    let rotation = project_to_so3(&m).unwrap_or_else(|_| RotationMatrix::from_matrix_unchecked(m));
    BaseRotation { rotation, fallback_axis }
}

/// `f(b) = ((1+ε)‖b‖² − δ²)/(ε δ²)`: `f = 0` on `‖b‖ = δ/√(1+ε)`, `f = 1` on `‖b‖ = δ`.
pub fn convex_boundary(b_p: &Vec2, epsilon: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    ((1.0 + epsilon) * b_p.norm_squared() - d2) / (epsilon * d2)
}

fn convex_boundary_gradient(b_p: &Vec2, epsilon: f64, delta: f64) -> Vec2 {
    b_p * (2.0 * (1.0 + epsilon) / (epsilon * delta * delta))
}

/// Weighted projection of a planar rate near the disc boundary.
/// Returns the rate and whether the projection modified it.
pub fn project_b3_rate(b_p: &Vec2, rate: &Vec2, params: &PlannerParams) -> (Vec2, bool) {
    let delta = params.delta();
    if delta == 0.0 {
        // Locked tilt: the disc is a point.
        return (Vec2::zeros(), rate.norm_squared() > 0.0);
    }
    let f = convex_boundary(b_p, params.epsilon, delta);
    let grad = convex_boundary_gradient(b_p, params.epsilon, delta);
    if f > 0.0 && rate.dot(&grad) > 0.0 {
        let gamma = params.gamma();
        let gamma_grad = gamma * grad;
        let weight = grad.dot(&gamma_grad);
        let projected = rate - gamma_grad * (f * grad.dot(rate) / weight);
        (projected, true)
    } else {
        (*rate, false)
    }
}

/// `ω_r^d = R_r ω_d − ω_c − R_r R_dᵀ e_R^dc`, which gives `Ψ̇_dc = −‖e_R^dc‖²`.
pub fn desired_relative_rate(
    r_r: &RotationMatrix,
    r_dc: &RotationMatrix,
    r_d: &RotationMatrix,
    omega_d: &Vec3,
    omega_c: &Vec3,
    k_dc: &NavGains,
) -> Vec3 {
    let e_dc = attitude_error_vector(k_dc, &(r_dc * &r_d.transpose()));
    r_r * omega_d - omega_c - r_r * &(r_d.transpose() * e_dc)
}

struct RelativeRate {
    omega_r_desired: Vec3,
    omega_r: Vec3,
    projection_active: bool,
    cone_radius: f64,
    boundary_value: f64,
}

/// `ω_r` at relative rotation `r_r`: the desired rate with the planar
/// rate of `b_r3` passed through the projection.
fn relative_rate(
    r_r: &RotationMatrix,
    r_c: &RotationMatrix,
    r_d: &RotationMatrix,
    omega_d: &Vec3,
    omega_c: &Vec3,
    params: &PlannerParams,
) -> RelativeRate {
    let r_dc = r_c * r_r;
    let omega_r_d = desired_relative_rate(r_r, &r_dc, r_d, omega_d, omega_c, &params.k_dc);
    let b3 = r_r.column(2).into_owned();
    let b_p = Vec2::new(b3.x, b3.y);
    let delta = params.delta();
    let boundary_value = if delta > 0.0 { convex_boundary(&b_p, params.epsilon, delta) } else { f64::NAN };

    let b3_rate_d = omega_r_d.cross(&b3);
    let (planar_rate, projection_active) = project_b3_rate(&b_p, &Vec2::new(b3_rate_d.x, b3_rate_d.y), params);
    let b3_rate = if projection_active {
        let third = -(b_p.dot(&planar_rate)) / (1.0 - b_p.norm_squared()).sqrt();
        Vec3::new(planar_rate.x, planar_rate.y, third)
    } else {
        b3_rate_d
    };
    let omega_r = b3.cross(&b3_rate) + b3.dot(&omega_r_d) * b3;
    RelativeRate { omega_r_desired: omega_r_d, omega_r, projection_active, cone_radius: b_p.norm(), boundary_value }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerState {
    r_r: RotationMatrix,
    r_c_prev: Option<RotationMatrix>,
    omega_c_prev: Option<Vec3>,
}

impl Default for PlannerState {
    fn default() -> Self {
        Self::new()
    }
}

impl PlannerState {
    /// `R_r = I`, so the first reference equals the base rotation.
    pub fn new() -> Self {
        Self { r_r: RotationMatrix::identity(), r_c_prev: None, omega_c_prev: None }
    }

    pub fn relative_rotation(&self) -> &RotationMatrix {
        &self.r_r
    }

    /// `‖b_r3^p‖`, the planar part of the relative third axis.
    pub fn cone_radius(&self) -> f64 {
        let b = self.r_r.column(2);
        b.x.hypot(b.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOutput {
    pub r_dc: RotationMatrix,
    pub omega_dc: Vec3,
    pub omega_dc_dot: Vec3,
    pub r_c: RotationMatrix,
    pub omega_c: Vec3,
    /// `Ψ_dc`, J
    pub psi_dc: f64,
    pub projection_active: bool,
    /// Desired force fell below [`FORCE_EPS`]; the previous thrust axis was held.
    pub force_hold: bool,
    pub fallback_axis: bool,
    /// `ω_r^d` and the applied `ω_r`.
    pub omega_r_desired: Vec3,
    pub omega_r: Vec3,
    /// `‖b_r3^p‖` at the output instant and `f` evaluated there.
    pub cone_radius: f64,
    pub boundary_value: f64,
    /// The post-step `b_r3` had to be pulled back onto the cone.
    pub clamped: bool,
}

/// Advances the planner by one step. Outputs refer to the current instant;
/// the returned state carries `R_r` one step ahead.
pub fn planner_step(
    state: &PlannerState,
    f_c_d: &Vec3,
    cmd: &TrajectoryCommand,
    params: &PlannerParams,
    dt: f64,
) -> Result<(PlannerState, PlannerOutput), PlannerError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(PlannerError::BadStep(dt));
    }
    let b_d1 = cmd.r.column(0);
    let b_d2 = cmd.r.column(1);
    let (base, force_hold) = match (base_rotation(f_c_d, &b_d1, &b_d2), &state.r_c_prev) {
        (Ok(b), _) => (b, false),
        (Err(PlannerError::DegenerateForce(_)), Some(prev)) => {
            (base_rotation_from_axis(&prev.column(2), &b_d1, &b_d2), true)
        }
        (Err(e), _) => return Err(e),
    };
    let r_c = base.rotation;

    // Log differences give the rate at the previous half step; with two of
    // them the rate is extrapolated to the current instant.
    let half_rate = state.r_c_prev.as_ref().map(|prev| log_so3(&(prev.transpose() * r_c)) / dt);
    let (omega_c, omega_c_dot) = match (half_rate, state.omega_c_prev) {
        (Some(w), Some(w_prev)) => (1.5 * w - 0.5 * w_prev, (w - w_prev) / dt),
        (Some(w), None) => (w, Vec3::zeros()),
        _ => (Vec3::zeros(), Vec3::zeros()),
    };

    let r_r = state.r_r;
    let r_dc = r_c * r_r;
    let psi_dc = nav_error(&params.k_dc, &(r_dc * cmd.r.transpose()));
    let delta = params.delta();
    let now = relative_rate(&r_r, &r_c, &cmd.r, &cmd.omega, &omega_c, params);
    let omega_r = now.omega_r;
    let omega_dc = r_r.transpose() * (omega_c + omega_r);

    // ω_r is held over the step, so the left-invariant flow is exact.
    let next_r_r = project_to_so3((exp_so3(&(omega_r * dt)) * r_r).matrix())?;
    let (next_r_r, clamped) = clamp_to_cone(next_r_r, delta);

    // The feedforward acceleration is the change of ω_dc over the coming
    // step, with R_c and R_d extrapolated at their current rates.
    let omega_dc_dot = {
        let r_c_next = r_c * exp_so3(&(omega_c * dt));
        let omega_c_next = omega_c + omega_c_dot * dt;
        let r_d_next = cmd.r * exp_so3(&(cmd.omega * dt));
        let omega_d_next = cmd.omega + cmd.omega_dot * dt;
        let next = relative_rate(&next_r_r, &r_c_next, &r_d_next, &omega_d_next, &omega_c_next, params);
        (next_r_r.transpose() * (omega_c_next + next.omega_r) - omega_dc) / dt
    };

    let next = PlannerState { r_r: next_r_r, r_c_prev: Some(r_c), omega_c_prev: half_rate };
    let radius = next.cone_radius();
    if radius > delta + CONE_TOL {
        return Err(PlannerError::ConeViolation { norm: radius, delta });
    }

    let out = PlannerOutput {
        r_dc,
        omega_dc,
        omega_dc_dot,
        r_c,
        omega_c,
        psi_dc,
        projection_active: now.projection_active,
        force_hold,
        fallback_axis: base.fallback_axis,
        omega_r_desired: now.omega_r_desired,
        omega_r,
        cone_radius: now.cone_radius,
        boundary_value: now.boundary_value,
        clamped,
    };
    Ok((next, out))
}

/// Discrete-time guard for the cone: a finite step along the boundary
/// tangent leaves the disc by O(dt²), so `b_r3` is rotated back onto the
/// boundary along the great circle through `e3`.
fn clamp_to_cone(r_r: RotationMatrix, delta: f64) -> (RotationMatrix, bool) {
    let b = r_r.column(2);
    let radius = b.x.hypot(b.y);
    if radius <= delta {
        return (r_r, false);
    }
    let target = if radius > 0.0 {
        let scale = delta / radius;
        Vec3::new(b.x * scale, b.y * scale, (1.0 - delta * delta).sqrt())
    } else {
        Vec3::z()
    };
    let axis = b.cross(&target);
    let angle = axis.norm().atan2(b.dot(&target));
    let fix = if axis.norm() > 0.0 { exp_so3(&(axis.normalize() * angle)) } else { RotationMatrix::identity() };
    (fix * r_r, true)
}

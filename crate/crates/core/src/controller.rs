//! Force and torque laws and the actuation-cone feasibility check.

use thiserror::Error;

use crate::dynamics::RigidBodyParams;
use crate::eig::sym3_min;
use crate::geom::{attitude_error_vector, psi_constants, GeomError, Mat3, NavGains, RotationMatrix, Vec3};
use crate::trajectory::{TrajectoryError, TrajectorySpec};

#[derive(Debug, Error)]
pub enum ControlError {
    #[error("navigation error {psi} J reached the scaling ceiling Ψ_M = {psi_max} J")]
    OutsideScalingRegion { psi: f64, psi_max: f64 },
    #[error("gain `{0}` must be symmetric positive definite")]
    NotPositiveDefinite(&'static str),
    #[error("invalid gain `{name}`: {reason}")]
    InvalidGain { name: &'static str, reason: String },
    #[error("invalid limit `{name}`: {reason}")]
    InvalidLimit { name: &'static str, reason: String },
    #[error("cone margin is undefined for a zero force")]
    ZeroForce,
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGains {
    pub k_x: Mat3,
    pub k_v: Mat3,
    pub k_r: NavGains,
    pub k_omega: Mat3,
    /// Scaling ceiling Ψ_M, J.
    pub psi_max: f64,
    /// Attitude sublevel ψ, J.
    pub psi: f64,
}

fn check_spd(name: &'static str, m: &Mat3) -> Result<(), ControlError> {
    let asym = (m - m.transpose()).norm();
    if asym > 1e-12 || !m.iter().all(|v| v.is_finite()) || !(sym3_min(m) > 0.0) {
        return Err(ControlError::NotPositiveDefinite(name));
    }
    Ok(())
}

impl ControlGains {
    pub fn new(k_x: Mat3, k_v: Mat3, k_r: NavGains, k_omega: Mat3, psi_max: f64, psi: f64) -> Result<Self, ControlError> {
        check_spd("k_x", &k_x)?;
        check_spd("k_v", &k_v)?;
        check_spd("k_omega", &k_omega)?;
        psi_constants(&k_r, psi)?;
        if !(psi_max > psi) || !psi_max.is_finite() {
            return Err(ControlError::InvalidGain { name: "psi_max", reason: format!("{psi_max} must exceed psi = {psi}") });
        }
        Ok(Self { k_x, k_v, k_r, k_omega, psi_max, psi })
    }

    /// Isotropic gains `k_x I`, `k_v I`, `k_r I`, `k_omega I`.
    pub fn isotropic(k_x: f64, k_v: f64, k_r: f64, k_omega: f64, psi_max: f64, psi: f64) -> Result<Self, ControlError> {
        let id = Mat3::identity();
        Self::new(id * k_x, id * k_v, NavGains::isotropic(k_r)?, id * k_omega, psi_max, psi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuationLimits {
    /// Cone half-angle θ_M, rad. Zero means thrust along the body third axis only.
    pub theta_max: f64,
    /// Force magnitude bound f_M, N.
    pub f_max: f64,
}

impl ActuationLimits {
    pub fn new(theta_max: f64, f_max: f64) -> Result<Self, ControlError> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_max) {
            return Err(ControlError::InvalidLimit { name: "theta_max", reason: format!("{theta_max} rad not in [0, π/2)") });
        }
        if !(f_max > 0.0) || !f_max.is_finite() {
            return Err(ControlError::InvalidLimit { name: "f_max", reason: format!("{f_max} N must be positive") });
        }
        Ok(Self { theta_max, f_max })
    }
}

/// Per-step controller quantities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDiagnostics {
    /// Desired inertial force, N.
    pub f_c_d: Vec3,
    pub psi: f64,
    pub c: f64,
    pub cos_theta: f64,
    /// `f_c^d − R f_c`, N.
    pub e_f: Vec3,
}

/// `f_c^d = −K_x e_x − K_v e_v + m (a_d + g e3)`, inertial frame.
pub fn desired_force(gains: &ControlGains, params: &RigidBodyParams, e_x: &Vec3, e_v: &Vec3, a_d: &Vec3) -> Vec3 {
    -gains.k_x * e_x - gains.k_v * e_v + params.mass() * (a_d + params.gravity() * Vec3::z())
}

/// `c(Ψ) = (Ψ_M − Ψ)/Ψ_M`. Tiny negative Ψ from rounding counts as zero.
pub fn scaling(psi: f64, psi_max: f64) -> Result<f64, ControlError> {
    if !(psi < psi_max) {
        return Err(ControlError::OutsideScalingRegion { psi, psi_max });
    }
    Ok((psi_max - psi.max(0.0)) / psi_max)
}

/// `f_c = c(Ψ) R_refᵀ f_c^d`, body frame.
pub fn control_force(gains: &ControlGains, f_c_d: &Vec3, r_ref: &RotationMatrix, psi: f64) -> Result<Vec3, ControlError> {
    let c = scaling(psi, gains.psi_max)?;
    Ok(c * (r_ref.transpose() * *f_c_d))
}

/// `τ_c = −R_refᵀ e_R − K_ω e_ω + I ω̇_ref + ω_ref × I ω` with `R_e = R R_refᵀ`.
pub fn control_torque(
    gains: &ControlGains,
    params: &RigidBodyParams,
    r: &RotationMatrix,
    omega: &Vec3,
    r_ref: &RotationMatrix,
    omega_ref: &Vec3,
    omega_ref_dot: &Vec3,
) -> Vec3 {
    let r_e = r * &r_ref.transpose();
    let e_r = attitude_error_vector(&gains.k_r, &r_e);
    let e_omega = omega - omega_ref;
    let inertia = params.inertia();
    -(r_ref.transpose() * e_r) - gains.k_omega * e_omega + inertia * omega_ref_dot + omega_ref.cross(&(inertia * omega))
}

/// `cos θ = f_cᵀ e3 / ‖f_c‖`.
pub fn cone_margin(f_c: &Vec3) -> Result<f64, ControlError> {
    let n = f_c.norm();
    if !(n > 0.0) {
        return Err(ControlError::ZeroForce);
    }
    Ok(f_c.z / n)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FeasibilityReport {
    /// `sup ‖m g e3 + m a_d‖` over the horizon, N.
    pub f_m_d: f64,
    pub f_m_d_time: f64,
    pub force_feasible: bool,
    /// Smallest `f̂_c^d · b_d3` at zero tracking error.
    pub worst_cos: f64,
    pub worst_cos_time: f64,
    pub attitude_feasible: bool,
    /// Closed intervals of sample times where the cone condition fails.
    pub violation_windows: Vec<(f64, f64)>,
    pub samples: usize,
}

/// Samples `[0, horizon]` with step `dt` and checks the desired force at
/// zero tracking error against the magnitude bound and the cone.
pub fn feasibility_check(
    spec: &TrajectorySpec,
    limits: &ActuationLimits,
    params: &RigidBodyParams,
    horizon: f64,
    dt: f64,
) -> Result<FeasibilityReport, ControlError> {
    if !(dt > 0.0) || !(horizon >= 0.0) {
        return Err(ControlError::InvalidLimit { name: "horizon", reason: format!("horizon {horizon} s, step {dt} s") });
    }
    let cos_max = limits.theta_max.cos();
    let n = (horizon / dt).round() as usize;
    let mut rep = FeasibilityReport {
        f_m_d: 0.0,
        f_m_d_time: 0.0,
        force_feasible: true,
        worst_cos: f64::INFINITY,
        worst_cos_time: 0.0,
        attitude_feasible: true,
        violation_windows: Vec::new(),
        samples: n + 1,
    };
    let mut open: Option<(f64, f64)> = None;
    for k in 0..=n {
        let t = (k as f64 * dt).min(horizon);
        let cmd = spec.sample(t)?;
        let f = params.mass() * (cmd.a + params.gravity() * Vec3::z());
        let mag = f.norm();
        if mag > rep.f_m_d {
            rep.f_m_d = mag;
            rep.f_m_d_time = t;
        }
        let cos = if mag > 0.0 { f.dot(&cmd.r.column(2)) / mag } else { f64::NAN };
        if cos < rep.worst_cos || cos.is_nan() {
            rep.worst_cos = cos;
            rep.worst_cos_time = t;
        }
        let violated = !(cos >= cos_max);
        open = match (open, violated) {
            (None, true) => Some((t, t)),
            (Some((s, _)), true) => Some((s, t)),
            (Some(w), false) => {
                rep.violation_windows.push(w);
                None
            }
            (None, false) => None,
        };
    }
    if let Some(w) = open {
        rep.violation_windows.push(w);
    }
    rep.force_feasible = rep.f_m_d < limits.f_max;
    rep.attitude_feasible = rep.violation_windows.is_empty();
    Ok(rep)
}

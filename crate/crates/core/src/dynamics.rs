//! Rigid-body equations of motion under gravity and a body-frame wrench,
//! and a fixed-step RK4 integrator that re-projects the attitude onto SO(3).
//!
//! ```text
//! ẋ = v,  Ṙ = R ω̂,  m v̇ = −m g e3 + R f_c,  I ω̇ = −ω × I ω + τ_c
//! ```

use thiserror::Error;

use crate::eig::sym3_min;
use crate::geom::{hat, project_to_so3, GeomError, Mat3, RotationMatrix, Vec3};

pub const DEFAULT_GRAVITY: f64 = 9.81;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("inertia must be symmetric positive definite ({0})")]
    BadInertia(String),
    #[error("gravity must be finite and non-negative, got {0}")]
    BadGravity(f64),
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("integration produced a non-finite {component}")]
    NonFinite { component: &'static str },
    #[error(transparent)]
    Geom(#[from] GeomError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyParams {
    mass: f64,
    inertia: Mat3,
    inertia_inv: Mat3,
    gravity: f64,
}

impl RigidBodyParams {
    pub fn new(mass: f64, inertia: Mat3, gravity: f64) -> Result<Self, DynamicsError> {
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(DynamicsError::NonPositiveMass(mass));
        }
        if !(gravity >= 0.0) || !gravity.is_finite() {
            return Err(DynamicsError::BadGravity(gravity));
        }
        let asym = (inertia - inertia.transpose()).norm();
        if asym > 1e-12 || !inertia.iter().all(|v| v.is_finite()) {
            return Err(DynamicsError::BadInertia(format!("asymmetry {asym:.3e}")));
        }
        let lmin = sym3_min(&inertia);
        if !(lmin > 0.0) {
            return Err(DynamicsError::BadInertia(format!("smallest eigenvalue {lmin:.3e}")));
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or_else(|| DynamicsError::BadInertia("singular".into()))?;
        Ok(Self { mass, inertia, inertia_inv, gravity })
    }

    pub fn with_diagonal_inertia(mass: f64, diag: [f64; 3], gravity: f64) -> Result<Self, DynamicsError> {
        Self::new(mass, Mat3::from_diagonal(&Vec3::from(diag)), gravity)
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidBodyState {
    /// Inertial position, m.
    pub x: Vec3,
    pub r: RotationMatrix,
    /// Inertial velocity, m/s.
    pub v: Vec3,
    /// Body angular velocity, rad/s.
    pub omega: Vec3,
}

impl RigidBodyState {
    pub fn at_rest(x: Vec3, r: RotationMatrix) -> Self {
        Self { x, r, v: Vec3::zeros(), omega: Vec3::zeros() }
    }
}

/// Body-frame control force and torque.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: Vec3,
    pub torque: Vec3,
}

impl Wrench {
    pub fn zero() -> Self {
        Self::default()
    }
}

/// Time derivative of a [`RigidBodyState`]; the attitude rate is carried
/// as the body angular velocity (`Ṙ = R ω̂`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub x_dot: Vec3,
    pub omega: Vec3,
    pub v_dot: Vec3,
    pub omega_dot: Vec3,
}

pub fn state_derivative(p: &RigidBodyParams, s: &RigidBodyState, w: &Wrench) -> StateDerivative {
    derivative_raw(p, s.r.matrix(), &s.v, &s.omega, w)
}

fn derivative_raw(p: &RigidBodyParams, r: &Mat3, v: &Vec3, omega: &Vec3, w: &Wrench) -> StateDerivative {
    let v_dot = -p.gravity * Vec3::z() + r * w.force / p.mass;
    let omega_dot = p.inertia_inv * (w.torque - omega.cross(&(p.inertia * omega)));
    StateDerivative { x_dot: *v, omega: *omega, v_dot, omega_dot }
}

/// One classical RK4 step with the wrench held over `[t, t + dt]`; the
/// attitude is integrated on its nine entries and projected back to SO(3).
pub fn integrate_step(
    p: &RigidBodyParams,
    s: &RigidBodyState,
    w: &Wrench,
    dt: f64,
) -> Result<RigidBodyState, DynamicsError> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(DynamicsError::BadStep(dt));
    }
    let r0 = *s.r.matrix();
    let stage = |r: &Mat3, v: &Vec3, omega: &Vec3| {
        let d = derivative_raw(p, r, v, omega, w);
        (d.x_dot, r * hat(&d.omega), d.v_dot, d.omega_dot)
    };

    let k1 = stage(&r0, &s.v, &s.omega);
    let h = 0.5 * dt;
    let k2 = stage(&(r0 + h * k1.1), &(s.v + h * k1.2), &(s.omega + h * k1.3));
    let k3 = stage(&(r0 + h * k2.1), &(s.v + h * k2.2), &(s.omega + h * k2.3));
    let k4 = stage(&(r0 + dt * k3.1), &(s.v + dt * k3.2), &(s.omega + dt * k3.3));

    let sixth = dt / 6.0;
    let x = s.x + sixth * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
    let r = r0 + sixth * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    let v = s.v + sixth * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
    let omega = s.omega + sixth * (k1.3 + 2.0 * k2.3 + 2.0 * k3.3 + k4.3);

    check_finite("position", x.iter())?;
    check_finite("velocity", v.iter())?;
    check_finite("angular velocity", omega.iter())?;
    check_finite("attitude", r.iter())?;
    let r = project_to_so3(&r)?;
    Ok(RigidBodyState { x, r, v, omega })
}

fn check_finite<'a>(component: &'static str, mut it: impl Iterator<Item = &'a f64>) -> Result<(), DynamicsError> {
    if it.all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(DynamicsError::NonFinite { component })
    }
}

/// Rotational kinetic energy `½ ωᵀ I ω`.
pub fn rotational_energy(p: &RigidBodyParams, s: &RigidBodyState) -> f64 {
    0.5 * s.omega.dot(&(p.inertia * s.omega))
}

/// Angular momentum resolved in the inertial frame, `R I ω`.
pub fn inertial_angular_momentum(p: &RigidBodyParams, s: &RigidBodyState) -> Vec3 {
    s.r * (p.inertia * s.omega)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> RigidBodyParams {
        RigidBodyParams::with_diagonal_inertia(1.9, [0.0074, 0.0074, 0.05], DEFAULT_GRAVITY).unwrap()
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let p = quad();
        let s = RigidBodyState::at_rest(Vec3::new(0.0, 0.0, 1.0), RotationMatrix::identity());
        let w = Wrench { force: Vec3::new(0.0, 0.0, p.mass() * p.gravity()), torque: Vec3::zeros() };
        let d = state_derivative(&p, &s, &w);
        assert_eq!(d.x_dot, Vec3::zeros());
        assert_eq!(d.omega, Vec3::zeros());
        assert!(d.v_dot.norm() < 1e-15);
        assert_eq!(d.omega_dot, Vec3::zeros());
    }

    #[test]
    fn free_fall_and_principal_spin() {
        let p = quad();
        let s = RigidBodyState::at_rest(Vec3::zeros(), RotationMatrix::identity());
        let d = state_derivative(&p, &s, &Wrench::zero());
        assert_eq!(d.v_dot, Vec3::new(0.0, 0.0, -9.81));

        let spin = RigidBodyState { omega: Vec3::new(0.0, 0.0, 4.0), ..s };
        assert_eq!(state_derivative(&p, &spin, &Wrench::zero()).omega_dot, Vec3::zeros());
    }

    #[test]
    fn ballistic_closed_form() {
        let p = quad();
        let mut s = RigidBodyState::at_rest(Vec3::zeros(), RotationMatrix::identity());
        s.v = Vec3::new(1.0, 0.0, 0.0);
        for _ in 0..1000 {
            s = integrate_step(&p, &s, &Wrench::zero(), 1e-3).unwrap();
        }
        let expected = Vec3::new(1.0, 0.0, -0.5 * 9.81);
        assert!((s.x - expected).norm() < 1e-9, "{}", s.x - expected);
    }

    #[test]
    fn orthonormality_after_many_steps() {
        let p = quad();
        let mut s = RigidBodyState::at_rest(Vec3::zeros(), RotationMatrix::identity());
        s.omega = Vec3::new(1.0, 2.0, 3.0);
        for _ in 0..20_000 {
            s = integrate_step(&p, &s, &Wrench::zero(), 1e-3).unwrap();
        }
        assert!(s.r.orthonormality_residual() <= 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            RigidBodyParams::with_diagonal_inertia(-1.0, [1.0; 3], 9.81),
            Err(DynamicsError::NonPositiveMass(_))
        ));
        assert!(RigidBodyParams::with_diagonal_inertia(1.0, [1.0, -1.0, 1.0], 9.81).is_err());
        let p = quad();
        let s = RigidBodyState::at_rest(Vec3::zeros(), RotationMatrix::identity());
        assert!(matches!(integrate_step(&p, &s, &Wrench::zero(), 0.0), Err(DynamicsError::BadStep(_))));
        let w = Wrench { force: Vec3::new(f64::INFINITY, 0.0, 0.0), torque: Vec3::zeros() };
        assert_eq!(
            integrate_step(&p, &s, &w, 1e-3),
            Err(DynamicsError::NonFinite { component: "position" })
        );
    }
}

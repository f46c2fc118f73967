//! Geometric tracking control on SE(3) for thrust-vectoring rigid bodies.
//!
//! The closed loop is trajectory → planner → controller → dynamics; the
//! [`certify`] module evaluates the quadratic Lyapunov conditions for a
//! gain set and [`sim`] ties everything to configs, telemetry and a CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod controller;
pub mod dynamics;
pub mod eig;
pub mod geom;
pub mod par;
pub mod planner;
pub mod sim;
pub mod trajectory;

pub use geom::{Mat3, RotationMatrix, Vec3};

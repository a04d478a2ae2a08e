//! Detumbling an underactuated satellite with a single-axis magnetorquer.
//!
//! The crate is organized bottom-up:
//!
//! * [`dynamics`] rigid-body rotational dynamics, magnetic torque, quaternion
//!   kinematics and the kinetic-energy Lyapunov function;
//! * [`orbit`] two-body orbit propagation and a dipole geomagnetic field;
//! * [`bdot`] the B-dot law in three-axis and single-axis form;
//! * [`nmpc`] the continuation/GMRES nonlinear model-predictive controller;
//! * [`sim`] the closed-loop scenario runner and detumbling metrics.

pub mod bdot;
pub mod dynamics;
pub mod error;
pub mod nmpc;
pub mod orbit;
pub mod sim;

pub use error::{Error, Result};

/// Degrees per radian.
pub const DEG_PER_RAD: f64 = 180.0 / std::f64::consts::PI;

/// Convert an angular rate in deg/s to rad/s.
pub fn deg_s_to_rad_s(deg_s: f64) -> f64 {
    deg_s.to_radians()
}

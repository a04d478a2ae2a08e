//! Rotational dynamics of a rigid body about its principal axes.
//!
//! All vectors are expressed in the body frame. The attitude quaternion is
//! stored scalar-first and describes the body frame relative to the inertial
//! frame; [`AttitudeQuaternion::to_body`] maps inertial vectors into body
//! coordinates.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Body-frame angular velocity [rad/s].
pub type AngularVelocity = Vector3<f64>;
/// Body-frame torque [N·m].
pub type Torque = Vector3<f64>;
/// Commanded magnetic dipole moment [A·m²].
pub type MagneticDipoleCommand = Vector3<f64>;
/// Geomagnetic field in the body frame [T].
pub type BodyFieldVector = Vector3<f64>;

/// Principal moments of inertia [kg·m²].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InertiaTensor {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

impl InertiaTensor {
    /// Moments of inertia of the 3U Q-Li demonstration satellite.
    pub const QLI: InertiaTensor = InertiaTensor {
        jx: 0.004_587_0,
        jy: 0.031_420,
        jz: 0.031_249,
    };

    pub fn new(jx: f64, jy: f64, jz: f64) -> Result<Self> {
        let j = InertiaTensor { jx, jy, jz };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("jx", self.jx), ("jy", self.jy), ("jz", self.jz)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(
                    format!("inertia.{name}"),
                    format!("moment of inertia must be strictly positive, got {value}"),
                ));
            }
        }
        let (a, b, c) = (self.jx, self.jy, self.jz);
        if a + b < c || b + c < a || c + a < b {
            return Err(Error::invalid(
                "inertia",
                format!("moments ({a}, {b}, {c}) violate the triangle inequality"),
            ));
        }
        Ok(())
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.jx, self.jy, self.jz)
    }

    /// Angular momentum `J ω`.
    pub fn momentum(&self, w: &AngularVelocity) -> Vector3<f64> {
        self.as_vector().component_mul(w)
    }
}

/// Unit quaternion describing the body attitude, scalar-first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttitudeQuaternion(UnitQuaternion<f64>);

impl AttitudeQuaternion {
    pub fn identity() -> Self {
        AttitudeQuaternion(UnitQuaternion::identity())
    }

    /// Normalizes the raw components `[q0, q1, q2, q3]`.
    pub fn from_scalar_first(q: [f64; 4]) -> Self {
        AttitudeQuaternion(UnitQuaternion::new_normalize(Quaternion::new(q[0], q[1], q[2], q[3])))
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = nalgebra::Unit::new_normalize(*axis);
        AttitudeQuaternion(UnitQuaternion::from_axis_angle(&axis, angle))
    }

    pub fn from_quaternion(q: Quaternion<f64>) -> Self {
        AttitudeQuaternion(UnitQuaternion::new_normalize(q))
    }

    pub fn quaternion(&self) -> &Quaternion<f64> {
        self.0.quaternion()
    }

    pub fn scalar_first(&self) -> [f64; 4] {
        let q = self.0.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Express an inertial-frame vector in body coordinates.
    pub fn to_body(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.inverse_transform_vector(v)
    }

    /// Express a body-frame vector in inertial coordinates.
    pub fn to_inertial(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.transform_vector(v)
    }
}

impl Default for AttitudeQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

/// `T = m × B`. A dipole confined to the body x-axis yields `[0, -Bz mx, By mx]`.
pub fn magnetic_torque(m: &MagneticDipoleCommand, b: &BodyFieldVector) -> Torque {
    m.cross(b)
}

/// Torque produced by a dipole along the body x-axis only.
pub fn single_axis_torque(mx: f64, b: &BodyFieldVector) -> Torque {
    Vector3::new(0.0, -b.z * mx, b.y * mx)
}

/// Euler's equations for a principal-axis rigid body.
pub fn euler_rates(w: &AngularVelocity, t: &Torque, j: &InertiaTensor) -> Vector3<f64> {
    Vector3::new(
        ((j.jy - j.jz) * w.y * w.z + t.x) / j.jx,
        ((j.jz - j.jx) * w.z * w.x + t.y) / j.jy,
        ((j.jx - j.jy) * w.x * w.y + t.z) / j.jz,
    )
}

/// Kinematic rate `q̇ = ½ q ⊗ (0, ω)` for body rates `w`.
pub fn quaternion_rate(q: &Quaternion<f64>, w: &AngularVelocity) -> Quaternion<f64> {
    q * Quaternion::from_imag(*w) * 0.5
}

/// Rotational kinetic energy `½ ωᵀ J ω` [J].
pub fn lyapunov_value(w: &AngularVelocity, j: &InertiaTensor) -> f64 {
    0.5 * w.dot(&j.momentum(w))
}

/// Time derivative of [`lyapunov_value`] under torque `t`: `ωᵀ T` [W].
pub fn lyapunov_rate(w: &AngularVelocity, t: &Torque) -> f64 {
    w.dot(t)
}

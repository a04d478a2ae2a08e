//! Two-body orbit propagation and a dipole model of the geomagnetic field.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::dynamics::{AttitudeQuaternion, BodyFieldVector};
use crate::error::{Error, Result};

/// Earth gravitational parameter [km³/s²].
pub const MU_EARTH: f64 = 398_600.441_8;
/// Earth equatorial radius [km].
pub const R_EARTH: f64 = 6_378.137;
/// Sidereal rotation rate of the Earth [rad/s].
pub const EARTH_ROTATION_RATE: f64 = 7.2921e-5;

const KEPLER_MAX_ITERS: usize = 50;
const KEPLER_TOL: f64 = 1e-12;

/// Classical orbital elements at the scenario epoch. Angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrbitalElements {
    /// [km]
    pub semi_major_axis: f64,
    pub eccentricity: f64,
    pub inclination: f64,
    pub raan: f64,
    pub arg_perigee: f64,
    pub mean_anomaly_epoch: f64,
}

impl OrbitalElements {
    /// 600 km sun-synchronous deployment orbit of the Q-Li satellite.
    pub const QLI: OrbitalElements = OrbitalElements {
        semi_major_axis: 6691.6,
        eccentricity: 0.000_464_40,
        inclination: 96.700,
        raan: 100.90,
        arg_perigee: 119.70,
        mean_anomaly_epoch: 240.49,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.semi_major_axis.is_finite() && self.semi_major_axis > R_EARTH) {
            return Err(Error::invalid(
                "orbit.semi_major_axis",
                format!(
                    "must exceed the Earth radius {R_EARTH} km, got {}",
                    self.semi_major_axis
                ),
            ));
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(Error::invalid(
                "orbit.eccentricity",
                format!("must lie in [0, 1), got {}", self.eccentricity),
            ));
        }
        for (name, v) in [
            ("orbit.inclination", self.inclination),
            ("orbit.raan", self.raan),
            ("orbit.arg_perigee", self.arg_perigee),
            ("orbit.mean_anomaly_epoch", self.mean_anomaly_epoch),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "angle must be finite"));
            }
        }
        Ok(())
    }

    /// Mean motion [rad/s].
    pub fn mean_motion(&self) -> f64 {
        (MU_EARTH / self.semi_major_axis.powi(3)).sqrt()
    }

    /// Orbital period [s].
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.mean_motion()
    }
}

/// Solve Kepler's equation `E - e sin E = M` by Newton iteration seeded at `M`.
pub fn solve_kepler(mean_anomaly: f64, e: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&e) {
        return Err(Error::invalid("eccentricity", format!("must lie in [0, 1), got {e}")));
    }
    let mut ecc_anomaly = mean_anomaly;
    let mut residual = ecc_anomaly - e * ecc_anomaly.sin() - mean_anomaly;
    for _ in 0..KEPLER_MAX_ITERS {
        if residual.abs() < KEPLER_TOL {
            return Ok(ecc_anomaly);
        }
        ecc_anomaly -= residual / (1.0 - e * ecc_anomaly.cos());
        residual = ecc_anomaly - e * ecc_anomaly.sin() - mean_anomaly;
    }
    if residual.abs() < KEPLER_TOL {
        return Ok(ecc_anomaly);
    }
    Err(Error::KeplerNonConvergence {
        mean_anomaly,
        eccentricity: e,
        iterations: KEPLER_MAX_ITERS,
        residual,
    })
}

/// Two-body position in the Earth-centered inertial frame [km], `t` seconds past epoch.
pub fn propagate_position(el: &OrbitalElements, t: f64) -> Result<Vector3<f64>> {
    let tau = 2.0 * std::f64::consts::PI;
    let mean_anomaly = (el.mean_anomaly_epoch.to_radians() + el.mean_motion() * t).rem_euclid(tau);
    let e = el.eccentricity;
    let ecc_anomaly = solve_kepler(mean_anomaly, e)?;
    let a = el.semi_major_axis;
    let perifocal = Vector3::new(
        a * (ecc_anomaly.cos() - e),
        a * (1.0 - e * e).sqrt() * ecc_anomaly.sin(),
        0.0,
    );
    let rotation = Rotation3::from_axis_angle(&Vector3::z_axis(), el.raan.to_radians())
        * Rotation3::from_axis_angle(&Vector3::x_axis(), el.inclination.to_radians())
        * Rotation3::from_axis_angle(&Vector3::z_axis(), el.arg_perigee.to_radians());
    Ok(rotation * perifocal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DipoleMode {
    /// Dipole axis fixed along the inertial z-axis.
    Aligned,
    /// Dipole axis tilted from the spin axis and co-rotating with the Earth.
    Tilted,
}

/// Parameters of the centered dipole field model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DipoleModelConfig {
    /// Equatorial surface field strength [T].
    pub b0: f64,
    /// Angle between dipole axis and Earth spin axis [deg].
    pub tilt_deg: f64,
    /// [rad/s]
    pub earth_rotation_rate: f64,
    /// Longitude of the dipole axis at epoch [deg].
    pub initial_phase_deg: f64,
    pub mode: DipoleMode,
}

impl Default for DipoleModelConfig {
    fn default() -> Self {
        DipoleModelConfig {
            b0: 3.12e-5,
            tilt_deg: 11.44,
            earth_rotation_rate: EARTH_ROTATION_RATE,
            initial_phase_deg: 0.0,
            mode: DipoleMode::Tilted,
        }
    }
}

impl DipoleModelConfig {
    pub fn aligned(b0: f64) -> Self {
        DipoleModelConfig {
            b0,
            mode: DipoleMode::Aligned,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0.is_finite() && self.b0 > 0.0) {
            return Err(Error::invalid("field.b0", format!("must be positive, got {}", self.b0)));
        }
        if !(0.0..=20.0).contains(&self.tilt_deg) {
            return Err(Error::invalid(
                "field.tilt_deg",
                format!("must lie in [0, 20] deg, got {}", self.tilt_deg),
            ));
        }
        if !self.earth_rotation_rate.is_finite() {
            return Err(Error::invalid("field.earth_rotation_rate", "must be finite"));
        }
        if !self.initial_phase_deg.is_finite() {
            return Err(Error::invalid("field.initial_phase_deg", "must be finite"));
        }
        Ok(())
    }

    /// Unit vector of the dipole moment in the inertial frame at time `t`.
    ///
    /// The geomagnetic dipole points towards the southern hemisphere, so the
    /// field at the magnetic equator points north.
    pub fn dipole_axis(&self, t: f64) -> Vector3<f64> {
        match self.mode {
            DipoleMode::Aligned => -Vector3::z(),
            DipoleMode::Tilted => {
                let tilt = self.tilt_deg.to_radians();
                let lon = self.initial_phase_deg.to_radians() + self.earth_rotation_rate * t;
                -Vector3::new(tilt.sin() * lon.cos(), tilt.sin() * lon.sin(), tilt.cos())
            }
        }
    }
}

/// Field of a centered dipole at inertial position `r` [km], in tesla.
pub fn dipole_field_inertial(r: &Vector3<f64>, t: f64, cfg: &DipoleModelConfig) -> Vector3<f64> {
    let radius = r.norm();
    let r_hat = r / radius;
    let m_hat = cfg.dipole_axis(t);
    let scale = cfg.b0 * (R_EARTH / radius).powi(3);
    (r_hat * (3.0 * m_hat.dot(&r_hat)) - m_hat) * scale
}

/// Rotate an inertial field vector into the body frame.
pub fn field_in_body(q: &AttitudeQuaternion, b_eci: &Vector3<f64>) -> BodyFieldVector {
    q.to_body(b_eci)
}

/// Backward finite difference of two body-frame field samples [T/s].
pub fn bdot_estimate(b_prev: &BodyFieldVector, b_curr: &BodyFieldVector, dt: f64) -> Vector3<f64> {
    (b_curr - b_prev) / dt
}

//! B-dot magnetic detumbling law.
//!
//! The commanded dipole opposes the body-frame rate of change of the field.
//! The single-axis variant keeps only the x-row, which leaves rotation about
//! the torquer axis uncontrolled.

use nalgebra::Vector3;

use crate::dynamics::MagneticDipoleCommand;

/// Field rates below this norm [T/s] give a zero command.
pub const BDOT_EPSILON: f64 = 1e-12;

/// `m = -m_max Ḃ / ‖Ḃ‖`.
pub fn bdot_command_full(bdot: &Vector3<f64>, m_max: f64) -> MagneticDipoleCommand {
    let norm = bdot.norm();
    if norm < BDOT_EPSILON {
        return Vector3::zeros();
    }
    bdot * (-m_max / norm)
}

/// `m = [-m_max Ḃx / ‖Ḃ‖, 0, 0]`, normalized by the full field-rate norm.
pub fn bdot_command_single_axis(bdot: &Vector3<f64>, m_max: f64) -> MagneticDipoleCommand {
    let norm = bdot.norm();
    if norm < BDOT_EPSILON {
        return Vector3::zeros();
    }
    Vector3::new(-m_max * bdot.x / norm, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_command_examples() {
        assert_eq!(
            bdot_command_full(&Vector3::new(1e-6, 0.0, 0.0), 10.0),
            Vector3::new(-10.0, 0.0, 0.0)
        );
        assert_eq!(bdot_command_full(&Vector3::zeros(), 10.0), Vector3::zeros());
        assert_eq!(
            bdot_command_full(&Vector3::new(5e-13, 0.0, 0.0), 10.0),
            Vector3::zeros()
        );
    }

    #[test]
    fn single_axis_examples() {
        assert_eq!(
            bdot_command_single_axis(&Vector3::new(1e-6, 0.0, 0.0), 10.0),
            Vector3::new(-10.0, 0.0, 0.0)
        );
        assert_eq!(
            bdot_command_single_axis(&Vector3::new(0.0, 1e-6, 0.0), 10.0),
            Vector3::zeros()
        );
        assert_eq!(bdot_command_single_axis(&Vector3::zeros(), 10.0), Vector3::zeros());
    }
}

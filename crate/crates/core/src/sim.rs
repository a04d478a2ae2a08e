//! Closed-loop scenario execution.
//!
//! Each control period the runner propagates the orbit, evaluates the dipole
//! field, rotates it into the body frame, asks the controller for a dipole
//! command and integrates the attitude with RK4 while holding that command.

use nalgebra::{Quaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bdot::{bdot_command_full, bdot_command_single_axis};
use crate::dynamics::{
    euler_rates, lyapunov_value, magnetic_torque, quaternion_rate, AngularVelocity, AttitudeQuaternion,
    BodyFieldVector, InertiaTensor, MagneticDipoleCommand, Torque,
};
use crate::error::{Error, Result};
use crate::nmpc::{MpcStep, NmpcController, NmpcSettings, WeightSchedule};
use crate::orbit::{
    bdot_estimate, dipole_field_inertial, field_in_body, propagate_position, DipoleModelConfig, OrbitalElements,
};

/// Angular velocity and attitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyState {
    pub omega: AngularVelocity,
    pub attitude: AttitudeQuaternion,
}

impl BodyState {
    pub fn is_finite(&self) -> bool {
        self.omega.iter().all(|x| x.is_finite()) && self.attitude.scalar_first().iter().all(|x| x.is_finite())
    }
}

/// Classical RK4 on the coupled `(ω, q)` system with the torque held
/// constant; the quaternion is renormalized afterwards.
pub fn rk4_step(state: &BodyState, torque: &Torque, j: &InertiaTensor, dt: f64) -> BodyState {
    let deriv = |w: &Vector3<f64>, q: &Quaternion<f64>| (euler_rates(w, torque, j), quaternion_rate(q, w));
    let w0 = state.omega;
    let q0 = *state.attitude.quaternion();

    let (k1w, k1q) = deriv(&w0, &q0);
    let (k2w, k2q) = deriv(&(w0 + k1w * (0.5 * dt)), &(q0 + k1q * (0.5 * dt)));
    let (k3w, k3q) = deriv(&(w0 + k2w * (0.5 * dt)), &(q0 + k2q * (0.5 * dt)));
    let (k4w, k4q) = deriv(&(w0 + k3w * dt), &(q0 + k3q * dt));

    let omega = w0 + (k1w + k2w * 2.0 + k3w * 2.0 + k4w) * (dt / 6.0);
    let q = q0 + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
    BodyState {
        omega,
        attitude: AttitudeQuaternion::from_quaternion(q),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ControllerKind {
    /// Three-axis B-dot.
    #[serde(rename = "bdot-full")]
    BdotFull,
    /// B-dot restricted to the x-axis torquer.
    #[serde(rename = "bdot-x")]
    BdotX,
    #[serde(rename = "mpc")]
    Mpc,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::BdotFull => "bdot-full",
            ControllerKind::BdotX => "bdot-x",
            ControllerKind::Mpc => "mpc",
        }
    }
}

/// Where the B-dot law gets the field rate from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BdotSource {
    /// Backward difference of successive body-frame field samples.
    #[default]
    Estimate,
    /// `−ω × B`, the rate seen by a body spinning in a frozen inertial field.
    Exact,
}

fn default_control_period() -> f64 {
    0.1
}

fn default_settle_threshold() -> f64 {
    0.1
}

fn identity_attitude() -> [f64; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

/// Everything that defines one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub inertia: InertiaTensor,
    /// Dipole limit [A·m²].
    pub m_max: f64,
    /// Body rates at t = 0 [rad/s].
    pub initial_rates: [f64; 3],
    /// Scalar-first attitude at t = 0.
    #[serde(default = "identity_attitude")]
    pub initial_attitude: [f64; 4],
    pub orbit: OrbitalElements,
    #[serde(default)]
    pub field: DipoleModelConfig,
    pub controller: ControllerKind,
    /// [s]
    pub duration: f64,
    /// Zero-order-hold period Δt [s].
    #[serde(default = "default_control_period")]
    pub control_period: f64,
    /// RK4 step; defaults to the control period.
    #[serde(default)]
    pub inner_step: Option<f64>,
    #[serde(default)]
    pub bdot_source: BdotSource,
    /// Per-axis "detumbled" threshold [deg/s].
    #[serde(default = "default_settle_threshold")]
    pub settle_threshold_deg_s: f64,
    #[serde(default)]
    pub mpc: NmpcSettings,
    #[serde(default)]
    pub weights: WeightSchedule,
}

impl ScenarioConfig {
    /// Q-Li deployment: flight inertia, 10 A·m² torquer, 0.1 rad/s on
    /// every axis, 250 minutes.
    pub fn qli_baseline(controller: ControllerKind) -> Self {
        ScenarioConfig {
            inertia: InertiaTensor::QLI,
            m_max: 10.0,
            initial_rates: [0.1, 0.1, 0.1],
            initial_attitude: identity_attitude(),
            orbit: OrbitalElements::QLI,
            field: DipoleModelConfig::default(),
            controller,
            duration: 250.0 * 60.0,
            control_period: default_control_period(),
            inner_step: None,
            bdot_source: BdotSource::Estimate,
            settle_threshold_deg_s: default_settle_threshold(),
            mpc: NmpcSettings::default(),
            weights: WeightSchedule::default(),
        }
    }

    pub fn inner_step(&self) -> f64 {
        self.inner_step.unwrap_or(self.control_period)
    }

    /// Control periods after t = 0; the run records `steps() + 1` samples.
    pub fn steps(&self) -> usize {
        (self.duration / self.control_period + 1e-9).floor() as usize
    }

    pub fn substeps(&self) -> usize {
        (self.control_period / self.inner_step()).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.inertia.validate()?;
        if !(self.m_max.is_finite() && self.m_max > 0.0) {
            return Err(Error::invalid("m_max", format!("must be positive, got {}", self.m_max)));
        }
        if self.initial_rates.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("initial_rates", "must be finite"));
        }
        let qn = self.initial_attitude.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !(qn.is_finite() && qn > 0.0) {
            return Err(Error::invalid(
                "initial_attitude",
                "must be a non-zero finite quaternion",
            ));
        }
        self.orbit.validate()?;
        self.field.validate()?;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid(
                "duration",
                format!("must be positive, got {}", self.duration),
            ));
        }
        if !(self.control_period.is_finite() && self.control_period > 0.0) {
            return Err(Error::invalid("control_period", "must be positive"));
        }
        let inner = self.inner_step();
        if !(inner.is_finite() && inner > 0.0 && inner <= self.control_period * (1.0 + 1e-12)) {
            return Err(Error::invalid(
                "inner_step",
                "must be positive and no larger than control_period",
            ));
        }
        let ratio = self.control_period / inner;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::invalid(
                "inner_step",
                "control_period must be an integer multiple of inner_step",
            ));
        }
        if !(self.settle_threshold_deg_s.is_finite() && self.settle_threshold_deg_s > 0.0) {
            return Err(Error::invalid("settle_threshold_deg_s", "must be positive"));
        }
        self.weights.validate()?;
        if self.controller == ControllerKind::Mpc {
            self.mpc.validate(self.control_period)?;
        }
        Ok(())
    }

    /// Geomagnetic field in the body frame at time `t` and attitude `q`.
    pub fn body_field(&self, t: f64, q: &AttitudeQuaternion) -> Result<BodyFieldVector> {
        let r = propagate_position(&self.orbit, t)?;
        Ok(field_in_body(q, &dipole_field_inertial(&r, t, &self.field)))
    }
}

/// Controller internals logged alongside the MPC trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpcDiagnostics {
    pub v: f64,
    pub rho0: f64,
    pub residual_norm: f64,
    pub condition: u8,
    pub clamped: bool,
    pub gmres_iterations: usize,
    pub constraint_violation: f64,
}

impl From<&MpcStep> for MpcDiagnostics {
    fn from(step: &MpcStep) -> Self {
        MpcDiagnostics {
            v: step.stage0.v,
            rho0: step.stage0.rho,
            residual_norm: step.residual_norm,
            condition: step.condition.index(),
            clamped: step.clamped,
            gmres_iterations: step.gmres_iterations,
            constraint_violation: step.constraint_violation,
        }
    }
}

/// One sample per control step: the state at `t` and the command held over `[t, t + Δt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub t: f64,
    pub omega: AngularVelocity,
    /// Scalar-first.
    pub attitude: [f64; 4],
    pub b_body: BodyFieldVector,
    pub command: MagneticDipoleCommand,
    pub lyapunov: f64,
    pub mpc: Option<MpcDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetumbleMetrics {
    pub settle_threshold: f64,
    /// Per-axis time after which |ω| stays below the threshold; `None` if it never settles.
    pub settle_time: [Option<f64>; 3],
    pub final_rates: [f64; 3],
    pub max_residual_norm: Option<f64>,
    pub min_v: Option<f64>,
}

impl DetumbleMetrics {
    pub fn all_settled(&self) -> bool {
        self.settle_time.iter().all(Option::is_some)
    }
}

/// Metrics over a non-empty log; `settle_threshold` in rad/s.
pub fn compute_metrics(records: &[SimulationRecord], settle_threshold: f64) -> DetumbleMetrics {
    let mut settle_time = [None; 3];
    for (axis, slot) in settle_time.iter_mut().enumerate() {
        let last_above = records.iter().rposition(|r| r.omega[axis].abs() >= settle_threshold);
        *slot = match last_above {
            None => records.first().map(|r| r.t),
            Some(i) => records.get(i + 1).map(|r| r.t),
        };
    }
    let final_rates = records.last().map_or([0.0; 3], |r| [r.omega.x, r.omega.y, r.omega.z]);
    let mpc = || records.iter().filter_map(|r| r.mpc.as_ref());
    DetumbleMetrics {
        settle_threshold,
        settle_time,
        final_rates,
        max_residual_norm: mpc().map(|m| m.residual_norm).reduce(f64::max),
        min_v: mpc().map(|m| m.v).reduce(f64::min),
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Setup(#[from] Error),
    #[error("non-finite state at step {step} (t = {time} s); {} records kept", records.len())]
    NonFinite {
        step: usize,
        time: f64,
        records: Vec<SimulationRecord>,
    },
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub records: Vec<SimulationRecord>,
    pub metrics: DetumbleMetrics,
}

enum ActiveController {
    Bdot {
        single_axis: bool,
        source: BdotSource,
        previous_field: Option<BodyFieldVector>,
    },
    Mpc(Box<NmpcController>),
}

impl ActiveController {
    fn command(
        &mut self,
        w: &AngularVelocity,
        b: &BodyFieldVector,
        m_max: f64,
        dt: f64,
    ) -> Result<(MagneticDipoleCommand, Option<MpcDiagnostics>)> {
        match self {
            ActiveController::Bdot {
                single_axis,
                source,
                previous_field,
            } => {
                let bdot = match source {
                    BdotSource::Exact => Some(-w.cross(b)),
                    BdotSource::Estimate => previous_field.map(|prev| bdot_estimate(&prev, b, dt)),
                };
                *previous_field = Some(*b);
                let m = match bdot {
                    // No field history on the first sample.
                    None => Vector3::zeros(),
                    Some(bdot) if *single_axis => bdot_command_single_axis(&bdot, m_max),
                    Some(bdot) => bdot_command_full(&bdot, m_max),
                };
                Ok((m, None))
            }
            ActiveController::Mpc(ctrl) => {
                let step = ctrl.step(w, b)?;
                Ok((step.command, Some(MpcDiagnostics::from(&step))))
            }
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> std::result::Result<ScenarioRun, SimulationError> {
    cfg.validate()?;
    let dt = cfg.control_period;
    let inner = cfg.inner_step();
    let substeps = cfg.substeps();
    let steps = cfg.steps();
    let j = cfg.inertia;

    let mut controller = match cfg.controller {
        ControllerKind::BdotFull | ControllerKind::BdotX => ActiveController::Bdot {
            single_axis: cfg.controller == ControllerKind::BdotX,
            source: cfg.bdot_source,
            previous_field: None,
        },
        ControllerKind::Mpc => {
            ActiveController::Mpc(Box::new(NmpcController::new(j, cfg.m_max, &cfg.mpc, cfg.weights, dt)?))
        }
    };

    let mut state = BodyState {
        omega: Vector3::from(cfg.initial_rates),
        attitude: AttitudeQuaternion::from_scalar_first(cfg.initial_attitude),
    };
    let mut records = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let t = k as f64 * dt;
        let b_body = cfg.body_field(t, &state.attitude)?;
        let (command, mpc) = controller.command(&state.omega, &b_body, cfg.m_max, dt)?;
        records.push(SimulationRecord {
            t,
            omega: state.omega,
            attitude: state.attitude.scalar_first(),
            b_body,
            command,
            lyapunov: lyapunov_value(&state.omega, &j),
            mpc,
        });
        if k == steps {
            break;
        }
        for s in 0..substeps {
            let b = if s == 0 {
                b_body
            } else {
                cfg.body_field(t + s as f64 * inner, &state.attitude)?
            };
            state = rk4_step(&state, &magnetic_torque(&command, &b), &j, inner);
        }
        if !state.is_finite() {
            return Err(SimulationError::NonFinite {
                step: k + 1,
                time: (k + 1) as f64 * dt,
                records,
            });
        }
    }
    let metrics = compute_metrics(&records, cfg.settle_threshold_deg_s.to_radians());
    Ok(ScenarioRun { records, metrics })
}

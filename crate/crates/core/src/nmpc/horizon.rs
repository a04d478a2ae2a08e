//! Horizon discretization, Hamiltonian and the KKT residual `F(U, ω)`.
//!
//! The horizon `[t, t + T]` is split into `N` stages of length `Δτ = T / N`.
//! States are rolled forward and costates backward with explicit Euler steps.
//! Stage `i` pairs the state `ω_i` with the costate `λ_{i+1}`.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::weights::ActiveWeights;
use crate::dynamics::{euler_rates, single_axis_torque, AngularVelocity, BodyFieldVector, InertiaTensor};
use crate::error::{Error, Result};

/// Costate of the angular velocity at one horizon node.
pub type Costate = Vector3<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonConfig {
    /// Prediction horizon `T` [s].
    pub horizon: f64,
    /// Number of stages `N`.
    pub steps: usize,
}

impl HorizonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("mpc.horizon", "must be positive"));
        }
        if self.steps == 0 {
            return Err(Error::invalid("mpc.steps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn stage_dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }
}

/// Input `[mx, v]` and constraint multiplier `ρ` of one stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlStage {
    pub mx: f64,
    pub v: f64,
    pub rho: f64,
}

impl ControlStage {
    /// Residual of `mx² + v² = m_max²`.
    pub fn constraint(&self, m_max: f64) -> f64 {
        self.mx * self.mx + self.v * self.v - m_max * m_max
    }
}

/// Horizon unknowns flattened as `[mx0, v0, ρ0, mx1, v1, ρ1, …]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionVector(Vec<f64>);

impl SolutionVector {
    pub const STAGE_DIM: usize = 3;

    pub fn from_stages(stages: &[ControlStage]) -> Self {
        SolutionVector(stages.iter().flat_map(|s| [s.mx, s.v, s.rho]).collect())
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(Self::STAGE_DIM) {
            return Err(Error::invalid(
                "solution",
                format!("length {} is not a positive multiple of 3", values.len()),
            ));
        }
        Ok(SolutionVector(values))
    }

    /// The same stage repeated `n` times.
    pub fn uniform(stage: ControlStage, n: usize) -> Self {
        Self::from_stages(&vec![stage; n])
    }

    pub fn num_stages(&self) -> usize {
        self.0.len() / Self::STAGE_DIM
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn stage(&self, i: usize) -> ControlStage {
        let s = &self.0[Self::STAGE_DIM * i..Self::STAGE_DIM * (i + 1)];
        ControlStage {
            mx: s[0],
            v: s[1],
            rho: s[2],
        }
    }

    pub fn stages(&self) -> impl Iterator<Item = ControlStage> + '_ {
        (0..self.num_stages()).map(move |i| self.stage(i))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `self + alpha · direction`.
    pub fn offset(&self, alpha: f64, direction: &[f64]) -> SolutionVector {
        debug_assert_eq!(direction.len(), self.0.len());
        SolutionVector(self.0.iter().zip(direction).map(|(u, d)| u + alpha * d).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Largest `|mx_i² + v_i² − m_max²|` over the horizon.
    pub fn max_constraint_violation(&self, m_max: f64) -> f64 {
        self.stages().map(|s| s.constraint(m_max).abs()).fold(0.0, f64::max)
    }
}

/// Everything besides `U` and `ω` that the residual depends on. Frozen over
/// one controller step.
#[derive(Debug, Clone)]
pub struct HorizonProblem {
    pub inertia: InertiaTensor,
    pub m_max: f64,
    pub weights: ActiveWeights,
    pub horizon: HorizonConfig,
    /// Body-frame field per stage, length `N`.
    pub field: Vec<BodyFieldVector>,
}

impl HorizonProblem {
    /// Field held at `b` over every stage.
    pub fn with_constant_field(
        inertia: InertiaTensor,
        m_max: f64,
        weights: ActiveWeights,
        horizon: HorizonConfig,
        b: BodyFieldVector,
    ) -> Self {
        HorizonProblem {
            inertia,
            m_max,
            weights,
            horizon,
            field: vec![b; horizon.steps],
        }
    }

    pub fn dim(&self) -> usize {
        SolutionVector::STAGE_DIM * self.horizon.steps
    }

    pub fn residual(&self, u: &SolutionVector, w_now: &AngularVelocity) -> Vec<f64> {
        kkt_residual(u, w_now, self)
    }
}

/// `½(Q₁ωx² + Q₂ωy² + Q₃ωz²) + R₁mx² − R₂v`.
pub fn stage_cost(w: &AngularVelocity, u: &ControlStage, weights: &ActiveWeights) -> f64 {
    let q = &weights.q;
    0.5 * (q[0] * w.x * w.x + q[1] * w.y * w.y + q[2] * w.z * w.z) + weights.r1 * u.mx * u.mx - weights.r2 * u.v
}

/// Unit-weighted `½‖ω‖²` at the end of the horizon.
pub fn terminal_cost(w: &AngularVelocity) -> f64 {
    0.5 * w.norm_squared()
}

fn stage_dynamics(w: &AngularVelocity, mx: f64, b: &BodyFieldVector, j: &InertiaTensor) -> Vector3<f64> {
    euler_rates(w, &single_axis_torque(mx, b), j)
}

pub fn hamiltonian(
    w: &AngularVelocity,
    u: &ControlStage,
    lambda: &Costate,
    b: &BodyFieldVector,
    weights: &ActiveWeights,
    j: &InertiaTensor,
    m_max: f64,
) -> f64 {
    stage_cost(w, u, weights) + lambda.dot(&stage_dynamics(w, u.mx, b, j)) + u.rho * u.constraint(m_max)
}

/// `[∂H/∂mx, ∂H/∂v]`.
pub fn hamiltonian_grad_u(
    u: &ControlStage,
    lambda: &Costate,
    b: &BodyFieldVector,
    weights: &ActiveWeights,
    j: &InertiaTensor,
) -> Vector2<f64> {
    Vector2::new(
        2.0 * weights.r1 * u.mx - lambda.y * b.z / j.jy + lambda.z * b.y / j.jz + 2.0 * u.rho * u.mx,
        -weights.r2 + 2.0 * u.rho * u.v,
    )
}

/// `∂H/∂ω`; the input enters the dynamics linearly, so only the gyroscopic
/// coupling and the state cost contribute.
pub fn hamiltonian_grad_w(
    w: &AngularVelocity,
    lambda: &Costate,
    weights: &ActiveWeights,
    j: &InertiaTensor,
) -> Vector3<f64> {
    let a = (j.jy - j.jz) / j.jx;
    let b = (j.jz - j.jx) / j.jy;
    let c = (j.jx - j.jy) / j.jz;
    let q = &weights.q;
    Vector3::new(
        q[0] * w.x + lambda.y * b * w.z + lambda.z * c * w.y,
        q[1] * w.y + lambda.x * a * w.z + lambda.z * c * w.x,
        q[2] * w.z + lambda.x * a * w.y + lambda.y * b * w.x,
    )
}

/// Predicted states `ω₀ … ω_N` under the inputs in `u`.
pub fn forward_rollout(
    w_now: &AngularVelocity,
    u: &SolutionVector,
    field: &[BodyFieldVector],
    cfg: &HorizonConfig,
    j: &InertiaTensor,
) -> Vec<AngularVelocity> {
    let dtau = cfg.stage_dt();
    let mut states = Vec::with_capacity(cfg.steps + 1);
    states.push(*w_now);
    for i in 0..cfg.steps {
        let w = states[i];
        states.push(w + stage_dynamics(&w, u.stage(i).mx, &field[i], j) * dtau);
    }
    states
}

/// Costates `λ₁ … λ_N`; element `i` of the result is `λ_{i+1}`, the costate
/// paired with stage `i`.
pub fn backward_costates(
    states: &[AngularVelocity],
    _u: &SolutionVector,
    _field: &[BodyFieldVector],
    weights: &ActiveWeights,
    cfg: &HorizonConfig,
    j: &InertiaTensor,
) -> Vec<Costate> {
    let n = cfg.steps;
    let dtau = cfg.stage_dt();
    let mut costates = vec![Vector3::zeros(); n];
    costates[n - 1] = states[n];
    for i in (1..n).rev() {
        let next = costates[i];
        costates[i - 1] = next + hamiltonian_grad_w(&states[i], &next, weights, j) * dtau;
    }
    costates
}

/// Residual of the optimality conditions: per stage `[∂H/∂mx, ∂H/∂v, mx² + v² − m_max²]`.
pub fn kkt_residual(u: &SolutionVector, w_now: &AngularVelocity, problem: &HorizonProblem) -> Vec<f64> {
    let mut out = vec![0.0; problem.dim()];
    kkt_residual_into(u, w_now, problem, &mut out);
    out
}

pub fn kkt_residual_into(u: &SolutionVector, w_now: &AngularVelocity, problem: &HorizonProblem, out: &mut [f64]) {
    let cfg = &problem.horizon;
    let j = &problem.inertia;
    let states = forward_rollout(w_now, u, &problem.field, cfg, j);
    let costates = backward_costates(&states, u, &problem.field, &problem.weights, cfg, j);
    for (i, lambda) in costates.iter().enumerate() {
        let stage = u.stage(i);
        let grad = hamiltonian_grad_u(&stage, lambda, &problem.field[i], &problem.weights, j);
        out[3 * i] = grad.x;
        out[3 * i + 1] = grad.y;
        out[3 * i + 2] = stage.constraint(problem.m_max);
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

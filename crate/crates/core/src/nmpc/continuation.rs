//! Continuation update of the horizon solution and the closed-loop controller.
//!
//! Rather than re-solving `F(U, ω) = 0` at every sample, the solution is
//! advanced along `dF/dt = −ζ F`. The linear system for `U̇` is solved by
//! matrix-free GMRES whose operator is a forward difference of `F` along the
//! Krylov direction.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gmres::gmres_solve_from;
use super::horizon::{kkt_residual, norm, ControlStage, HorizonConfig, HorizonProblem, SolutionVector};
use super::weights::{select_weights, WeightCondition, WeightSchedule};
use crate::dynamics::{
    euler_rates, single_axis_torque, AngularVelocity, BodyFieldVector, InertiaTensor, MagneticDipoleCommand,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationParams {
    /// Stabilization gain `ζ` [1/s].
    pub zeta: f64,
    /// Forward-difference step `h` [s].
    pub fd_step: f64,
    /// Controller sampling period `Δt` [s].
    pub sampling_period: f64,
    pub gmres_max_iters: usize,
    pub gmres_tol: f64,
}

impl ContinuationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.zeta.is_finite() && self.zeta > 0.0) {
            return Err(Error::invalid(
                "mpc.zeta",
                format!("must be positive, got {}", self.zeta),
            ));
        }
        if !(self.sampling_period.is_finite() && self.sampling_period > 0.0) {
            return Err(Error::invalid("control_period", "must be positive"));
        }
        if !(self.fd_step > 0.0 && self.fd_step <= 0.01 * self.sampling_period) {
            return Err(Error::invalid(
                "mpc.fd_step",
                format!(
                    "must satisfy 0 < h <= 0.01 * control_period ({}), got {}",
                    0.01 * self.sampling_period,
                    self.fd_step
                ),
            ));
        }
        if self.gmres_max_iters == 0 {
            return Err(Error::invalid("mpc.gmres_max_iters", "must be at least 1"));
        }
        if !(self.gmres_tol.is_finite() && self.gmres_tol >= 0.0) {
            return Err(Error::invalid("mpc.gmres_tol", "must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOutcome {
    /// `U + Δt · U̇`, or `U` unchanged after a GMRES breakdown.
    pub solution: SolutionVector,
    pub rate: Vec<f64>,
    /// `‖F(U, ω)‖` before the update.
    pub residual_norm: f64,
    pub gmres_iterations: usize,
    pub gmres_residual: f64,
    pub breakdown: bool,
}

/// One continuation step.
///
/// `warm_start` seeds GMRES with the previous `U̇`. The horizon problem is
/// autonomous (field and weights are frozen over the horizon), so the explicit
/// time shift of the residual vanishes and only the state shift `h · ω̇`
/// remains.
pub fn continuation_step(
    u: &SolutionVector,
    w_now: &AngularVelocity,
    w_rate: &AngularVelocity,
    params: &ContinuationParams,
    problem: &HorizonProblem,
    warm_start: Option<&[f64]>,
) -> ContinuationOutcome {
    let h = params.fd_step;
    let w_shift = w_now + w_rate * h;
    let f = kkt_residual(u, w_now, problem);
    let f_shift = kkt_residual(u, &w_shift, problem);
    let rhs: Vec<f64> = f
        .iter()
        .zip(&f_shift)
        .map(|(f0, fs)| -params.zeta * f0 - (fs - f0) / h)
        .collect();

    let apply = |dir: &[f64]| -> Vec<f64> {
        let shifted = u.offset(h, dir);
        kkt_residual(&shifted, &w_shift, problem)
            .iter()
            .zip(&f_shift)
            .map(|(a, b)| (a - b) / h)
            .collect()
    };
    let zeros;
    let x0 = match warm_start {
        Some(x0) if x0.len() == u.len() => x0,
        _ => {
            zeros = vec![0.0; u.len()];
            &zeros
        }
    };
    let solved = gmres_solve_from(apply, &rhs, x0, params.gmres_max_iters, params.gmres_tol);

    let residual_norm = norm(&f);
    if solved.breakdown || solved.x.iter().any(|x| !x.is_finite()) {
        warn!(
            "GMRES breakdown after {} iterations (residual {:e}); holding the horizon solution",
            solved.iterations, solved.residual_norm
        );
        return ContinuationOutcome {
            solution: u.clone(),
            rate: vec![0.0; u.len()],
            residual_norm,
            gmres_iterations: solved.iterations,
            gmres_residual: solved.residual_norm,
            breakdown: true,
        };
    }
    ContinuationOutcome {
        solution: u.offset(params.sampling_period, &solved.x),
        rate: solved.x,
        residual_norm,
        gmres_iterations: solved.iterations,
        gmres_residual: solved.residual_norm,
        breakdown: false,
    }
}

const NEWTON_MAX_ITERS: usize = 100;
const NEWTON_POLISH_ITERS: usize = 3;

/// Starting point of the Newton solve: no dipole, all authority in the slack,
/// and `ρ` chosen so that `∂H/∂v = 0`.
pub fn seed_solution(problem: &HorizonProblem) -> SolutionVector {
    let m_max = problem.m_max;
    SolutionVector::uniform(
        ControlStage {
            mx: 0.0,
            v: m_max,
            rho: problem.weights.r2 / (2.0 * m_max),
        },
        problem.horizon.steps,
    )
}

/// Tolerance on `‖F‖` that [`initialize_solution`] must reach.
pub fn initialization_tolerance(problem: &HorizonProblem) -> f64 {
    1e-8 * (problem.dim() as f64).sqrt() * problem.m_max * problem.m_max
}

/// Central-difference Jacobian of the KKT residual.
pub fn residual_jacobian(u: &SolutionVector, w: &AngularVelocity, problem: &HorizonProblem) -> DMatrix<f64> {
    let n = problem.dim();
    let mut jac = DMatrix::zeros(n, n);
    let mut probe = u.clone();
    for k in 0..n {
        let base = u.as_slice()[k];
        let step = 1e-6 * base.abs().max(1.0);
        probe.as_mut_slice()[k] = base + step;
        let plus = kkt_residual(&probe, w, problem);
        probe.as_mut_slice()[k] = base - step;
        let minus = kkt_residual(&probe, w, problem);
        probe.as_mut_slice()[k] = base;
        for r in 0..n {
            jac[(r, k)] = (plus[r] - minus[r]) / (2.0 * step);
        }
    }
    jac
}

/// Damped Newton solve of `F(U, ω₀) = 0`.
pub fn initialize_solution(w0: &AngularVelocity, problem: &HorizonProblem) -> Result<SolutionVector> {
    let target = initialization_tolerance(problem);
    let mut u = seed_solution(problem);
    let mut f = kkt_residual(&u, w0, problem);
    let mut f_norm = norm(&f);
    let mut polish = 0;
    for iter in 0..NEWTON_MAX_ITERS {
        if f_norm < target {
            if polish == NEWTON_POLISH_ITERS || f_norm == 0.0 {
                debug!("initialization converged in {iter} Newton iterations, |F| = {f_norm:e}");
                return Ok(u);
            }
            polish += 1;
        }
        let jac = residual_jacobian(&u, w0, problem);
        let Some(step) = jac.lu().solve(&(-DVector::from_column_slice(&f))) else {
            break;
        };
        let mut alpha = 1.0;
        let mut accepted = false;
        while alpha >= 1.0 / 1024.0 {
            let trial = u.offset(alpha, step.as_slice());
            let f_trial = kkt_residual(&trial, w0, problem);
            let trial_norm = norm(&f_trial);
            if trial_norm.is_finite() && trial_norm < f_norm {
                u = trial;
                f = f_trial;
                f_norm = trial_norm;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No further decrease is possible at this precision.
            if f_norm < target {
                return Ok(u);
            }
            break;
        }
    }
    if f_norm < target {
        return Ok(u);
    }
    Err(Error::NewtonNonConvergence {
        iterations: NEWTON_MAX_ITERS,
        residual: f_norm,
        target,
    })
}

/// Stage-0 dipole, clamped to the actuator limit. The flag reports clamping.
pub fn mpc_command(u: &SolutionVector, m_max: f64) -> (MagneticDipoleCommand, bool) {
    let mx = u.stage(0).mx;
    let clamped = mx.abs() > m_max;
    (MagneticDipoleCommand::new(mx.clamp(-m_max, m_max), 0.0, 0.0), clamped)
}

/// Solver settings of the predictive controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NmpcSettings {
    /// Horizon length `T` [s].
    #[serde(default = "NmpcSettings::default_horizon")]
    pub horizon: f64,
    #[serde(default = "NmpcSettings::default_steps")]
    pub steps: usize,
    #[serde(default = "NmpcSettings::default_zeta")]
    pub zeta: f64,
    #[serde(default = "NmpcSettings::default_fd_step")]
    pub fd_step: f64,
    /// Defaults to the problem dimension `3N`.
    #[serde(default)]
    pub gmres_max_iters: Option<usize>,
    #[serde(default = "NmpcSettings::default_gmres_tol")]
    pub gmres_tol: f64,
}

impl NmpcSettings {
    // A one-second horizon leaves the x-axis practically uncontrollable: the
    // dipole reaches it only through gyroscopic coupling, whose effect grows
    // with the square of the look-ahead time.
    fn default_horizon() -> f64 {
        12.0
    }
    fn default_steps() -> usize {
        24
    }
    fn default_zeta() -> f64 {
        10.0
    }
    fn default_fd_step() -> f64 {
        1e-6
    }
    fn default_gmres_tol() -> f64 {
        1e-8
    }

    pub fn horizon_config(&self) -> HorizonConfig {
        HorizonConfig {
            horizon: self.horizon,
            steps: self.steps,
        }
    }

    pub fn continuation_params(&self, sampling_period: f64) -> ContinuationParams {
        ContinuationParams {
            zeta: self.zeta,
            fd_step: self.fd_step,
            sampling_period,
            gmres_max_iters: self.gmres_max_iters.unwrap_or(3 * self.steps),
            gmres_tol: self.gmres_tol,
        }
    }

    pub fn validate(&self, sampling_period: f64) -> Result<()> {
        self.horizon_config().validate()?;
        self.continuation_params(sampling_period).validate()
    }
}

impl Default for NmpcSettings {
    fn default() -> Self {
        NmpcSettings {
            horizon: Self::default_horizon(),
            steps: Self::default_steps(),
            zeta: Self::default_zeta(),
            fd_step: Self::default_fd_step(),
            gmres_max_iters: None,
            gmres_tol: Self::default_gmres_tol(),
        }
    }
}

/// Diagnostics of one controller update.
#[derive(Debug, Clone, PartialEq)]
pub struct MpcStep {
    pub command: MagneticDipoleCommand,
    pub clamped: bool,
    /// `‖F(U, ω)‖` of the solution the command was taken from.
    pub residual_norm: f64,
    pub stage0: ControlStage,
    pub condition: WeightCondition,
    pub gmres_iterations: usize,
    pub breakdown: bool,
    /// Largest constraint residual over the horizon after the update.
    pub constraint_violation: f64,
}

/// Receding-horizon controller owning the current horizon solution.
#[derive(Debug, Clone)]
pub struct NmpcController {
    inertia: InertiaTensor,
    m_max: f64,
    horizon: HorizonConfig,
    params: ContinuationParams,
    schedule: WeightSchedule,
    solution: Option<SolutionVector>,
    rate: Vec<f64>,
}

impl NmpcController {
    pub fn new(
        inertia: InertiaTensor,
        m_max: f64,
        settings: &NmpcSettings,
        schedule: WeightSchedule,
        sampling_period: f64,
    ) -> Result<Self> {
        settings.validate(sampling_period)?;
        schedule.validate()?;
        Ok(NmpcController {
            inertia,
            m_max,
            horizon: settings.horizon_config(),
            params: settings.continuation_params(sampling_period),
            schedule,
            solution: None,
            rate: Vec::new(),
        })
    }

    pub fn solution(&self) -> Option<&SolutionVector> {
        self.solution.as_ref()
    }

    pub fn params(&self) -> &ContinuationParams {
        &self.params
    }

    pub fn problem(&self, w: &AngularVelocity, b: &BodyFieldVector) -> HorizonProblem {
        HorizonProblem::with_constant_field(
            self.inertia,
            self.m_max,
            select_weights(w, &self.schedule),
            self.horizon,
            *b,
        )
    }

    /// Solve for the initial horizon solution and return the first command.
    pub fn initialize(&mut self, w0: &AngularVelocity, b: &BodyFieldVector) -> Result<MpcStep> {
        let problem = self.problem(w0, b);
        let u = initialize_solution(w0, &problem)?;
        let residual_norm = norm(&kkt_residual(&u, w0, &problem));
        self.rate = vec![0.0; u.len()];
        let step = self.report(&u, &problem, residual_norm, 0, false);
        self.solution = Some(u);
        Ok(step)
    }

    /// Advance the horizon solution for the measured rate `w` and field `b`.
    /// Initializes on first use.
    pub fn step(&mut self, w: &AngularVelocity, b: &BodyFieldVector) -> Result<MpcStep> {
        let Some(u) = self.solution.as_ref() else {
            return self.initialize(w, b);
        };
        let problem = self.problem(w, b);
        let mx = u.stage(0).mx.clamp(-self.m_max, self.m_max);
        let w_rate = euler_rates(w, &single_axis_torque(mx, b), &self.inertia);
        let out = continuation_step(u, w, &w_rate, &self.params, &problem, Some(&self.rate));
        let step = self.report(
            &out.solution,
            &problem,
            out.residual_norm,
            out.gmres_iterations,
            out.breakdown,
        );
        self.rate = out.rate;
        self.solution = Some(out.solution);
        Ok(step)
    }

    fn report(
        &self,
        u: &SolutionVector,
        problem: &HorizonProblem,
        residual_norm: f64,
        gmres_iterations: usize,
        breakdown: bool,
    ) -> MpcStep {
        let (command, clamped) = mpc_command(u, self.m_max);
        if clamped {
            debug!("clamped stage-0 dipole {} to ±{}", u.stage(0).mx, self.m_max);
        }
        MpcStep {
            command,
            clamped,
            residual_norm,
            stage0: u.stage(0),
            condition: problem.weights.condition,
            gmres_iterations,
            breakdown,
            constraint_violation: u.max_constraint_violation(self.m_max),
        }
    }
}

//! Nonlinear model-predictive detumbling with a single x-axis dipole.
//!
//! The dipole limit `|mx| ≤ m_max` is turned into the equality
//! `mx² + v² = m_max²` with a slack input `v`, whose negative linear cost keeps
//! it positive. Each stage carries `[mx, v, ρ]`, with `ρ` the multiplier of
//! that equality.

pub mod continuation;
pub mod gmres;
pub mod horizon;
pub mod weights;

pub use continuation::{
    continuation_step, initialize_solution, mpc_command, ContinuationOutcome, ContinuationParams, MpcStep,
    NmpcController, NmpcSettings,
};
pub use gmres::{gmres_solve, gmres_solve_from, GmresOutcome};
pub use horizon::{
    backward_costates, forward_rollout, hamiltonian, hamiltonian_grad_u, hamiltonian_grad_w, kkt_residual, stage_cost,
    terminal_cost, ControlStage, Costate, HorizonConfig, HorizonProblem, SolutionVector,
};
pub use weights::{select_weights, ActiveWeights, WeightCondition, WeightSchedule};

//! Receding-horizon contouring optimizer.
//!
//! Inputs `u_0..u_{N−1}` are the only decision variables; states and progress
//! are eliminated by rolling out the RK4 transcription together with
//! `θ_{k+1} = θ_k + τ·u_k` (surge). Collision constraints enter as quadratic
//! penalties and are re-checked exactly on the returned trajectory.

mod cost;
mod qp;
mod sqp;

pub use cost::stage_cost;
pub use sqp::solve;

use crate::environment::{LinearConstraint, ObstacleInfo, ObstaclePrediction};
use crate::error::{Error, Result};
use crate::path::ReferencePath;
use crate::regulation::{RegulationMode, RegulationParams, RegulationTarget};
use crate::vessel::{disc_centers, step_dynamics, ThrustCommand, VesselModel, VesselState};
use nalgebra::{DMatrix, Matrix2, Matrix4};
use serde::{Deserialize, Serialize};

pub use crate::vessel::fallback_command;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub max_sqp_iters: usize,
    pub max_qp_iters: usize,
    pub constraint_penalty_weight: f64,
    /// Stationarity tolerance on the projected merit gradient.
    pub convergence_tol: f64,
    /// Initial half-width of the box trust region on input steps (N).
    pub trust_region: f64,
    /// Extra clearance the penalties aim for beyond the hard constraints.
    pub penalty_margin: f64,
    /// Penalty weight doublings allowed before declaring infeasibility.
    pub max_penalty_escalations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_sqp_iters: 25,
            max_qp_iters: 40,
            constraint_penalty_weight: 1000.0,
            convergence_tol: 1e-3,
            trust_region: 1.0,
            penalty_margin: 0.03,
            max_penalty_escalations: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub tau: f64,
    /// Weight on `(contour, lag)` errors.
    pub q_eps: [[f64; 2]; 2],
    pub q_v: f64,
    pub u_ref: f64,
    pub q_u: [[f64; 4]; 4],
    pub regulation: RegulationParams,
    /// Scales the whole regulation cost relative to the tracking terms.
    pub regulation_weight: f64,
    /// Safety margin on static and dynamic constraints (m).
    pub delta: f64,
    /// Soft bound on |surge| (m/s).
    pub u_max: f64,
    /// Nearest convex pieces constrained per disc.
    pub max_static_constraints: usize,
    pub solver: SolverSettings,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        let mut q_u = [[0.0; 4]; 4];
        for (i, row) in q_u.iter_mut().enumerate() {
            row[i] = 0.005;
        }
        Self {
            horizon: 20,
            tau: 0.5,
            q_eps: [[0.05, 0.0], [0.0, 0.5]],
            q_v: 2.0,
            u_ref: 0.5,
            q_u,
            // a wider starboard shift than the regulation default breaks the
            // port/starboard tie early enough in closed loop
            regulation: RegulationParams {
                d: 2.0,
                ..RegulationParams::default()
            },
            regulation_weight: 5.0,
            delta: 0.2,
            u_max: 1.5,
            max_static_constraints: 4,
            solver: SolverSettings::default(),
        }
    }
}

fn is_psd(m: DMatrix<f64>) -> bool {
    (&m - m.transpose()).abs().max() <= 1e-12 && m.symmetric_eigenvalues().iter().all(|&l| l >= -1e-12)
}

impl PlannerConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Self::from_json(&text)
    }

    pub fn q_eps_matrix(&self) -> Matrix2<f64> {
        Matrix2::from_fn(|i, j| self.q_eps[i][j])
    }

    pub fn q_u_matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.q_u[i][j])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return bad("tau must be positive");
        }
        if !(self.u_ref >= 0.0) {
            return bad("u_ref must be non-negative");
        }
        if !(self.q_v >= 0.0 && self.regulation_weight >= 0.0 && self.delta >= 0.0 && self.u_max > 0.0) {
            return bad("q_v, regulation_weight and delta must be non-negative, u_max positive");
        }
        if !is_psd(DMatrix::from_fn(2, 2, |i, j| self.q_eps[i][j])) {
            return bad("q_eps must be symmetric positive semi-definite");
        }
        if !is_psd(DMatrix::from_fn(4, 4, |i, j| self.q_u[i][j])) {
            return bad("q_u must be symmetric positive semi-definite");
        }
        let s = &self.solver;
        if s.max_sqp_iters == 0 || s.max_qp_iters == 0 {
            return bad("solver iteration limits must be positive");
        }
        if !(s.constraint_penalty_weight > 0.0 && s.convergence_tol > 0.0 && s.trust_region > 0.0 && s.penalty_margin >= 0.0) {
            return bad("solver weights, tolerance and trust region must be positive");
        }
        self.regulation.validate()
    }
}

/// A predicted obstacle as seen by the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedObstacle {
    pub info: ObstacleInfo,
    pub prediction: ObstaclePrediction,
    /// Right-of-way flag latched for the whole horizon.
    pub priority: bool,
}

#[derive(Debug, Clone)]
pub struct PlanProblem<'a> {
    pub initial_state: VesselState,
    pub initial_progress: f64,
    pub path: &'a ReferencePath,
    pub model: &'a VesselModel,
    /// Halfplanes per footprint disc, applied at every stage.
    pub static_constraints: [Vec<LinearConstraint>; 3],
    pub obstacles: Vec<PlannedObstacle>,
    pub mode: RegulationMode,
}

impl PlanProblem<'_> {
    pub fn validate(&self, config: &PlannerConfig) -> Result<()> {
        if !self.initial_state.is_finite() {
            return Err(Error::InvalidConfig("initial state is not finite".into()));
        }
        if !(0.0..=self.path.total_length()).contains(&self.initial_progress) {
            return Err(Error::InvalidConfig(format!(
                "initial progress {} outside [0, {}]",
                self.initial_progress,
                self.path.total_length()
            )));
        }
        if let Some(o) = self.obstacles.iter().find(|o| o.prediction.stages.len() != config.horizon + 1) {
            return Err(Error::InvalidConfig(format!(
                "prediction for {} has {} stages, expected {}",
                o.info.id,
                o.prediction.stages.len(),
                config.horizon + 1
            )));
        }
        Ok(())
    }

    pub(crate) fn targets(&self, stage: usize) -> Vec<RegulationTarget> {
        self.obstacles
            .iter()
            .map(|o| {
                let s = &o.prediction.stages[stage];
                RegulationTarget {
                    position: s.position,
                    heading: s.heading,
                    a: o.info.a,
                    b: o.info.b,
                    priority: o.priority,
                }
            })
            .collect()
    }

    /// Ellipse semi-axes used by the collision constraint.
    pub fn inflated_axes(&self, obstacle: &PlannedObstacle, delta: f64) -> (f64, f64) {
        let r = self.model.disc_radius;
        (obstacle.info.a + r + delta, obstacle.info.b + r + delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanStatus {
    Converged,
    MaxIters,
    Infeasible,
}

/// Worst constraint values at one stage: the largest static residual
/// (feasible iff ≤ 0) and the smallest ellipse value (feasible iff > 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageResidual {
    pub static_max: f64,
    pub dynamic_min: f64,
}

impl StageResidual {
    pub fn feasible(&self) -> bool {
        self.static_max <= 0.0 && self.dynamic_min > 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanResult {
    pub states: Vec<VesselState>,
    pub inputs: Vec<ThrustCommand>,
    pub progress: Vec<f64>,
    pub status: PlanStatus,
    /// Sum of stage costs, penalties excluded.
    pub objective: f64,
    /// Constraint values per stage; stage 0 is the given initial state.
    pub residuals: Vec<StageResidual>,
    pub iterations: usize,
}

impl PlanResult {
    pub fn first_command(&self) -> ThrustCommand {
        self.inputs[0]
    }

    /// True if every stage after the first satisfies the static and dynamic
    /// constraints and every input is within the thrust limit.
    pub fn hard_feasible(&self, f_max: f64) -> bool {
        self.residuals.iter().skip(1).all(StageResidual::feasible) && self.inputs.iter().all(|u| u.within_limits(f_max))
    }
}

/// Rolls the planner dynamics and progress out from the problem's initial
/// condition. Fails if the model diverges.
pub fn rollout(
    problem: &PlanProblem,
    inputs: &[ThrustCommand],
    tau: f64,
) -> Result<(Vec<VesselState>, Vec<f64>)> {
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut progress = Vec::with_capacity(inputs.len() + 1);
    states.push(problem.initial_state);
    progress.push(problem.initial_progress);
    for u in inputs {
        let z = states.last().unwrap();
        let theta = progress.last().unwrap() + tau * z.u;
        states.push(step_dynamics(z, u, problem.model, tau)?);
        progress.push(theta);
    }
    Ok((states, progress))
}

/// Exact constraint values along a trajectory.
pub fn stage_residuals(problem: &PlanProblem, states: &[VesselState], delta: f64) -> Vec<StageResidual> {
    let r = problem.model.disc_radius;
    states
        .iter()
        .enumerate()
        .map(|(k, z)| {
            let discs = disc_centers(z, problem.model);
            let mut static_max = f64::NEG_INFINITY;
            let mut dynamic_min = f64::INFINITY;
            for (j, p) in discs.iter().enumerate() {
                for c in &problem.static_constraints[j] {
                    static_max = static_max.max(crate::environment::static_constraint_residual(c, p, r, delta));
                }
                for o in &problem.obstacles {
                    let s = &o.prediction.stages[k.min(o.prediction.stages.len() - 1)];
                    let (alpha, beta) = problem.inflated_axes(o, delta);
                    dynamic_min = dynamic_min.min(crate::environment::dynamic_constraint_value(
                        p,
                        &s.position,
                        s.heading,
                        alpha,
                        beta,
                    ));
                }
            }
            StageResidual { static_max, dynamic_min }
        })
        .collect()
}

/// Total stage cost of a rolled-out trajectory.
pub fn trajectory_objective(
    problem: &PlanProblem,
    config: &PlannerConfig,
    states: &[VesselState],
    inputs: &[ThrustCommand],
    progress: &[f64],
) -> f64 {
    (0..states.len())
        .map(|k| stage_cost(k, &states[k], inputs.get(k), progress[k], problem, config).0)
        .sum()
}

/// Drops the first stage of `previous`, repeats its last input and extends
/// the trajectory with one more rollout step.
pub fn shift_warm_start(previous: &PlanResult, model: &VesselModel, tau: f64) -> Result<PlanResult> {
    if previous.states.len() < 2 || previous.inputs.is_empty() {
        return Err(Error::InvalidConfig("warm start needs at least two stages".into()));
    }
    let mut inputs = previous.inputs[1..].to_vec();
    let last_input = *previous.inputs.last().unwrap();
    inputs.push(last_input);
    let mut states = previous.states[1..].to_vec();
    let mut progress = previous.progress[1..].to_vec();
    let z = *states.last().unwrap();
    progress.push(progress.last().unwrap() + tau * z.u);
    states.push(step_dynamics(&z, &last_input, model, tau)?);
    let mut residuals = previous.residuals[1..].to_vec();
    residuals.push(*residuals.last().unwrap());
    Ok(PlanResult {
        states,
        inputs,
        progress,
        status: previous.status,
        objective: previous.objective,
        residuals,
        iterations: 0,
    })
}

//! Gauss-Newton SQP over the input sequence with a box trust region.

use super::cost::{cost_rows, penalty_rows, Row, Weights};
use super::qp::solve_box_qp;
use super::{rollout, stage_residuals, trajectory_objective, PlanProblem, PlanResult, PlanStatus, PlannerConfig};
use crate::error::Result;
use crate::vessel::{linearize_dynamics, ThrustCommand, VesselState};
use nalgebra::{DMatrix, DVector, SMatrix};

struct Evaluation {
    merit: f64,
    states: Vec<VesselState>,
    progress: Vec<f64>,
}

struct Linearization {
    eval: Evaluation,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

struct Context<'p, 'a> {
    problem: &'p PlanProblem<'a>,
    config: &'p PlannerConfig,
    weights: Weights,
    f_max: f64,
}

fn to_commands(u: &DVector<f64>) -> Vec<ThrustCommand> {
    (0..u.len() / 4)
        .map(|k| ThrustCommand::new(u[4 * k], u[4 * k + 1], u[4 * k + 2], u[4 * k + 3]))
        .collect()
}

impl Context<'_, '_> {
    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn stage_rows(&self, k: usize, z: &VesselState, theta: f64, weight: f64, rows: &mut Vec<Row>) {
        rows.clear();
        cost_rows(k, z, theta, self.problem, self.config, &self.weights, rows);
        if k > 0 {
            penalty_rows(k, z, self.problem, self.config, weight, rows);
        }
    }

    fn input_cost(&self, u: &DVector<f64>) -> f64 {
        (0..self.horizon())
            .map(|k| {
                let f = u.fixed_rows::<4>(4 * k);
                f.dot(&(self.weights.q_u * f))
            })
            .sum()
    }

    fn evaluate(&self, u: &DVector<f64>, weight: f64) -> Option<Evaluation> {
        let (states, progress) = rollout(self.problem, &to_commands(u), self.config.tau).ok()?;
        let mut rows = Vec::new();
        let mut merit = self.input_cost(u);
        for (k, z) in states.iter().enumerate() {
            self.stage_rows(k, z, progress[k], weight, &mut rows);
            merit += rows.iter().map(|r| r.r * r.r).sum::<f64>();
        }
        merit.is_finite().then_some(Evaluation { merit, states, progress })
    }

    fn linearize(&self, u: &DVector<f64>, weight: f64) -> Option<Linearization> {
        let eval = self.evaluate(u, weight)?;
        let n = self.horizon();
        let nv = 4 * n;
        let tau = self.config.tau;
        let mut grad = DVector::zeros(nv);
        let mut hess = DMatrix::zeros(nv, nv);
        let mut sens = DMatrix::<f64>::zeros(7, nv);
        let mut next = DMatrix::<f64>::zeros(7, nv);
        let mut rows = Vec::new();
        let cmds = to_commands(u);
        for k in 0..=n {
            let z = &eval.states[k];
            let cols = 4 * k;
            if cols > 0 {
                self.stage_rows(k, z, eval.progress[k], weight, &mut rows);
                let mut m = SMatrix::<f64, 7, 7>::zeros();
                let mut v = SMatrix::<f64, 7, 1>::zeros();
                for row in &rows {
                    m += row.dx * row.dx.transpose();
                    v += row.dx * row.r;
                }
                let s = sens.columns(0, cols);
                grad.rows_mut(0, cols).gemv_tr(2.0, &s, &v, 1.0);
                let t = m * s;
                hess.view_mut((0, 0), (cols, cols)).gemm_tr(2.0, &s, &t, 1.0);
            }
            if k == n {
                break;
            }
            let (a, b) = linearize_dynamics(z, &cmds[k], self.problem.model, tau);
            let mut at = SMatrix::<f64, 7, 7>::identity();
            at.fixed_view_mut::<6, 6>(0, 0).copy_from(&a);
            at[(6, 3)] = tau;
            if cols > 0 {
                let prod = at * sens.columns(0, cols);
                next.columns_mut(0, cols).copy_from(&prod);
            }
            next.fixed_view_mut::<6, 4>(0, cols).copy_from(&b);
            next.fixed_view_mut::<1, 4>(6, cols).fill(0.0);
            std::mem::swap(&mut sens, &mut next);
        }
        let q2 = self.weights.q_u + self.weights.q_u.transpose();
        for k in 0..n {
            let f = u.fixed_rows::<4>(4 * k);
            let g = q2 * f;
            grad.fixed_rows_mut::<4>(4 * k).add_assign(&g);
            hess.fixed_view_mut::<4, 4>(4 * k, 4 * k).add_assign(&q2);
        }
        Some(Linearization { eval, grad, hess })
    }

    fn projected_gradient(&self, u: &DVector<f64>, grad: &DVector<f64>) -> f64 {
        (0..u.len())
            .map(|i| ((u[i] - grad[i]).clamp(-self.f_max, self.f_max) - u[i]).abs())
            .fold(0.0, f64::max)
    }

    fn finish(&self, u: &DVector<f64>, eval: &Evaluation, status: PlanStatus, iterations: usize) -> PlanResult {
        let inputs = to_commands(u);
        let objective = trajectory_objective(self.problem, self.config, &eval.states, &inputs, &eval.progress);
        PlanResult {
            residuals: stage_residuals(self.problem, &eval.states, self.config.delta),
            states: eval.states.clone(),
            progress: eval.progress.clone(),
            inputs,
            status,
            objective,
            iterations,
        }
    }
}

use std::ops::AddAssign;

/// Solves the planning problem from `warm_start`'s inputs (or zero thrust).
///
/// The penalized merit decreases monotonically over accepted steps at a
/// fixed penalty weight. When the iterate is stationary but violates a
/// constraint, the weight is doubled, up to the configured number of times.
pub fn solve(problem: &PlanProblem, warm_start: Option<&PlanResult>, config: &PlannerConfig) -> Result<PlanResult> {
    solve_traced(problem, warm_start, config, &mut Vec::new())
}

/// As [`solve`], additionally recording `(penalty weight, merit)` after
/// every accepted step.
pub(crate) fn solve_traced(
    problem: &PlanProblem,
    warm_start: Option<&PlanResult>,
    config: &PlannerConfig,
    trace: &mut Vec<(f64, f64)>,
) -> Result<PlanResult> {
    config.validate()?;
    problem.validate(config)?;
    let n = config.horizon;
    let f_max = problem.model.max_thrust;
    let ctx = Context {
        problem,
        config,
        weights: Weights::new(config),
        f_max,
    };
    let settings = &config.solver;

    let mut u = DVector::zeros(4 * n);
    if let Some(ws) = warm_start {
        for k in 0..n {
            if let Some(cmd) = ws.inputs.get(k).or(ws.inputs.last()) {
                let c = cmd.clamped(f_max);
                u.fixed_rows_mut::<4>(4 * k).copy_from(&c.to_vector());
            }
        }
    }
    let mut weight = settings.constraint_penalty_weight;
    let mut lin = match ctx.linearize(&u, weight) {
        Some(l) => l,
        None => {
            u.fill(0.0);
            let (states, progress) = rollout(problem, &to_commands(&u), config.tau)?;
            let eval = Evaluation { merit: f64::INFINITY, states, progress };
            return Ok(ctx.finish(&u, &eval, PlanStatus::Infeasible, 0));
        }
    };
    let initial = (u.clone(), lin.eval.states.clone(), lin.eval.progress.clone());
    trace.push((weight, lin.eval.merit));

    let mut radius = settings.trust_region;
    let mut escalations = 0;
    let mut iterations = 0;
    let mut status = None;
    let feasible = |eval: &Evaluation, u: &DVector<f64>| {
        let res = stage_residuals(problem, &eval.states, config.delta);
        res.iter().skip(1).all(|r| r.feasible()) && u.iter().all(|f| f.abs() <= f_max)
    };

    while iterations < settings.max_sqp_iters {
        iterations += 1;
        let pg = ctx.projected_gradient(&u, &lin.grad);
        let mut stalled = pg < settings.convergence_tol;
        if !stalled {
            let lo = DVector::from_fn(4 * n, |i, _| (-radius).max(-f_max - u[i]));
            let hi = DVector::from_fn(4 * n, |i, _| radius.min(f_max - u[i]));
            let mut h = lin.hess.clone();
            for i in 0..4 * n {
                h[(i, i)] += 1e-9;
            }
            let d = solve_box_qp(&h, &lin.grad, &lo, &hi, settings.max_qp_iters);
            let predicted = -(lin.grad.dot(&d) + 0.5 * d.dot(&(&lin.hess * &d)));
            if predicted <= 1e-12 * (1.0 + lin.eval.merit) {
                stalled = true;
            } else {
                let trial = &u + &d;
                let actual = ctx.evaluate(&trial, weight).map(|e| lin.eval.merit - e.merit);
                let rho = actual.map_or(-1.0, |a| a / predicted);
                if rho > 1e-4 && actual.unwrap_or(0.0) > 0.0 {
                    u = trial;
                    lin = ctx.linearize(&u, weight).expect("accepted point evaluates");
                    trace.push((weight, lin.eval.merit));
                    if rho > 0.75 && d.amax() >= 0.99 * radius {
                        radius = (2.0 * radius).min(2.0 * f_max);
                    } else if rho < 0.25 {
                        radius *= 0.5;
                    }
                } else {
                    radius *= 0.25;
                    stalled = radius < 1e-7;
                }
            }
        }
        if stalled {
            let converged = pg < settings.convergence_tol;
            if feasible(&lin.eval, &u) {
                status = Some(if converged { PlanStatus::Converged } else { PlanStatus::MaxIters });
                break;
            }
            if escalations >= settings.max_penalty_escalations {
                status = Some(PlanStatus::Infeasible);
                break;
            }
            escalations += 1;
            weight *= 2.0;
            radius = radius.max(settings.trust_region);
            lin = ctx.linearize(&u, weight).expect("current point evaluates");
            trace.push((weight, lin.eval.merit));
        }
    }
    let status = status.unwrap_or(if feasible(&lin.eval, &u) {
        PlanStatus::MaxIters
    } else {
        PlanStatus::Infeasible
    });
    let result = ctx.finish(&u, &lin.eval, status, iterations);

    if warm_start.is_some() {
        let (u0, states, progress) = initial;
        let start = Evaluation { merit: 0.0, states, progress };
        if feasible(&start, &u0) {
            let candidate = ctx.finish(&u0, &start, PlanStatus::MaxIters, iterations);
            if candidate.objective < result.objective {
                return Ok(candidate);
            }
        }
    }
    Ok(result)
}

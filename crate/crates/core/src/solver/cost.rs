//! Stage costs and constraint penalties written as least-squares residuals,
//! so the solver can form Gauss-Newton models directly.

use super::{PlanProblem, PlannerConfig};
use crate::environment::{dynamic_constraint_value, static_constraint_residual};
use crate::geometry::{rotation2, to_local, Point};
use crate::regulation::for_each_regulation_term;
use crate::vessel::{disc_centers, ThrustCommand, VesselState};
use nalgebra::{Matrix2, Matrix4, SVector, Vector4};

/// Derivative with respect to the augmented state `[x, y, ψ, u, v, r, θ]`.
pub(crate) type StateGrad = SVector<f64, 7>;

/// One residual `r`; the stage cost contribution is `r²`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Row {
    pub r: f64,
    pub dx: StateGrad,
}

/// Matrix square roots of the quadratic weights.
#[derive(Debug, Clone)]
pub(crate) struct Weights {
    pub sqrt_eps: Matrix2<f64>,
    pub sqrt_qv: f64,
    pub q_u: Matrix4<f64>,
}

fn psd_sqrt<const D: usize>(m: nalgebra::SMatrix<f64, D, D>) -> nalgebra::SMatrix<f64, D, D> {
    let d = nalgebra::DMatrix::from_fn(D, D, |i, j| m[(i, j)]);
    let eig = d.symmetric_eigen();
    let root = &eig.eigenvectors
        * nalgebra::DMatrix::from_diagonal(&eig.eigenvalues.map(|l| l.max(0.0).sqrt()))
        * eig.eigenvectors.transpose();
    nalgebra::SMatrix::<f64, D, D>::from_fn(|i, j| root[(i, j)])
}

impl Weights {
    pub fn new(config: &PlannerConfig) -> Self {
        Self {
            sqrt_eps: psd_sqrt(config.q_eps_matrix()),
            sqrt_qv: config.q_v.sqrt(),
            q_u: config.q_u_matrix(),
        }
    }
}

/// Tracking, speed and regulation residuals of stage `k`.
pub(crate) fn cost_rows(
    k: usize,
    z: &VesselState,
    theta: f64,
    problem: &PlanProblem,
    config: &PlannerConfig,
    weights: &Weights,
    rows: &mut Vec<Row>,
) {
    let frame = problem.path.frame(theta);
    let n = frame.normal();
    let t = frame.tangent;
    let d = z.position() - frame.point;
    let (ec, el) = (n.dot(&d), t.dot(&d));
    let mut dec = StateGrad::zeros();
    let mut del = StateGrad::zeros();
    dec[0] = n.x;
    dec[1] = n.y;
    del[0] = t.x;
    del[1] = t.y;
    if !frame.clamped {
        dec[6] = -frame.curvature * el;
        del[6] = frame.curvature * ec - 1.0;
    }
    for i in 0..2 {
        let (a, b) = (weights.sqrt_eps[(i, 0)], weights.sqrt_eps[(i, 1)]);
        rows.push(Row {
            r: a * ec + b * el,
            dx: dec * a + del * b,
        });
    }

    if k < config.horizon {
        let mut dx = StateGrad::zeros();
        dx[3] = -weights.sqrt_qv;
        rows.push(Row {
            r: weights.sqrt_qv * (config.u_ref - z.u),
            dx,
        });
    }

    if problem.obstacles.is_empty() || config.regulation_weight == 0.0 {
        return;
    }
    let w = config.regulation_weight;
    let targets = problem.targets(k);
    for_each_regulation_term(
        &z.position(),
        &targets,
        &config.regulation,
        problem.model.disc_radius,
        problem.mode,
        |value, grad| {
            let r = (w * value).sqrt();
            if r > 1e-150 {
                let g = grad * (w / (2.0 * r));
                let mut dx = StateGrad::zeros();
                dx[0] = g.x;
                dx[1] = g.y;
                rows.push(Row { r, dx });
            }
        },
    );
}

/// Quadratic penalty residuals of the collision constraints and the surge
/// bound at stage `k`; only violated terms are emitted.
pub(crate) fn penalty_rows(
    k: usize,
    z: &VesselState,
    problem: &PlanProblem,
    config: &PlannerConfig,
    weight: f64,
    rows: &mut Vec<Row>,
) {
    let sw = weight.sqrt();
    let margin = config.solver.penalty_margin;
    let r_disc = problem.model.disc_radius;
    let (s, c) = z.psi.sin_cos();
    let discs = disc_centers(z, problem.model);
    for (j, p) in discs.iter().enumerate() {
        let o = problem.model.disc_offsets[j];
        let dp_dpsi = Point::new(-s * o.x - c * o.y, c * o.x - s * o.y);
        for con in &problem.static_constraints[j] {
            let v = static_constraint_residual(con, p, r_disc, config.delta) + margin;
            if v > 0.0 {
                let mut dx = StateGrad::zeros();
                dx[0] = sw * con.normal.x;
                dx[1] = sw * con.normal.y;
                dx[2] = sw * con.normal.dot(&dp_dpsi);
                rows.push(Row { r: sw * v, dx });
            }
        }
        for obs in &problem.obstacles {
            let st = &obs.prediction.stages[k];
            let (alpha, beta) = problem.inflated_axes(obs, config.delta);
            let value = dynamic_constraint_value(p, &st.position, st.heading, alpha, beta);
            let q = value.sqrt();
            let v = 1.0 + margin - q;
            if v > 0.0 && q > 1e-9 {
                let l = to_local(&(p - st.position), st.heading);
                let grad_value = rotation2(st.heading) * Point::new(2.0 * l.x / (alpha * alpha), 2.0 * l.y / (beta * beta));
                let g = grad_value * (-sw / (2.0 * q));
                let mut dx = StateGrad::zeros();
                dx[0] = g.x;
                dx[1] = g.y;
                dx[2] = g.dot(&dp_dpsi);
                rows.push(Row { r: sw * v, dx });
            }
        }
    }
    let excess = z.u.abs() - config.u_max;
    if excess > 0.0 {
        let mut dx = StateGrad::zeros();
        dx[3] = sw * z.u.signum();
        rows.push(Row { r: sw * excess, dx });
    }
}

/// `J_k` and its gradient with respect to `[z (6), u (4), θ]`. The terminal
/// stage `k = N` carries tracking and regulation only and ignores `u`.
pub fn stage_cost(
    k: usize,
    z: &VesselState,
    u: Option<&ThrustCommand>,
    theta: f64,
    problem: &PlanProblem,
    config: &PlannerConfig,
) -> (f64, SVector<f64, 11>) {
    let weights = Weights::new(config);
    let mut rows = Vec::new();
    cost_rows(k, z, theta, problem, config, &weights, &mut rows);
    let mut cost = 0.0;
    let mut grad = SVector::<f64, 11>::zeros();
    for row in &rows {
        cost += row.r * row.r;
        for i in 0..6 {
            grad[i] += 2.0 * row.r * row.dx[i];
        }
        grad[10] += 2.0 * row.r * row.dx[6];
    }
    if let (true, Some(u)) = (k < config.horizon, u) {
        let f = u.to_vector();
        let qf: Vector4<f64> = weights.q_u * f;
        cost += f.dot(&qf);
        let g = (weights.q_u + weights.q_u.transpose()) * f;
        for i in 0..4 {
            grad[6 + i] = g[i];
        }
    }
    (cost, grad)
}

//! Per-run and batch metrics.

use super::trace::{PlannerKind, SimTrace};
use super::violations::{detect_violations, ViolationCounts, ViolationRegionSpec};
use crate::geometry::Point;
use crate::regulation::{gaussian_cost, ho_sigmas, RegulationParams};
use crate::error::Result;
use crate::environment::ObstaclePrediction;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub planner: PlannerKind,
    pub violations: ViolationCounts,
    pub collisions: usize,
    /// Distance sailed by the ego over straight-line progress along its path.
    pub path_efficiency: f64,
    pub mean_solve_time: f64,
    pub reached_goal: bool,
    pub aborted: bool,
}

impl RunSummary {
    pub fn from_trace(trace: &SimTrace, spec: &ViolationRegionSpec) -> Self {
        let ego = &trace.agents[0];
        let travelled: f64 = ego
            .states
            .windows(2)
            .map(|w| (w[1].position() - w[0].position()).norm())
            .sum();
        let straight = match (ego.states.first(), ego.states.last()) {
            (Some(a), Some(b)) => (b.position() - a.position()).norm(),
            _ => 0.0,
        };
        let mean_solve_time = if trace.solve_times.is_empty() {
            0.0
        } else {
            trace.solve_times.iter().sum::<f64>() / trace.solve_times.len() as f64
        };
        Self {
            scenario: trace.scenario.clone(),
            planner: trace.planner,
            violations: detect_violations(trace, spec),
            collisions: trace.collisions.len(),
            path_efficiency: if straight > 0.0 { travelled / straight } else { 1.0 },
            mean_solve_time,
            reached_goal: trace.reached_goal,
            aborted: trace.aborted.is_some(),
        }
    }

    /// Right-handed share of all violation events, `None` without events.
    pub fn right_share(&self) -> Option<f64> {
        let total = self.violations.total();
        (total > 0).then(|| self.violations.right as f64 / total as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub runs: usize,
    /// Mean right-handed share (%) over runs with at least one event.
    pub pct_right_handed_violations: f64,
    pub runs_with_events: usize,
    /// Share of runs with at least one collision (%).
    pub pct_collisions: f64,
    pub mean_solve_time: f64,
    pub mean_path_efficiency: f64,
}

pub fn summarize(runs: &[RunSummary]) -> Metrics {
    let n = runs.len().max(1) as f64;
    let shares: Vec<f64> = runs.iter().filter_map(RunSummary::right_share).collect();
    Metrics {
        runs: runs.len(),
        pct_right_handed_violations: if shares.is_empty() {
            0.0
        } else {
            100.0 * shares.iter().sum::<f64>() / shares.len() as f64
        },
        runs_with_events: shares.len(),
        pct_collisions: 100.0 * runs.iter().filter(|r| r.collisions > 0).count() as f64 / n,
        mean_solve_time: runs.iter().map(|r| r.mean_solve_time).sum::<f64>() / n,
        mean_path_efficiency: runs.iter().map(|r| r.path_efficiency).sum::<f64>() / n,
    }
}

pub fn compute_metrics(traces: &[SimTrace], spec: &ViolationRegionSpec) -> Metrics {
    let runs: Vec<RunSummary> = traces.iter().map(|t| RunSummary::from_trace(t, spec)).collect();
    summarize(&runs)
}

/// Repulsive Gaussian centered on each predicted obstacle at `stage`.
pub fn lmpcc_baseline_cost(
    p_ego: &Point,
    predictions: &[(ObstaclePrediction, f64, f64)],
    stage: usize,
    params: &RegulationParams,
    r_disc: f64,
) -> Result<f64> {
    let mut total = 0.0;
    for (pred, a, b) in predictions {
        let s = &pred.stages[stage.min(pred.stages.len() - 1)];
        let (sx, sy) = ho_sigmas(*a, *b, r_disc, params)?;
        total += gaussian_cost(p_ego, &s.position, sx, sy, s.heading, params.q_ho).0;
    }
    Ok(total)
}

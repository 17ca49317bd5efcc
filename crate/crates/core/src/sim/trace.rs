//! Closed-loop traces and the CSV trajectory-log format.
//!
//! Columns: `t, agent_id, x, y, psi, u, v, r, f1, f2, f3, f4, status`.
//! Obstacles are logged with `agent_id = obstacle:<id>`, body-frame velocity
//! in `u, v`, zero forces and an empty status.

use crate::environment::{ObstacleInfo, ObstacleSample, ObstacleState};
use crate::error::{Error, Result};
use crate::geometry::{to_local, Pose};
use crate::solver::PlanStatus;
use crate::vessel::{ThrustCommand, VesselState};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    /// Regulation-aware planner.
    #[serde(rename = "rampcc")]
    RaMpcc,
    /// Baseline with a centered repulsive cost and no right-of-way term.
    Lmpcc,
}

impl PlannerKind {
    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::RaMpcc => "rampcc",
            PlannerKind::Lmpcc => "lmpcc",
        }
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rampcc" | "ra-mpcc" => Ok(PlannerKind::RaMpcc),
            "lmpcc" => Ok(PlannerKind::Lmpcc),
            other => Err(format!("unknown planner `{other}` (expected rampcc or lmpcc)")),
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A planned vessel's history, one entry per plant step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentTrace {
    pub id: String,
    /// Ellipse that other vessels treat as this agent's footprint.
    pub footprint: ObstacleInfo,
    pub states: Vec<VesselState>,
    pub commands: Vec<ThrustCommand>,
    /// Status of the plan whose command is being applied.
    pub statuses: Vec<PlanStatus>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObstacleTrace {
    pub info: ObstacleInfo,
    pub states: Vec<ObstacleState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub t: f64,
    pub agent: String,
    /// Obstacle or agent id, or `static` for the grid.
    pub with: String,
}

/// Everything recorded during one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scenario: String,
    pub planner: PlannerKind,
    /// Uniform plant step (s).
    pub step: f64,
    /// Plant steps per planner invocation.
    pub replan_interval: usize,
    pub times: Vec<f64>,
    pub agents: Vec<AgentTrace>,
    pub obstacles: Vec<ObstacleTrace>,
    pub collisions: Vec<CollisionEvent>,
    /// Wall-clock solve times (s); not part of the deterministic log.
    pub solve_times: Vec<f64>,
    /// Set when the plant diverged and the run stopped early.
    pub aborted: Option<String>,
    /// Whether every agent reached its goal.
    pub reached_goal: bool,
}

/// Pose and footprint of another vessel as seen from an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Encounter {
    pub id: String,
    pub pose: Pose,
    pub info: ObstacleInfo,
}

impl SimTrace {
    /// Indices of the samples at which the planner ran.
    pub fn planner_steps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.times.len()).step_by(self.replan_interval.max(1))
    }

    /// The other vessels around agent `ego` at sample `i`.
    pub fn encounters(&self, ego: usize, i: usize) -> Vec<Encounter> {
        let mut out: Vec<Encounter> = self
            .obstacles
            .iter()
            .map(|o| Encounter {
                id: o.info.id.clone(),
                pose: Pose::new(o.states[i].position.x, o.states[i].position.y, o.states[i].heading),
                info: o.info.clone(),
            })
            .collect();
        for (j, a) in self.agents.iter().enumerate() {
            if j != ego {
                let s = &a.states[i];
                out.push(Encounter {
                    id: a.id.clone(),
                    pose: Pose::new(s.x, s.y, s.psi),
                    info: a.footprint.clone(),
                });
            }
        }
        out
    }

    /// Writes the trajectory log.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "agent_id", "x", "y", "psi", "u", "v", "r", "f1", "f2", "f3", "f4", "status"])?;
        let num = |v: f64| format!("{v:.6}");
        for (i, &t) in self.times.iter().enumerate() {
            for a in &self.agents {
                let s = &a.states[i];
                let f = &a.commands[i].forces;
                let status = match a.statuses[i] {
                    PlanStatus::Converged => "converged",
                    PlanStatus::MaxIters => "max_iters",
                    PlanStatus::Infeasible => "infeasible",
                };
                w.write_record([
                    num(t),
                    a.id.clone(),
                    num(s.x),
                    num(s.y),
                    num(s.psi),
                    num(s.u),
                    num(s.v),
                    num(s.r),
                    num(f[0]),
                    num(f[1]),
                    num(f[2]),
                    num(f[3]),
                    status.to_string(),
                ])?;
            }
            for o in &self.obstacles {
                let s = &o.states[i];
                let body = to_local(&s.velocity, s.heading);
                w.write_record([
                    num(t),
                    format!("obstacle:{}", o.info.id),
                    num(s.position.x),
                    num(s.position.y),
                    num(s.heading),
                    num(body.x),
                    num(body.y),
                    num(0.0),
                    num(0.0),
                    num(0.0),
                    num(0.0),
                    num(0.0),
                    String::new(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io("trace", e))?;
        Ok(())
    }
}

/// One parsed row of a trajectory log.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LogRow {
    pub t: f64,
    pub agent_id: String,
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
    pub f4: f64,
    #[serde(default)]
    pub status: String,
}

pub fn read_log<R: Read>(input: R) -> Result<Vec<LogRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Samples of one vessel in a trajectory log, usable as a replayed track.
/// Matches `agent_id` exactly or as `obstacle:<agent_id>`.
pub fn track_samples_from_log<R: Read>(input: R, agent_id: &str) -> Result<Vec<ObstacleSample>> {
    let prefixed = format!("obstacle:{agent_id}");
    let samples: Vec<ObstacleSample> = read_log(input)?
        .into_iter()
        .filter(|r| r.agent_id == agent_id || r.agent_id == prefixed)
        .map(|r| ObstacleSample {
            t: r.t,
            x: r.x,
            y: r.y,
            heading: r.psi,
            speed: r.u.hypot(r.v),
        })
        .collect();
    if samples.is_empty() {
        return Err(Error::TrajectoryLog(format!("no rows for agent `{agent_id}`")));
    }
    Ok(samples)
}

//! Closed-loop execution: each agent replans at a fixed rate against the
//! current snapshot of the world and the plant is integrated in between.

use super::scenario::ResolvedScenario;
use super::trace::{AgentTrace, CollisionEvent, ObstacleTrace, PlannerKind, SimTrace};
use crate::environment::{
    point_ellipse_distance, predict_from_state, predict_obstacle, ObstacleInfo, ObstacleState, OccupancyGrid,
    VesselClass,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, Pose};
use crate::path::ProgressHint;
use crate::regulation::{is_priority_with, RegulationMode};
use crate::solver::{solve, PlanProblem, PlanResult, PlanStatus, PlannedObstacle};
use crate::vessel::{disc_centers, Integrator, ThrustCommand, VesselModel, VesselState};
use std::time::Instant;

/// Plant integration step (s).
pub const PLANT_STEP: f64 = 0.05;
/// Plant steps between planner invocations (5 Hz).
pub const REPLAN_INTERVAL: usize = 4;
/// Obstacles farther than this are left out of the planning problem (m).
pub const ENCOUNTER_RANGE: f64 = 25.0;

/// Ellipse enclosing a rectangular hull of the given model.
pub fn hull_footprint(id: &str, model: &VesselModel) -> ObstacleInfo {
    let s = std::f64::consts::SQRT_2;
    ObstacleInfo {
        id: id.to_string(),
        a: 0.5 * model.length * s,
        b: 0.5 * model.width * s,
        vessel_class: VesselClass::SmallMotorboat,
        length: model.length,
    }
}

/// An ellipse other vessels must not touch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseObstacle {
    pub position: Point,
    pub heading: f64,
    pub a: f64,
    pub b: f64,
}

/// True iff any footprint disc touches an obstacle ellipse or an occupied
/// cell. Touching the boundary counts as a collision.
pub fn detect_collision(
    state: &VesselState,
    model: &VesselModel,
    obstacles: &[EllipseObstacle],
    grid: Option<&OccupancyGrid>,
) -> bool {
    disc_centers(state, model).iter().any(|p| {
        obstacles
            .iter()
            .any(|o| point_ellipse_distance(p, &o.position, o.heading, o.a, o.b) <= model.disc_radius)
            || grid.is_some_and(|g| g.disc_hits_obstacle(p, model.disc_radius))
    })
}

struct AgentRuntime {
    state: VesselState,
    progress: f64,
    plan: Option<PlanResult>,
    command: ThrustCommand,
    status: PlanStatus,
    arrived: bool,
    /// Latched right-of-way decision per other vessel, `None` out of range.
    priority: Vec<Option<bool>>,
    touching: Vec<bool>,
}

/// Another vessel as seen at replan time.
struct Seen {
    info: ObstacleInfo,
    state: ObstacleState,
    prediction: Option<crate::environment::ObstaclePrediction>,
}

fn agent_obstacle_state(s: &VesselState) -> ObstacleState {
    ObstacleState {
        position: s.position(),
        heading: s.psi,
        velocity: s.world_velocity(),
    }
}

/// Runs a resolved scenario to completion.
///
/// Plant divergence or a planner error stops the run; the partial trace is
/// returned with `aborted` set.
pub fn run_scenario(scenario: &ResolvedScenario, planner: PlannerKind) -> Result<SimTrace> {
    let model = &scenario.model;
    let steps = (scenario.duration / PLANT_STEP).round() as usize;
    let footprints: Vec<ObstacleInfo> = scenario.agents.iter().map(|a| hull_footprint(&a.id, model)).collect();
    let n_other = scenario.tracks.len() + scenario.agents.len() - 1;
    let n_pairs = scenario.tracks.len() + scenario.agents.len();
    let mode = match planner {
        PlannerKind::RaMpcc => RegulationMode::Regulated,
        PlannerKind::Lmpcc => RegulationMode::Centered,
    };

    let mut rt: Vec<AgentRuntime> = scenario
        .agents
        .iter()
        .map(|a| AgentRuntime {
            state: a.initial,
            progress: a.path.project_progress(&a.initial.position(), None),
            plan: None,
            command: ThrustCommand::zero(),
            status: PlanStatus::Converged,
            arrived: false,
            priority: vec![None; n_other],
            touching: vec![false; n_pairs],
        })
        .collect();
    let mut trace = SimTrace {
        scenario: scenario.name.clone(),
        planner,
        step: PLANT_STEP,
        replan_interval: REPLAN_INTERVAL,
        times: Vec::with_capacity(steps + 1),
        agents: scenario
            .agents
            .iter()
            .zip(&footprints)
            .map(|(a, f)| AgentTrace {
                id: a.id.clone(),
                footprint: f.clone(),
                states: Vec::new(),
                commands: Vec::new(),
                statuses: Vec::new(),
            })
            .collect(),
        obstacles: scenario
            .tracks
            .iter()
            .map(|t| ObstacleTrace { info: t.info.clone(), states: Vec::new() })
            .collect(),
        collisions: Vec::new(),
        solve_times: Vec::new(),
        aborted: None,
        reached_goal: false,
    };

    for i in 0..=steps {
        let t = i as f64 * PLANT_STEP;
        let obstacle_states: Vec<ObstacleState> = scenario.tracks.iter().map(|tr| tr.state_at(t)).collect();

        for (a, r) in rt.iter_mut().enumerate() {
            let goal = *scenario.agents[a].path.waypoints().last().unwrap();
            if !r.arrived && (r.state.position() - goal).norm() <= scenario.goal_tolerance {
                r.arrived = true;
            }
        }

        if i % REPLAN_INTERVAL == 0 && i < steps {
            let snapshot: Vec<VesselState> = rt.iter().map(|r| r.state).collect();
            for a in 0..rt.len() {
                if rt[a].arrived {
                    rt[a].command = ThrustCommand::zero();
                    continue;
                }
                let agent = &scenario.agents[a];
                let config = &agent.config;
                let (n, tau) = (config.horizon, config.tau);
                let mut seen: Vec<Seen> = scenario
                    .tracks
                    .iter()
                    .zip(&obstacle_states)
                    .map(|(tr, s)| Seen {
                        info: tr.info.clone(),
                        state: *s,
                        prediction: Some(predict_obstacle(tr, t, tau, n)),
                    })
                    .collect();
                for (b, s) in snapshot.iter().enumerate() {
                    if b != a {
                        seen.push(Seen { info: footprints[b].clone(), state: agent_obstacle_state(s), prediction: None });
                    }
                }
                let r = &mut rt[a];
                let ego_pose = Pose::new(r.state.x, r.state.y, r.state.psi);
                let mut obstacles = Vec::new();
                for (j, s) in seen.into_iter().enumerate() {
                    if (s.state.position - ego_pose.position).norm() > ENCOUNTER_RANGE {
                        r.priority[j] = None;
                        continue;
                    }
                    let obs_pose = Pose::new(s.state.position.x, s.state.position.y, s.state.heading);
                    let priority = *r.priority[j]
                        .get_or_insert_with(|| is_priority_with(&ego_pose, &s.info, &obs_pose, &config.regulation));
                    obstacles.push(PlannedObstacle {
                        prediction: s.prediction.unwrap_or_else(|| predict_from_state(&s.state, tau, n)),
                        info: s.info,
                        priority,
                    });
                }

                let hint = ProgressHint {
                    theta: r.progress,
                    half_width: 2.0 * n as f64 * tau * config.u_ref.max(0.5),
                };
                r.progress = agent.path.project_progress(&r.state.position(), Some(hint));
                let discs = disc_centers(&r.state, model);
                let static_constraints = discs.map(|p| {
                    scenario
                        .map
                        .constraints_for(&p, config.max_static_constraints)
                        .unwrap_or_default()
                });
                let problem = PlanProblem {
                    initial_state: r.state,
                    initial_progress: r.progress,
                    path: &agent.path,
                    model,
                    static_constraints,
                    obstacles,
                    mode,
                };
                let started = Instant::now();
                let result = match solve(&problem, r.plan.as_ref(), config) {
                    Ok(res) => res,
                    Err(e) => {
                        trace.aborted = Some(format!("{}: planner failed: {e}", agent.id));
                        break;
                    }
                };
                trace.solve_times.push(started.elapsed().as_secs_f64());
                r.status = result.status;
                r.command = if result.status == PlanStatus::Infeasible {
                    model.fallback_command()
                } else {
                    result.first_command()
                };
                r.plan = Some(result);
            }
        }

        // log the sample, then check collisions at this instant
        trace.times.push(t);
        for (at, r) in trace.agents.iter_mut().zip(&rt) {
            at.states.push(r.state);
            at.commands.push(r.command);
            at.statuses.push(r.status);
        }
        for (ot, s) in trace.obstacles.iter_mut().zip(&obstacle_states) {
            ot.states.push(*s);
        }
        let snapshot: Vec<VesselState> = rt.iter().map(|r| r.state).collect();
        for (a, r) in rt.iter_mut().enumerate() {
            // `None` stands for the static map
            let mut others: Vec<(&str, Option<EllipseObstacle>)> = scenario
                .tracks
                .iter()
                .zip(&obstacle_states)
                .map(|(tr, s)| {
                    let e = EllipseObstacle { position: s.position, heading: s.heading, a: tr.info.a, b: tr.info.b };
                    (tr.info.id.as_str(), Some(e))
                })
                .collect();
            for (b, s) in snapshot.iter().enumerate() {
                if b != a {
                    let f = &footprints[b];
                    let e = EllipseObstacle { position: s.position(), heading: s.psi, a: f.a, b: f.b };
                    others.push((f.id.as_str(), Some(e)));
                }
            }
            others.push(("static", None));
            for (k, (id, e)) in others.iter().enumerate() {
                let hit = match e {
                    Some(e) => detect_collision(&r.state, model, std::slice::from_ref(e), None),
                    None => detect_collision(&r.state, model, &[], Some(scenario.grid())),
                };
                if hit && !r.touching[k] {
                    trace.collisions.push(CollisionEvent { t, agent: scenario.agents[a].id.clone(), with: id.to_string() });
                }
                r.touching[k] = hit;
            }
        }

        if trace.aborted.is_some() {
            return Ok(trace);
        }
        if rt.iter().all(|r| r.arrived) {
            trace.reached_goal = true;
            break;
        }
        if i == steps {
            break;
        }
        for r in rt.iter_mut() {
            match Integrator::Rk4.step(&r.state, &r.command, model, PLANT_STEP) {
                Ok(s) => r.state = s,
                Err(e) => {
                    trace.aborted = Some(e.to_string());
                    return Ok(trace);
                }
            }
        }
    }
    Ok(trace)
}

/// Runs a scenario and converts an aborted run into an error.
pub fn run_scenario_strict(scenario: &ResolvedScenario, planner: PlannerKind) -> Result<SimTrace> {
    let trace = run_scenario(scenario, planner)?;
    match &trace.aborted {
        Some(reason) => Err(Error::Aborted(reason.clone())),
        None => Ok(trace),
    }
}

//! Scenario files: map, reference route, ego start, replayed obstacles and
//! self-play agents, plus seeded perturbations.

use super::trace::track_samples_from_log;
use crate::environment::{ObstacleInfo, ObstacleSample, ObstacleTrack, OccupancyGrid, StaticMap};
use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Point};
use crate::path::ReferencePath;
use crate::solver::PlannerConfig;
use crate::vessel::{VesselModel, VesselState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[default]
    Generic,
    HeadOn,
    Overtaking,
    CrossingStarboard,
    CrossingPort,
    MultiAgentHeadOn,
    MultiAgentCrossing,
}

/// Rectangle-built or image-backed occupancy grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    Rects {
        resolution: f64,
        origin: [f64; 2],
        width: usize,
        height: usize,
        /// `[x_min, y_min, x_max, y_max]` blocks of occupied cells.
        occupied: Vec<[f64; 4]>,
    },
    /// PGM image and JSON sidecar, relative to the scenario file.
    Pgm { image: PathBuf, meta: PathBuf },
}

impl GridSpec {
    pub fn build(&self, base_dir: &Path) -> Result<OccupancyGrid> {
        match self {
            GridSpec::Rects {
                resolution,
                origin,
                width,
                height,
                occupied,
            } => OccupancyGrid::from_rects(*resolution, Point::new(origin[0], origin[1]), *width, *height, occupied),
            GridSpec::Pgm { image, meta } => OccupancyGrid::load_pgm(base_dir.join(image), base_dir.join(meta)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    #[serde(default)]
    pub u: f64,
    #[serde(default)]
    pub v: f64,
    #[serde(default)]
    pub r: f64,
}

impl InitialState {
    pub fn to_state(self) -> VesselState {
        VesselState::new(self.x, self.y, self.psi, self.u, self.v, self.r)
    }
}

/// Piecewise-linear route flown at constant speed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteSpec {
    pub waypoints: Vec<[f64; 2]>,
    pub speed: f64,
    #[serde(default)]
    pub start_time: f64,
    /// Sample spacing (s).
    #[serde(default = "default_route_step")]
    pub step: f64,
}

fn default_route_step() -> f64 {
    0.5
}

impl RouteSpec {
    /// Samples along the route; the vessel waits at the first waypoint until
    /// `start_time` and stays at the last one afterwards.
    pub fn samples(&self) -> Vec<ObstacleSample> {
        let pts: Vec<Point> = self.waypoints.iter().map(|w| Point::new(w[0], w[1])).collect();
        let mut legs = Vec::new();
        let mut total = 0.0;
        for w in pts.windows(2) {
            let len = (w[1] - w[0]).norm();
            if len > 0.0 {
                legs.push((w[0], w[1], total, len));
                total += len;
            }
        }
        if legs.is_empty() || !(self.speed > 0.0) || !(self.step > 0.0) {
            let p = pts.first().copied().unwrap_or_else(Point::zeros);
            return vec![ObstacleSample { t: self.start_time, x: p.x, y: p.y, heading: 0.0, speed: 0.0 }];
        }
        let duration = total / self.speed;
        let count = (duration / self.step).ceil() as usize;
        (0..=count)
            .map(|i| {
                let s = (i as f64 * self.step * self.speed).min(total);
                let &(a, b, s0, len) = legs.iter().rev().find(|l| l.2 <= s).unwrap_or(&legs[0]);
                let p = a + (b - a) * ((s - s0) / len);
                let d = b - a;
                ObstacleSample {
                    t: self.start_time + s / self.speed,
                    x: p.x,
                    y: p.y,
                    heading: d.y.atan2(d.x),
                    speed: self.speed,
                }
            })
            .collect()
    }
}

/// Row source in a CSV trajectory log, relative to the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogSource {
    pub path: PathBuf,
    pub agent_id: String,
}

/// A replayed obstacle. Exactly one motion source must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    #[serde(flatten)]
    pub info: ObstacleInfo,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<ObstacleSample>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<RouteSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory_log: Option<LogSource>,
}

impl ObstacleSpec {
    fn track(&self, base_dir: &Path) -> Result<ObstacleTrack> {
        let bad = |reason: &str| Error::InvalidTrack { id: self.info.id.clone(), reason: reason.into() };
        let samples = match (&self.samples, &self.route, &self.trajectory_log) {
            (Some(s), None, None) => s.clone(),
            (None, Some(r), None) => r.samples(),
            (None, None, Some(log)) => {
                let path = base_dir.join(&log.path);
                let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
                track_samples_from_log(file, &log.agent_id)?
            }
            (None, None, None) => return Err(bad("no samples, route or trajectory_log given")),
            _ => return Err(bad("give only one of samples, route or trajectory_log")),
        };
        Ok(ObstacleTrack { info: self.info.clone(), samples })
    }
}

/// A self-play vessel running its own planner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    pub waypoints: Vec<[f64; 2]>,
    pub initial: InitialState,
    /// Planner overrides for this agent only.
    #[serde(default)]
    pub planner: Value,
}

/// Uniform seeded perturbation half-widths applied to initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    /// Ego offset normal to its heading (m).
    pub ego_lateral: f64,
    pub ego_heading: f64,
    /// Obstacle track offset normal to its initial heading (m).
    pub obstacle_lateral: f64,
    /// Obstacle track time shift (s).
    pub obstacle_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub kind: ScenarioKind,
    pub grid: GridSpec,
    /// Ego reference route.
    pub waypoints: Vec<[f64; 2]>,
    pub ego: InitialState,
    #[serde(default = "default_ego_id")]
    pub ego_id: String,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub agents: Vec<AgentSpec>,
    /// Simulated time (s).
    pub duration: f64,
    /// Planner overrides for every agent.
    #[serde(default)]
    pub planner: Value,
    /// Vessel model; the built-in quarter-scale model if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<VesselModel>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub perturbation: Perturbation,
    /// Stop a vessel once it is within this distance of its final waypoint.
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
}

fn default_ego_id() -> String {
    "ego".into()
}

fn default_goal_tolerance() -> f64 {
    1.0
}

/// A planned vessel ready for simulation.
#[derive(Debug, Clone)]
pub struct ResolvedAgent {
    pub id: String,
    pub path: ReferencePath,
    pub initial: VesselState,
    pub config: PlannerConfig,
}

#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub map: StaticMap,
    pub agents: Vec<ResolvedAgent>,
    pub tracks: Vec<ObstacleTrack>,
    pub model: VesselModel,
    pub duration: f64,
    pub goal_tolerance: f64,
    pub seed: u64,
}

impl ResolvedScenario {
    pub fn grid(&self) -> &OccupancyGrid {
        self.map.grid()
    }
}

/// Recursively overlays `patch` onto `base`; non-object values replace.
pub fn merge_json(base: &mut Value, patch: &Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge_json(b.entry(k.clone()).or_insert(Value::Null), v);
            }
        }
        (b, p) if !p.is_null() => *b = p.clone(),
        _ => {}
    }
}

fn to_points(w: &[[f64; 2]]) -> Vec<Point> {
    w.iter().map(|p| Point::new(p[0], p[1])).collect()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Semantic checks; returns one line per problem found.
    pub fn diagnostics(&self, base_dir: &Path) -> Vec<String> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(format!("schema_version: expected {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            out.push(format!("duration: must be positive, got {}", self.duration));
        }
        if !(self.goal_tolerance > 0.0) {
            out.push(format!("goal_tolerance: must be positive, got {}", self.goal_tolerance));
        }
        let grid = match self.grid.build(base_dir) {
            Ok(g) => Some(g),
            Err(e) => {
                out.push(format!("grid: {e}"));
                None
            }
        };
        let vessels = std::iter::once((self.ego_id.as_str(), &self.waypoints, &self.ego))
            .chain(self.agents.iter().map(|a| (a.id.as_str(), &a.waypoints, &a.initial)));
        for (id, waypoints, initial) in vessels {
            let field = if id == self.ego_id { "ego".to_string() } else { format!("agents[{id}]") };
            if let Err(e) = ReferencePath::new(&to_points(waypoints)) {
                out.push(format!("{field}.waypoints: {e}"));
            }
            if let Some(g) = &grid {
                if let Some((i, w)) = waypoints.iter().enumerate().find(|(_, w)| !g.contains(&Point::new(w[0], w[1]))) {
                    out.push(format!("{field}.waypoints[{i}]: ({}, {}) lies outside the grid", w[0], w[1]));
                }
                match g.occupied_at(&Point::new(initial.x, initial.y)) {
                    Some(false) => {}
                    Some(true) => out.push(format!("{field}: initial position occupied")),
                    None => out.push(format!("{field}: initial position outside the grid")),
                }
            }
            if ![initial.x, initial.y, initial.psi, initial.u, initial.v, initial.r].iter().all(|v| v.is_finite()) {
                out.push(format!("{field}: initial state is not finite"));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        ids.insert(self.ego_id.clone());
        for a in &self.agents {
            if !ids.insert(a.id.clone()) {
                out.push(format!("agents: duplicate id `{}`", a.id));
            }
        }
        for o in &self.obstacles {
            if !ids.insert(o.info.id.clone()) {
                out.push(format!("obstacles: duplicate id `{}`", o.info.id));
            }
            match o.track(base_dir).and_then(|t| t.validate()) {
                Ok(()) => {}
                Err(e) => out.push(format!("obstacles[{}]: {e}", o.info.id)),
            }
        }
        if let Some(m) = &self.model {
            if let Err(e) = m.validate() {
                out.push(format!("model: {e}"));
            }
        }
        if let Err(e) = self.planner_config(&Value::Null, &Value::Null) {
            out.push(format!("planner: {e}"));
        }
        for a in &self.agents {
            if let Err(e) = self.planner_config(&Value::Null, &a.planner) {
                out.push(format!("agents[{}].planner: {e}", a.id));
            }
        }
        out
    }

    /// Default config overlaid with the scenario, command-line and agent
    /// overrides, in that order.
    pub fn planner_config(&self, cli: &Value, agent: &Value) -> Result<PlannerConfig> {
        let mut v = serde_json::to_value(PlannerConfig::default())?;
        merge_json(&mut v, &self.planner);
        merge_json(&mut v, cli);
        merge_json(&mut v, agent);
        let config: PlannerConfig = serde_json::from_value(v)?;
        config.validate()?;
        Ok(config)
    }

    /// Builds everything the simulator needs, applying the perturbation
    /// drawn from `seed`.
    pub fn resolve(&self, base_dir: &Path, seed: u64, config_override: &Value) -> Result<ResolvedScenario> {
        let diags = self.diagnostics(base_dir);
        if !diags.is_empty() {
            return Err(Error::Scenario(diags));
        }
        let grid = self.grid.build(base_dir)?;
        let model = self.model.clone().unwrap_or_default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |half: f64| if half > 0.0 { rng.gen_range(-half..=half) } else { 0.0 };
        let pert = self.perturbation;

        let mut ego = self.ego.to_state();
        let offset = draw(pert.ego_lateral);
        ego.x -= ego.psi.sin() * offset;
        ego.y += ego.psi.cos() * offset;
        ego.psi = wrap_angle(ego.psi + draw(pert.ego_heading));

        let mut tracks = Vec::with_capacity(self.obstacles.len());
        for o in &self.obstacles {
            let mut track = o.track(base_dir)?;
            let lateral = draw(pert.obstacle_lateral);
            let shift = draw(pert.obstacle_time);
            let h = track.samples[0].heading;
            for s in &mut track.samples {
                s.x -= h.sin() * lateral;
                s.y += h.cos() * lateral;
                s.t += shift;
            }
            tracks.push(track);
        }

        let mut agents = vec![ResolvedAgent {
            id: self.ego_id.clone(),
            path: ReferencePath::new(&to_points(&self.waypoints))?,
            initial: ego,
            config: self.planner_config(config_override, &Value::Null)?,
        }];
        for a in &self.agents {
            agents.push(ResolvedAgent {
                id: a.id.clone(),
                path: ReferencePath::new(&to_points(&a.waypoints))?,
                initial: a.initial.to_state(),
                config: self.planner_config(config_override, &a.planner)?,
            });
        }
        if let Some(bad) = agents.iter().find(|a| grid.occupied_at(&a.initial.position()) != Some(false)) {
            return Err(Error::Scenario(vec![format!("{}: perturbed initial position occupied", bad.id)]));
        }
        Ok(ResolvedScenario {
            name: self.name.clone(),
            kind: self.kind,
            map: StaticMap::new(grid),
            agents,
            tracks,
            model,
            duration: self.duration,
            goal_tolerance: self.goal_tolerance,
            seed,
        })
    }
}

/// Loads a scenario file, resolving relative paths against its directory.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<(Scenario, PathBuf)> {
    let path = path.as_ref();
    let scenario = Scenario::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((scenario, base))
}


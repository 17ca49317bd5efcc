//! Closed-loop scenarios, trajectory logs and regulation metrics.

mod metrics;
mod runner;
mod scenario;
mod trace;
mod violations;

pub use metrics::{compute_metrics, lmpcc_baseline_cost, summarize, Metrics, RunSummary};
pub use runner::{
    detect_collision, hull_footprint, run_scenario, run_scenario_strict, EllipseObstacle, ENCOUNTER_RANGE,
    PLANT_STEP, REPLAN_INTERVAL,
};
pub use scenario::{
    load_scenario, merge_json, AgentSpec, GridSpec, InitialState, LogSource, ObstacleSpec, Perturbation,
    ResolvedAgent, ResolvedScenario, RouteSpec, Scenario, ScenarioKind, SCHEMA_VERSION,
};
pub use trace::{
    read_log, track_samples_from_log, AgentTrace, CollisionEvent, Encounter, LogRow, ObstacleTrace, PlannerKind,
    SimTrace,
};
pub use violations::{
    count_dwell_events, detect_violations, detect_violations_for, mirror_trace, violation_flags, RegionSpec,
    ViolationCounts, ViolationKind, ViolationRegionSpec, DEFAULT_SCALE,
};

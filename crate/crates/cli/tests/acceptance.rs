use rampcc::environment::{predict_from_state, LinearConstraint, ObstacleInfo, ObstacleState, VesselClass};
use rampcc::geometry::Point;
use rampcc::path::ReferencePath;
use rampcc::regulation::{regulation_cost, RegulationMode, RegulationParams, RegulationTarget};
use rampcc::sim::{
    count_dwell_events, detect_violations, mirror_trace, load_scenario, violation_flags, AgentTrace, ObstacleTrace,
    PlannerKind, SimTrace, ViolationRegionSpec,
};
use rampcc::solver::{solve, stage_cost, PlanProblem, PlanStatus, PlannedObstacle, PlannerConfig};
use rampcc::vessel::{step_dynamics, ThrustCommand, VesselModel, VesselState};
use rampcc_cli::{cmd_bench, cmd_run};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

const SUITE_RUNS: usize = 10;
const BENCH_BUDGET: Duration = Duration::from_secs(30 * 60);
const VIOLATION_RATIO: f64 = 0.6;
const PORT_PASSES: usize = 9;
const GRAD_TOL: f64 = 1e-5;
const DYNAMICS_TOL: f64 = 1e-3;
const ORACLE_SUBSTEPS: usize = 100;
const SOLVE_BUDGET: f64 = 0.2;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Trace rows grouped by agent id, in time order.
type Rows = BTreeMap<String, Vec<(f64, f64, f64)>>;

fn read_trace(path: &Path) -> Rows {
    let mut rows = Rows::new();
    let mut rd = csv::Reader::from_path(path).unwrap();
    for rec in rd.records() {
        let rec = rec.unwrap();
        let f = |i: usize| rec[i].parse::<f64>().unwrap();
        rows.entry(rec[1].to_string()).or_default().push((f(2), f(3), f(4)));
    }
    rows
}

/// Lateral offset of `p` in the body frame of pose `(x, y, psi)`; positive to port.
fn lateral(of: (f64, f64, f64), p: (f64, f64, f64)) -> f64 {
    -of.2.sin() * (p.0 - of.0) + of.2.cos() * (p.1 - of.1)
}

/// Index of closest approach between two equally sampled tracks.
fn closest(a: &[(f64, f64, f64)], b: &[(f64, f64, f64)]) -> usize {
    (0..a.len().min(b.len()))
        .min_by(|&i, &j| {
            let d = |k: usize| (a[k].0 - b[k].0).hypot(a[k].1 - b[k].1);
            d(i).total_cmp(&d(j))
        })
        .unwrap()
}

/// Both vessels see each other on their port side at closest approach.
fn port_to_port(a: &[(f64, f64, f64)], b: &[(f64, f64, f64)]) -> bool {
    let k = closest(a, b);
    lateral(a[k], b[k]) > 0.0 && lateral(b[k], a[k]) > 0.0
}

fn criterion_1_and_2(tmp: &Path) -> (Outcome, Outcome) {
    let out = tmp.join("bench");
    let started = Instant::now();
    let report = cmd_bench(
        &repo().join("scenarios/suite"),
        &[PlannerKind::RaMpcc, PlannerKind::Lmpcc],
        SUITE_RUNS,
        0,
        &out,
        &json!({}),
        None,
    )
    .unwrap();
    let elapsed = started.elapsed();
    let pct = |p: PlannerKind| report.rows.iter().find(|r| r.planner == p).unwrap().pct_right_handed_violations;
    let (ra, lm) = (pct(PlannerKind::RaMpcc), pct(PlannerKind::Lmpcc));
    let ra_runs: Vec<_> = report.runs.iter().filter(|r| r.planner == PlannerKind::RaMpcc).collect();
    let collisions: usize = ra_runs.iter().map(|r| r.summary.collisions).sum();
    let c1 = outcome(
        report.failures.is_empty()
            && ra_runs.len() == 8 * SUITE_RUNS
            && collisions == 0
            && lm > 0.0
            && ra <= VIOLATION_RATIO * lm
            && elapsed < BENCH_BUDGET,
        format!(
            "{} RA runs, {collisions} collisions, right-handed {ra:.2}% vs {lm:.2}% (ratio {:.2}), {:.0} s",
            ra_runs.len(),
            ra / lm,
            elapsed.as_secs_f64()
        ),
    );

    let mut pass = true;
    let mut detail = Vec::new();
    let config = PlannerConfig::default();
    let r_disc = VesselModel::default().disc_radius;
    for name in ["head_on_centerline", "head_on_offset", "crossing_starboard_motorboat", "crossing_starboard_sailboat"] {
        let (scenario, _) = load_scenario(repo().join(format!("scenarios/suite/{name}.json"))).unwrap();
        let info = &scenario.obstacles[0].info;
        let traces: Vec<Rows> = ra_runs.iter().filter(|r| r.scenario == name).map(|r| read_trace(&r.trace)).collect();
        let pair = |t: &Rows| (t["ego"].clone(), t.iter().find(|(k, _)| *k != "ego").unwrap().1.clone());
        if name.starts_with("head_on") {
            let ports = traces
                .iter()
                .filter(|t| {
                    let (ego, obs) = pair(t);
                    let k = closest(&ego, &obs);
                    lateral(obs[k], ego[k]) > 0.0
                })
                .count();
            pass &= traces.len() == SUITE_RUNS && ports >= PORT_PASSES;
            detail.push(format!("{name} port {ports}/{}", traces.len()));
        } else {
            let s = config.regulation.resolve(info.a, info.b);
            let (sx, sy) = (s.e, info.b + r_disc);
            let min = traces
                .iter()
                .flat_map(|t| {
                    let (ego, obs) = pair(t);
                    ego.into_iter().zip(obs).map(move |(e, o)| {
                        let (cx, cy) = (o.0 + s.f * o.2.cos(), o.1 + s.f * o.2.sin());
                        let (dx, dy) = (e.0 - cx, e.1 - cy);
                        let lx = o.2.cos() * dx + o.2.sin() * dy;
                        let ly = -o.2.sin() * dx + o.2.cos() * dy;
                        (lx / sx).hypot(ly / sy)
                    })
                })
                .fold(f64::INFINITY, f64::min);
            pass &= traces.len() == SUITE_RUNS && min > 1.0;
            detail.push(format!("{name} min RoW distance {min:.2} sigma"));
        }
    }
    (c1, outcome(pass, detail.join(", ")))
}

fn boat(id: String, priority: bool, state: ObstacleState, config: &PlannerConfig) -> PlannedObstacle {
    PlannedObstacle {
        info: ObstacleInfo { id, a: 0.6, b: 0.3, vessel_class: VesselClass::SmallMotorboat, length: 1.2 },
        prediction: predict_from_state(&state, config.tau, config.horizon),
        priority,
    }
}

fn random_problem<'a>(
    rng: &mut ChaCha8Rng,
    path: &'a ReferencePath,
    model: &'a VesselModel,
    config: &PlannerConfig,
    obstacles: usize,
) -> PlanProblem<'a> {
    let theta = rng.gen_range(2.0..path.total_length() - 12.0);
    let s = path.sample(theta);
    let (h, normal) = (s.tangent_heading, Point::new(-s.tangent_heading.sin(), s.tangent_heading.cos()));
    let pos = s.point + normal * rng.gen_range(-1.5..1.5);
    let z0 = VesselState::new(pos.x, pos.y, h + rng.gen_range(-0.4..0.4), rng.gen_range(0.0..0.8), 0.0, 0.0);
    let obstacles = (0..obstacles)
        .map(|i| {
            let p = s.point + Point::new(h.cos(), h.sin()) * rng.gen_range(4.0..12.0) + normal * rng.gen_range(-2.0..2.0);
            let heading = rng.gen_range(-PI..PI);
            let state = ObstacleState { position: p, heading, velocity: Point::new(heading.cos(), heading.sin()) * rng.gen_range(0.0..0.5) };
            boat(format!("o{i}"), rng.gen_bool(0.3), state, config)
        })
        .collect();
    let mut static_constraints: [Vec<LinearConstraint>; 3] = Default::default();
    if rng.gen_bool(0.5) {
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let n = normal * side;
        let wall = LinearConstraint { normal: n, offset: n.dot(&pos) + rng.gen_range(0.8..3.0) };
        static_constraints = [vec![wall], vec![wall], vec![wall]];
    }
    PlanProblem {
        initial_state: z0,
        initial_progress: theta,
        path,
        model,
        static_constraints,
        obstacles,
        mode: if rng.gen_bool(0.5) { RegulationMode::Regulated } else { RegulationMode::Centered },
    }
}

fn canal_path() -> ReferencePath {
    let pts: Vec<Point> = (0..=6).map(|i| Point::new(10.0 * i as f64, 3.0 * (i as f64 * 0.9).sin())).collect();
    ReferencePath::new(&pts).unwrap()
}

fn criterion_3() -> Outcome {
    let path = canal_path();
    let model = VesselModel::default();
    let config = PlannerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut converged, mut infeasible_claims) = (0, 0);
    for _ in 0..200 {
        let n_obs = rng.gen_range(0..4);
        let p = random_problem(&mut rng, &path, &model, &config, n_obs);
        let res = solve(&p, None, &config).unwrap();
        if res.status == PlanStatus::Converged {
            converged += 1;
            infeasible_claims += usize::from(!res.hard_feasible(model.max_thrust));
        }
    }

    let rel = |g: f64, fd: f64| (g - fd).abs() / g.abs().max(fd.abs()).max(1e-2);
    let h = 1e-6;
    let mut stage_err: f64 = 0.0;
    for _ in 0..200 {
        let n_obs = rng.gen_range(0..4);
        let p = random_problem(&mut rng, &path, &model, &config, n_obs);
        let k = rng.gen_range(0..=config.horizon);
        let z0 = p.initial_state;
        let x0 = [
            z0.x + rng.gen_range(-1.0..1.0),
            z0.y + rng.gen_range(-1.0..1.0),
            rng.gen_range(-PI..PI),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-0.3..0.3),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            p.initial_progress + rng.gen_range(-1.0..1.0),
        ];
        let eval = |x: &[f64; 11]| {
            let z = VesselState::new(x[0], x[1], x[2], x[3], x[4], x[5]);
            stage_cost(k, &z, Some(&ThrustCommand::new(x[6], x[7], x[8], x[9])), x[10], &p, &config)
        };
        let (_, grad) = eval(&x0);
        for i in 0..11 {
            let (mut xp, mut xm) = (x0, x0);
            xp[i] += h;
            xm[i] -= h;
            stage_err = stage_err.max(rel(grad[i], (eval(&xp).0 - eval(&xm).0) / (2.0 * h)));
        }
    }

    let params = RegulationParams::default();
    let mut reg_err: f64 = 0.0;
    for i in 0..200 {
        let targets: Vec<RegulationTarget> = (0..rng.gen_range(1..4))
            .map(|_| RegulationTarget {
                position: Point::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                heading: rng.gen_range(-PI..PI),
                a: rng.gen_range(0.3..2.0),
                b: rng.gen_range(0.2..1.0),
                priority: rng.gen_bool(0.5),
            })
            .collect();
        let mode = if i % 2 == 0 { RegulationMode::Regulated } else { RegulationMode::Centered };
        let p = Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let (_, g) = regulation_cost(&p, &targets, &params, 0.28, mode);
        for d in 0..2 {
            let mut e = Point::zeros();
            e[d] = h;
            let fd = (regulation_cost(&(p + e), &targets, &params, 0.28, mode).0
                - regulation_cost(&(p - e), &targets, &params, 0.28, mode).0)
                / (2.0 * h);
            reg_err = reg_err.max(rel(g[d], fd));
        }
    }
    outcome(
        converged > 0 && infeasible_claims == 0 && stage_err < GRAD_TOL && reg_err < GRAD_TOL,
        format!(
            "{converged}/200 converged, {infeasible_claims} not hard-feasible; gradient error stage {stage_err:.1e}, regulation {reg_err:.1e}"
        ),
    )
}

/// Body-frame 3-DOF model written out component-wise.
fn oracle_derivative(z: &[f64; 6], f: &[f64; 4], m: &VesselModel) -> [f64; 6] {
    let [_, _, psi, u, v, r] = *z;
    let (m11, m22, m33) = (m.mass[0], m.mass[1], m.mass[2]);
    let (d11, d22, d33) = (m.damping[0], m.damping[1], m.damping[2]);
    let tau: Vec<f64> = (0..3).map(|i| (0..4).map(|j| m.allocation[(i, j)] * f[j]).sum()).collect();
    [
        u * psi.cos() - v * psi.sin(),
        u * psi.sin() + v * psi.cos(),
        r,
        (tau[0] + m22 * v * r - d11 * u) / m11,
        (tau[1] - m11 * u * r - d22 * v) / m22,
        (tau[2] - (m22 - m11) * u * v - d33 * r) / m33,
    ]
}

fn oracle_step(z: &[f64; 6], f: &[f64; 4], m: &VesselModel, tau: f64) -> [f64; 6] {
    let h = tau / ORACLE_SUBSTEPS as f64;
    let add = |a: &[f64; 6], b: &[f64; 6], s: f64| std::array::from_fn::<f64, 6, _>(|i| a[i] + s * b[i]);
    let mut z = *z;
    for _ in 0..ORACLE_SUBSTEPS {
        let k1 = oracle_derivative(&z, f, m);
        let k2 = oracle_derivative(&add(&z, &k1, h / 2.0), f, m);
        let k3 = oracle_derivative(&add(&z, &k2, h / 2.0), f, m);
        let k4 = oracle_derivative(&add(&z, &k3, h), f, m);
        z = std::array::from_fn(|i| z[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    }
    z
}

fn criterion_4() -> Outcome {
    let model = VesselModel::default();
    let tau = PlannerConfig::default().tau;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut state = || {
        [
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-PI..PI),
            rng.gen_range(-1.0..1.5),
            rng.gen_range(-0.5..0.5),
            rng.gen_range(-0.8..0.8),
        ]
    };
    let as_state = |z: &[f64; 6]| VesselState::new(z[0], z[1], z[2], z[3], z[4], z[5]);
    let energy = |z: &[f64; 6]| 0.5 * (model.mass[0] * z[3] * z[3] + model.mass[1] * z[4] * z[4] + model.mass[2] * z[5] * z[5]);
    let mut samples = Vec::new();
    for _ in 0..1000 {
        samples.push(state());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut err: f64 = 0.0;
    for z in &samples {
        let f: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
        let got = step_dynamics(&as_state(z), &ThrustCommand::new(f[0], f[1], f[2], f[3]), &model, tau).unwrap();
        let want = oracle_step(z, &f, &model, tau);
        let got = [got.x, got.y, got.psi, got.u, got.v, got.r];
        let diff = |i: usize| {
            let d = got[i] - want[i];
            // headings compare modulo a full turn
            if i == 2 { (d + PI).rem_euclid(2.0 * PI) - PI } else { d }
        };
        err = err.max((0..6).map(|i| diff(i).abs()).fold(0.0, f64::max));
    }
    let mut gains = 0;
    for z in &samples {
        let next = step_dynamics(&as_state(z), &ThrustCommand::zero(), &model, tau).unwrap();
        let next = [next.x, next.y, next.psi, next.u, next.v, next.r];
        gains += usize::from(energy(&next) > energy(z) * (1.0 + 1e-12));
    }
    outcome(
        err < DYNAMICS_TOL && gains == 0,
        format!("max field error {err:.2e} over 1000 steps, {gains}/1000 zero-thrust steps gained energy"),
    )
}

fn synthetic_trace(rng: &mut ChaCha8Rng) -> SimTrace {
    let model = VesselModel::default();
    let samples = 500;
    let (ey, eh, ev): (f64, f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-0.3..0.3), rng.gen_range(0.0..0.6));
    let (o, oh, ov) = (Point::new(rng.gen_range(-6.0..14.0), rng.gen_range(-6.0..6.0)), rng.gen_range(-PI..PI), rng.gen_range(0.0..0.6));
    let times: Vec<f64> = (0..samples).map(|i| i as f64 * 0.05).collect();
    let vel = Point::new(oh.cos(), oh.sin()) * ov;
    SimTrace {
        scenario: "synthetic".into(),
        planner: PlannerKind::RaMpcc,
        step: 0.05,
        replan_interval: 4,
        agents: vec![AgentTrace {
            id: "ego".into(),
            footprint: rampcc::sim::hull_footprint("ego", &model),
            states: times.iter().map(|&t| VesselState::new(ev * t * eh.cos(), ey + ev * t * eh.sin(), eh, ev, 0.0, 0.0)).collect(),
            commands: vec![ThrustCommand::zero(); samples],
            statuses: vec![PlanStatus::Converged; samples],
        }],
        obstacles: vec![ObstacleTrace {
            info: ObstacleInfo { id: "o".into(), a: 0.6, b: 0.3, vessel_class: VesselClass::SmallMotorboat, length: 1.2 },
            states: times.iter().map(|&t| ObstacleState { position: o + vel * t, heading: oh, velocity: vel }).collect(),
        }],
        times,
        collisions: Vec::new(),
        solve_times: Vec::new(),
        aborted: None,
        reached_goal: false,
    }
}

fn criterion_5() -> Outcome {
    let spec = ViolationRegionSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut consistent, mut events) = (0, 0);
    for _ in 0..50 {
        let t = synthetic_trace(&mut rng);
        let m = mirror_trace(&t);
        let (a, b) = (detect_violations(&t, &spec), detect_violations(&m, &spec));
        events += a.total();
        let flags_mirror = violation_flags(&t, &spec)
            .into_iter()
            .zip(violation_flags(&m, &spec))
            .all(|(f, g)| f == (g.1, g.0));
        consistent += usize::from((a.right, a.left) == (b.left, b.right) && flags_mirror);
    }
    let dt = 0.2;
    let times: Vec<f64> = (0..8).map(|i| i as f64 * dt).collect();
    let mut flags = vec![false; 8];
    flags[2] = true;
    let exact = count_dwell_events(&times, &flags, dt);
    flags[3] = true;
    let longer = count_dwell_events(&times, &flags, dt);
    outcome(
        consistent == 50 && exact == 0 && longer == 1,
        format!("{consistent}/50 traces mirror-consistent ({events} events), dwell dt -> {exact}, 2 dt -> {longer}"),
    )
}

fn criterion_6(tmp: &Path) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for name in ["two_agent_head_on", "two_agent_crossing"] {
        let report = cmd_run(
            &repo().join(format!("scenarios/multi_agent/{name}.json")),
            PlannerKind::RaMpcc,
            &tmp.join("multi"),
            None,
            &json!({}),
        )
        .unwrap();
        let rows = read_trace(&report.trace);
        let agents: Vec<_> = rows.values().collect();
        let p2p = agents.len() == 2 && port_to_port(agents[0], agents[1]);
        pass &= report.summary.collisions == 0 && p2p;
        detail.push(format!("{name}: {} collisions, port-to-port {p2p}", report.summary.collisions));
    }
    outcome(pass, detail.join(", "))
}

fn criterion_7() -> Outcome {
    let path = canal_path();
    let model = VesselModel::default();
    let config = PlannerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut times: Vec<f64> = (0..41)
        .map(|_| {
            let p = random_problem(&mut rng, &path, &model, &config, 3);
            let started = Instant::now();
            solve(&p, None, &config).unwrap();
            started.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let median = times[times.len() / 2];
    outcome(
        config.horizon == 20 && median < SOLVE_BUDGET,
        format!("median {:.1} ms, max {:.1} ms over 41 cold solves", median * 1e3, times[40] * 1e3),
    )
}

fn criterion_8(tmp: &Path) -> Outcome {
    let scenario = repo().join("scenarios/suite/crossing_starboard_sailboat.json");
    let bytes: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let r = cmd_run(&scenario, PlannerKind::RaMpcc, &tmp.join(format!("repeat{k}")), Some(17), &json!({})).unwrap();
            std::fs::read(r.trace).unwrap()
        })
        .collect();
    outcome(bytes[0] == bytes[1], format!("two seed-17 traces of {} bytes, identical {}", bytes[0].len(), bytes[0] == bytes[1]))
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let (c1, c2) = criterion_1_and_2(tmp.path());
    let results = [
        c1,
        c2,
        criterion_3(),
        criterion_4(),
        criterion_5(),
        criterion_6(tmp.path()),
        criterion_7(),
        criterion_8(tmp.path()),
    ];
    for (i, r) in results.iter().enumerate() {
        println!("criterion {}: {} {}", i + 1, if r.pass { "PASS" } else { "FAIL" }, r.detail);
    }
    if results.iter().any(|r| !r.pass) {
        std::process::exit(1);
    }
}

use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn rampcc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rampcc")).args(args).output().unwrap()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn short_scenario(name: &str, duration: f64) -> Value {
    json!({
        "schema_version": 1,
        "name": name,
        "kind": "head_on",
        "grid": {"rects": {
            "resolution": 0.2, "origin": [-5.0, -12.0], "width": 250, "height": 120,
            "occupied": [[-5.0, -12.0, 45.0, -4.0], [-5.0, 4.0, 45.0, 12.0]]
        }},
        "waypoints": [[0.0, 0.0], [20.0, 0.0], [40.0, 0.0]],
        "ego": {"x": 1.0, "y": 0.0, "psi": 0.0, "u": 0.5},
        "obstacles": [{
            "id": "oncoming", "a": 0.6, "b": 0.3, "vessel_class": "small_motorboat", "length": 1.2,
            "route": {"waypoints": [[14.0, 0.0], [-4.0, 0.0]], "speed": 0.4, "start_time": 0.0}
        }],
        "duration": duration,
        "seed": 0,
        "perturbation": {"ego_lateral": 0.2, "ego_heading": 0.05}
    })
}

fn write(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn run_writes_trace_metrics_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "s.json", &short_scenario("short", 12.0));
    let out = dir.path().join("out");
    let o = rampcc(&["run", "--scenario", scen.to_str().unwrap(), "--planner", "rampcc", "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stem = out.join("short_rampcc_seed4");
    let csv = std::fs::read_to_string(stem.with_extension("csv")).unwrap();
    assert!(csv.starts_with("t,agent_id,x,y,psi,u,v,r,f1,f2,f3,f4,status"));
    assert_eq!(csv.lines().count(), 1 + 2 * 241);
    let metrics: Value = serde_json::from_slice(&std::fs::read(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(metrics["planner_steps"], 61);
    assert_eq!(metrics["seed"], 4);
    let svg = std::fs::read_to_string(stem.with_extension("svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let ids: Vec<&str> = doc.descendants().filter_map(|n| n.attribute("id")).collect();
    assert!(ids.contains(&"agent-ego") && ids.contains(&"obstacle-oncoming"), "{ids:?}");
}

#[test]
fn same_seed_gives_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write(dir.path(), "s.json", &short_scenario("repeat", 15.0));
    let mut traces = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let o = rampcc(&["run", "--scenario", scen.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "9"]);
        assert!(o.status.success(), "{}", stderr(&o));
        traces.push(std::fs::read(out.join("repeat_rampcc_seed9.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn missing_waypoints_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = short_scenario("bad", 5.0);
    v.as_object_mut().unwrap().remove("waypoints");
    let scen = write(dir.path(), "bad.json", &v);
    let out = dir.path().join("o");
    let run = rampcc(&["run", "--scenario", scen.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let validate = rampcc(&["validate", "--scenario", scen.to_str().unwrap()]);
    for o in [run, validate] {
        assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
        assert!(stderr(&o).contains("waypoints"), "{}", stderr(&o));
    }
    assert!(!out.exists());
}

#[test]
fn validate_reports_occupied_start_and_unsorted_track() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = short_scenario("occupied", 5.0);
    v["ego"]["y"] = json!(5.0);
    v["obstacles"] = json!([{
        "id": "shuffled", "a": 0.6, "b": 0.3, "vessel_class": "sailboat", "length": 1.2,
        "samples": [{"t": 2.0, "x": 5.0, "y": 0.0, "heading": 0.0}, {"t": 1.0, "x": 6.0, "y": 0.0, "heading": 0.0}]
    }]);
    let scen = write(dir.path(), "occ.json", &v);
    let o = rampcc(&["validate", "--scenario", scen.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("initial position occupied"), "{err}");
    assert!(err.contains("shuffled"), "{err}");
}

#[test]
fn shipped_scenarios_validate() {
    let mut n = 0;
    for sub in ["scenarios/suite", "scenarios/multi_agent"] {
        for e in std::fs::read_dir(repo_root().join(sub)).unwrap() {
            let p = e.unwrap().path();
            let o = rampcc(&["validate", "--scenario", p.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert_eq!(n, 10);
}

#[test]
fn bench_writes_one_trace_per_run() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    std::fs::create_dir(&suite).unwrap();
    write(&suite, "a.json", &short_scenario("a", 6.0));
    write(&suite, "b.json", &short_scenario("b", 6.0));
    let out = dir.path().join("bench");
    let o = rampcc(&["bench", "--scenario", suite.to_str().unwrap(), "--runs", "3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csvs = std::fs::read_dir(out.join("traces"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 2 * 2 * 3);
    let table = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 3, "{table}");
    assert!(table.contains("rampcc") && table.contains("lmpcc"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("lmpcc"));
}

#[test]
fn bench_fails_only_when_every_run_fails() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    std::fs::create_dir(&suite).unwrap();
    // valid as written, but the plant overflows on the first step
    let mut doomed = short_scenario("doomed", 4.0);
    doomed["ego"]["u"] = json!(1.7e308);
    write(&suite, "doomed.json", &doomed);
    let out = dir.path().join("bench");
    let args = |s: &Path, o: &Path| {
        vec!["bench".to_string(), "--scenario".into(), s.display().to_string(), "--runs".into(), "2".into(), "--out".into(), o.display().to_string(), "--planner".into(), "lmpcc".into()]
    };
    let o = Command::new(env!("CARGO_BIN_EXE_rampcc")).args(args(&suite, &out)).output().unwrap();
    assert!(!o.status.success());

    write(&suite, "fine.json", &short_scenario("fine", 4.0));
    let o = Command::new(env!("CARGO_BIN_EXE_rampcc")).args(args(&suite, &out)).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("doomed"));
}

#[test]
fn divergence_exits_with_three_and_keeps_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = short_scenario("diverge", 5.0);
    v["ego"]["u"] = json!(1.7e308);
    let scen = write(dir.path(), "d.json", &v);
    let out = dir.path().join("out");
    let o = rampcc(&["run", "--scenario", scen.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let metrics: Value = serde_json::from_slice(&std::fs::read(out.join("diverge_rampcc_seed0.json")).unwrap()).unwrap();
    assert!(metrics["aborted"].is_string());
    assert!(out.join("diverge_rampcc_seed0.csv").exists());
}

#[test]
fn unknown_planner_is_rejected() {
    let o = rampcc(&["run", "--scenario", "x.json", "--planner", "greedy"]);
    assert_eq!(o.status.code(), Some(2));
}

//! Single runs, batch benchmarks and scenario validation.

pub mod svg;

use rampcc::sim::{
    load_scenario, run_scenario, summarize, violation_flags, PlannerKind, ResolvedScenario, RunSummary, Scenario,
    SimTrace, ViolationRegionSpec,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad scenario, configuration or arguments.
    #[error("{0}")]
    Input(String),
    /// The simulation or file output failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Output of one closed-loop run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
    pub summary: RunSummary,
    pub trace: PathBuf,
    pub metrics: PathBuf,
    pub plot: PathBuf,
}

/// Contents of the per-run metrics file.
#[derive(Debug, Serialize)]
struct RunMetricsFile<'a> {
    scenario: &'a str,
    planner: PlannerKind,
    seed: u64,
    summary: &'a RunSummary,
    planner_steps: usize,
    /// Per planner step: (right-handed region occupied, left-handed region occupied).
    violation_flags: Vec<(bool, bool)>,
    collisions: &'a [rampcc::sim::CollisionEvent],
    aborted: &'a Option<String>,
}

/// Reads and checks a scenario file, mapping every problem to an input error.
pub fn load_checked(path: &Path) -> CliResult<(Scenario, PathBuf)> {
    let (scenario, base) =
        load_scenario(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let diags = scenario.diagnostics(&base);
    if !diags.is_empty() {
        return Err(CliError::Input(format!("{}:\n  {}", path.display(), diags.join("\n  "))));
    }
    Ok((scenario, base))
}

/// Parses a `--config` overrides file.
pub fn load_overrides(path: Option<&Path>) -> CliResult<Value> {
    match path {
        None => Ok(Value::Null),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve(scenario: &Scenario, base: &Path, seed: u64, overrides: &Value) -> CliResult<ResolvedScenario> {
    scenario.resolve(base, seed, overrides).map_err(|e| CliError::Input(e.to_string()))
}

fn write_outputs(
    trace: &SimTrace,
    resolved: &ResolvedScenario,
    seed: u64,
    out_dir: &Path,
    stem: &str,
) -> CliResult<RunReport> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Runtime(format!("{}: {e}", out_dir.display())))?;
    let spec = ViolationRegionSpec::for_scale(1.5 * resolved.model.length);
    let summary = RunSummary::from_trace(trace, &spec);

    let trace_path = out_dir.join(format!("{stem}.csv"));
    let mut csv = Vec::new();
    trace.write_csv(&mut csv).map_err(runtime)?;
    write_file(&trace_path, &csv)?;

    let metrics_path = out_dir.join(format!("{stem}.json"));
    let metrics = RunMetricsFile {
        scenario: &trace.scenario,
        planner: trace.planner,
        seed,
        summary: &summary,
        planner_steps: trace.planner_steps().count(),
        violation_flags: violation_flags(trace, &spec),
        collisions: &trace.collisions,
        aborted: &trace.aborted,
    };
    let json = serde_json::to_vec_pretty(&metrics).map_err(runtime)?;
    write_file(&metrics_path, &json)?;

    let plot_path = out_dir.join(format!("{stem}.svg"));
    let paths: Vec<_> = resolved.agents.iter().map(|a| &a.path).collect();
    write_file(&plot_path, svg::render(trace, resolved.grid(), &paths).as_bytes())?;

    Ok(RunReport {
        scenario: trace.scenario.clone(),
        planner: trace.planner,
        seed,
        summary,
        trace: trace_path,
        metrics: metrics_path,
        plot: plot_path,
    })
}

fn run_one(
    scenario: &Scenario,
    base: &Path,
    planner: PlannerKind,
    seed: u64,
    overrides: &Value,
    out_dir: &Path,
    stem: &str,
) -> CliResult<RunReport> {
    let resolved = resolve(scenario, base, seed, overrides)?;
    let trace = run_scenario(&resolved, planner).map_err(runtime)?;
    let report = write_outputs(&trace, &resolved, seed, out_dir, stem)?;
    match &trace.aborted {
        Some(reason) => Err(CliError::Runtime(format!(
            "{}: plant diverged ({reason}); partial trace in {}",
            scenario.name,
            report.trace.display()
        ))),
        None => Ok(report),
    }
}

/// Runs one scenario and writes its trace CSV, metrics JSON and SVG plot.
/// Without a seed the scenario's own seed is used.
pub fn cmd_run(
    scenario_path: &Path,
    planner: PlannerKind,
    out_dir: &Path,
    seed: Option<u64>,
    overrides: &Value,
) -> CliResult<RunReport> {
    let (scenario, base) = load_checked(scenario_path)?;
    let seed = seed.unwrap_or(scenario.seed);
    let stem = format!("{}_{}_seed{seed}", scenario.name, planner);
    run_one(&scenario, &base, planner, seed, overrides, out_dir, &stem)
}

/// Aggregate row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub planner: PlannerKind,
    pub pct_right_handed_violations: f64,
    pub pct_collisions: f64,
    pub runs: usize,
    pub failed_runs: usize,
    pub mean_solve_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedRun {
    pub scenario: String,
    pub planner: PlannerKind,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<ComparisonRow>,
    /// Successful runs sorted by (scenario, planner, seed).
    pub runs: Vec<RunReport>,
    pub failures: Vec<FailedRun>,
    pub table_csv: PathBuf,
    pub table_txt: PathBuf,
}

/// Scenario files (`*.json`) in `dir`, sorted by name.
pub fn suite_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Input(format!("{}: no scenario files", dir.display())));
    }
    Ok(files)
}

/// Runs every scenario × planner × seed combination on a pool of `jobs`
/// workers (all cores if `None`) and writes the comparison table. Seeds are
/// the scenario seed plus `seed_offset + 0..runs`. Individual failures are recorded;
/// the batch fails only if no run succeeds.
pub fn cmd_bench(
    suite_dir: &Path,
    planners: &[PlannerKind],
    runs: usize,
    seed_offset: u64,
    out_dir: &Path,
    overrides: &Value,
    jobs: Option<usize>,
) -> CliResult<BenchReport> {
    let scenarios = suite_files(suite_dir)?
        .iter()
        .map(|p| load_checked(p))
        .collect::<CliResult<Vec<_>>>()?;
    let trace_dir = out_dir.join("traces");
    let mut work = Vec::new();
    for (s, base) in &scenarios {
        for &planner in planners {
            for k in 0..runs as u64 {
                work.push((s, base.as_path(), planner, s.seed + seed_offset + k));
            }
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j.max(1));
    }
    let pool = pool.build().map_err(runtime)?;
    let results: Vec<Result<RunReport, FailedRun>> = pool.install(|| {
        work.par_iter()
            .map(|&(s, base, planner, seed)| {
                let stem = format!("{}__{}__seed{seed}", s.name, planner);
                run_one(s, base, planner, seed, overrides, &trace_dir, &stem).map_err(|e| FailedRun {
                    scenario: s.name.clone(),
                    planner,
                    seed,
                    error: e.to_string(),
                })
            })
            .collect()
    });
    let (mut ok, mut failures): (Vec<_>, Vec<_>) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(r) => ok.push(r),
            Err(f) => failures.push(f),
        }
    }
    ok.sort_by(|a, b| (&a.scenario, a.planner, a.seed).cmp(&(&b.scenario, b.planner, b.seed)));
    failures.sort_by(|a, b| (&a.scenario, a.planner, a.seed).cmp(&(&b.scenario, b.planner, b.seed)));
    if ok.is_empty() {
        let lines: Vec<String> = failures.iter().map(|f| format!("{} {} {}: {}", f.scenario, f.planner, f.seed, f.error)).collect();
        return Err(CliError::Runtime(format!("every run failed:\n  {}", lines.join("\n  "))));
    }

    let rows: Vec<ComparisonRow> = planners
        .iter()
        .map(|&p| {
            let summaries: Vec<RunSummary> = ok.iter().filter(|r| r.planner == p).map(|r| r.summary.clone()).collect();
            let m = summarize(&summaries);
            ComparisonRow {
                planner: p,
                pct_right_handed_violations: m.pct_right_handed_violations,
                pct_collisions: m.pct_collisions,
                runs: summaries.len(),
                failed_runs: failures.iter().filter(|f| f.planner == p).count(),
                mean_solve_time_ms: 1e3 * m.mean_solve_time,
            }
        })
        .collect();

    let table_csv = out_dir.join("comparison.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["planner", "pct_right_handed_violations", "pct_collisions", "runs", "failed_runs"])
        .map_err(runtime)?;
    for r in &rows {
        w.write_record([
            r.planner.to_string(),
            format!("{:.2}", r.pct_right_handed_violations),
            format!("{:.2}", r.pct_collisions),
            r.runs.to_string(),
            r.failed_runs.to_string(),
        ])
        .map_err(runtime)?;
    }
    write_file(&table_csv, &w.into_inner().map_err(runtime)?)?;

    let table_txt = out_dir.join("comparison.txt");
    let mut txt = format!("{:<10} {:>22} {:>14} {:>6}\n", "planner", "% right-handed viol.", "% collisions", "runs");
    for r in &rows {
        txt += &format!(
            "{:<10} {:>22.2} {:>14.2} {:>6}\n",
            r.planner.to_string(),
            r.pct_right_handed_violations,
            r.pct_collisions,
            r.runs
        );
    }
    write_file(&table_txt, txt.as_bytes())?;

    let runs_csv = out_dir.join("runs.csv");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scenario", "planner", "seed", "right", "left", "collisions", "reached_goal", "path_efficiency"])
        .map_err(runtime)?;
    for r in &ok {
        let s = &r.summary;
        w.write_record([
            r.scenario.clone(),
            r.planner.to_string(),
            r.seed.to_string(),
            s.violations.right.to_string(),
            s.violations.left.to_string(),
            s.collisions.to_string(),
            s.reached_goal.to_string(),
            format!("{:.4}", s.path_efficiency),
        ])
        .map_err(runtime)?;
    }
    for f in &failures {
        w.write_record([f.scenario.clone(), f.planner.to_string(), f.seed.to_string(), "".into(), "".into(), "".into(), "".into(), "".into()])
            .map_err(runtime)?;
    }
    write_file(&runs_csv, &w.into_inner().map_err(runtime)?)?;

    Ok(BenchReport { rows, runs: ok, failures, table_csv, table_txt })
}

/// Diagnostics for a scenario file; empty when it is clean.
pub fn cmd_validate(scenario_path: &Path) -> CliResult<Vec<String>> {
    let (scenario, base) =
        load_scenario(scenario_path).map_err(|e| CliError::Input(format!("{}: {e}", scenario_path.display())))?;
    Ok(scenario.diagnostics(&base))
}

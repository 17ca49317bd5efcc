use clap::{Parser, Subcommand};
use rampcc::sim::PlannerKind;
use rampcc_cli::{cmd_bench, cmd_run, cmd_validate, load_overrides, CliError};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

/// Prints to stdout, ignoring a closed pipe.
macro_rules! out {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

#[derive(Parser)]
#[command(name = "rampcc", version, about = "Regulation-aware canal vessel planner and simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its trace, metrics and plot.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "rampcc")]
        planner: PlannerKind,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Perturbation seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// JSON file with planner config overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Run a scenario suite with several planners and seeds.
    Bench {
        /// Directory of scenario files.
        #[arg(long)]
        scenario: PathBuf,
        /// Planners to compare (repeatable).
        #[arg(long, default_values = ["rampcc", "lmpcc"])]
        planner: Vec<PlannerKind>,
        #[arg(long, default_value_t = 10)]
        runs: usize,
        /// Added to each scenario's seed before the per-run index.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { scenario, planner, out, seed, config } => {
            let overrides = load_overrides(config.as_deref())?;
            let report = cmd_run(&scenario, planner, &out, seed, &overrides)?;
            let v = &report.summary.violations;
            out!(
                "{} {} seed {}: right {} left {} collisions {} goal {}",
                report.scenario, report.planner, report.seed, v.right, v.left, report.summary.collisions, report.summary.reached_goal
            );
            out!("trace {}", report.trace.display());
            out!("metrics {}", report.metrics.display());
            out!("plot {}", report.plot.display());
        }
        Command::Bench { scenario, planner, runs, seed_offset, out, config, jobs } => {
            let overrides = load_overrides(config.as_deref())?;
            let report = cmd_bench(&scenario, &planner, runs, seed_offset, &out, &overrides, jobs)?;
            out!("{}", std::fs::read_to_string(&report.table_txt).unwrap_or_default().trim_end());
            for f in &report.failures {
                eprintln!("failed: {} {} seed {}: {}", f.scenario, f.planner, f.seed, f.error);
            }
        }
        Command::Validate { scenario } => {
            let diags = cmd_validate(&scenario)?;
            if !diags.is_empty() {
                return Err(CliError::Input(format!("{}:\n  {}", scenario.display(), diags.join("\n  "))));
            }
            out!("{}: ok", scenario.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

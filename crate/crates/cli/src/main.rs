//! Command-line harness: instance validation, single solves, comparison
//! sweeps, greedy-versus-exact gap studies, dynamic-scenario simulation,
//! and fixture export.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use semoran_core::experiment::{
    compare_csv, gap_csv, gap_summary, run_comparison, run_gap_study, summarize, ExperimentGrid,
};
use semoran_core::sim::report_csv;
use semoran_core::{
    fixtures, load_profiles, run_dynamic, run_static, solve_by_name, validate_instance, Algo,
    BaselineConfig, OracleLimits, ProblemInstance, ScenarioTimeline, SlicingSolution,
};

#[derive(Parser)]
#[command(name = "semoran", version, about = "Semantic flexible edge slicing toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Base seed for randomized operations.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Profile fixture file overriding the bundled registry.
    #[arg(long, global = true)]
    fixtures: Option<PathBuf>,
    /// Output path (defaults depend on the subcommand).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Check an instance file against every structural invariant.
    Validate {
        #[arg(long)]
        instance: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve one instance with a named algorithm.
    Solve {
        #[arg(long)]
        algo: String,
        #[arg(long)]
        instance: PathBuf,
        /// Write a line-delimited JSON solver trace (greedy only).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        max_tasks: usize,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Sweep the experiment grid with several algorithms and emit CSV.
    Compare {
        /// Grid file (JSON) or "default".
        #[arg(long, default_value = "default")]
        grid: String,
        /// Comma-separated algorithm names.
        #[arg(long, default_value = "semoran,minres-sem,sl-edge,flexres-nsem,highcomp,highres")]
        algos: String,
        /// Override the grid's repetition count.
        #[arg(long)]
        reps: Option<usize>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Compare the greedy against the exact oracle on random instances.
    Gap {
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 5)]
        max_tasks: usize,
        #[arg(long, default_value_t = 60.0)]
        time_budget: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Replay a dynamic scenario and export per-job latency CSV.
    Simulate {
        /// Instance file; the bundled scenario instance when omitted.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Timeline file; the bundled timeline when omitted.
        #[arg(long)]
        timeline: Option<PathBuf>,
        /// Override the timeline's solver.
        #[arg(long)]
        algo: Option<String>,
        /// Latency noise standard deviation in seconds.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Static replay duration; runs the timeline when omitted.
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Write the bundled fixtures into a directory.
    ExportFixtures {
        #[arg(long, default_value = "fixtures-out")]
        out_dir: PathBuf,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Validate { instance, common } => {
            if let Some(fixture_path) = &common.fixtures {
                load_profiles(fixture_path)?;
                println!("fixtures ok: {}", fixture_path.display());
            }
            let inst = read_instance(&instance)?;
            let violations = validate_instance(&inst);
            if violations.is_empty() {
                println!("ok: {} classes, {} tasks, {} resource types",
                    inst.classes.len(), inst.tasks.len(), inst.pool.resource_count());
                Ok(0)
            } else {
                for v in &violations {
                    println!("violation: {v}");
                }
                Ok(1)
            }
        }
        Command::Solve { algo, instance, trace, max_tasks, common } => {
            let inst = read_instance(&instance)?;
            let cfg = BaselineConfig::default();
            let limits = OracleLimits { max_tasks, ..OracleLimits::default() };
            let sol: SlicingSolution = match (&algo[..], &trace) {
                ("semoran", Some(trace_path)) => {
                    let mut sink = Vec::new();
                    let outcome = semoran_core::solve_greedy_traced(&inst, &mut sink)?;
                    fs::write(trace_path, &sink)?;
                    outcome.solution
                }
                _ => solve_by_name(&algo, &inst, &cfg, &limits)?,
            };
            let violations = semoran_core::verify_feasible(&inst, &sol);
            println!(
                "{algo}: admitted {}/{} tasks, objective {}, {} constraint flags",
                sol.admitted_count(),
                inst.tasks.len(),
                sol.objective,
                violations.len()
            );
            let out = common.out.unwrap_or_else(|| PathBuf::from("solution.json"));
            write_output(&out, &serde_json::to_string_pretty(&sol)?)?;
            Ok(0)
        }
        Command::Compare { grid, algos, reps, common } => {
            let mut grid: ExperimentGrid = if grid == "default" {
                ExperimentGrid::default()
            } else {
                let text = fs::read_to_string(&grid).with_context(|| format!("reading {grid}"))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {grid}"))?
            };
            grid.seed = common.seed;
            if let Some(reps) = reps {
                grid.repetitions = reps;
            }
            let algo_list: Vec<Algo> = algos
                .split(',')
                .map(|s| s.trim().parse())
                .collect::<Result<Vec<_>, _>>()?;
            let rows = run_comparison(&grid, &algo_list)?;
            for cell in summarize(&rows) {
                println!(
                    "dims={} n={} acc={} lat={} {:>13}: clean {:.2} +/- {:.2} (raw {:.2})",
                    cell.dims,
                    cell.task_count,
                    cell.accuracy.name(),
                    cell.latency.name(),
                    cell.algo,
                    cell.mean_clean,
                    cell.std_clean,
                    cell.mean_raw
                );
            }
            let out = common.out.unwrap_or_else(|| PathBuf::from("compare.csv"));
            write_output(&out, &compare_csv(&rows))?;
            Ok(0)
        }
        Command::Gap { count, max_tasks, time_budget, common } => {
            let limits = OracleLimits {
                max_tasks: max_tasks.max(6),
                time_budget: Duration::from_secs_f64(time_budget),
                ..OracleLimits::default()
            };
            let rows = run_gap_study(count, max_tasks, common.seed, &limits)?;
            let summary = gap_summary(&rows);
            println!(
                "{} completed, {} skipped, min ratio {:.4}, mean ratio {:.4}",
                summary.completed, summary.skipped, summary.min_ratio, summary.mean_ratio
            );
            let out = common.out.unwrap_or_else(|| PathBuf::from("gap.csv"));
            write_output(&out, &gap_csv(&rows))?;
            Ok(0)
        }
        Command::Simulate { instance, timeline, algo, noise, duration, common } => {
            let inst = match &instance {
                Some(path) => read_instance(path)?,
                None => fixtures::testbed_instance(),
            };
            let report = if let Some(duration) = duration {
                let name = algo.as_deref().unwrap_or("semoran");
                let sol = solve_by_name(
                    name,
                    &inst,
                    &BaselineConfig::default(),
                    &OracleLimits::default(),
                )?;
                run_static(&inst, &sol, duration, noise, common.seed)?
            } else {
                let mut tl: ScenarioTimeline = match &timeline {
                    Some(path) => {
                        let text = fs::read_to_string(path)
                            .with_context(|| format!("reading {}", path.display()))?;
                        serde_json::from_str(&text)
                            .with_context(|| format!("parsing {}", path.display()))?
                    }
                    None => fixtures::testbed_timeline(),
                };
                if let Some(algo) = algo {
                    tl.solver = algo;
                }
                run_dynamic(&inst, &tl, noise, common.seed)?
            };
            let admitted: Vec<usize> =
                report.periods.iter().map(|p| p.allocations.values().filter(|a| a.admitted).count()).collect();
            println!(
                "{} periods, admitted per period {:?}, {} samples, {} evictions",
                report.periods.len(),
                admitted,
                report.samples.len(),
                report.evictions.len()
            );
            let out = common.out.unwrap_or_else(|| PathBuf::from("sim.csv"));
            write_output(&out, &report_csv(&report))?;
            Ok(0)
        }
        Command::ExportFixtures { out_dir, common } => {
            let registry = match &common.fixtures {
                Some(path) => load_profiles(path)?,
                None => fixtures::default_registry(),
            };
            fs::create_dir_all(&out_dir)?;
            let write = |name: &str, contents: &str| -> Result<()> {
                write_output(&out_dir.join(name), contents)
            };
            write("profiles.json", &registry.to_json_string())?;
            write("profiles.csv", &registry.accuracy_csv())?;
            write("flex_example.json", fixtures::FLEX_EXAMPLE_JSON)?;
            write("testbed_instance.json", fixtures::TESTBED_INSTANCE_JSON)?;
            write("testbed_timeline.json", fixtures::TESTBED_TIMELINE_JSON)?;
            Ok(0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::Cli;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_with_code_two() {
        let err = Cli::command().try_get_matches_from(["semoran", "bogus"]).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_flag_value_is_a_usage_error() {
        let err = Cli::command()
            .try_get_matches_from(["semoran", "gap", "--count", "x"])
            .unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}

//! `eslab` command line: scenario-driven prediction, simulation, validation,
//! and geometry analyses.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 validation FAIL,
//! 3 divergence encountered during simulation.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eslab::runner::{self, RunOptions};
use eslab::Scenario;

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 1;
const EXIT_VALIDATION_FAIL: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

/// Environment variable consulted for the worker thread count when
/// `--threads` is absent.
const THREADS_ENV: &str = "ESLAB_THREADS";

#[derive(Parser)]
#[command(
    name = "eslab",
    about = "Evolution-strategies and gradient-descent dynamics on analytic reward landscapes",
    version
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct GlobalArgs {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory; overrides the scenario's [output] dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed; overrides the scenario's run.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for trial fan-out (default: ESLAB_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress informational output; errors still print.
    #[arg(long, global = true, default_value_t = false)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Emit every applicable closed-form prediction as flat JSON.
    Predict,
    /// Run all trials and write per-trial CSVs plus an ensemble summary.
    Simulate,
    /// Simulate, predict, and compare at the scenario's tolerances.
    Validate,
    /// No-intercept drift regression from a stored curve or a literal slope.
    Fit(FitArgs),
    /// Reward along the line between two solutions.
    Interpolate(InterpolateArgs),
    /// Reward along a normalized update direction at increasing magnitudes.
    Probe(ProbeArgs),
    /// GD / ES / difference displacement hierarchy.
    Hierarchy,
}

#[derive(Args)]
struct FitArgs {
    /// CSV artifact holding the drift curve.
    #[arg(long, conflicts_with = "slope")]
    input: Option<PathBuf>,
    /// Column to fit.
    #[arg(long, default_value = "mean_drift_sq")]
    column: String,
    /// Fit a literal slope instead of a stored curve.
    #[arg(long)]
    slope: Option<f64>,
    /// Step size; defaults to the scenario's [es] alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Population size; defaults to the scenario's [es] population.
    #[arg(long)]
    population: Option<u64>,
    /// Parameter dimension; defaults to the scenario's landscape dim.
    #[arg(long)]
    dim: Option<u64>,
}

#[derive(Args)]
struct InterpolateArgs {
    /// First endpoint (single-column CSV); generated from the scenario's
    /// [es] section when absent.
    #[arg(long, requires = "theta_b")]
    theta_a: Option<PathBuf>,
    /// Second endpoint (single-column CSV); generated from the scenario's
    /// [gd] section when absent.
    #[arg(long, requires = "theta_a")]
    theta_b: Option<PathBuf>,
    /// Grid points including endpoints.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args)]
struct ProbeArgs {
    /// Base point (single-column CSV); the scenario's initial point when
    /// absent.
    #[arg(long)]
    base: Option<PathBuf>,
    /// Update delta (single-column CSV); freshly generated ES and GD deltas
    /// when absent.
    #[arg(long)]
    delta: Option<PathBuf>,
    /// Probe magnitudes; a grid spanning 1.5x the delta norm when absent.
    #[arg(long, value_delimiter = ',')]
    magnitudes: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints its own message; help/version are not errors
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_OK)
            };
        }
    };

    let threads = cli
        .global
        .threads
        .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()));
    if let Some(threads) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: could not configure {threads} threads: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }

    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn load_scenario(global: &GlobalArgs) -> eslab::Result<Scenario> {
    let path = global.scenario.as_ref().ok_or_else(|| {
        eslab::Error::InvalidScenario(vec!["--scenario <path> is required".into()])
    })?;
    Scenario::from_path(path)
}

fn options(global: &GlobalArgs, write: bool) -> RunOptions {
    RunOptions {
        seed: global.seed,
        out_dir: global.out.clone(),
        write,
    }
}

fn run(cli: &Cli) -> eslab::Result<u8> {
    let global = &cli.global;
    match &cli.command {
        Command::Predict => {
            let scenario = load_scenario(global)?;
            let predictions = runner::predictions(&scenario)?;
            let value = serde_json::Value::Object(
                predictions.into_iter().collect::<serde_json::Map<_, _>>(),
            );
            println!(
                "{}",
                serde_json::to_string_pretty(&value).expect("serializable")
            );
            if let Some(out) = &global.out {
                eslab::report::write_json(&out.join("predictions.json"), &value)?;
            }
            Ok(EXIT_OK)
        }
        Command::Simulate => {
            let scenario = load_scenario(global)?;
            let output = runner::simulate(&scenario, &options(global, true))?;
            if !global.quiet {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&output.summary).expect("serializable")
                );
            }
            if output.divergent_trials > 0 {
                if !global.quiet {
                    eprintln!(
                        "{} trial(s) diverged; partial data written",
                        output.divergent_trials
                    );
                }
                Ok(EXIT_DIVERGED)
            } else {
                Ok(EXIT_OK)
            }
        }
        Command::Validate => {
            let scenario = load_scenario(global)?;
            let report = runner::validate(&scenario, &options(global, global.out.is_some()))?;
            if !global.quiet {
                println!(
                    "{:<38} {:>14} {:>14} {:>9} {:>7}",
                    "quantity", "predicted", "observed", "rel.tol", "verdict"
                );
                for row in &report.rows {
                    println!(
                        "{:<38} {:>14.6e} {:>14.6e} {:>9.1e} {:>7}",
                        row.quantity,
                        row.predicted,
                        row.observed,
                        row.tolerance,
                        if row.pass { "PASS" } else { "FAIL" }
                    );
                }
                println!("overall: {}", if report.passed { "PASS" } else { "FAIL" });
            }
            if !report.passed {
                Ok(EXIT_VALIDATION_FAIL)
            } else if report.divergent_trials > 0 {
                Ok(EXIT_DIVERGED)
            } else {
                Ok(EXIT_OK)
            }
        }
        Command::Fit(args) => {
            let (alpha, population, dim) = match (args.alpha, args.population, args.dim) {
                (Some(a), Some(n), Some(d)) => (a, n, d),
                _ => {
                    let scenario = load_scenario(global)?;
                    let es = scenario.es_config()?.ok_or_else(|| {
                        eslab::Error::InvalidScenario(vec![
                            "fit needs --alpha/--population/--dim or a scenario with [es]".into(),
                        ])
                    })?;
                    (
                        args.alpha.unwrap_or(es.alpha),
                        args.population.unwrap_or(es.population as u64),
                        args.dim.unwrap_or(scenario.landscape.dim),
                    )
                }
            };
            let fit = match (&args.input, args.slope) {
                (Some(path), None) => {
                    runner::fit_from_csv(path, &args.column, alpha, population, dim)?
                }
                (None, Some(slope)) => {
                    eslab::analysis::DriftFit::from_slope(slope, alpha, population, dim)
                }
                _ => {
                    return Err(eslab::Error::InvalidScenario(vec![
                        "fit needs exactly one of --input or --slope".into(),
                    ]))
                }
            };
            let value = serde_json::json!({
                "slope": fit.slope,
                "r_squared": fit.r_squared,
                "d_eff": fit.d_eff,
                "d_eff_ratio": fit.d_eff_ratio,
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&value).expect("serializable")
            );
            if let Some(out) = &global.out {
                eslab::report::write_json(&out.join("fit.json"), &value)?;
            }
            Ok(EXIT_OK)
        }
        Command::Interpolate(args) => {
            let scenario = load_scenario(global)?;
            let theta_a = args
                .theta_a
                .as_deref()
                .map(eslab::report::read_theta_csv)
                .transpose()?;
            let theta_b = args
                .theta_b
                .as_deref()
                .map(eslab::report::read_theta_csv)
                .transpose()?;
            let output = runner::interpolate(
                &scenario,
                theta_a,
                theta_b,
                args.points,
                &options(global, true),
            )?;
            if !global.quiet {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&output.summary).expect("serializable")
                );
            }
            Ok(EXIT_OK)
        }
        Command::Probe(args) => {
            let scenario = load_scenario(global)?;
            let base = args
                .base
                .as_deref()
                .map(eslab::report::read_theta_csv)
                .transpose()?;
            let delta = args
                .delta
                .as_deref()
                .map(eslab::report::read_theta_csv)
                .transpose()?;
            let output = runner::probe(
                &scenario,
                base,
                delta,
                args.magnitudes.clone(),
                &options(global, true),
            )?;
            if !global.quiet {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&output.summary).expect("serializable")
                );
            }
            Ok(EXIT_OK)
        }
        Command::Hierarchy => {
            let scenario = load_scenario(global)?;
            let output = runner::hierarchy(&scenario, &options(global, true))?;
            if !global.quiet {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&output.summary).expect("serializable")
                );
            }
            if output.measurement.excluded_divergent > 0 {
                Ok(EXIT_DIVERGED)
            } else {
                Ok(EXIT_OK)
            }
        }
    }
}

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use boids::embedding::ORACLE_MAX_D;
use boids_harness::checks::{self, CheckOutcome};
use boids_harness::commands;
use boids_harness::config::{self, Settings};
use boids_harness::output;
use boids_harness::{UsageError, OUT_DIR_ENV};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "boids", version, about = "High-dimensional Bayesian optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a setting, e.g. `--set seed=3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory (default: $BOIDS_OUT_DIR, else `results`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded run: trace CSV and summary JSON.
    Run(RunArgs),
    /// A seed sweep with an aggregate of best_y per evaluation.
    Batch {
        #[command(flatten)]
        run: RunArgs,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "1..10")]
        seeds: String,
    },
    /// Ablation variants over a seed sweep.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "1..10")]
        seeds: String,
        /// Comma-separated variant names, or `all`.
        #[arg(long, default_value = "all")]
        variants: String,
    },
    /// Monte-Carlo check of the incumbent-direction lower bound.
    CheckLemma1 {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Only instances where both incumbent directions agree in sign with g.
        #[arg(long)]
        sign_consistent: bool,
        /// Also write the per-instance report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Closed-form embedding success probability against enumeration.
    CheckEmbedding {
        #[arg(long, default_value_t = 8)]
        max_d: usize,
    },
    /// All property suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn load_settings(args: &RunArgs) -> Result<Settings> {
    let mut s = match &args.config {
        Some(p) => config::parse_settings(
            &fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => Settings::new(),
    };
    config::apply_overrides(&mut s, &args.set)?;
    Ok(s)
}

fn out_dir(args: &RunArgs) -> PathBuf {
    args.out
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn report(outcomes: &[CheckOutcome]) -> bool {
    for o in outcomes {
        println!("{}", o.line());
    }
    outcomes.iter().all(|o| o.passed)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(args) => {
            let cfg = config::build_config(&load_settings(&args)?)?;
            let dir = out_dir(&args);
            let res = commands::run_one(&cfg, &dir)?;
            println!(
                "best_y {:.6e} after {} evaluations ({} restarts); trace in {}",
                res.best_y,
                res.trace.len(),
                res.restarts,
                commands::trace_path(&dir, cfg.seed).display()
            );
            Ok(true)
        }
        Command::Batch { run, seeds } => {
            let seeds = commands::parse_seeds(&seeds)?;
            let settings = load_settings(&run)?;
            let dir = out_dir(&run);
            let agg = commands::batch(&settings, &seeds, &dir)?;
            println!(
                "{} runs; final median best_y {:.6e} (q1 {:.6e}, q3 {:.6e}); aggregate in {}",
                seeds.len(),
                agg.median.last().copied().unwrap_or(f64::NAN),
                agg.q1.last().copied().unwrap_or(f64::NAN),
                agg.q3.last().copied().unwrap_or(f64::NAN),
                dir.join("aggregate.json").display()
            );
            Ok(true)
        }
        Command::Ablate { run, seeds, variants } => {
            let seeds = commands::parse_seeds(&seeds)?;
            let variants = commands::parse_variants(&variants)?;
            let settings = load_settings(&run)?;
            let dir = out_dir(&run);
            let cmp = commands::ablate(&settings, &seeds, &variants, &dir)?;
            for v in &cmp.variants {
                println!("{:<22} median {:.6e}  q1 {:.6e}  q3 {:.6e}", v.variant, v.median, v.q1, v.q3);
            }
            Ok(true)
        }
        Command::CheckLemma1 {
            samples,
            seed,
            sign_consistent,
            json,
        } => {
            if samples < boids::swarm::LEMMA1_MIN_SAMPLES {
                return Err(UsageError(format!(
                    "--samples must be at least {}",
                    boids::swarm::LEMMA1_MIN_SAMPLES
                ))
                .into());
            }
            let (outcome, cases) = checks::lemma1_suite(samples, seed, sign_consistent);
            for c in &cases {
                println!(
                    "d={:<2} mean {:>12.6} se {:>10.3e} bound {:>12.6} exact {:>12.6} {}",
                    c.dim,
                    c.empirical_mean,
                    c.std_error,
                    c.bound,
                    c.exact,
                    if c.holds { "ok" } else { "VIOLATED" }
                );
            }
            if let Some(p) = json {
                output::write_json(&cases, &p)?;
            }
            Ok(report(&[outcome]))
        }
        Command::CheckEmbedding { max_d } => {
            if max_d == 0 || max_d > ORACLE_MAX_D {
                return Err(UsageError(format!("--max-d must lie in 1..={ORACLE_MAX_D}")).into());
            }
            Ok(report(&[checks::embedding_probability(max_d)]))
        }
        Command::Selftest { seed } => Ok(report(&checks::property_suites(seed))),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

//! Command line front end: runs batched simulations and writes the
//! summary, per-slot and per-run archives.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use slotmarket::auction::CapacityMode;
use slotmarket::harness::{
    run_batches, write_records, write_summaries, HarnessError, SimOptions,
};
use slotmarket::model::ScenarioConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

#[derive(Parser)]
#[command(name = "slotmarket", about = "Two-stage reservation market simulator", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch set and write summary.csv, per_slot.csv and runs/*.json.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; overrides the seed in the configuration file.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of batches.
    #[arg(long, default_value_t = 2)]
    batches: u32,
    /// Runs per batch.
    #[arg(long, default_value_t = 1)]
    runs: u32,
    /// Auction windows chained per run (feedback applies from window 2 on).
    #[arg(long, default_value_t = 1)]
    windows: u32,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Keep per-run auction traces (runs/<batch>-<run>.trace.jsonl).
    #[arg(long)]
    trace: bool,
    /// Message-loss probability of the consensus networks.
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    /// Aggregate clock capacity over all asks instead of those at or below
    /// the clock price.
    #[arg(long)]
    literal_capacity_eq: bool,
}

fn load_config(args: &SimulateArgs) -> Result<ScenarioConfig, String> {
    let mut config = match &args.config {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            serde_json::from_slice(&bytes)
                .map_err(|e| format!("cannot parse {}: {e}", path.display()))?
        }
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config
        .validate()
        .map_err(|violations| format!("invalid configuration: {}", violations.join("; ")))?;
    Ok(config)
}

fn simulate(args: &SimulateArgs) -> ExitCode {
    let config = match load_config(args) {
        Ok(config) => config,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let opts = SimOptions {
        windows: args.windows.max(1),
        loss: args.loss,
        capacity_mode: if args.literal_capacity_eq {
            CapacityMode::Literal
        } else {
            CapacityMode::AskFiltered
        },
        trace: args.trace,
        ..SimOptions::default()
    };

    let out = args.out.clone();
    let result = run_batches(&config, args.batches, args.runs, &opts, true, &|b, r, records| {
        write_records(&out, b, r, records)
    })
    .and_then(|summary| {
        write_summaries(&out, &summary)?;
        Ok(summary)
    });

    match result {
        Ok(summary) => {
            for stat in &summary.stats.metrics {
                match (stat.mean, stat.half_width) {
                    (Some(mean), Some(half)) => {
                        println!("{:<24} {mean:.4} ± {half:.4}", stat.metric.name())
                    }
                    _ => println!("{:<24} n/a", stat.metric.name()),
                }
            }
            println!("outputs written to {}", args.out.display());
            ExitCode::SUCCESS
        }
        Err(HarnessError::Config(violations)) => {
            eprintln!("error: invalid configuration: {}", violations.join("; "));
            ExitCode::from(EXIT_CONFIG)
        }
        Err(HarnessError::Invariant(message)) => {
            eprintln!("error: internal invariant violated: {message}");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(other) => {
            eprintln!("error: {other}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate(args) => simulate(&args),
    }
}

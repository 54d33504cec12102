use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

mod commands;
mod failure;

use failure::Failure;

/// Differentially private pageview release pipeline.
#[derive(Debug, Parser)]
#[command(name = "pvdp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded synthetic workload.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Annotate device event streams with the client-side inclusion flag.
    Filter {
        /// TSV with a leading device_id column.
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Distinct pages counted per device-day.
        #[arg(long, default_value_t = pvdp_core::release_current::DEFAULT_K)]
        k: u64,
        /// Seed for the per-device salt streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Release one day of client-filtered pageviews.
    ReleaseCurrent(ReleaseCurrentArgs),
    /// Release a date range of hourly aggregates from a historical era.
    ReleaseHistorical(ReleaseHistoricalArgs),
    /// Compare a release against the true counts.
    Evaluate(EvaluateArgs),
    /// Run a parameter sweep over a synthetic dataset.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        data_dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct CommonRelease {
    /// Flat key=value parameter file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    global_daily: PathBuf,
    #[arg(long)]
    countries: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Skip noise. The output is not private; for testing only.
    #[arg(long)]
    no_noise: bool,
    /// Ingestion threshold on the public global daily count.
    #[arg(long, allow_negative_numbers = true)]
    t: Option<i64>,
    /// Suppression threshold on the noisy count.
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<i64>,
}

#[derive(Debug, Args)]
struct ReleaseCurrentArgs {
    #[arg(long)]
    date: NaiveDate,
    /// Annotated events written by `filter`.
    #[arg(long)]
    events: PathBuf,
    #[arg(long)]
    k: Option<u64>,
    #[arg(long)]
    rho: Option<f64>,
    #[command(flatten)]
    common: CommonRelease,
}

#[derive(Debug, Args)]
struct ReleaseHistoricalArgs {
    #[arg(long)]
    from: NaiveDate,
    #[arg(long)]
    to: NaiveDate,
    #[arg(long)]
    hourly: PathBuf,
    #[arg(long)]
    m: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[command(flatten)]
    common: CommonRelease,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("truth").required(true).args(["raw", "hourly"]))]
struct EvaluateArgs {
    #[arg(long)]
    release: PathBuf,
    /// Raw events, with or without device ids or inclusion flags.
    #[arg(long)]
    raw: Option<PathBuf>,
    #[arg(long)]
    hourly: Option<PathBuf>,
    /// Drop-rate threshold on the true count.
    #[arg(long, allow_negative_numbers = true)]
    threshold: i64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the report as a one-row TSV.
    #[arg(long)]
    tsv: Option<PathBuf>,
    /// Restrict the truth to a date range; defaults to the release's dates.
    #[arg(long, requires = "to")]
    from: Option<NaiveDate>,
    #[arg(long, requires = "from")]
    to: Option<NaiveDate>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { spec, out_dir } => commands::synth(&spec, &out_dir),
        Command::Filter { events, out, k, seed } => commands::filter(&events, &out, k, seed),
        Command::ReleaseCurrent(a) => commands::release_current(&a),
        Command::ReleaseHistorical(a) => commands::release_historical(&a),
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Sweep {
            spec,
            data_dir,
            out,
            summary,
        } => commands::sweep(&spec, &data_dir, &out, summary.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ERROR\t{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn info(msg: impl std::fmt::Display) {
    eprintln!("INFO\t{msg}");
}

fn warn(msg: impl std::fmt::Display) {
    eprintln!("WARN\t{msg}");
}

type CmdResult = Result<(), Failure>;

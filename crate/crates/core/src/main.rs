use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dpc_tcm::harness::{
    describe, emit_broadcast_csv, emit_csv, run_alpha_sweep, run_awgn_baseline, run_broadcast, run_sweep,
    BerPoint, BroadcastConfig, SimConfig,
};
use dpc_tcm::{BinStrategy, Result, TrellisPreset};

/// Dirty paper trellis coding simulator.
#[derive(Parser)]
#[command(name = "dpc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Config file (flat `key = value` TOML).
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep.
    Simulate(RunArgs),
    /// 4-state 4-QAM TCM over AWGN at each design power in `values`.
    Baseline(RunArgs),
    /// Sweep alpha at the configured design power.
    AlphaSweep(RunArgs),
    /// Two-user broadcast: one CSV row per decoded message stream.
    Broadcast(RunArgs),
    /// Print a preset's constellation labels, transitions and bins.
    Describe {
        preset: TrellisPreset,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = BinStrategy::default())]
        bin_strategy: BinStrategy,
    },
}

fn load_sim(args: &RunArgs) -> Result<SimConfig> {
    let mut c = match &args.config {
        Some(p) => SimConfig::from_file(p)?,
        None => SimConfig::default(),
    };
    if let Some(s) = args.seed {
        c.limits.seed = s;
    }
    if let Some(w) = args.workers {
        c.limits.workers = w;
    }
    c.validate()?;
    Ok(c)
}

fn output(args: &RunArgs) -> Result<Box<dyn Write>> {
    Ok(match &args.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_points(args: &RunArgs, points: &[BerPoint]) -> Result<()> {
    emit_csv(points, output(args)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => write_points(&a, &run_sweep(&load_sim(&a)?)?),
        Command::Baseline(a) => write_points(&a, &run_awgn_baseline(&load_sim(&a)?)?),
        Command::AlphaSweep(a) => write_points(&a, &run_alpha_sweep(&load_sim(&a)?)?),
        Command::Broadcast(a) => {
            let mut c = match &a.config {
                Some(p) => BroadcastConfig::from_file(p)?,
                None => BroadcastConfig::default(),
            };
            if let Some(s) = a.seed {
                c.limits.seed = s;
            }
            if let Some(w) = a.workers {
                c.limits.workers = w;
            }
            emit_broadcast_csv(&run_broadcast(&c)?, output(&a)?)
        }
        Command::Describe {
            preset,
            r,
            bin_strategy,
        } => {
            print!("{}", describe(preset, r, bin_strategy)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

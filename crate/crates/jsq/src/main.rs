use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jsq::cli::{load_config, run, Mode};

/// Queueing experiments: M/M/n join-the-shortest-queue simulation and its
/// heavy-traffic diffusion limit.
#[derive(Parser)]
#[command(name = "jsq", version, about)]
struct Args {
    /// JSON experiment config; defaults apply for missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override a config field, e.g. `--set n=400` or `--set grid.dt=0.01`.
    #[arg(long = "set", global = true, value_name = "PATH=VALUE")]
    set: Vec<String>,

    #[command(subcommand)]
    mode: Option<ModeCmd>,
}

#[derive(Subcommand, Clone, Copy)]
enum ModeCmd {
    /// Simulate the full system and emit scaled paths.
    Simulate,
    /// Simulate the truncated system with barrier counters and martingales.
    SimulateTruncated,
    /// Sample one path of the limiting reflected diffusion.
    Limit,
    /// Compare simulated marginals against the limit by KS distance.
    Compare,
    /// Measure per-customer waiting times in per-queue mode.
    Waits,
    /// Sweep the truncation hitting probability over n.
    Sweep,
    /// Reproduce the long-queue decay sample path (n = 100000, beta = 2).
    Figure1,
}

impl From<ModeCmd> for Mode {
    fn from(cmd: ModeCmd) -> Mode {
        match cmd {
            ModeCmd::Simulate => Mode::Simulate,
            ModeCmd::SimulateTruncated => Mode::SimulateTruncated,
            ModeCmd::Limit => Mode::Limit,
            ModeCmd::Compare => Mode::Compare,
            ModeCmd::Waits => Mode::Waits,
            ModeCmd::Sweep => Mode::Sweep,
            ModeCmd::Figure1 => Mode::Figure1,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let config = match load_config(
        args.config.as_deref(),
        args.mode.map(Mode::from),
        &args.set,
    ) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("jsq: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&config) {
        Ok(artifacts) => {
            println!("wrote {}", artifacts.dir.display());
            for f in &artifacts.files {
                println!("  {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("jsq: {e}");
            ExitCode::FAILURE
        }
    }
}

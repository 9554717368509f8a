use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sandbox_mfg_cli::{load_config, run_experiment, CliError, Mode, Quiet, Stderr};

/// Learn a Boltzmann mean-field equilibrium from one sample path, solve it
/// exactly, or compare the two.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the config mode: sandbox, oracle, compare or probe.
    #[arg(long)]
    mode: Option<Mode>,
    /// Suppress progress output on stderr.
    #[arg(long)]
    quiet: bool,
}

fn run(args: Args) -> Result<(), CliError> {
    let mut cfg = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = args.output_dir {
        cfg.output_dir = dir;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    let outcome = if args.quiet {
        run_experiment(&cfg, &Quiet)?
    } else {
        run_experiment(&cfg, &Stderr)?
    };
    if !args.quiet {
        for f in &outcome.files {
            eprintln!("wrote {}", f.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

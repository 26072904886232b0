use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use polybubble_cli::{exit, output, run, Command, RunConfig};

/// Verification suites and scans for multi-bubble solutions of
/// `(-Δ)^m u = K u^{(N+2m)/(N-2m)}`.
#[derive(Debug, Parser)]
#[command(name = "polybubble", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let loaded = match &args.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    };
    let mut cfg = match loaded {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(exit::CONFIG_ERROR as u8);
        }
    };
    if let Some(out) = args.out {
        cfg.output_dir = out;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }

    let outcome = match run(args.command, &cfg) {
        Ok(o) => o,
        Err(polybubble::Error::InvalidConfig(msg)) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(exit::CONFIG_ERROR as u8);
        }
        Err(e) => {
            eprintln!("{}: {e}", args.command.name());
            return ExitCode::from(exit::CHECK_FAILED as u8);
        }
    };
    match output::write(&outcome, &cfg.output_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("cannot write reports to {}: {e}", cfg.output_dir.display());
            return ExitCode::from(exit::CHECK_FAILED as u8);
        }
    }
    if outcome.passed() {
        ExitCode::from(exit::PASS as u8)
    } else {
        for f in &outcome.failures {
            eprintln!("FAIL {}: {f}", outcome.command);
        }
        ExitCode::from(exit::CHECK_FAILED as u8)
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

/// Translating-graph toolkit: solves, certificates and exhaustion runs
/// driven by a config file.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Path to the config file (key = value lines with [section] headers).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed (overrides the config's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match hkflow::run::run_file(&cli.config, cli.out.as_deref(), cli.seed, cli.verbose) {
        Ok(outcome) => {
            if cli.verbose {
                eprintln!("artifacts in {}", outcome.out_dir.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

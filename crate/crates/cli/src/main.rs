use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ptgeom_cli::{parse_config, run, CliError};

/// Runs a scenario configuration and writes its CSV series.
#[derive(Debug, Parser)]
#[command(name = "ptgeom", version)]
struct Args {
    /// Scenario configuration (TOML).
    config: PathBuf,
    /// Directory for the CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Reserved; every current scenario is deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.config.display())))
        .and_then(|text| parse_config(&text))
        .and_then(|config| run(&config, &args.out, &mut std::io::stderr()));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use conga_cli::{run_experiment, write_outputs, AlphaPolicy, ExperimentConfig, HarnessError, Kind};

#[derive(Parser)]
#[command(name = "conga-hodge", version, about = "Broken-FEEC Hodge-Laplacian experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution convergence sweep.
    Convergence(Args),
    /// Smallest eigenvalues of the discrete Hodge-Laplacian.
    Eigen(Args),
    /// Structural property checks; exits 1 when any fails.
    Verify(Args),
    /// Hodge-Helmholtz decomposition of a demo field.
    Decompose(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON experiment configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    unfiltered: bool,
    /// Replaces the configured policies: strong, zero or const:<c>.
    #[arg(long, value_parser = parse_alpha)]
    alpha: Vec<AlphaPolicy>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    corrupt_d1: bool,
}

fn parse_alpha(s: &str) -> Result<AlphaPolicy, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

fn resolve(kind: Kind, args: Args) -> conga_cli::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(kind),
    };
    if config.kind != kind {
        return Err(HarnessError::Config(format!(
            "config kind {:?} does not match subcommand {}",
            config.kind,
            kind.stem()
        )));
    }
    if let Some(out) = args.out {
        config.out = out;
    }
    if args.unfiltered {
        config.filtered = false;
    }
    if !args.alpha.is_empty() {
        config.alphas = args.alpha;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.corrupt_d1 |= args.corrupt_d1;
    config.validate()?;
    Ok(config)
}

fn execute(cli: Cli) -> conga_cli::Result<bool> {
    let (kind, args) = match cli.command {
        Command::Convergence(a) => (Kind::SourceConvergence, a),
        Command::Eigen(a) => (Kind::EigenStudy, a),
        Command::Verify(a) => (Kind::Verify, a),
        Command::Decompose(a) => (Kind::DecomposeDemo, a),
    };
    let config = resolve(kind, args)?;
    let output = run_experiment(&config)?;
    let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string();
    let (csv, json) = write_outputs(&output, &config, &stamp)?;
    println!("wrote {} and {}", csv.display(), json.display());
    if !output.passed {
        eprintln!("verification failed; see {}", csv.display());
    }
    Ok(output.passed)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

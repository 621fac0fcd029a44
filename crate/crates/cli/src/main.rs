mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::error::{CliError, Result};

/// Device-independent bounds on the entropy of communication.
#[derive(Debug, Parser)]
#[command(name = "pmentropy", version)]
struct Cli {
    /// Worker threads for grid points and optimizer restarts
    /// (default: available parallelism).
    #[arg(long, global = true, env = "PMENTROPY_JOBS")]
    jobs: Option<usize>,

    /// Validate inputs and print the resolved plan without computing.
    #[arg(long, global = true)]
    dry_run: bool,

    /// Artifact path; stdout when absent.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Least H(M) at a witness value, or for an explicit behavior.
    MinEntropy(MinEntropyArgs),
    /// Least H(M) over a grid of witness values, as CSV.
    Curve(CurveArgs),
    /// Non-trivial entropic inequalities of a causal structure.
    Facets(FacetsArgs),
    /// Evaluate the entropic witness on a behavior.
    EntropicBound(EntropicBoundArgs),
    /// Best quantum witness value over a grid of entropy caps.
    QuantumCurve(QuantumCurveArgs),
    /// Enumerate deterministic strategies as JSON lines.
    Strategies(StrategiesArgs),
    /// The vanishing-entropy example that still needs d+1 messages.
    ExampleZeroEntropy(ZeroEntropyArgs),
    /// Check a behavior, witness or DAG file.
    Validate(ValidateArgs),
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    }
    let ctx = Ctx { out: cli.out, dry_run: cli.dry_run };
    match cli.command {
        Command::MinEntropy(a) => min_entropy(&ctx, a),
        Command::Curve(a) => curve(&ctx, a),
        Command::Facets(a) => facets(&ctx, a),
        Command::EntropicBound(a) => entropic_bound(&ctx, a),
        Command::QuantumCurve(a) => quantum_curve(&ctx, a),
        Command::Strategies(a) => strategies(&ctx, a),
        Command::ExampleZeroEntropy(a) => example_zero_entropy(&ctx, a),
        Command::Validate(a) => validate(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            let err = CliError::Usage(first.to_string());
            eprintln!("{}", err.to_line());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_line());
            ExitCode::from(e.exit_code())
        }
    }
}

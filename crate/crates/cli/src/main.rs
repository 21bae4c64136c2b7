use std::path::PathBuf;
use std::process::ExitCode;

use bsviel_cli::{run, RunOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bsviel", version, about = "Run bsviel experiments from a JSON config")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Teugels basis coefficients and the realized-covariation diagnostic.
    Basis(RunArgs),
    /// Solve one equation and report mean curves and residuals.
    Solve(RunArgs),
    /// Check the duality pairing between the linear backward and forward equations.
    Duality(RunArgs),
    /// Check the ordering of two solutions with ordered drivers and free terms.
    Compare(RunArgs),
    /// Measure how the solution moves under perturbations of the free term.
    Stability(RunArgs),
    /// Evaluate a dynamic risk measure and optionally audit its coherence.
    Risk(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the JSON run config.
    #[arg(long)]
    config: PathBuf,
    /// Output root; each run writes into `<experiment>-<config hash>`.
    #[arg(long, env = "BSVIEL_OUT", default_value = "runs")]
    out: PathBuf,
    /// Worker threads (0 = automatic). Does not affect numerical output.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Solve even when the contraction condition fails.
    #[arg(long)]
    override_contraction: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Basis(a) => ("basis", a),
        Command::Solve(a) => ("solve", a),
        Command::Duality(a) => ("duality", a),
        Command::Compare(a) => ("compare", a),
        Command::Stability(a) => ("stability", a),
        Command::Risk(a) => ("risk", a),
    };
    let opts = RunOptions {
        out_root: args.out.clone(),
        threads: args.threads,
        override_contraction: args.override_contraction,
    };
    match run(&args.config, Some(name), &opts) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("artifacts: {}", outcome.dir.display());
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

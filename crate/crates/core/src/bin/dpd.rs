use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dpd_core::harness::{self, AlgorithmSelector, Overrides, Prepared};
use dpd_core::{load_scenario, Error, ErrorCategory};

#[derive(Parser)]
#[command(name = "dpd", version, about = "Distributed primal-dual solver harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run algorithms on a scenario and write CSV traces plus report.json.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum)]
        algorithm: AlgorithmSelector,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the step-size admissibility report.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Print the centralized solution.
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.category() {
        ErrorCategory::Input => 3,
        ErrorCategory::Numerical => 4,
        ErrorCategory::Oracle => 5,
        ErrorCategory::Io => 6,
    }
}

fn execute(cli: Cli) -> dpd_core::Result<String> {
    match cli.command {
        Command::Run { scenario, algorithm, out, max_iters, alpha, seed } => {
            let s = Overrides { max_iters, alpha, seed }.apply(&load_scenario(scenario)?)?;
            let (report, _) = harness::run(&s, algorithm, Some(&out))?;
            Ok(serde_json::to_string_pretty(&report)?)
        }
        Command::Validate { scenario } => {
            let p = Prepared::new(&load_scenario(scenario)?)?;
            match &p.step_size {
                Ok(r) => Ok(serde_json::to_string_pretty(r)?),
                Err(note) => Err(Error::OracleUnavailable(note.clone())),
            }
        }
        Command::Oracle { scenario } => {
            let s = load_scenario(scenario)?;
            let sol = harness::oracle_for(&s.build()?)?;
            Ok(serde_json::to_string_pretty(&sol)?)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error ({:?}): {e}", e.category());
            ExitCode::from(exit_code(&e))
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mnm_core::environments::PRESET_NAMES;
use mnm_lab::config::{ExperimentConfig, ExperimentKind};
use mnm_lab::error::{LabError, EXIT_OK};
use mnm_lab::experiments::{self, CheckKind, ExperimentOutput};

/// Experiment runner for the tabular model/policy bound suite.
#[derive(Debug, Parser)]
#[command(name = "mnm-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config file.
    Run { config: PathBuf },
    /// Run every bound and solver property suite.
    VerifyBounds {
        /// Number of seeds (0..N).
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Slack allowed on every inequality.
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Random instances per suite and seed.
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
    /// Print the built-in environment names.
    ListPresets,
}

fn report(output: &ExperimentOutput, files: &[PathBuf]) {
    for check in &output.checks {
        let status = if check.passed { "PASS" } else { "FAIL" };
        let kind = match check.kind {
            CheckKind::Bound => "bound",
            CheckKind::Finding => "finding",
            CheckKind::Informational => "info",
        };
        println!("{status:4}  {kind:7}  {:40}  {}", check.name, check.detail);
    }
    for file in files {
        println!("wrote {}", file.display());
    }
}

fn run(command: Command) -> Result<i32, LabError> {
    let config = match command {
        Command::ListPresets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            println!("windy-three-state");
            return Ok(EXIT_OK);
        }
        Command::Run { config } => ExperimentConfig::load(&config)?,
        Command::VerifyBounds { seeds, tol, cases } => {
            if seeds == 0 {
                return Err(LabError::Config("--seeds must be at least 1".into()));
            }
            let mut config = ExperimentConfig::with_defaults(ExperimentKind::VerifyBounds, (0..seeds).collect());
            config.verify.tol = tol;
            config.verify.cases = cases;
            config
        }
    };
    let (output, files) = experiments::run(&config)?;
    report(&output, &files);
    Ok(output.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

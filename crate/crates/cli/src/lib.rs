//! Scenario-file front end for `qsa-core`: parsing and validation, command
//! execution and report rendering.

pub mod commands;
pub mod error;
pub mod report;
pub mod scenario;

use std::io::Write;
use std::path::PathBuf;

pub use commands::{execute, Command, Options};
pub use error::CliError;
pub use report::Report;
pub use scenario::{load, parse_scenario, Payload, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, clap::Parser)]
#[command(name = "qsa", version, about = "Run measurement-model commands on JSON scenario files")]
pub struct Args {
    #[arg(value_enum)]
    pub command: Command,
    /// Scenario file.
    pub scenario: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Overrides the identity tolerance of the scenario.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the output here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// `csv` prints the sampled record for `simulate` and the check table
    /// otherwise.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Runs one invocation and returns the exit code: 0 when every check
/// passes, 1 otherwise.
pub fn run(args: &Args) -> Result<u8, CliError> {
    if let Some(t) = args.tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(CliError::parse("--tol", format!("{t} is not a non-negative number")));
        }
    }
    let (scenario, digest) = load(&args.scenario, args.tol)?;
    let options = Options {
        seed: args.seed,
        shots: args.shots,
        steps: args.steps,
    };
    let report = execute(&scenario, args.command, &options, &digest)?;
    let text = match args.format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => report.record_csv().unwrap_or_else(|| report.checks_csv()),
    };
    match &args.output {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|source| CliError::Io {
                path: "<stdout>".into(),
                source,
            })?;
        }
    }
    Ok(if report.passed { 0 } else { 1 })
}

//! Scenario runner for the absnft solvers, simulators and oracle.
//!
//! Every subcommand reads one JSON scenario (see [`config`]) and writes a
//! JSON report, or a CSV table for `sweep`. Exit status is 0 on success,
//! 1 for unreadable or invalid input and 2 when a checked property fails.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod random;
pub mod report;
pub mod sweep;

use config::ScenarioConfig;
use report::{Report, ARTIFACT, VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FALSIFIED: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("malformed config: {0}")]
    MalformedConfig(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("sweep would produce {rows} rows, above the limit of {max}")]
    RangeTooLarge { rows: u64, max: u64 },
    #[error("config kind {found:?} does not match subcommand {expected:?}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },
}

#[derive(Debug, Parser)]
#[command(name = "absnft", version, about = "Solve, simulate and verify NFT repurchase games")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single-leader equilibrium under complete information.
    Solve2p(RunArgs),
    /// Leader bid against a discrete prior on the follower's value.
    Bayes(RunArgs),
    /// Simulate the repeated game.
    Repeated(RunArgs),
    /// Several leaders, one follower, optional coalition deviation.
    Multi(RunArgs),
    /// Budget-constrained settlement with repurchase options.
    Settle(RunArgs),
    /// Brute-force verification, optionally over a grid.
    Verify(RunArgs),
    /// Row-per-instance sweep as CSV or JSON.
    Sweep(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve2p(_) => "solve2p",
            Command::Bayes(_) => "bayes",
            Command::Repeated(_) => "repeated",
            Command::Multi(_) => "multi",
            Command::Settle(_) => "settle",
            Command::Verify(_) => "verify",
            Command::Sweep(_) => "sweep",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Solve2p(a)
            | Command::Bayes(a)
            | Command::Repeated(a)
            | Command::Multi(a)
            | Command::Settle(a)
            | Command::Verify(a)
            | Command::Sweep(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Scenario file (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for sampled instances.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Largest bid the oracle scans.
    #[arg(long)]
    pub bound: Option<u32>,
    /// Verify over values 1..=N (or N sampled instances) instead of one instance.
    #[arg(long)]
    pub grid: Option<u32>,
    /// Output format; CSV is only available for sweep.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub seed: u64,
    pub bound: Option<u32>,
    pub grid: Option<u32>,
    pub format: Option<Format>,
}

impl From<&RunArgs> for Options {
    fn from(a: &RunArgs) -> Self {
        Options {
            seed: a.seed.unwrap_or(0),
            bound: a.bound,
            grid: a.grid,
            format: a.format,
        }
    }
}

/// Rendered output and the exit status it implies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub body: String,
    pub falsified: bool,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.falsified {
            EXIT_FALSIFIED
        } else {
            EXIT_OK
        }
    }
}

fn render<R: Serialize>(command: &str, config: &ScenarioConfig, opts: &Options, result: R) -> String {
    let report = Report {
        artifact: ARTIFACT,
        version: VERSION,
        command,
        seed: opts.seed,
        bound: opts.bound,
        grid: opts.grid,
        scenario: config,
        result,
    };
    let mut text = serde_json::to_string_pretty(&report).expect("reports serialize");
    text.push('\n');
    text
}

/// Run a parsed scenario under the given subcommand name.
pub fn run_scenario(command: &'static str, config: &ScenarioConfig, opts: &Options) -> Result<Outcome, CliError> {
    if config.kind() != command {
        return Err(CliError::KindMismatch {
            expected: command,
            found: config.kind(),
        });
    }
    if let ScenarioConfig::Sweep(c) = config {
        let table = sweep::run(c, opts)?;
        let body = match opts.format.unwrap_or(Format::Csv) {
            Format::Csv => table.to_csv()?,
            Format::Json => render(command, config, opts, &table.rows),
        };
        return Ok(Outcome {
            body,
            falsified: table.falsified,
        });
    }
    if opts.format == Some(Format::Csv) {
        return Err(CliError::Validation("csv output is only available for sweep".into()));
    }
    let run = match config {
        ScenarioConfig::Solve2p(c) => commands::solve2p(c, opts)?,
        ScenarioConfig::Bayes(c) => commands::bayes(c, opts)?,
        ScenarioConfig::Repeated(c) => commands::repeated(c, opts)?,
        ScenarioConfig::Multi(c) => commands::multi(c, opts)?,
        ScenarioConfig::Settle(c) => commands::settle_scenario(c, opts)?,
        ScenarioConfig::Verify(c) => commands::verify(c, opts)?,
        ScenarioConfig::Sweep(_) => unreachable!("handled above"),
    };
    Ok(Outcome {
        body: render(command, config, opts, run.result),
        falsified: run.falsified,
    })
}

pub fn read_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    ScenarioConfig::parse(&text)
}

/// Execute a parsed command line and write its output. Returns the exit status.
pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    let args = cli.command.args();
    let config = read_config(&args.config)?;
    let outcome = run_scenario(cli.command.name(), &config, &Options::from(args))?;
    match &args.out {
        Some(path) => fs::write(path, &outcome.body).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?,
        None => print!("{}", outcome.body),
    }
    Ok(outcome.exit_code())
}

//! Command-line front end: the voting pipeline, the queue pipeline,
//! parameter sweeps and simulation runs, all writing CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;
pub mod grid;

pub use commands::{run_sweep, PointResult, QueueRow, SweepTable, SweepTarget, VotingRow};
pub use config::{RunConfig, Value};
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "dpbft", version, about = "Performance analysis of PBFT with dynamic membership")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Flat `key = value` config file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Write CSV here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Override a config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Stopping tolerance of the rate-matrix iteration.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub epsilon: Option<f64>,

    /// Iteration budget of the rate-matrix iteration.
    #[arg(long, global = true, value_name = "INT")]
    pub max_iter: Option<u64>,

    /// Swept parameter, `NAME=START:STOP:STEP` or `NAME=V1,V2,...`; at most twice.
    #[arg(long, global = true, value_name = "SPEC")]
    pub sweep: Vec<String>,

    #[arg(long, global = true, value_name = "INT")]
    pub seed: Option<u64>,

    /// Simulated time per replication.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub horizon: Option<f64>,

    /// Initial simulated time excluded from statistics.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub warmup: Option<f64>,

    /// Number of independent replications.
    #[arg(long, global = true, value_name = "INT")]
    pub reps: Option<u64>,

    /// Write the stationary voting distribution as `n,m,k,pi` CSV.
    #[arg(long, global = true, value_name = "PATH")]
    pub dump_pi: Option<PathBuf>,

    /// Write the voting generator as `row col value` triplets.
    #[arg(long, global = true, value_name = "PATH")]
    pub dump_q: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Stationary voting measures and settlement rates.
    Voting,
    /// Pool queue stability, stationary measures and throughput.
    Queue,
    /// Voting or queue analysis over a one- or two-parameter grid.
    Sweep,
    /// Monte Carlo estimates next to their analytical counterparts.
    Simulate,
}

impl Cli {
    /// Config file values overridden by flags.
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        for pair in &self.set {
            cfg.set_pair(pair)?;
        }
        if let Some(x) = self.epsilon {
            cfg.set("epsilon", Value::Float(x))?;
        }
        let ints = [
            ("max_iter", self.max_iter),
            ("seed", self.seed),
            ("reps", self.reps),
        ];
        for (key, v) in ints {
            if let Some(v) = v {
                let v = i64::try_from(v).map_err(|_| CliError::Usage(format!("--{key} is too large")))?;
                cfg.set(key, Value::Int(v))?;
            }
        }
        for (key, v) in [("horizon", self.horizon), ("warmup", self.warmup)] {
            if let Some(v) = v {
                cfg.set(key, Value::Float(v))?;
            }
        }
        if !self.sweep.is_empty() {
            cfg.set_sweeps(self.sweep.clone());
        }
        Ok(cfg)
    }

    fn check_flags(&self) -> Result<()> {
        let dumps = self.dump_pi.is_some() || self.dump_q.is_some();
        if dumps && !matches!(self.command, Command::Voting | Command::Queue) {
            return Err(CliError::Usage("--dump-pi/--dump-q apply to `voting` and `queue` only".into()));
        }
        if !self.sweep.is_empty() && self.command != Command::Sweep {
            return Err(CliError::Usage("--sweep applies to `sweep` only".into()));
        }
        if self.sweep.len() > 2 {
            return Err(CliError::Usage("--sweep may be given at most twice".into()));
        }
        Ok(())
    }
}

/// Runs a parsed command line. CSV goes to `--out` or `stdout`; progress
/// notes go to `log`.
pub fn run(cli: &Cli, stdout: &mut dyn Write, log: &mut dyn Write) -> Result<()> {
    cli.check_flags()?;
    let cfg = cli.run_config()?;
    let mut file;
    let out: &mut dyn Write = match &cli.out {
        Some(path) => {
            file = BufWriter::new(File::create(path)?);
            &mut file
        }
        None => stdout,
    };
    let dumps = commands::Dumps {
        pi: cli.dump_pi.as_deref(),
        q: cli.dump_q.as_deref(),
    };
    let result = match cli.command {
        Command::Voting => commands::cmd_voting(&cfg, dumps, out),
        Command::Queue => commands::cmd_queue(&cfg, dumps, out, log),
        Command::Sweep => commands::cmd_sweep(&cfg, out),
        Command::Simulate => commands::cmd_simulate(&cfg, out),
    };
    out.flush()?;
    result
}

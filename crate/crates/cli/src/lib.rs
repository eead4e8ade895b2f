//! Config-driven experiment runner for `smallbuf`.
//!
//! `smallbuf <simulate|predict|verify|diagnose|rate> --config FILE` reads a
//! TOML experiment, runs the requested stage and writes tables (CSV) and
//! records (JSON / JSON lines) into the output directory. Failures are also
//! appended to `errors.jsonl` there, and the process exit status encodes the
//! error category (see [`CliError::exit_code`]).

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::{CliError, CliResult, ErrorRecord};

use commands::Context;
use output::OutDir;

#[derive(Debug, Parser)]
#[command(
    name = "smallbuf",
    version,
    about = "Many-sources small-buffer queue experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate overflow probabilities over the N sweep.
    Simulate(CommonArgs),
    /// Compute the predicted decay rate only.
    Predict(CommonArgs),
    /// Estimate, predict, regress and report the gap.
    Verify(CommonArgs),
    /// Check the growth conditions on the traffic's rate function.
    Diagnose(CommonArgs),
    /// Evaluate a rate functional on the path in `[rate].path_file`.
    Rate(CommonArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `[output].dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Experiment seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; overrides `threads`. Defaults to all cores.
    #[arg(long, env = "SMALLBUF_THREADS")]
    pub threads: Option<usize>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Predict(_) => "predict",
            Command::Verify(_) => "verify",
            Command::Diagnose(_) => "diagnose",
            Command::Rate(_) => "rate",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a)
            | Command::Predict(a)
            | Command::Verify(a)
            | Command::Diagnose(a)
            | Command::Rate(a) => a,
        }
    }
}

fn prepare(command: &Command) -> CliResult<Context> {
    let args = command.args();
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.out {
        config.output.dir = dir.clone();
    }
    if args.threads.is_some() {
        config.threads = args.threads;
    }
    let regime = config.validate()?;
    if let Some(threads) = config.threads {
        // A pool may already exist when several commands run in one process;
        // the first one wins, which only affects speed, never results.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let out = OutDir::create(&config.output.dir)?;
    Ok(Context {
        command: command.name(),
        config,
        regime,
        out,
        errors: Vec::new(),
    })
}

/// Runs one command and returns its exit status; errors are reported on
/// stderr and, whenever an output directory is known, in `errors.jsonl`.
pub fn run(cli: &Cli) -> i32 {
    let command = &cli.command;
    let mut ctx = match prepare(command) {
        Ok(ctx) => ctx,
        Err(err) => {
            eprintln!("error: {err}");
            let dir = command.args().out.clone().unwrap_or_else(|| {
                ExperimentConfig::load(&command.args().config)
                    .map(|c| c.output.dir)
                    .unwrap_or_else(|_| PathBuf::from("results"))
            });
            if let Ok(out) = OutDir::create(&dir) {
                let _ = out.jsonl(
                    "errors.jsonl",
                    &[ErrorRecord::new(command.name(), None, &err)],
                );
            }
            return err.exit_code();
        }
    };
    let result = match command {
        Command::Simulate(_) => commands::simulate(&mut ctx),
        Command::Predict(_) => commands::predict(&mut ctx),
        Command::Verify(_) => commands::verify(&mut ctx),
        Command::Diagnose(_) => commands::diagnose(&mut ctx),
        Command::Rate(_) => commands::rate(&mut ctx),
    };
    let code = match &result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            if !matches!(err, CliError::Incomplete { .. }) {
                ctx.errors.push(ErrorRecord::new(ctx.command, None, err));
            }
            err.exit_code()
        }
    };
    if let Err(err) = ctx.out.jsonl("errors.jsonl", &ctx.errors) {
        eprintln!("error: {err}");
        return if code == 0 { err.exit_code() } else { code };
    }
    code
}

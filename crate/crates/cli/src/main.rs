//! `zsie`: run, evaluate and serve the zero-shot extraction pipeline.
//!
//! Exit codes: 0 success, 1 when any document failed, 2 on configuration or
//! input format errors.

mod backend;
mod eval;
mod run;
mod serve;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use zsie_core::config::load_config;
use zsie_core::schema::load_schema;
use zsie_core::{RunConfig, Schema, Task};

#[derive(Debug, Parser)]
#[command(name = "zsie", version, about = "Zero-shot information extraction via textual entailment")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Schema file (JSON).
    #[arg(long, global = true, env = "ZSIE_SCHEMA")]
    schema: Option<PathBuf>,
    /// Run configuration file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Entailment backend: `mock`, `mock:<oracle file>` or `http:<url>`.
    #[arg(long, global = true, env = "ZSIE_BACKEND")]
    backend: Option<String>,
    /// Base URL of a remote tagger; the built-in rule tagger otherwise.
    #[arg(long, global = true, env = "ZSIE_TAGGER")]
    tagger: Option<String>,
    /// Decision threshold for every task, overriding the config.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Mode::E2e)]
    mode: Mode,
    /// Task for `--mode task`, and the task to score or tune.
    #[arg(long, global = true, value_parser = parse_task)]
    task: Option<Task>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    E2e,
    Task,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Serve the HTTP API.
    Serve(serve::ServeArgs),
    /// Annotate text files.
    Run(run::RunArgs),
    /// Score predictions (or a live run) against a gold corpus.
    Eval(eval::EvalArgs),
    /// Pick the threshold maximizing micro F1 on a development set.
    TuneThreshold(eval::TuneArgs),
}

fn parse_task(s: &str) -> Result<Task, String> {
    s.to_ascii_uppercase().parse().map_err(|_| format!("unknown task {s:?}; expected NER, RE, EE or EAE"))
}

impl Common {
    fn schema(&self) -> anyhow::Result<Schema> {
        let path = self.schema.as_deref().context("--schema is required")?;
        let bytes = read(path)?;
        load_schema(&bytes).with_context(|| format!("loading schema {}", path.display()))
    }

    fn run_config(&self) -> anyhow::Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => load_config(&read(path)?).with_context(|| format!("loading config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                bail!("--threshold {t} is outside [0, 1]");
            }
            config.inference.threshold = t;
            config.inference.task_thresholds.clear();
        }
        Ok(config)
    }

    /// The task a `--mode task` run is for.
    fn run_task(&self) -> anyhow::Result<Option<Task>> {
        match (self.mode, self.task) {
            (Mode::E2e, _) => Ok(None),
            (Mode::Task, Some(t)) => Ok(Some(t)),
            (Mode::Task, None) => bail!("--mode task requires --task"),
        }
    }
}

fn read(path: &Path) -> anyhow::Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn dispatch(cli: Cli) -> anyhow::Result<ExitCode> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.common.jobs {
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        pool = pool.num_threads(jobs);
    }
    pool.build_global().context("starting worker pool")?;
    match cli.command {
        Command::Serve(args) => serve::serve(&cli.common, args),
        Command::Run(args) => run::run(&cli.common, args),
        Command::Eval(args) => eval::eval(&cli.common, args),
        Command::TuneThreshold(args) => eval::tune(&cli.common, args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

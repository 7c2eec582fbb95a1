//! Argument parsing and the workflow behind each subcommand.

use std::fs;
use std::io::Write;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;
use verios_core::agents::{BackendSpec, BackendVariant, ErrorModel, Mode, RemoteConfig};
use verios_core::dataset::{
    dataset_stats, load_dataset, partition_scenario, save_dataset, DatasetError, FilterScope, ScenarioType,
    Split,
};
use verios_core::evaluator::{evaluate, render_report, EvalOptions, ReportFormat};
use verios_core::interaction::{OracleResponder, SessionConfig};
use verios_core::metaknowledge::{build_training_set, emit_training_file, two_stage_sets, Arrangement};

use crate::service::{serve, Service};

#[derive(Debug, Parser)]
#[command(name = "verios", version, about = "Query-driven GUI agent harness: data preparation, evaluation and live sessions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset file against the schema and its screenshots.
    Validate(ValidateArgs),
    /// Print counts per scenario, platform and split.
    Stats(StatsArgs),
    /// Write a training file from the train split.
    Prep(PrepArgs),
    /// Score a backend on one split.
    Eval(EvalArgs),
    /// Host live sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Skip the screenshot existence and size checks.
    #[arg(long)]
    pub no_assets: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value = "interleaved")]
    pub arrangement: Arrangement,
    #[arg(long, default_value_t = 1)]
    pub epochs: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Drop every instance of this scenario within `--scope`.
    #[arg(long)]
    pub exclude_scenario: Option<ScenarioType>,
    #[arg(long, default_value = "train-only")]
    pub scope: FilterScope,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the continuation set: the excluded train instances alone.
    #[arg(long, requires = "exclude_scenario")]
    pub continuation_out: Option<PathBuf>,
    /// Also write the filtered dataset.
    #[arg(long)]
    pub dataset_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Oracle,
    Remote,
    Dual,
}

#[derive(Debug, Clone, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    pub backend: BackendKind,
    /// JSON backend spec; replaces `--backend` and the endpoint flags.
    #[arg(long)]
    pub backend_config: Option<PathBuf>,
    #[arg(long, default_value = "query")]
    pub mode: Mode,
    /// Chat-completions base URL (or VERIOS_API_BASE).
    #[arg(long)]
    pub base_url: Option<String>,
    /// Model name (or VERIOS_MODEL).
    #[arg(long)]
    pub model: Option<String>,
    /// Model for scenario judgments under `--backend dual`; defaults to `--model`.
    #[arg(long)]
    pub scenario_model: Option<String>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    #[arg(long)]
    pub retries: Option<u32>,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    /// JSON error model for the oracle backend.
    #[arg(long)]
    pub errors: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportArg {
    Md,
    Machine,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Seeds the oracle error model and is recorded in the report.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "md")]
    pub report: ReportArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write per-instance outcomes as JSON lines.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    pub width: usize,
    #[arg(long)]
    pub no_assets: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value_t = 10)]
    pub max_steps: u32,
    #[arg(long)]
    pub no_assets: bool,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> CliError {
        match e {
            DatasetError::Schema(_) | DatasetError::DuplicateId(_) | DatasetError::Syntax { .. } => {
                CliError::Invalid(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Runs one command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Validate(a) => validate(a, out),
        Command::Stats(a) => stats(a, out),
        Command::Prep(a) => prep(a, out),
        Command::Eval(a) => eval(a, out),
        Command::Serve(a) => serve_cmd(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn validate(a: ValidateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    match load_dataset(&a.dataset, !a.no_assets) {
        Ok(ds) => {
            let assets = if a.no_assets { "assets not checked" } else { "assets checked" };
            writeln!(out, "ok: {} instances ({assets})", ds.len()).map_err(runtime)
        }
        Err(DatasetError::Schema(violations)) => {
            for v in &violations {
                writeln!(out, "{v}").map_err(runtime)?;
            }
            Err(CliError::Invalid(format!("{} schema violation(s)", violations.len())))
        }
        Err(e) => Err(e.into()),
    }
}

fn stats(a: StatsArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let report = dataset_stats(&load_dataset(&a.dataset, false)?);
    if a.json {
        let text = serde_json::to_string_pretty(&report).map_err(runtime)?;
        writeln!(out, "{text}").map_err(runtime)
    } else {
        writeln!(out, "{report}").map_err(runtime)
    }
}

fn prep(a: PrepArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = load_dataset(&a.dataset, false)?;
    let filtered = match a.exclude_scenario {
        Some(s) => partition_scenario(&ds, s, a.scope).0,
        None => ds.clone(),
    };
    let set = build_training_set(&filtered.subset(Split::Train).instances, a.arrangement, a.epochs, a.seed)
        .map_err(runtime)?;
    let n = emit_training_file(&set, &a.out).map_err(runtime)?;
    writeln!(
        out,
        "wrote {n} records ({}, {} epoch(s), seed {}) to {}",
        a.arrangement.label(),
        a.epochs,
        a.seed,
        a.out.display()
    )
    .map_err(runtime)?;
    if let (Some(path), Some(held_out)) = (&a.continuation_out, a.exclude_scenario) {
        let (_, continuation) =
            two_stage_sets(&ds.subset(Split::Train).instances, held_out, a.arrangement, a.epochs, a.seed)
                .map_err(runtime)?;
        let n = emit_training_file(&continuation, path).map_err(runtime)?;
        writeln!(out, "wrote {n} continuation records ({}) to {}", held_out.label(), path.display()).map_err(runtime)?;
    }
    if let Some(path) = &a.dataset_out {
        save_dataset(&filtered, path).map_err(runtime)?;
        writeln!(out, "wrote {} instances to {}", filtered.len(), path.display()).map_err(runtime)?;
    }
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

impl BackendArgs {
    fn remote(&self, model: Option<&String>) -> BackendVariant {
        let mut cfg = RemoteConfig::default();
        if let Some(v) = &self.base_url {
            cfg.base_url = v.clone();
        }
        if let Some(v) = model {
            cfg.model = v.clone();
        }
        if let Some(v) = &self.api_key_env {
            cfg.api_key_env = v.clone();
        }
        if let Some(v) = self.timeout_secs {
            cfg.timeout_secs = v;
        }
        if let Some(v) = self.retries {
            cfg.retries = v;
        }
        if let Some(v) = self.max_in_flight {
            cfg.max_in_flight = v;
        }
        BackendVariant::Remote(cfg.resolve_env())
    }

    /// The backend these flags describe. `seed` replaces the seed of the
    /// oracle error model.
    pub fn spec(&self, seed: Option<u64>) -> Result<BackendSpec, CliError> {
        let mut spec = match &self.backend_config {
            Some(path) => {
                let mut spec: BackendSpec = read_json(path)?;
                spec.variant = spec.variant.resolve_env();
                spec
            }
            None => {
                let variant = match self.backend {
                    BackendKind::Oracle => {
                        let errors = match &self.errors {
                            Some(path) => read_json(path)?,
                            None => ErrorModel::default(),
                        };
                        BackendVariant::Oracle { errors, never_ask: false }
                    }
                    BackendKind::Remote => self.remote(self.model.as_ref()),
                    BackendKind::Dual => BackendVariant::Dual {
                        scenario: Box::new(self.remote(self.scenario_model.as_ref().or(self.model.as_ref()))),
                        action: Box::new(self.remote(self.model.as_ref())),
                    },
                };
                BackendSpec { variant, mode: self.mode }
            }
        };
        if let (Some(seed), BackendVariant::Oracle { errors, .. }) = (seed, &mut spec.variant) {
            errors.seed = seed;
        }
        if self.backend_config.is_none() {
            spec.mode = self.mode;
        }
        Ok(spec)
    }
}

fn eval(a: EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = load_dataset(&a.dataset, !a.no_assets)?;
    let test = match a.split {
        SplitArg::Train => ds.subset(Split::Train),
        SplitArg::Test => ds.subset(Split::Test),
        SplitArg::All => ds.clone(),
    };
    let spec = a.backend.spec(a.seed)?;
    let agent = spec.build(&ds).map_err(|e| CliError::Invalid(e.to_string()))?;
    let cfg = SessionConfig::<f64>::default().with_mode(spec.mode);
    let (report, outcomes) = evaluate(&test, &agent, &OracleResponder, &cfg, EvalOptions { width: a.width, seed: a.seed })
        .map_err(runtime)?;
    let format = match a.report {
        ReportArg::Md => ReportFormat::Table,
        ReportArg::Machine => ReportFormat::Machine,
    };
    let text = render_report(&report, format);
    match &a.out {
        Some(path) => fs::write(path, &text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?,
        None => out.write_all(text.as_bytes()).map_err(runtime)?,
    }
    if let Some(path) = &a.outcomes {
        let mut lines = String::new();
        for o in &outcomes {
            lines.push_str(&serde_json::to_string(o).map_err(runtime)?);
            lines.push('\n');
        }
        fs::write(path, lines).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn serve_cmd(a: ServeArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = load_dataset(&a.dataset, !a.no_assets)?;
    let spec = a.backend.spec(None)?;
    spec.build(&ds).map_err(|e| CliError::Invalid(e.to_string()))?;
    SessionConfig::<f64>::new(a.max_steps, spec.mode).map_err(|e| CliError::Invalid(e.to_string()))?;
    let svc = Arc::new(Service::new(ds, spec).with_max_steps(a.max_steps));
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime)?;
    rt.block_on(serve(svc, SocketAddr::new(a.host, a.port), |addr| {
        let _ = writeln!(out, "listening on http://{addr}");
        let _ = out.flush();
    }))
    .map_err(runtime)
}

//! `roughwalk`: simulate, lift, measure and predict from the command line.
//!
//! Every command reads an optional JSON config (`--config`), applies flag
//! overrides, validates, runs, and writes its artifacts plus
//! `manifest.json` into `--out`. Exit status is 0 on success, 1 for
//! invalid input and 2 for numerical failures; failures also leave a
//! structured `error.json`.

mod commands;
mod config;
mod error;
mod plotdata;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use roughwalk::mc::SweepStatistic;
use roughwalk::models::{ModelConfig, ModelSpec, OuParams};
use serde::Serialize;

use crate::commands::{dispatch, Context};
use crate::config::{
    load_config, CommandName, ExperimentConfig, InterpolationArg, LiftArg, MethodArg, ModelName, ProbeKind,
};
use crate::error::{CliError, CliResult, ErrorKind, EXIT_VALIDATION};

#[derive(Parser, Debug)]
#[command(name = "roughwalk", version, about = "Rough-path limits of random walks and diffusions")]
struct Cli {
    /// Experiment config (JSON); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed, overriding the model's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all available cores).
    #[arg(long, global = true, env = "ROUGHWALK_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "roughwalk-out")]
    out: PathBuf,
    /// Resolve and validate the configuration, print it and stop.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the command named in the config's `command` field.
    Run,
    /// Write one replica of the rescaled path as CSV.
    Simulate(Knobs),
    /// Write the level-2 lift of an input or simulated path.
    Lift(Knobs),
    /// p-variation of a path read from CSV.
    Pvar(Knobs),
    /// Predicted covariance, area anomaly and Itô correction.
    Predict(Knobs),
    /// Monte-Carlo estimates of the limit statistics.
    Estimate(Knobs),
    /// Estimates across several values of n, with fitted rates.
    Sweep(Knobs),
    /// Tightness quantiles or the Lépingle ratio.
    Probe(Knobs),
    /// Compare driven solutions with the corrected and naive limits.
    Rde(Knobs),
    /// Merge report files into tidy CSVs for plotting.
    Plotdata {
        /// Report files (`sweep.json`, `reports.json`, `tightness.json`).
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    fn split(self) -> (Option<CommandName>, Option<Knobs>) {
        use CommandName as N;
        match self {
            Command::Run => (None, None),
            Command::Simulate(k) => (Some(N::Simulate), Some(k)),
            Command::Lift(k) => (Some(N::Lift), Some(k)),
            Command::Pvar(k) => (Some(N::Pvar), Some(k)),
            Command::Predict(k) => (Some(N::Predict), Some(k)),
            Command::Estimate(k) => (Some(N::Estimate), Some(k)),
            Command::Sweep(k) => (Some(N::Sweep), Some(k)),
            Command::Probe(k) => (Some(N::Probe), Some(k)),
            Command::Rde(k) => (Some(N::Rde), Some(k)),
            Command::Plotdata { .. } => unreachable!("handled before dispatch"),
        }
    }
}

/// Flag forms of the config knobs. Each command reads the ones it needs.
#[derive(Args, Debug, Default)]
struct Knobs {
    /// Model without parameters (only `ou` has no required parameters).
    #[arg(long, value_enum)]
    model: Option<ModelName>,
    /// Monte-Carlo replicas M.
    #[arg(long)]
    replicas: Option<usize>,
    /// Statistic to estimate (repeatable).
    #[arg(long = "statistic", value_parser = parse_statistic)]
    statistics: Vec<SweepStatistic>,
    /// Values of n, comma separated.
    #[arg(long, value_delimiter = ',')]
    scales: Vec<f64>,
    /// Exponent p.
    #[arg(long)]
    p: Option<f64>,
    /// Exponents for the Lépingle probe, comma separated.
    #[arg(long, value_delimiter = ',')]
    ps: Vec<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Dyadic skeleton level.
    #[arg(long)]
    level: Option<u32>,
    /// Also report the level-2 p/2-variation.
    #[arg(long)]
    level2: bool,
    /// Input path CSV.
    #[arg(long)]
    path: Option<PathBuf>,
    #[arg(long, value_enum)]
    interpolation: Option<InterpolationArg>,
    #[arg(long = "kind", value_enum)]
    lift: Option<LiftArg>,
    /// Replica index for `simulate` and `lift`.
    #[arg(long)]
    replica: Option<u64>,
    /// Spectral cutoff K.
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    max_cutoff: Option<usize>,
    /// Macroscopic mesh for tightness probes.
    #[arg(long)]
    mesh: Option<f64>,
    #[arg(long, value_enum)]
    probe: Option<ProbeKind>,
    /// Step of the limit equation's Euler–Maruyama scheme.
    #[arg(long)]
    limit_step: Option<f64>,
}

fn parse_statistic(s: &str) -> Result<SweepStatistic, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn model_name(model: &ModelConfig) -> ModelName {
    match model.model {
        ModelSpec::Ou { .. } => ModelName::Ou,
        ModelSpec::Conductance { .. } => ModelName::Conductance,
        ModelSpec::Periodic { .. } => ModelName::Periodic,
    }
}

impl Knobs {
    /// The knobs set on the command line. `--model` either names the
    /// config's model or, for OU, stands in for it.
    fn into_config(self, from_file: Option<&ModelConfig>) -> CliResult<ExperimentConfig> {
        let model = match (self.model, from_file) {
            (None, _) => None,
            (Some(m), Some(cfg)) if m == model_name(cfg) => None,
            (Some(_), Some(_)) => {
                return Err(CliError::validation("model", "--model names a different model than the config"));
            }
            (Some(ModelName::Ou), None) => Some(ModelConfig {
                model: ModelSpec::Ou { params: OuParams::default() },
                seed: 0,
                horizon: 1.0,
                scale_n: 1.0,
                step: Some(0.01),
            }),
            (Some(_), None) => {
                return Err(CliError::validation(
                    "model",
                    "conductance and periodic models need parameters from --config",
                ));
            }
        };
        let opt_vec = |v: Vec<f64>| (!v.is_empty()).then_some(v);
        Ok(ExperimentConfig {
            model,
            replicas: self.replicas,
            statistics: (!self.statistics.is_empty()).then_some(self.statistics),
            scales: opt_vec(self.scales),
            p: self.p,
            ps: opt_vec(self.ps),
            method: self.method,
            level: self.level,
            level2: self.level2.then_some(true),
            path: self.path,
            interpolation: self.interpolation,
            lift: self.lift,
            replica: self.replica,
            cutoff: self.cutoff,
            max_cutoff: self.max_cutoff,
            mesh: self.mesh,
            probe: self.probe,
            limit_step: self.limit_step,
            ..Default::default()
        })
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    /// The resolved configuration; running it again reproduces the outputs.
    config: &'a ExperimentConfig,
    seed: Option<u64>,
    workers: Option<usize>,
    wall_time: f64,
    outputs: Vec<String>,
}

fn resolve(
    config_path: Option<&Path>,
    seed: Option<u64>,
    command: Option<CommandName>,
    knobs: Option<Knobs>,
) -> CliResult<(CommandName, ExperimentConfig)> {
    let mut config = match config_path {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(k) = knobs {
        let flags = k.into_config(config.model.as_ref())?;
        config.override_with(flags);
    }
    let command = match (command, config.command) {
        (Some(c), _) | (None, Some(c)) => c,
        (None, None) => return Err(CliError::missing("command", "run")),
    };
    config.command = Some(command);
    if let (Some(seed), Some(model)) = (seed, config.model.as_mut()) {
        model.seed = seed;
    }
    config.validate()?;
    Ok((command, config))
}

fn execute(cli: Cli) -> CliResult<serde_json::Value> {
    let Cli { config, seed, workers, out, dry_run, command } = cli;
    let start = Instant::now();
    if workers == Some(0) {
        return Err(CliError::validation("workers", "must be at least 1"));
    }
    let (name, knobs) = match command {
        Command::Plotdata { .. } if dry_run => return Ok(serde_json::json!({ "command": "plotdata" })),
        Command::Plotdata { inputs } => {
            std::fs::create_dir_all(&out)?;
            let outputs = plotdata::emit(&inputs, &out)?;
            return Ok(serde_json::json!({ "command": "plotdata", "outputs": outputs }));
        }
        other => other.split(),
    };
    let (name, config) = resolve(config.as_deref(), seed, name, knobs)?;
    if dry_run {
        return Ok(serde_json::to_value(&config)?);
    }
    std::fs::create_dir_all(&out)?;
    let ctx = Context { config: &config, out: &out, workers };
    let outcome = dispatch(name, &ctx)?;
    let manifest = Manifest {
        tool: "roughwalk",
        version: env!("CARGO_PKG_VERSION"),
        command: name.as_str(),
        config: &config,
        seed: config.model.as_ref().map(|m| m.seed),
        workers,
        wall_time: start.elapsed().as_secs_f64(),
        outputs: outcome.outputs,
    };
    write_manifest(&out, &manifest)?;
    Ok(outcome.summary)
}

fn write_manifest(out: &Path, manifest: &Manifest) -> CliResult<()> {
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(out.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn report_error(out: &Path, e: &CliError) {
    let text = serde_json::to_string(e).unwrap_or_else(|_| format!("{{\"message\":{:?}}}", e.message));
    eprintln!("{text}");
    if std::fs::create_dir_all(out).is_ok() {
        let _ = std::fs::write(out.join("error.json"), text + "\n");
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError { kind: ErrorKind::Validation, field: None, message: e.kind().to_string() };
            let _ = e.print();
            eprintln!("{}", serde_json::to_string(&err).unwrap_or_default());
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let out = cli.out.clone();
    match execute(cli) {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).unwrap_or_default());
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(&out, &e);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

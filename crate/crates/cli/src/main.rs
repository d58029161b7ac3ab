use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mor_core::harness::{
    run_experiment, BatchParams, BatchReduction, DimsParams, ExperimentConfig, OnlineParams, OnlineReduction, Output,
    Pipeline, Report, Source, StreamSpec, SCHEMA_VERSION,
};
use mor_core::io::parse_json;
use mor_core::online::{Feedback, DEFAULT_EXPERT_CAP};
use mor_core::{LossSpec, MorError, Result};

#[derive(Parser)]
#[command(name = "mor", version, about = "Multioutput learnability experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Combinatorial dimensions of a class, with certificates.
    Dims(DimsArgs),
    /// Batch reductions with exact excess risk.
    Batch(BatchArgs),
    /// Online games with regret traces.
    Online(OnlineArgs),
    /// Run one or more experiment configs and check every bound.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct Common {
    /// Experiment config; when given, the other flags are ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    class: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct DimsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 0.1)]
    gamma: f64,
    #[arg(long, default_value_t = mor_core::dimensions::DEFAULT_SEQ_FAT_DEPTH)]
    max_depth: usize,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Loss as inline JSON or a path to a JSON file.
    #[arg(long)]
    loss: Option<String>,
    #[arg(long, value_parser = parse_batch_reduction, default_value = "alg1")]
    reduction: BatchReduction,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Args)]
struct OnlineArgs {
    #[command(flatten)]
    common: Common,
    /// Distribution for i.i.d. streams.
    #[arg(long)]
    dist: Option<PathBuf>,
    /// Fixed stream file; overrides --dist.
    #[arg(long)]
    stream: Option<PathBuf>,
    #[arg(long)]
    loss: Option<String>,
    #[arg(long, value_parser = parse_feedback)]
    feedback: Option<Feedback>,
    #[arg(long, value_parser = parse_online_reduction, default_value = "rewa")]
    reduction: OnlineReduction,
    /// Horizon, or a comma-separated list of horizons.
    #[arg(long = "T", value_delimiter = ',', default_value = "64")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 100)]
    seeds: usize,
    #[arg(long, default_value_t = DEFAULT_EXPERT_CAP)]
    expert_cap: usize,
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Draw a fresh stream for every seed.
    #[arg(long)]
    per_seed: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Experiment configs to run.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
}

fn from_json<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_batch_reduction(s: &str) -> std::result::Result<BatchReduction, String> {
    from_json(s)
}

fn parse_online_reduction(s: &str) -> std::result::Result<OnlineReduction, String> {
    from_json(s)
}

fn parse_feedback(s: &str) -> std::result::Result<Feedback, String> {
    from_json(s)
}

fn load_loss(arg: &Option<String>) -> Result<Option<LossSpec>> {
    let Some(a) = arg else { return Ok(None) };
    if a.trim_start().starts_with('{') {
        return parse_json(a, "--loss").map(Some);
    }
    mor_core::io::read_json(Path::new(a)).map(Some)
}

fn need_class(c: &Common) -> Result<Source<mor_core::io::ClassDoc>> {
    c.class
        .clone()
        .map(Source::Path)
        .ok_or_else(|| MorError::Config { path: "--class".into(), msg: "a class file is required".into() })
}

fn config(c: &Common, loss: Option<LossSpec>, dist: Option<PathBuf>, scenario: &str, pipeline: Pipeline) -> Result<ExperimentConfig> {
    Ok(ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        scenario: scenario.to_string(),
        seed: c.seed,
        class: need_class(c)?,
        distribution: dist.map(Source::Path),
        loss,
        pipeline,
        output: Output { csv: c.out.clone() },
        base_dir: PathBuf::new(),
    })
}

fn build(cmd: &Command) -> Result<(Vec<ExperimentConfig>, Option<PathBuf>)> {
    let from_file = |c: &Common| -> Result<Option<Vec<ExperimentConfig>>> {
        c.config.as_ref().map(|p| ExperimentConfig::from_path(p).map(|c| vec![c])).transpose()
    };
    Ok(match cmd {
        Command::Dims(a) => {
            let cfgs = match from_file(&a.common)? {
                Some(c) => c,
                None => {
                    let p = Pipeline::Dims(DimsParams { gamma: a.gamma, max_depth: a.max_depth });
                    vec![config(&a.common, None, None, "dims", p)?]
                }
            };
            (cfgs, a.common.report.clone())
        }
        Command::Batch(a) => {
            let cfgs = match from_file(&a.common)? {
                Some(c) => c,
                None => {
                    let p = Pipeline::Batch(BatchParams {
                        reduction: a.reduction,
                        eps: a.eps,
                        delta: a.delta,
                        trials: a.trials,
                        k: a.k,
                        alpha: a.alpha,
                        thresholds: None,
                    });
                    vec![config(&a.common, load_loss(&a.loss)?, a.dist.clone(), "batch", p)?]
                }
            };
            (cfgs, a.common.report.clone())
        }
        Command::Online(a) => {
            let cfgs = match from_file(&a.common)? {
                Some(c) => c,
                None => {
                    let stream = match &a.stream {
                        Some(path) => StreamSpec::File { path: path.clone() },
                        None => StreamSpec::Iid { distribution: None, per_seed: a.per_seed },
                    };
                    let p = Pipeline::Online(OnlineParams {
                        reduction: a.reduction,
                        feedback: a.feedback,
                        horizons: a.horizons.clone(),
                        seeds: a.seeds,
                        beta: a.beta,
                        alpha: a.alpha,
                        expert_cap: a.expert_cap,
                        exploration: 0.0,
                        k: a.k,
                        stream,
                        probe_seeds: 20,
                        tolerance: 0.0,
                        max_exponent: None,
                    });
                    vec![config(&a.common, load_loss(&a.loss)?, a.dist.clone(), "online", p)?]
                }
            };
            (cfgs, a.common.report.clone())
        }
        Command::Verify(a) => {
            let cfgs = a.configs.iter().map(|p| ExperimentConfig::from_path(p)).collect::<Result<_>>()?;
            (cfgs, a.report.clone())
        }
    })
}

fn run(cli: &Cli) -> Result<bool> {
    let (cfgs, report_path) = build(&cli.command)?;
    let mut reports: Vec<Report> = Vec::new();
    for cfg in &cfgs {
        let r = run_experiment(cfg)?;
        print!("{}", r.summary());
        reports.push(r);
    }
    if let Some(p) = report_path {
        let text = serde_json::to_string_pretty(&reports).map_err(|e| MorError::Io(e.to_string()))?;
        std::fs::write(p, text)?;
    }
    Ok(reports.iter().all(Report::passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

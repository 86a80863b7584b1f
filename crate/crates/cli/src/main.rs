//! Command-line runner: execute a strategy over a dataset (`run`), sweep a
//! strategy matrix (`grid`), or recompute metrics from stored episodes
//! (`report`).

mod spec;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use revise_core::datasets::{self, DatasetName, DatasetSpec};
use revise_core::gateway::{Gateway, LiveConfig, MockScript};
use revise_core::harness::{
    emit_pareto, emit_report, read_episodes, run_strategy, RunOptions, RunReport,
};
use revise_core::prompts::TemplateLibrary;
use spec::{GridSpec, RunSpec};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "revise", version, about = "Reasoning pipelines with revisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one strategy over a dataset and write reports.
    Run(RunArgs),
    /// Run every strategy in a grid config and write a combined table.
    Grid(GridArgs),
    /// Recompute metrics from a stored episodes.jsonl.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML file mirroring these flags; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,

    #[arg(long)]
    dataset: Option<String>,
    /// Dataset file (omit for the synthetic generator).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Subquestion-annotated companion file (gsm8k).
    #[arg(long)]
    socratic: Option<PathBuf>,
    #[arg(long)]
    offset: Option<usize>,
    #[arg(long)]
    limit: Option<usize>,

    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    resampler: Option<String>,
    /// Revision method for heterogeneous resampling.
    #[arg(long)]
    revision: Option<String>,
    #[arg(long)]
    selector: Option<String>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    iterations: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    cassette: Option<PathBuf>,
    /// Mock script file (TOML) for --backend mock.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Record failing episodes as incorrect instead of aborting.
    #[arg(long)]
    skip_errors: bool,
    /// Load templates from this directory instead of the built-in set.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Also write per-episode JSON Lines.
    #[arg(long)]
    episodes: bool,

    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridArgs {
    /// Grid config: shared dataset/backend plus a list of strategies.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// episodes.jsonl from a previous run.
    #[arg(long)]
    episodes: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Grid(args) => grid(args),
        Command::Report(args) => report(args),
    }
}

fn load_templates(dir: &Option<PathBuf>) -> Result<TemplateLibrary> {
    match dir {
        Some(path) => TemplateLibrary::load_dir(path)
            .with_context(|| format!("loading templates from {}", path.display())),
        None => Ok(TemplateLibrary::builtin()),
    }
}

fn build_gateway(spec: &RunSpec) -> Result<Gateway> {
    let cassette = spec.cassette.as_deref();
    let need_cassette = || -> Result<&Path> {
        cassette.context("this backend requires --cassette <path>")
    };
    match spec.backend.as_str() {
        "live" => Ok(Gateway::live(LiveConfig::from_env()?)),
        "record" => Ok(Gateway::record_live(need_cassette()?, LiveConfig::from_env()?)?),
        "replay" => Ok(Gateway::replay(need_cassette()?)?),
        "mock" => {
            let path = spec
                .mock_script
                .as_deref()
                .context("mock backend requires --mock-script <path>")?;
            Ok(Gateway::mock(MockScript::from_file(path)?))
        }
        other => bail!("unknown backend {other:?} (expected live|record|replay|mock)"),
    }
}

fn dataset_spec(spec: &RunSpec) -> Result<DatasetSpec> {
    let name: DatasetName = spec.dataset.parse()?;
    if name != DatasetName::Synthetic && spec.data.is_none() {
        bail!("dataset {} requires --data <path>", spec.dataset);
    }
    let mut ds = DatasetSpec::new(name);
    ds.path = spec.data.clone();
    ds.socratic_path = spec.socratic.clone();
    ds.offset = spec.offset;
    ds.limit = spec.limit;
    ds.seed = spec.seed;
    Ok(ds)
}

fn execute(spec: &RunSpec, templates: &TemplateLibrary, out: &Path, episodes: bool) -> Result<RunReport> {
    let ds = dataset_spec(spec)?;
    let problems = datasets::load(&ds)?;
    if problems.is_empty() {
        bail!("dataset is empty after applying offset/limit");
    }
    let gateway = build_gateway(spec)?;
    let strategy = spec.strategy()?;
    let mut options = RunOptions::new(ds.name.task(), spec.model.clone());
    options.workers = spec.workers;
    options.skip_errors = spec.skip_errors;

    let outcome = run_strategy(&strategy, &problems, &gateway, templates, &options)?;
    let files = emit_report(&outcome.report, out, episodes)?;
    eprintln!(
        "{}: n={} accuracy={:.4} upper_bound={:.4} resample_rate={:.4} avg_tokens={:.1} wall={:.2?}",
        strategy.label(),
        outcome.report.n_examples,
        outcome.report.accuracy,
        outcome.report.oracle_upper_bound,
        outcome.report.resample_rate,
        outcome.report.cost.avg_total_per_example,
        outcome.wall_time,
    );
    eprintln!("report: {}", files.report.display());
    Ok(outcome.report)
}

fn run(args: RunArgs) -> Result<()> {
    let spec = RunSpec::from_args(&args)?;
    let templates = load_templates(&spec.templates)?;
    let out = spec.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    execute(&spec, &templates, &out, spec.episodes)?;
    Ok(())
}

fn grid(args: GridArgs) -> Result<()> {
    let grid = GridSpec::from_file(&args.config)?;
    let templates = load_templates(&grid.base.templates)?;
    let out = args
        .out
        .or_else(|| grid.out.clone())
        .unwrap_or_else(|| PathBuf::from("out/grid"));
    std::fs::create_dir_all(&out)?;

    let mut reports = Vec::new();
    for strategy_spec in grid.strategies()? {
        let mut spec = strategy_spec;
        if let Some(workers) = args.workers {
            spec.workers = workers;
        }
        let label_dir = out.join(sanitize(&spec.strategy()?.label()));
        let report = execute(&spec, &templates, &label_dir, spec.episodes)?;
        reports.push(report);
    }

    emit_pareto(&reports, &out.join("pareto.csv"))?;
    write_grid_table(&reports, &out.join("grid.csv"))?;
    eprintln!("grid table: {}", out.join("grid.csv").display());
    Ok(())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn write_grid_table(reports: &[RunReport], path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "sampler",
        "resampler",
        "selector",
        "k",
        "iterations",
        "n",
        "accuracy",
        "oracle_upper_bound",
        "resample_rate",
        "avg_total_tokens",
    ])?;
    for report in reports {
        let strategy = &report.strategy;
        writer.write_record([
            strategy.sampler.method.as_str().to_string(),
            strategy
                .resampler
                .as_ref()
                .map(|r| {
                    let mut s = r.method.as_str().to_string();
                    if let Some(rev) = r.revision_method {
                        s.push(':');
                        s.push_str(rev.as_str());
                    }
                    s
                })
                .unwrap_or_else(|| "-".into()),
            strategy
                .selector
                .as_ref()
                .map(|s| s.method.as_str().to_string())
                .unwrap_or_else(|| "-".into()),
            strategy.k.to_string(),
            strategy.iterations.to_string(),
            report.n_examples.to_string(),
            format!("{}", report.accuracy),
            format!("{}", report.oracle_upper_bound),
            format!("{}", report.resample_rate),
            format!("{}", report.cost.avg_total_per_example),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

fn report(args: ReportArgs) -> Result<()> {
    let episodes = read_episodes(&args.episodes)?;
    let n = episodes.len();
    let correct = episodes.iter().filter(|e| e.correct).count();
    let resampled = episodes.iter().filter(|e| e.resampled()).count();
    let accuracy = correct as f64 / n.max(1) as f64;
    let upper = revise_core::harness::compute_upper_bound(&episodes);
    let cost = revise_core::harness::aggregate_costs(&episodes);
    println!(
        "n={} accuracy={:.4} upper_bound={:.4} resample_rate={:.4} avg_tokens={:.1}",
        n,
        accuracy,
        upper,
        resampled as f64 / n.max(1) as f64,
        cost.avg_total_per_example
    );
    for stage in &cost.per_stage {
        println!(
            "  {}: calls={} avg_in={:.1} avg_out={:.1} avg_total={:.1}",
            stage.stage, stage.calls, stage.avg_input, stage.avg_output, stage.avg_total
        );
    }
    if let Some(out) = args.out {
        std::fs::create_dir_all(&out)?;
        let summary = serde_json::json!({
            "n_examples": n,
            "accuracy": accuracy,
            "oracle_upper_bound": upper,
            "resample_rate": resampled as f64 / n.max(1) as f64,
            "cost": cost,
        });
        let path = out.join("recomputed.json");
        std::fs::write(&path, serde_json::to_string_pretty(&summary)? + "\n")?;
        println!("recomputed: {}", path.display());
    }
    Ok(())
}

//! Run and grid specifications: a TOML config mirrors every CLI flag, and
//! flags override file values.

use crate::RunArgs;
use anyhow::{bail, Context, Result};
use revise_core::harness::StrategyConfig;
use revise_core::resampling::{ResampleMethod, ResamplerConfig};
use revise_core::sampling::{SamplerConfig, SamplerMethod};
use revise_core::selection::{SelectorConfig, SelectorMethod};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub dataset: String,
    pub data: Option<PathBuf>,
    pub socratic: Option<PathBuf>,
    pub offset: usize,
    pub limit: Option<usize>,

    pub sampler: String,
    pub resampler: Option<String>,
    pub revision: Option<String>,
    pub selector: Option<String>,
    pub shots: Option<usize>,
    pub k: u32,
    pub iterations: u32,
    pub seed: u64,

    pub backend: String,
    pub cassette: Option<PathBuf>,
    pub mock_script: Option<PathBuf>,
    pub model: String,
    pub workers: usize,
    pub skip_errors: bool,
    pub templates: Option<PathBuf>,
    pub episodes: bool,
    pub out: Option<PathBuf>,
}

/// The TOML shape of a run config; every field optional so files can be
/// partial.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub dataset: Option<String>,
    pub data: Option<PathBuf>,
    pub socratic: Option<PathBuf>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
    pub sampler: Option<String>,
    pub resampler: Option<String>,
    pub revision: Option<String>,
    pub selector: Option<String>,
    pub shots: Option<usize>,
    pub k: Option<u32>,
    pub iterations: Option<u32>,
    pub seed: Option<u64>,
    pub backend: Option<String>,
    pub cassette: Option<PathBuf>,
    pub mock_script: Option<PathBuf>,
    pub model: Option<String>,
    pub workers: Option<usize>,
    pub skip_errors: Option<bool>,
    pub templates: Option<PathBuf>,
    pub episodes: Option<bool>,
    pub out: Option<PathBuf>,
}

pub const DEFAULT_MODEL: &str = "gpt-3.5-turbo";

impl RunSpec {
    pub fn from_args(args: &RunArgs) -> Result<RunSpec> {
        let file: RunFile = match &args.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => RunFile::default(),
        };
        let spec = RunSpec {
            dataset: args
                .dataset
                .clone()
                .or(file.dataset)
                .context("--dataset is required (or set dataset in --config)")?,
            data: args.data.clone().or(file.data),
            socratic: args.socratic.clone().or(file.socratic),
            offset: args.offset.or(file.offset).unwrap_or(0),
            limit: args.limit.or(file.limit),
            sampler: args
                .sampler
                .clone()
                .or(file.sampler)
                .context("--sampler is required (or set sampler in --config)")?,
            resampler: args.resampler.clone().or(file.resampler),
            revision: args.revision.clone().or(file.revision),
            selector: args.selector.clone().or(file.selector),
            shots: args.shots.or(file.shots),
            k: args.k.or(file.k).unwrap_or(1),
            iterations: args.iterations.or(file.iterations).unwrap_or(0),
            seed: args.seed.or(file.seed).unwrap_or(0),
            backend: args
                .backend
                .clone()
                .or(file.backend)
                .context("--backend is required (or set backend in --config)")?,
            cassette: args.cassette.clone().or(file.cassette),
            mock_script: args.mock_script.clone().or(file.mock_script),
            model: args
                .model
                .clone()
                .or(file.model)
                .unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            workers: args.workers.or(file.workers).unwrap_or(4),
            skip_errors: args.skip_errors || file.skip_errors.unwrap_or(false),
            templates: args.templates.clone().or(file.templates),
            episodes: args.episodes || file.episodes.unwrap_or(false),
            out: args.out.clone().or(file.out),
        };
        Ok(spec)
    }

    /// Builds the strategy this spec describes.
    pub fn strategy(&self) -> Result<StrategyConfig> {
        let mut sampler = SamplerConfig::new(parse_sampler(&self.sampler)?);
        sampler.shots = self.shots;
        let mut strategy = StrategyConfig::new(sampler);
        strategy.k = self.k;
        strategy.iterations = self.iterations;
        strategy.seed = self.seed;
        if let Some(name) = &self.resampler {
            let mut resampler = ResamplerConfig::new(parse_resampler(name)?);
            resampler.revision_method = self
                .revision
                .as_deref()
                .map(parse_sampler)
                .transpose()?;
            strategy.resampler = Some(resampler);
            if strategy.iterations == 0 {
                strategy.iterations = 1;
            }
        }
        if let Some(name) = &self.selector {
            strategy.selector = Some(SelectorConfig::new(parse_selector(name)?, self.seed));
        }
        Ok(strategy)
    }
}

fn parse_sampler(name: &str) -> Result<SamplerMethod> {
    Ok(match name {
        "answer_only" => SamplerMethod::AnswerOnly,
        "cot" => SamplerMethod::Cot,
        "subq_qg" => SamplerMethod::SubqQg,
        "subq_oracle" => SamplerMethod::SubqOracle,
        other => bail!("unknown sampler {other:?} (expected answer_only|cot|subq_qg|subq_oracle)"),
    })
}

fn parse_resampler(name: &str) -> Result<ResampleMethod> {
    Ok(match name {
        "self_ask_cot" => ResampleMethod::SelfAskCot,
        "self_ask_subq" => ResampleMethod::SelfAskSubq,
        "stepwise" => ResampleMethod::Stepwise,
        "facts" => ResampleMethod::FactsTwoPhase,
        other => bail!("unknown resampler {other:?} (expected self_ask_cot|self_ask_subq|stepwise|facts)"),
    })
}

fn parse_selector(name: &str) -> Result<SelectorMethod> {
    Ok(match name {
        "llm" => SelectorMethod::LlmSelect,
        "always_next" => SelectorMethod::AlwaysNext,
        "majority" => SelectorMethod::MajorityVote,
        "oracle" => SelectorMethod::Oracle,
        other => bail!("unknown selector {other:?} (expected llm|always_next|majority|oracle)"),
    })
}

/// Grid config: shared base settings plus per-strategy overrides.
#[derive(Debug, Clone, Deserialize)]
pub struct GridFile {
    #[serde(flatten)]
    pub base: RunFile,
    pub out: Option<PathBuf>,
    pub strategies: Vec<StrategyRow>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyRow {
    pub sampler: String,
    pub resampler: Option<String>,
    pub revision: Option<String>,
    pub selector: Option<String>,
    pub shots: Option<usize>,
    pub k: Option<u32>,
    pub iterations: Option<u32>,
    pub seed: Option<u64>,
}

pub struct GridSpec {
    pub base: RunSpec,
    pub rows: Vec<StrategyRow>,
    pub out: Option<PathBuf>,
}

impl GridSpec {
    pub fn from_file(path: &Path) -> Result<GridSpec> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading grid config {}", path.display()))?;
        let file: GridFile = toml::from_str(&text)
            .with_context(|| format!("parsing grid config {}", path.display()))?;
        if file.strategies.is_empty() {
            bail!("grid config has no strategies");
        }
        let base = RunSpec {
            dataset: file.base.dataset.clone().context("grid config needs dataset")?,
            data: file.base.data.clone(),
            socratic: file.base.socratic.clone(),
            offset: file.base.offset.unwrap_or(0),
            limit: file.base.limit,
            sampler: "cot".into(), // replaced per row
            resampler: None,
            revision: None,
            selector: None,
            shots: file.base.shots,
            k: file.base.k.unwrap_or(1),
            iterations: file.base.iterations.unwrap_or(0),
            seed: file.base.seed.unwrap_or(0),
            backend: file.base.backend.clone().context("grid config needs backend")?,
            cassette: file.base.cassette.clone(),
            mock_script: file.base.mock_script.clone(),
            model: file.base.model.clone().unwrap_or_else(|| DEFAULT_MODEL.to_string()),
            workers: file.base.workers.unwrap_or(4),
            skip_errors: file.base.skip_errors.unwrap_or(false),
            templates: file.base.templates.clone(),
            episodes: file.base.episodes.unwrap_or(false),
            out: None,
        };
        Ok(GridSpec {
            base,
            rows: file.strategies,
            out: file.out,
        })
    }

    /// One resolved run spec per strategy row.
    pub fn strategies(&self) -> Result<Vec<RunSpec>> {
        Ok(self
            .rows
            .iter()
            .map(|row| {
                let mut spec = self.base.clone();
                spec.sampler = row.sampler.clone();
                spec.resampler = row.resampler.clone();
                spec.revision = row.revision.clone();
                spec.selector = row.selector.clone();
                if let Some(shots) = row.shots {
                    spec.shots = Some(shots);
                }
                if let Some(k) = row.k {
                    spec.k = k;
                }
                if let Some(iterations) = row.iterations {
                    spec.iterations = iterations;
                }
                if let Some(seed) = row.seed {
                    spec.seed = seed;
                }
                spec
            })
            .collect())
    }
}

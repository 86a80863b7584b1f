//! Evaluation harness: runs a strategy over a dataset with a bounded worker
//! pool, aggregates accuracy, oracle bounds, resample rate, and token costs,
//! and emits deterministic reports.

mod ledger;
mod report;
mod runner;

pub use ledger::{check_printed_total, CostLedger, StageCost, TotalCheck};
pub use report::{emit_pareto, emit_report, read_episodes, read_report, ReportFiles};
pub use runner::{run_strategy, RunOptions, RunOutcome};

use crate::error::{Error, Result};
use crate::model::{Answer, AnswerKind, Problem, TokenUsage};
use crate::resampling::ResamplerConfig;
use crate::sampling::{SamplerConfig, SamplerMethod};
use crate::selection::{SelectionOutcome, SelectorConfig, SelectorMethod};
use serde::{Deserialize, Serialize};

/// Report schema version written into every report file.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Declarative pipeline description: sampler, optional resampler, optional
/// selector, iteration count, vote sample count, and the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub sampler: SamplerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resampler: Option<ResamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selector: Option<SelectorConfig>,
    /// Rounds of conditional resampling + selection.
    pub iterations: u32,
    /// Samples drawn for majority voting (1 = single greedy sample).
    pub k: u32,
    pub seed: u64,
}

impl StrategyConfig {
    pub fn new(sampler: SamplerConfig) -> StrategyConfig {
        StrategyConfig {
            sampler,
            resampler: None,
            selector: None,
            iterations: 0,
            k: 1,
            seed: 0,
        }
    }

    /// Compact label used in report rows (no commas, CSV-safe).
    pub fn label(&self) -> String {
        let mut parts = vec![self.sampler.method.as_str().to_string()];
        if let Some(re) = &self.resampler {
            let mut s = format!("re={}", re.method.as_str());
            if let Some(rev) = re.revision_method {
                s.push_str(&format!(":{}", rev.as_str()));
            }
            parts.push(s);
        }
        if let Some(sel) = &self.selector {
            parts.push(format!("sel={}", sel.method.as_str()));
        }
        if self.k > 1 {
            parts.push(format!("k={}", self.k));
        }
        if self.iterations > 0 {
            parts.push(format!("r={}", self.iterations));
        }
        parts.join("|")
    }

    /// Checks the strategy against itself and the problems it will run on.
    pub fn validate(&self, problems: &[Problem]) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be >= 1".into()));
        }
        if self.iterations > 0 && self.resampler.is_none() {
            return Err(Error::InvalidConfig(
                "iterations > 0 requires a resampler".into(),
            ));
        }
        if self.sampler.method == SamplerMethod::SubqOracle {
            if let Some(p) = problems.iter().find(|p| p.oracle_subquestions.is_none()) {
                return Err(Error::InvalidConfig(format!(
                    "sampler subq_oracle requires oracle subquestions; problem {} has none",
                    p.id
                )));
            }
        }
        if let Some(re) = &self.resampler {
            if re.method == crate::resampling::ResampleMethod::FactsTwoPhase {
                if let Some(p) = problems.iter().find(|p| p.facts.is_none()) {
                    return Err(Error::InvalidConfig(format!(
                        "facts resampling requires facts; problem {} has none",
                        p.id
                    )));
                }
            }
        }
        if let Some(sel) = &self.selector {
            if sel.method == SelectorMethod::Oracle {
                // gold answers are always present on loaded problems
            }
        }
        Ok(())
    }
}

/// Resample-and-select record for one iteration of one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDecision {
    pub iteration: u32,
    pub verdict: crate::resampling::Verdict,
    pub gate_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
    pub gate_parse_failed: bool,
    /// Present when a revision existed and a choice was made.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionOutcome>,
    pub chose_revision: bool,
}

/// Majority-vote record for episodes with k > 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub k: u32,
    pub winner: Answer,
}

/// One example's complete pipeline history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub problem_id: String,
    pub gold: Answer,
    /// All candidates in creation order, with origins.
    pub candidates: Vec<crate::model::Candidate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vote: Option<VoteRecord>,
    pub decisions: Vec<IterationDecision>,
    pub final_answer: Answer,
    pub correct: bool,
    pub usage: Vec<TokenUsage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EpisodeRecord {
    /// Episode for a failed example recorded under --skip-errors.
    pub fn failed(problem: &Problem, message: String) -> EpisodeRecord {
        EpisodeRecord {
            problem_id: problem.id.clone(),
            gold: problem.gold.clone(),
            candidates: Vec::new(),
            vote: None,
            decisions: Vec::new(),
            final_answer: Answer::unparsed(),
            correct: false,
            usage: Vec::new(),
            error: Some(message),
        }
    }

    pub fn resampled(&self) -> bool {
        self.decisions
            .iter()
            .any(|d| d.verdict == crate::resampling::Verdict::Revise)
    }
}

/// Aggregated results of one strategy over one dataset. Serialization is
/// deterministic; wall time is reported separately (see `RunOutcome`) so
/// report files are byte-stable across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub dataset: String,
    pub strategy: StrategyConfig,
    pub n_examples: usize,
    pub accuracy: f64,
    pub oracle_upper_bound: f64,
    pub resample_rate: f64,
    pub cost: CostLedger,
    pub episodes: Vec<EpisodeRecord>,
}

/// Fraction of episodes where any candidate's answer equals gold.
pub fn compute_upper_bound(episodes: &[EpisodeRecord]) -> f64 {
    if episodes.is_empty() {
        return 0.0;
    }
    let hits = episodes
        .iter()
        .filter(|e| {
            e.candidates
                .iter()
                .any(|c| crate::model::answers_equal(&c.answer, &e.gold))
        })
        .count();
    hits as f64 / episodes.len() as f64
}

/// Per-stage averages over all episodes (conditional stages amortize their
/// cost over every example).
pub fn aggregate_costs(episodes: &[EpisodeRecord]) -> CostLedger {
    CostLedger::from_episodes(episodes)
}

/// Builds a report from finished episodes (sorted by problem id by the
/// runner; `report` recomputation re-sorts defensively).
pub fn build_report(
    dataset: &str,
    strategy: &StrategyConfig,
    mut episodes: Vec<EpisodeRecord>,
) -> RunReport {
    episodes.sort_by(|a, b| a.problem_id.cmp(&b.problem_id));
    let n = episodes.len();
    let correct = episodes.iter().filter(|e| e.correct).count();
    let resampled = episodes.iter().filter(|e| e.resampled()).count();
    RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: dataset.to_string(),
        strategy: strategy.clone(),
        n_examples: n,
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        oracle_upper_bound: compute_upper_bound(&episodes),
        resample_rate: if n == 0 {
            0.0
        } else {
            resampled as f64 / n as f64
        },
        cost: aggregate_costs(&episodes),
        episodes,
    }
}

/// Majority vote over one answer per episode set, per problem id; used to
/// combine several single-sample strategies into one ensemble accuracy.
pub fn vote_across_runs(runs: &[&RunReport], seed: u64) -> Result<f64> {
    if runs.is_empty() {
        return Err(Error::InvalidConfig("no runs to combine".into()));
    }
    let first = &runs[0].episodes;
    let mut correct = 0usize;
    for (i, episode) in first.iter().enumerate() {
        let mut answers = Vec::with_capacity(runs.len());
        for run in runs {
            let other = run.episodes.get(i).ok_or_else(|| {
                Error::InvalidConfig("runs cover different example counts".into())
            })?;
            if other.problem_id != episode.problem_id {
                return Err(Error::InvalidConfig(
                    "runs cover different problems".into(),
                ));
            }
            answers.push(other.final_answer.clone());
        }
        let winner = crate::selection::majority_vote(&answers, seed, &episode.problem_id)?;
        if crate::model::answers_equal(&winner, &episode.gold) {
            correct += 1;
        }
    }
    Ok(correct as f64 / first.len().max(1) as f64)
}

/// Answer kind expected by a problem set (all problems share one).
pub fn dataset_answer_kind(problems: &[Problem]) -> Option<AnswerKind> {
    problems.first().map(|p| p.answer_kind)
}

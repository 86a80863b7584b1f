//! Token-cost accounting: per-stage input/output totals and per-example
//! averages, plus the printed-total audit used on published cost tables.

use super::EpisodeRecord;
use crate::model::Stage;
use serde::{Deserialize, Serialize};

/// Cost aggregate for one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCost {
    pub stage: Stage,
    pub calls: u64,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// Averages are over all examples in the run, so conditional stages are
    /// amortized.
    pub avg_input: f64,
    pub avg_output: f64,
    pub avg_total: f64,
}

/// Per-stage and whole-run token accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    /// One entry per stage, in stage order.
    pub per_stage: Vec<StageCost>,
    pub total_input_tokens: u64,
    pub total_output_tokens: u64,
    pub total_tokens: u64,
    /// Average total tokens per example: the cost axis for accuracy/cost
    /// tradeoff plots.
    pub avg_total_per_example: f64,
}

impl CostLedger {
    pub fn from_episodes(episodes: &[EpisodeRecord]) -> CostLedger {
        let n = episodes.len();
        let mut per_stage = Vec::with_capacity(Stage::ALL.len());
        let mut total_input = 0u64;
        let mut total_output = 0u64;
        for stage in Stage::ALL {
            let mut calls = 0u64;
            let mut input = 0u64;
            let mut output = 0u64;
            for episode in episodes {
                for usage in episode.usage.iter().filter(|u| u.stage == stage) {
                    calls += 1;
                    input += usage.input_tokens;
                    output += usage.output_tokens;
                }
            }
            total_input += input;
            total_output += output;
            let denom = n.max(1) as f64;
            per_stage.push(StageCost {
                stage,
                calls,
                input_tokens: input,
                output_tokens: output,
                avg_input: input as f64 / denom,
                avg_output: output as f64 / denom,
                avg_total: (input + output) as f64 / denom,
            });
        }
        CostLedger {
            per_stage,
            total_input_tokens: total_input,
            total_output_tokens: total_output,
            total_tokens: total_input + total_output,
            avg_total_per_example: (total_input + total_output) as f64 / n.max(1) as f64,
        }
    }

    pub fn stage(&self, stage: Stage) -> &StageCost {
        self.per_stage
            .iter()
            .find(|s| s.stage == stage)
            .expect("every stage is present")
    }
}

/// Audit of a published (input, output, total) row: the ledger's addition
/// contract against the printed total.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TotalCheck {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub printed_total: u64,
    pub computed_total: u64,
    /// False flags a row whose printed total disagrees with input + output.
    pub consistent: bool,
}

/// Checks a printed total against the addition contract.
pub fn check_printed_total(input_tokens: u64, output_tokens: u64, printed_total: u64) -> TotalCheck {
    let computed_total = input_tokens + output_tokens;
    TotalCheck {
        input_tokens,
        output_tokens,
        printed_total,
        computed_total,
        consistent: computed_total == printed_total,
    }
}

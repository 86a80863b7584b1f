//! Strategy execution: one sequential pipeline per example, examples run in
//! parallel on a bounded worker pool, aggregation in problem-id order.

use super::{build_report, EpisodeRecord, IterationDecision, RunReport, StrategyConfig, VoteRecord};
use crate::context::StageContext;
use crate::error::{Error, Result};
use crate::gateway::Gateway;
use crate::model::{answers_equal, Candidate, Origin, Problem};
use crate::prompts::TemplateLibrary;
use crate::resampling::conditional_resample;
use crate::sampling::{sample, sample_many};
use crate::selection::{
    llm_select, majority_vote, oracle_select, select_always_next, SelectorMethod,
};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Runner options independent of the strategy itself.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    /// Record failing episodes as incorrect instead of aborting the run.
    pub skip_errors: bool,
    /// Task key for template lookup, e.g. "gsm8k".
    pub task: String,
    pub model_id: String,
}

impl RunOptions {
    pub fn new(task: impl Into<String>, model_id: impl Into<String>) -> RunOptions {
        RunOptions {
            workers: 4,
            skip_errors: false,
            task: task.into(),
            model_id: model_id.into(),
        }
    }
}

/// A finished run: the deterministic report plus wall time, which is kept out
/// of the report so emitted files are byte-stable.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub wall_time: Duration,
}

/// Runs `strategy` over `problems`. Deterministic under replay/mock backends
/// for a fixed seed, regardless of worker count.
pub fn run_strategy(
    strategy: &StrategyConfig,
    problems: &[Problem],
    gateway: &Gateway,
    templates: &TemplateLibrary,
    options: &RunOptions,
) -> Result<RunOutcome> {
    strategy.validate(problems)?;
    let started = Instant::now();

    let n = problems.len();
    let results: Mutex<Vec<Option<Result<EpisodeRecord>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let stop = AtomicBool::new(false);
    let workers = options.workers.clamp(1, n.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if stop.load(Ordering::Relaxed) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let result = run_episode(&problems[i], strategy, gateway, templates, options);
                if result.is_err() && !options.skip_errors {
                    stop.store(true, Ordering::Relaxed);
                }
                results.lock().expect("results lock")[i] = Some(result);
            });
        }
    });

    let slots = results.into_inner().expect("results lock");
    let mut episodes = Vec::with_capacity(n);
    for (i, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(Ok(episode)) => episodes.push(episode),
            Some(Err(err)) => {
                if options.skip_errors {
                    episodes.push(EpisodeRecord::failed(&problems[i], err.to_string()));
                } else {
                    return Err(Error::InvalidConfig(format!(
                        "episode {} failed: {err}",
                        problems[i].id
                    )));
                }
            }
            // Slot never ran because the run aborted; only reachable in
            // fail-fast mode, where an Err slot exists and returns above.
            None => {}
        }
    }

    let report = build_report(&options.task, strategy, episodes);
    Ok(RunOutcome {
        report,
        wall_time: started.elapsed(),
    })
}

fn run_episode(
    problem: &Problem,
    strategy: &StrategyConfig,
    gateway: &Gateway,
    templates: &TemplateLibrary,
    options: &RunOptions,
) -> Result<EpisodeRecord> {
    let mut ctx = StageContext::new(gateway, templates, &options.model_id, &options.task);
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut vote = None;

    let mut current = if strategy.k > 1 {
        let sampled = sample_many(problem, &strategy.sampler, strategy.k, &mut ctx)?;
        let answers: Vec<_> = sampled.iter().map(|c| c.answer.clone()).collect();
        let winner = majority_vote(&answers, strategy.seed, &problem.id)?;
        let representative = sampled
            .iter()
            .position(|c| answers_equal(&c.answer, &winner))
            .unwrap_or(0);
        let mut voted = sampled[representative].clone();
        voted.origin = Origin::Voted;
        candidates.extend(sampled);
        vote = Some(VoteRecord {
            k: strategy.k,
            winner: winner.clone(),
        });
        candidates.push(voted.clone());
        voted
    } else {
        let candidate = sample(problem, &strategy.sampler, &mut ctx)?;
        candidates.push(candidate.clone());
        candidate
    };

    let mut decisions = Vec::new();
    if let Some(resampler) = &strategy.resampler {
        for iteration in 0..strategy.iterations {
            let decision = conditional_resample(problem, &current, resampler, &mut ctx)?;
            let mut record = IterationDecision {
                iteration,
                verdict: decision.verdict,
                gate_text: decision.gate_text.clone(),
                step_index: decision.step_index,
                gate_parse_failed: decision.parse_failed,
                selection: None,
                chose_revision: false,
            };
            if let Some(revised) = decision.revised {
                candidates.push(revised.clone());
                let pool = [current.clone(), revised];
                let outcome = match strategy.selector.as_ref().map(|s| s.method) {
                    None | Some(SelectorMethod::AlwaysNext) => select_always_next(&pool)?,
                    Some(SelectorMethod::LlmSelect) => {
                        let config = strategy.selector.as_ref().expect("selector present");
                        llm_select(problem, &pool, config, &mut ctx)?
                    }
                    Some(SelectorMethod::Oracle) => oracle_select(&pool, &problem.gold)?,
                    Some(SelectorMethod::MajorityVote) => {
                        let answers: Vec<_> = pool.iter().map(|c| c.answer.clone()).collect();
                        let winner = majority_vote(&answers, strategy.seed, &problem.id)?;
                        let chosen = pool
                            .iter()
                            .position(|c| answers_equal(&c.answer, &winner))
                            .unwrap_or(0);
                        crate::selection::SelectionOutcome {
                            chosen_index: chosen,
                            presentation_order: (0..pool.len()).collect(),
                            raw_label: String::new(),
                            parse_failed: false,
                        }
                    }
                };
                record.chose_revision = outcome.chosen_index == 1;
                current = pool[outcome.chosen_index].clone();
                record.selection = Some(outcome);
            }
            decisions.push(record);
        }
    }

    let correct = answers_equal(&current.answer, &problem.gold);
    Ok(EpisodeRecord {
        problem_id: problem.id.clone(),
        gold: problem.gold.clone(),
        candidates,
        vote,
        decisions,
        final_answer: current.answer,
        correct,
        usage: ctx.usage,
        error: None,
    })
}

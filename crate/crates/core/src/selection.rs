//! Selection stage: choose the final candidate. LLM-based selection with
//! randomized presentation order, always-take-latest, seeded majority vote,
//! and the gold-access oracle selector used for upper bounds.

use crate::context::StageContext;
use crate::error::{Error, Result};
use crate::model::{answers_equal, Answer, Candidate, Problem, Stage};
use crate::prompts::render_selection_prompt;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const DEFAULT_SELECTION_MAX_TOKENS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorMethod {
    LlmSelect,
    AlwaysNext,
    MajorityVote,
    Oracle,
}

impl SelectorMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectorMethod::LlmSelect => "llm",
            SelectorMethod::AlwaysNext => "always_next",
            SelectorMethod::MajorityVote => "majority",
            SelectorMethod::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorConfig {
    pub method: SelectorMethod,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    pub max_tokens: u32,
}

impl SelectorConfig {
    pub fn new(method: SelectorMethod, seed: u64) -> SelectorConfig {
        SelectorConfig {
            method,
            seed,
            shots: None,
            max_tokens: DEFAULT_SELECTION_MAX_TOKENS,
        }
    }
}

/// Result of one selection, with the presentation permutation kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionOutcome {
    /// Index into the caller's candidate list.
    pub chosen_index: usize,
    /// `presentation_order[display_position] = original_index`.
    pub presentation_order: Vec<usize>,
    /// Parsed label text (e.g. "B"); empty when parsing failed.
    pub raw_label: String,
    pub parse_failed: bool,
}

/// Deterministic, platform-stable generator derived from (seed, problem id)
/// plus a domain tag so different call sites draw independent streams.
pub fn seeded_rng(seed: u64, problem_id: &str, domain: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0x1f]);
    hasher.update(domain.as_bytes());
    hasher.update([0x1f]);
    hasher.update(problem_id.as_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(key)
}

fn identity_outcome(chosen_index: usize, n: usize) -> SelectionOutcome {
    SelectionOutcome {
        chosen_index,
        presentation_order: (0..n).collect(),
        raw_label: String::new(),
        parse_failed: false,
    }
}

/// One greedy call choosing among the candidates, shown in an order drawn
/// from the per-problem seeded generator. An unparseable label falls back to
/// the first original candidate.
pub fn llm_select(
    problem: &Problem,
    candidates: &[Candidate],
    config: &SelectorConfig,
    ctx: &mut StageContext,
) -> Result<SelectionOutcome> {
    if candidates.len() < 2 {
        return Err(Error::InvalidConfig(
            "llm selection requires at least 2 candidates".into(),
        ));
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    let mut rng = seeded_rng(config.seed, &problem.id, "select-order");
    order.shuffle(&mut rng);

    let choices: Vec<String> = order
        .iter()
        .map(|&i| candidates[i].trace.flat_text())
        .collect();
    let template = ctx.templates.get(&ctx.task, Stage::Selection, "select")?;
    let prompt = render_selection_prompt(template, problem, &choices, config.shots)?;
    let stop = template.stop.clone();
    let response = ctx.generate(
        Stage::Selection,
        prompt,
        0.0,
        config.max_tokens,
        &stop,
        0,
    )?;

    match parse_label(&response, candidates.len()) {
        Some(position) => Ok(SelectionOutcome {
            chosen_index: order[position],
            presentation_order: order,
            raw_label: ((b'A' + position as u8) as char).to_string(),
            parse_failed: false,
        }),
        None => Ok(SelectionOutcome {
            chosen_index: 0,
            presentation_order: order,
            raw_label: String::new(),
            parse_failed: true,
        }),
    }
}

/// First label letter in the response, as a display position.
fn parse_label(response: &str, n: usize) -> Option<usize> {
    for c in response.chars() {
        if c.is_ascii_alphabetic() {
            let position = (c.to_ascii_uppercase() as u8).wrapping_sub(b'A') as usize;
            return (position < n).then_some(position);
        }
        if c.is_ascii_digit() {
            return None;
        }
    }
    None
}

/// Takes the most recent candidate (the revision when one exists).
pub fn select_always_next(candidates: &[Candidate]) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig(
            "always_next requires at least 1 candidate".into(),
        ));
    }
    Ok(identity_outcome(candidates.len() - 1, candidates.len()))
}

/// Plurality answer with seeded random tie-breaking. Answers group by
/// normalized equality; the returned answer is the first-seen representative
/// of the winning class.
pub fn majority_vote(answers: &[Answer], seed: u64, problem_id: &str) -> Result<Answer> {
    if answers.is_empty() {
        return Err(Error::InvalidConfig(
            "majority vote requires at least 1 answer".into(),
        ));
    }
    // (first index, count) per equivalence class
    let mut classes: Vec<(usize, usize)> = Vec::new();
    for (i, answer) in answers.iter().enumerate() {
        match classes
            .iter_mut()
            .find(|(rep, _)| answers_equal(&answers[*rep], answer))
        {
            Some((_, count)) => *count += 1,
            None => classes.push((i, 1)),
        }
    }
    let best = classes.iter().map(|(_, c)| *c).max().expect("nonempty");
    let tied: Vec<usize> = classes
        .iter()
        .filter(|(_, c)| *c == best)
        .map(|(rep, _)| *rep)
        .collect();
    let winner = if tied.len() == 1 {
        tied[0]
    } else {
        let mut rng = seeded_rng(seed, problem_id, "vote-tie");
        tied[rng.random_range(0..tied.len())]
    };
    Ok(answers[winner].clone())
}

/// Gold-access upper-bound selector: the first candidate whose answer equals
/// gold, else the first candidate.
pub fn oracle_select(candidates: &[Candidate], gold: &Answer) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(Error::InvalidConfig(
            "oracle selection requires at least 1 candidate".into(),
        ));
    }
    let chosen = candidates
        .iter()
        .position(|c| answers_equal(&c.answer, gold))
        .unwrap_or(0);
    Ok(identity_outcome(chosen, candidates.len()))
}

//! Shared data model: problems, answers, reasoning traces, candidates, and
//! token usage, plus the deterministic answer extraction and equality rules
//! used by every pipeline stage.

use once_cell::sync::Lazy;
use regex::Regex;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

/// Text stored for answers that could not be parsed at all.
pub const UNPARSED_SENTINEL: &str = "unparsed";

/// What kind of final answer a problem expects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerKind {
    Numeric,
    Boolean,
    FreeText,
}

/// A normalized final answer. Exactly one payload, matching its kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Numeric(Decimal),
    Boolean(bool),
    FreeText(String),
}

impl Answer {
    pub fn numeric(value: Decimal) -> Self {
        Answer::Numeric(value.normalize())
    }

    pub fn boolean(value: bool) -> Self {
        Answer::Boolean(value)
    }

    pub fn free_text(value: impl Into<String>) -> Self {
        Answer::FreeText(value.into())
    }

    /// The fallback answer used when extraction fails entirely.
    pub fn unparsed() -> Self {
        Answer::FreeText(UNPARSED_SENTINEL.to_string())
    }

    pub fn kind(&self) -> AnswerKind {
        match self {
            Answer::Numeric(_) => AnswerKind::Numeric,
            Answer::Boolean(_) => AnswerKind::Boolean,
            Answer::FreeText(_) => AnswerKind::FreeText,
        }
    }

    /// Plain-text rendering, e.g. for report rows.
    pub fn display(&self) -> String {
        match self {
            Answer::Numeric(d) => d.to_string(),
            Answer::Boolean(b) => {
                if *b {
                    "True".to_string()
                } else {
                    "False".to_string()
                }
            }
            Answer::FreeText(s) => s.clone(),
        }
    }
}

/// One evaluation example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub question: String,
    pub answer_kind: AnswerKind,
    /// Dataset-provided subquestions, when the corpus ships them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_subquestions: Option<Vec<String>>,
    /// Dataset-provided supporting facts, when the corpus ships them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facts: Option<Vec<String>>,
    pub gold: Answer,
}

impl Problem {
    /// Checks the structural invariants loaders must guarantee.
    pub fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("problem id is empty".into());
        }
        if self.question.trim().is_empty() {
            return Err(format!("problem {}: question is empty", self.id));
        }
        if let Some(subqs) = &self.oracle_subquestions {
            if subqs.is_empty() {
                return Err(format!("problem {}: oracle_subquestions is empty", self.id));
            }
        }
        if self.gold.kind() != self.answer_kind {
            return Err(format!(
                "problem {}: gold kind {:?} does not match answer_kind {:?}",
                self.id,
                self.gold.kind(),
                self.answer_kind
            ));
        }
        Ok(())
    }
}

/// One question/answer link in a subquestion chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub question: String,
    pub answer: String,
    /// Marks the closing step that restates the original question.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub is_final: bool,
}

impl ChainStep {
    pub fn new(question: impl Into<String>, answer: impl Into<String>) -> Self {
        ChainStep {
            question: question.into(),
            answer: answer.into(),
            is_final: false,
        }
    }
}

/// A full generated result: direct answer, a rationale, or a subquestion chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReasoningTrace {
    AnswerOnly { text: String },
    Cot { text: String },
    SubqChain { steps: Vec<ChainStep> },
}

impl ReasoningTrace {
    pub fn answer_only(text: impl Into<String>) -> Self {
        ReasoningTrace::AnswerOnly { text: text.into() }
    }

    pub fn cot(text: impl Into<String>) -> Self {
        ReasoningTrace::Cot { text: text.into() }
    }

    pub fn chain(steps: Vec<ChainStep>) -> Self {
        ReasoningTrace::SubqChain { steps }
    }

    /// The text the final answer is extracted from: the whole generation for
    /// direct traces, the last sub-answer for chains.
    pub fn final_text(&self) -> &str {
        match self {
            ReasoningTrace::AnswerOnly { text } | ReasoningTrace::Cot { text } => text,
            ReasoningTrace::SubqChain { steps } => {
                steps.last().map(|s| s.answer.as_str()).unwrap_or("")
            }
        }
    }

    /// Single-line rendering used when a trace is quoted inside a prompt.
    pub fn flat_text(&self) -> String {
        match self {
            ReasoningTrace::AnswerOnly { text } | ReasoningTrace::Cot { text } => text.clone(),
            ReasoningTrace::SubqChain { steps } => steps
                .iter()
                .map(|s| s.answer.as_str())
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    pub fn steps(&self) -> Option<&[ChainStep]> {
        match self {
            ReasoningTrace::SubqChain { steps } => Some(steps),
            _ => None,
        }
    }
}

/// Which stage produced a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Sampled,
    Resampled,
    Voted,
}

/// A trace together with its extracted answer and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub trace: ReasoningTrace,
    pub answer: Answer,
    pub origin: Origin,
    pub parse_ok: bool,
}

impl Candidate {
    /// Builds a candidate by extracting the answer from `trace`.
    pub fn from_trace(trace: ReasoningTrace, kind: AnswerKind, origin: Origin) -> Self {
        let extraction = extract_answer(&trace, kind);
        Candidate {
            trace,
            answer: extraction.answer,
            origin,
            parse_ok: extraction.parse_ok,
        }
    }
}

/// Pipeline stage, used for ledger attribution and template lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    QuestionGen,
    Sampling,
    Resampling,
    Selection,
}

impl Stage {
    pub const ALL: [Stage; 4] = [
        Stage::QuestionGen,
        Stage::Sampling,
        Stage::Resampling,
        Stage::Selection,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::QuestionGen => "question_gen",
            Stage::Sampling => "sampling",
            Stage::Resampling => "resampling",
            Stage::Selection => "selection",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Input/output token counts for one generation call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub stage: Stage,
}

impl TokenUsage {
    pub fn new(input_tokens: u64, output_tokens: u64, stage: Stage) -> Self {
        TokenUsage {
            input_tokens,
            output_tokens,
            stage,
        }
    }

    pub fn total(&self) -> u64 {
        self.input_tokens + self.output_tokens
    }
}

/// Result of answer extraction; `parse_ok` is false only when extraction had
/// to fall back to the unparsed sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub answer: Answer,
    pub parse_ok: bool,
}

const ANSWER_CUE: &str = "the answer is";
const FINAL_ANSWER_CUE: &str = "final answer:";

static NUMBER_RE: Lazy<Regex> =
    Lazy::new(|| Regex::new(r"-?\$?\d[\d,]*(?:\.\d+)?|-?\$?\.\d+").expect("number regex"));

/// Parses a single number token, stripping currency symbols, thousands
/// separators, and a trailing period.
pub fn parse_decimal(token: &str) -> Option<Decimal> {
    let cleaned: String = token
        .trim()
        .chars()
        .filter(|c| *c != '$' && *c != ',')
        .collect();
    let cleaned = cleaned.trim().trim_end_matches('.');
    if cleaned.is_empty() {
        return None;
    }
    Decimal::from_str(cleaned).ok().map(|d| d.normalize())
}

fn first_number(text: &str) -> Option<Decimal> {
    NUMBER_RE
        .find_iter(text)
        .filter_map(|m| parse_decimal(m.as_str()))
        .next()
}

fn last_number(text: &str) -> Option<Decimal> {
    NUMBER_RE
        .find_iter(text)
        .filter_map(|m| parse_decimal(m.as_str()))
        .last()
}

fn rfind_ascii_ci(haystack: &str, needle: &str) -> Option<usize> {
    haystack
        .to_ascii_lowercase()
        .rfind(&needle.to_ascii_lowercase())
}

fn after_last_cue<'a>(text: &'a str, cue: &str) -> Option<&'a str> {
    rfind_ascii_ci(text, cue).map(|idx| &text[idx + cue.len()..])
}

fn bool_tokens(text: &str) -> impl Iterator<Item = (bool, bool)> + '_ {
    // yields (value, is_strict) where strict means a literal True/False token
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter_map(|tok| match tok.to_ascii_lowercase().as_str() {
            "true" => Some((true, true)),
            "false" => Some((false, true)),
            "yes" => Some((true, false)),
            "no" => Some((false, false)),
            _ => None,
        })
}

fn first_bool(text: &str) -> Option<bool> {
    bool_tokens(text).next().map(|(v, _)| v)
}

fn last_strict_bool(text: &str) -> Option<bool> {
    bool_tokens(text)
        .filter(|(_, strict)| *strict)
        .last()
        .map(|(v, _)| v)
}

/// Deterministically extracts the final answer from a trace.
///
/// The last "The answer is" cue wins; without a cue, numeric extraction falls
/// back to the last number anywhere and boolean to the last True/False token.
/// Free text takes whatever follows the last "Final Answer:" cue, else the
/// trimmed full text. Never fails: unparseable traces yield the sentinel with
/// `parse_ok` false.
pub fn extract_answer(trace: &ReasoningTrace, kind: AnswerKind) -> Extraction {
    let text = trace.final_text();
    match kind {
        AnswerKind::Numeric => {
            let via_cue = after_last_cue(text, ANSWER_CUE).and_then(first_number);
            match via_cue.or_else(|| last_number(text)) {
                Some(value) => Extraction {
                    answer: Answer::numeric(value),
                    parse_ok: true,
                },
                None => Extraction {
                    answer: Answer::unparsed(),
                    parse_ok: false,
                },
            }
        }
        AnswerKind::Boolean => {
            let via_cue = after_last_cue(text, ANSWER_CUE).and_then(first_bool);
            match via_cue.or_else(|| last_strict_bool(text)) {
                Some(value) => Extraction {
                    answer: Answer::boolean(value),
                    parse_ok: true,
                },
                None => Extraction {
                    answer: Answer::unparsed(),
                    parse_ok: false,
                },
            }
        }
        AnswerKind::FreeText => {
            let picked = match after_last_cue(text, FINAL_ANSWER_CUE) {
                Some(rest) => rest.trim(),
                None => text.trim(),
            };
            if picked.is_empty() {
                Extraction {
                    answer: Answer::unparsed(),
                    parse_ok: false,
                }
            } else {
                Extraction {
                    answer: Answer::free_text(picked),
                    parse_ok: true,
                }
            }
        }
    }
}

fn normalize_free_text(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

/// Exact-match answer comparison. Kind mismatches are simply unequal.
pub fn answers_equal(a: &Answer, b: &Answer) -> bool {
    match (a, b) {
        (Answer::Numeric(x), Answer::Numeric(y)) => x == y,
        (Answer::Boolean(x), Answer::Boolean(y)) => x == y,
        (Answer::FreeText(x), Answer::FreeText(y)) => {
            normalize_free_text(x) == normalize_free_text(y)
        }
        _ => false,
    }
}

/// Parses a gold answer string of the given kind, applying the same
/// normalization as extraction.
pub fn parse_gold(text: &str, kind: AnswerKind) -> Option<Answer> {
    match kind {
        AnswerKind::Numeric => parse_decimal(text).map(Answer::numeric),
        AnswerKind::Boolean => match text.trim().to_ascii_lowercase().as_str() {
            "true" | "yes" => Some(Answer::boolean(true)),
            "false" | "no" => Some(Answer::boolean(false)),
            _ => None,
        },
        AnswerKind::FreeText => {
            let t = text.trim();
            if t.is_empty() {
                None
            } else {
                Some(Answer::free_text(t))
            }
        }
    }
}

//! Modular LLM reasoning pipelines built from three stages — sampling,
//! conditional resampling, and selection — each with interchangeable
//! submodules, plus a deterministic record/replay evaluation harness with
//! token-cost accounting.

pub mod context;
pub mod datasets;
pub mod error;
pub mod gateway;
pub mod harness;
pub mod model;
pub mod prompts;
pub mod resampling;
pub mod sampling;
pub mod selection;

pub use context::StageContext;
pub use error::{Error, Result};
pub use model::{
    answers_equal, extract_answer, Answer, AnswerKind, Candidate, ChainStep, Origin, Problem,
    ReasoningTrace, Stage, TokenUsage,
};

//! Sampling stage: produces the initial candidate via Answer Only, CoT, or
//! subquestion decomposition, plus multi-sample generation for voting.

use crate::context::StageContext;
use crate::error::{Error, Result};
use crate::model::{Candidate, ChainStep, Origin, Problem, ReasoningTrace, Stage};
use crate::prompts::{
    render_question_gen_prompt, render_sampling_prompt, ChainPosition, PromptTemplate,
};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLING_MAX_TOKENS: u32 = 512;
pub const DEFAULT_SUBANSWER_MAX_TOKENS: u32 = 256;
pub const DEFAULT_QUESTION_GEN_MAX_TOKENS: u32 = 256;
/// Temperature for the non-greedy samples in a voting batch.
pub const VOTE_TEMPERATURE: f64 = 0.7;

/// How the initial candidate is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMethod {
    AnswerOnly,
    Cot,
    /// Subquestions generated by the model.
    SubqQg,
    /// Subquestions taken from the dataset.
    SubqOracle,
}

impl SamplerMethod {
    /// Template method key in the prompt library.
    pub fn template_key(&self) -> &'static str {
        match self {
            SamplerMethod::AnswerOnly => "answer_only",
            SamplerMethod::Cot => "cot",
            SamplerMethod::SubqQg | SamplerMethod::SubqOracle => "subq",
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SamplerMethod::AnswerOnly => "answer_only",
            SamplerMethod::Cot => "cot",
            SamplerMethod::SubqQg => "subq_qg",
            SamplerMethod::SubqOracle => "subq_oracle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: SamplerMethod,
    /// Demonstrations to render; defaults to the template's full set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub subanswer_max_tokens: u32,
}

impl SamplerConfig {
    pub fn new(method: SamplerMethod) -> SamplerConfig {
        SamplerConfig {
            method,
            shots: None,
            temperature: 0.0,
            max_tokens: DEFAULT_SAMPLING_MAX_TOKENS,
            subanswer_max_tokens: DEFAULT_SUBANSWER_MAX_TOKENS,
        }
    }

    fn with_temperature(&self, temperature: f64) -> SamplerConfig {
        SamplerConfig {
            temperature,
            ..self.clone()
        }
    }
}

/// Splits question-generation output on `?` boundaries, re-suffixing each
/// fragment with `?` and dropping empties.
pub fn split_questions(text: &str) -> Vec<String> {
    text.split('?')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| format!("{s}?"))
        .collect()
}

/// One greedy call to the question-generation prompt.
pub fn generate_subquestions(problem: &Problem, ctx: &mut StageContext) -> Result<Vec<String>> {
    let template = ctx.templates.get(&ctx.task, Stage::QuestionGen, "qg")?;
    let prompt = render_question_gen_prompt(template, problem, None)?;
    let stop = template.stop.clone();
    let text = ctx.generate(
        Stage::QuestionGen,
        prompt,
        0.0,
        DEFAULT_QUESTION_GEN_MAX_TOKENS,
        &stop,
        0,
    )?;
    let questions = split_questions(&text);
    if questions.is_empty() {
        return Err(Error::EmptySubquestions);
    }
    Ok(questions)
}

/// Generates answers for `questions`, extending `prefix`; each step
/// conditions on all previously answered steps. When the template defines a
/// final cue, a closing step restating the original question is appended.
#[allow(clippy::too_many_arguments)]
pub fn continue_chain(
    problem: &Problem,
    questions: &[ChainStep],
    prefix: Vec<ChainStep>,
    config: &SamplerConfig,
    ctx: &mut StageContext,
    stage: Stage,
    sample_index: u32,
) -> Result<Vec<ChainStep>> {
    let template = ctx
        .templates
        .get(&ctx.task, Stage::Sampling, "subq")?
        .clone();
    let mut steps = prefix;
    for question in questions {
        let text = chain_step_call(
            problem,
            &template,
            &steps,
            &question.question,
            question.is_final,
            config,
            ctx,
            stage,
            sample_index,
        )?;
        steps.push(ChainStep {
            question: question.question.clone(),
            answer: text,
            is_final: question.is_final,
        });
    }
    Ok(steps)
}

#[allow(clippy::too_many_arguments)]
fn chain_step_call(
    problem: &Problem,
    template: &PromptTemplate,
    answered: &[ChainStep],
    question: &str,
    is_final: bool,
    config: &SamplerConfig,
    ctx: &mut StageContext,
    stage: Stage,
    sample_index: u32,
) -> Result<String> {
    let prompt = render_sampling_prompt(
        template,
        problem,
        Some(ChainPosition {
            answered,
            current_question: question,
            is_final,
        }),
        config.shots,
    )?;
    let text = ctx.generate(
        stage,
        prompt,
        config.temperature,
        config.subanswer_max_tokens,
        &template.stop,
        sample_index,
    )?;
    Ok(text.trim().to_string())
}

fn chain_plan(template: &PromptTemplate, questions: &[String], problem: &Problem) -> Vec<ChainStep> {
    let mut plan: Vec<ChainStep> = questions
        .iter()
        .map(|q| ChainStep::new(q.clone(), String::new()))
        .collect();
    if template.final_cue.is_some() {
        plan.push(ChainStep {
            question: problem.question.clone(),
            answer: String::new(),
            is_final: true,
        });
    }
    plan
}

fn sample_indexed(
    problem: &Problem,
    config: &SamplerConfig,
    ctx: &mut StageContext,
    sample_index: u32,
) -> Result<Candidate> {
    let task = ctx.task.clone();
    let trace = match config.method {
        SamplerMethod::AnswerOnly | SamplerMethod::Cot => {
            let template = ctx
                .templates
                .get(&task, Stage::Sampling, config.method.template_key())?;
            let prompt = render_sampling_prompt(template, problem, None, config.shots)?;
            let stop = template.stop.clone();
            let text = ctx.generate(
                Stage::Sampling,
                prompt,
                config.temperature,
                config.max_tokens,
                &stop,
                sample_index,
            )?;
            let text = text.trim().to_string();
            match config.method {
                SamplerMethod::AnswerOnly => ReasoningTrace::answer_only(text),
                _ => ReasoningTrace::cot(text),
            }
        }
        SamplerMethod::SubqOracle | SamplerMethod::SubqQg => {
            let questions = match config.method {
                SamplerMethod::SubqOracle => {
                    problem.oracle_subquestions.clone().ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "problem {} has no oracle subquestions",
                            problem.id
                        ))
                    })?
                }
                _ => generate_subquestions(problem, ctx)?,
            };
            if questions.is_empty() {
                return Err(Error::EmptySubquestions);
            }
            let template = ctx.templates.get(&task, Stage::Sampling, "subq")?;
            let plan = chain_plan(template, &questions, problem);
            let steps = continue_chain(
                problem,
                &plan,
                Vec::new(),
                config,
                ctx,
                Stage::Sampling,
                sample_index,
            )?;
            ReasoningTrace::chain(steps)
        }
    };
    Ok(Candidate::from_trace(
        trace,
        problem.answer_kind,
        Origin::Sampled,
    ))
}

/// Produces the initial candidate for a problem.
pub fn sample(
    problem: &Problem,
    config: &SamplerConfig,
    ctx: &mut StageContext,
) -> Result<Candidate> {
    sample_indexed(problem, config, ctx, 0)
}

/// Draws `k` candidates: the first greedy, the rest at the voting
/// temperature, each salted with its sample index. Order is preserved.
pub fn sample_many(
    problem: &Problem,
    config: &SamplerConfig,
    k: u32,
    ctx: &mut StageContext,
) -> Result<Vec<Candidate>> {
    if k == 0 {
        return Err(Error::InvalidConfig("sample count k must be >= 1".into()));
    }
    let mut candidates = Vec::with_capacity(k as usize);
    for i in 0..k {
        let temperature = if i == 0 { 0.0 } else { VOTE_TEMPERATURE };
        let cfg = config.with_temperature(temperature);
        candidates.push(sample_indexed(problem, &cfg, ctx, i)?);
    }
    Ok(candidates)
}

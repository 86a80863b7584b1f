//! Conditional resampling: decide whether to revise a candidate and produce
//! the revision. A leading Yes/No token gates the revision; "Yes" keeps the
//! original candidate untouched.

use crate::context::StageContext;
use crate::error::{Error, Result};
use crate::model::{Candidate, ChainStep, Origin, Problem, ReasoningTrace, Stage};
use crate::prompts::{render_resample_prompt, ResampleEncoding};
use crate::sampling::{continue_chain, SamplerConfig, SamplerMethod};
use serde::{Deserialize, Serialize};

pub const DEFAULT_RESAMPLE_MAX_TOKENS: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMethod {
    /// One verdict call over the whole trace.
    SelfAskCot,
    /// One verdict call over the final chain step, in chain context.
    SelfAskSubq,
    /// Verdict calls per chain step; regenerate from the first rejected step.
    Stepwise,
    /// Verdict without facts, then a fact-augmented revision call on "No".
    FactsTwoPhase,
}

impl ResampleMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            ResampleMethod::SelfAskCot => "self_ask_cot",
            ResampleMethod::SelfAskSubq => "self_ask_subq",
            ResampleMethod::Stepwise => "stepwise",
            ResampleMethod::FactsTwoPhase => "facts",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplerConfig {
    pub method: ResampleMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    /// Sampling method whose trace kind the revision is interpreted as.
    /// Defaults to the method's own family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision_method: Option<SamplerMethod>,
    pub max_tokens: u32,
}

impl ResamplerConfig {
    pub fn new(method: ResampleMethod) -> ResamplerConfig {
        ResamplerConfig {
            method,
            shots: None,
            revision_method: None,
            max_tokens: DEFAULT_RESAMPLE_MAX_TOKENS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    Revise,
}

/// Outcome of one conditional-resampling pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleDecision {
    pub verdict: Verdict,
    /// Present iff `verdict` is `Revise`.
    pub revised: Option<Candidate>,
    /// Raw verdict response text.
    pub gate_text: String,
    /// Chain step that fired, for the stepwise method.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_index: Option<usize>,
    pub parse_failed: bool,
}

impl ResampleDecision {
    fn keep(gate_text: String, parse_failed: bool) -> ResampleDecision {
        ResampleDecision {
            verdict: Verdict::Keep,
            revised: None,
            gate_text,
            step_index: None,
            parse_failed,
        }
    }
}

/// Parsed verdict response.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVerdict {
    pub verdict: Verdict,
    /// Text following the last "Final Answer:" cue, when present.
    pub final_answer: Option<String>,
    pub parse_failed: bool,
}

/// Total parse of a verdict response: the leading token (after an optional
/// "Answer:" echo) decides; anything else keeps with `parse_failed` set.
pub fn parse_verdict(response: &str) -> ParsedVerdict {
    let mut text = response.trim_start();
    for cue in ["Answer:", "answer:", "Verdict:", "verdict:"] {
        if let Some(rest) = text.strip_prefix(cue) {
            text = rest.trim_start();
            break;
        }
    }
    let leading: String = text
        .chars()
        .take_while(|c| c.is_ascii_alphabetic())
        .collect();
    let (verdict, parse_failed) = match leading.to_ascii_lowercase().as_str() {
        "yes" => (Verdict::Keep, false),
        "no" => (Verdict::Revise, false),
        _ => (Verdict::Keep, true),
    };
    let final_answer = response
        .to_ascii_lowercase()
        .rfind("final answer:")
        .map(|idx| response[idx + "final answer:".len()..].trim().to_string());
    ParsedVerdict {
        verdict,
        final_answer,
        parse_failed,
    }
}

/// Revision text from a verdict response: the Final Answer when present,
/// otherwise the whole response.
fn revision_text(parsed: &ParsedVerdict, gate_text: &str) -> String {
    parsed
        .final_answer
        .clone()
        .unwrap_or_else(|| gate_text.trim().to_string())
}

fn default_revision_method(method: ResampleMethod) -> SamplerMethod {
    match method {
        ResampleMethod::SelfAskCot | ResampleMethod::FactsTwoPhase => SamplerMethod::Cot,
        ResampleMethod::SelfAskSubq | ResampleMethod::Stepwise => SamplerMethod::SubqQg,
    }
}

/// Wraps revision text in a trace of the revision method's kind. Chain-kind
/// revisions of a chain candidate replace its final step; otherwise the text
/// becomes a single-step chain answering the original question.
fn revision_trace(
    method: SamplerMethod,
    original: &ReasoningTrace,
    problem: &Problem,
    text: String,
) -> ReasoningTrace {
    match method {
        SamplerMethod::AnswerOnly => ReasoningTrace::answer_only(text),
        SamplerMethod::Cot => ReasoningTrace::cot(text),
        SamplerMethod::SubqQg | SamplerMethod::SubqOracle => match original.steps() {
            Some(steps) if !steps.is_empty() => {
                let mut steps = steps.to_vec();
                let last = steps.last_mut().expect("nonempty");
                last.answer = text;
                ReasoningTrace::chain(steps)
            }
            _ => ReasoningTrace::chain(vec![ChainStep::new(problem.question.clone(), text)]),
        },
    }
}

fn gate_call(
    template_method: &str,
    problem: &Problem,
    encoding: ResampleEncoding<'_>,
    facts: Option<&[String]>,
    config: &ResamplerConfig,
    ctx: &mut StageContext,
) -> Result<String> {
    let template = ctx
        .templates
        .get(&ctx.task, Stage::Resampling, template_method)?;
    let prompt = render_resample_prompt(template, problem, encoding, facts, config.shots)?;
    let stop = template.stop.clone();
    ctx.generate(
        Stage::Resampling,
        prompt,
        0.0,
        config.max_tokens,
        &stop,
        0,
    )
}

fn require_chain<'a>(candidate: &'a Candidate, method: ResampleMethod) -> Result<&'a [ChainStep]> {
    candidate
        .trace
        .steps()
        .filter(|s| !s.is_empty())
        .ok_or_else(|| {
            Error::InvalidConfig(format!(
                "{} resampling requires a subquestion-chain candidate",
                method.as_str()
            ))
        })
}

/// Decides whether to revise `candidate` and produces the revision.
///
/// Gate decoding is always greedy. On "Yes" the original candidate is
/// preserved byte-identically (the restated Final Answer is discarded); no
/// revision-generation calls occur.
pub fn conditional_resample(
    problem: &Problem,
    candidate: &Candidate,
    config: &ResamplerConfig,
    ctx: &mut StageContext,
) -> Result<ResampleDecision> {
    let revision_method = config
        .revision_method
        .unwrap_or_else(|| default_revision_method(config.method));
    match config.method {
        ResampleMethod::SelfAskCot => {
            let flat = candidate.trace.flat_text();
            let gate = gate_call(
                "self_ask_cot",
                problem,
                ResampleEncoding::WholeTrace { answer: &flat },
                None,
                config,
                ctx,
            )?;
            let parsed = parse_verdict(&gate);
            match parsed.verdict {
                Verdict::Keep => Ok(ResampleDecision::keep(gate, parsed.parse_failed)),
                Verdict::Revise => {
                    let text = revision_text(&parsed, &gate);
                    let trace = revision_trace(revision_method, &candidate.trace, problem, text);
                    let revised = Candidate::from_trace(trace, problem.answer_kind, Origin::Resampled);
                    Ok(ResampleDecision {
                        verdict: Verdict::Revise,
                        revised: Some(revised),
                        gate_text: gate,
                        step_index: None,
                        parse_failed: parsed.parse_failed,
                    })
                }
            }
        }
        ResampleMethod::SelfAskSubq => {
            let steps = require_chain(candidate, config.method)?;
            let (prefix, last) = steps.split_at(steps.len() - 1);
            let gate = gate_call(
                "self_ask_subq",
                problem,
                ResampleEncoding::ChainStep {
                    prefix,
                    question: &last[0].question,
                    answer: &last[0].answer,
                },
                None,
                config,
                ctx,
            )?;
            let parsed = parse_verdict(&gate);
            match parsed.verdict {
                Verdict::Keep => Ok(ResampleDecision::keep(gate, parsed.parse_failed)),
                Verdict::Revise => {
                    let text = revision_text(&parsed, &gate);
                    let trace = revision_trace(revision_method, &candidate.trace, problem, text);
                    let revised = Candidate::from_trace(trace, problem.answer_kind, Origin::Resampled);
                    Ok(ResampleDecision {
                        verdict: Verdict::Revise,
                        revised: Some(revised),
                        gate_text: gate,
                        step_index: None,
                        parse_failed: parsed.parse_failed,
                    })
                }
            }
        }
        ResampleMethod::Stepwise => stepwise_resample(problem, candidate, config, ctx),
        ResampleMethod::FactsTwoPhase => {
            let facts = problem.facts.as_deref().ok_or_else(|| {
                Error::InvalidConfig(format!("problem {} has no facts", problem.id))
            })?;
            let flat = candidate.trace.flat_text();
            // Gate phase never sees the facts.
            let gate = gate_call(
                "self_ask_cot",
                problem,
                ResampleEncoding::WholeTrace { answer: &flat },
                None,
                config,
                ctx,
            )?;
            let parsed = parse_verdict(&gate);
            match parsed.verdict {
                Verdict::Keep => Ok(ResampleDecision::keep(gate, parsed.parse_failed)),
                Verdict::Revise => {
                    let template = ctx.templates.get(&ctx.task, Stage::Resampling, "facts")?;
                    let prompt = render_resample_prompt(
                        template,
                        problem,
                        ResampleEncoding::QuestionOnly,
                        Some(facts),
                        config.shots,
                    )?;
                    let stop = template.stop.clone();
                    let revision = ctx.generate(
                        Stage::Resampling,
                        prompt,
                        0.0,
                        config.max_tokens,
                        &stop,
                        0,
                    )?;
                    let trace = revision_trace(
                        revision_method,
                        &candidate.trace,
                        problem,
                        revision.trim().to_string(),
                    );
                    let revised = Candidate::from_trace(trace, problem.answer_kind, Origin::Resampled);
                    Ok(ResampleDecision {
                        verdict: Verdict::Revise,
                        revised: Some(revised),
                        gate_text: gate,
                        step_index: None,
                        parse_failed: parsed.parse_failed,
                    })
                }
            }
        }
    }
}

/// Checks each chain step in order. The first "No" replaces that step with
/// the gate's revision and regenerates every later step through the sampling
/// module, conditioned on the preserved prefix.
fn stepwise_resample(
    problem: &Problem,
    candidate: &Candidate,
    config: &ResamplerConfig,
    ctx: &mut StageContext,
) -> Result<ResampleDecision> {
    let steps = require_chain(candidate, config.method)?;
    let mut any_parse_failed = false;
    let mut last_gate = String::new();
    for i in 0..steps.len() {
        let gate = gate_call(
            "self_ask_subq",
            problem,
            ResampleEncoding::ChainStep {
                prefix: &steps[..i],
                question: &steps[i].question,
                answer: &steps[i].answer,
            },
            None,
            config,
            ctx,
        )?;
        let parsed = parse_verdict(&gate);
        any_parse_failed |= parsed.parse_failed;
        if parsed.verdict == Verdict::Revise {
            let mut revised_steps: Vec<ChainStep> = steps[..i].to_vec();
            revised_steps.push(ChainStep {
                question: steps[i].question.clone(),
                answer: revision_text(&parsed, &gate),
                is_final: steps[i].is_final,
            });
            let remaining: Vec<ChainStep> = steps[i + 1..].to_vec();
            let sampler = SamplerConfig {
                method: SamplerMethod::SubqOracle,
                shots: None,
                temperature: 0.0,
                max_tokens: config.max_tokens,
                subanswer_max_tokens: crate::sampling::DEFAULT_SUBANSWER_MAX_TOKENS,
            };
            let full = continue_chain(
                problem,
                &remaining,
                revised_steps,
                &sampler,
                ctx,
                Stage::Resampling,
                0,
            )?;
            let revised = Candidate::from_trace(
                ReasoningTrace::chain(full),
                problem.answer_kind,
                Origin::Resampled,
            );
            return Ok(ResampleDecision {
                verdict: Verdict::Revise,
                revised: Some(revised),
                gate_text: gate,
                step_index: Some(i),
                parse_failed: any_parse_failed,
            });
        }
        last_gate = gate;
    }
    Ok(ResampleDecision::keep(last_gate, any_parse_failed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, MockScript};
    use crate::model::{Answer, AnswerKind};
    use crate::prompts::TemplateLibrary;
    use rust_decimal::Decimal;

    fn problem() -> Problem {
        Problem {
            id: "synthetic-0001".into(),
            question: "Liam has 4 marbles. He gets 3 more in the morning and 2 more in the evening. How many marbles does Liam have now?".into(),
            answer_kind: AnswerKind::Numeric,
            oracle_subquestions: None,
            facts: Some(vec![
                "Liam starts with 4 marbles.".into(),
                "Liam gets 5 marbles in total.".into(),
            ]),
            gold: Answer::numeric(Decimal::from(9)),
        }
    }

    fn cot_candidate(text: &str) -> Candidate {
        Candidate::from_trace(
            ReasoningTrace::cot(text),
            AnswerKind::Numeric,
            Origin::Sampled,
        )
    }

    fn chain_candidate(answers: &[&str]) -> Candidate {
        let steps = answers
            .iter()
            .enumerate()
            .map(|(i, a)| ChainStep::new(format!("Step question {i}?"), a.to_string()))
            .collect();
        Candidate::from_trace(
            ReasoningTrace::chain(steps),
            AnswerKind::Numeric,
            Origin::Sampled,
        )
    }

    #[test]
    fn verdict_parsing_matches_demo_formats() {
        let keep = parse_verdict("Yes, the reasoning is correct. Final Answer: fine. The answer is 8");
        assert_eq!(keep.verdict, Verdict::Keep);
        assert!(!keep.parse_failed);

        let revise = parse_verdict(
            "No, the reasoning is incorrect. Final Answer: Natalia sold 48/2=24 clips. The answer is 72",
        );
        assert_eq!(revise.verdict, Verdict::Revise);
        assert_eq!(
            revise.final_answer.as_deref(),
            Some("Natalia sold 48/2=24 clips. The answer is 72")
        );

        let empty = parse_verdict("");
        assert_eq!(empty.verdict, Verdict::Keep);
        assert!(empty.parse_failed);

        let echoed = parse_verdict("Answer: No, wrong. Final Answer: The answer is 3");
        assert_eq!(echoed.verdict, Verdict::Revise);
    }

    #[test]
    fn keep_preserves_candidate_byte_identically() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(MockScript::new().on(
            ["`Yes' or `No'"],
            "Yes, the reasoning is correct. Final Answer: something restated. The answer is 999",
        ));
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let candidate = cot_candidate("Original reasoning. The answer is 9");
        let before = serde_json::to_string(&candidate).unwrap();
        let decision = conditional_resample(
            &problem(),
            &candidate,
            &ResamplerConfig::new(ResampleMethod::SelfAskCot),
            &mut ctx,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Keep);
        assert!(decision.revised.is_none());
        assert_eq!(serde_json::to_string(&candidate).unwrap(), before);
        assert_eq!(ctx.calls, 1);
    }

    #[test]
    fn revise_takes_the_final_answer_text() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(MockScript::new().on(
            ["`Yes' or `No'"],
            "No, the reasoning is incorrect. Final Answer: Liam has 4 + 5 = 9 marbles. The answer is 9",
        ));
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let decision = conditional_resample(
            &problem(),
            &cot_candidate("Wrong. The answer is 7"),
            &ResamplerConfig::new(ResampleMethod::SelfAskCot),
            &mut ctx,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Revise);
        let revised = decision.revised.unwrap();
        assert_eq!(revised.origin, Origin::Resampled);
        assert_eq!(revised.answer, Answer::numeric(Decimal::from(9)));
        assert_eq!(ctx.calls, 1);
    }

    #[test]
    fn stepwise_preserves_prefix_and_regenerates_suffix() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(
            MockScript::new()
                .on(
                    ["Question: Step question 0?", "`Yes' or `No'"],
                    "Yes, the reasoning is correct. Final Answer: The answer is 5",
                )
                .on(
                    ["Question: Step question 1?", "`Yes' or `No'"],
                    "No, the reasoning is incorrect. Final Answer: corrected step two. The answer is 6",
                )
                .on(
                    ["Q: Step question 2?"],
                    "regenerated step three. The answer is 9",
                ),
        );
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let candidate = chain_candidate(&["first. The answer is 5", "bad. The answer is 4", "old. The answer is 7"]);
        let decision = conditional_resample(
            &problem(),
            &candidate,
            &ResamplerConfig::new(ResampleMethod::Stepwise),
            &mut ctx,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Revise);
        assert_eq!(decision.step_index, Some(1));
        let revised = decision.revised.unwrap();
        let steps = revised.trace.steps().unwrap();
        assert_eq!(steps[0].answer, "first. The answer is 5");
        assert_eq!(steps[1].answer, "corrected step two. The answer is 6");
        assert_eq!(steps[2].answer, "regenerated step three. The answer is 9");
        assert_eq!(revised.answer, Answer::numeric(Decimal::from(9)));
        // 2 gate calls + 1 regeneration call
        assert_eq!(ctx.calls, 3);
    }

    #[test]
    fn stepwise_all_yes_keeps() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(MockScript::new().on(
            ["Decide `Yes' or `No'"],
            "Yes, the reasoning is correct. Final Answer: The answer is 1",
        ));
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let candidate = chain_candidate(&["a. The answer is 1", "b. The answer is 2"]);
        let decision = conditional_resample(
            &problem(),
            &candidate,
            &ResamplerConfig::new(ResampleMethod::Stepwise),
            &mut ctx,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Keep);
        assert_eq!(ctx.calls, 2);
    }

    #[test]
    fn stepwise_on_flat_candidate_is_a_config_error() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(MockScript::new().with_default("Yes"));
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let err = conditional_resample(
            &problem(),
            &cot_candidate("text. The answer is 1"),
            &ResamplerConfig::new(ResampleMethod::Stepwise),
            &mut ctx,
        );
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn facts_two_phase_keeps_facts_out_of_the_gate() {
        let templates = TemplateLibrary::builtin();
        let seen = std::sync::Arc::new(std::sync::Mutex::new(Vec::<String>::new()));
        let seen_gate = seen.clone();
        let seen_rev = seen.clone();
        let gateway = Gateway::mock(
            MockScript::new()
                .on_fn(["`Yes' or `No'"], move |req| {
                    seen_gate.lock().unwrap().push(req.prompt.clone());
                    "No, the reasoning is incorrect. Final Answer: The answer is 0".to_string()
                })
                .on_fn(["Facts:"], move |req| {
                    seen_rev.lock().unwrap().push(req.prompt.clone());
                    "Liam has 9 marbles. The answer is 9".to_string()
                }),
        );
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let decision = conditional_resample(
            &problem(),
            &cot_candidate("wrong. The answer is 7"),
            &ResamplerConfig::new(ResampleMethod::FactsTwoPhase),
            &mut ctx,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Revise);
        assert_eq!(
            decision.revised.unwrap().answer,
            Answer::numeric(Decimal::from(9))
        );
        let prompts = seen.lock().unwrap();
        assert_eq!(prompts.len(), 2);
        assert!(!prompts[0].contains("Liam starts with 4 marbles."));
        assert!(prompts[1].contains("Facts: Liam starts with 4 marbles. Liam gets 5 marbles in total."));
        assert_eq!(ctx.calls, 2);
    }

    #[test]
    fn facts_without_problem_facts_is_a_config_error() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(MockScript::new().with_default("Yes"));
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let mut p = problem();
        p.facts = None;
        let err = conditional_resample(
            &p,
            &cot_candidate("x. The answer is 1"),
            &ResamplerConfig::new(ResampleMethod::FactsTwoPhase),
            &mut ctx,
        );
        assert!(matches!(err, Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn gate_parse_failure_defaults_to_keep() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(MockScript::new().on(["`Yes' or `No'"], "???"));
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let decision = conditional_resample(
            &problem(),
            &cot_candidate("x. The answer is 1"),
            &ResamplerConfig::new(ResampleMethod::SelfAskCot),
            &mut ctx,
        )
        .unwrap();
        assert_eq!(decision.verdict, Verdict::Keep);
        assert!(decision.parse_failed);
    }

    #[test]
    fn heterogeneous_revision_takes_the_revision_methods_kind() {
        let templates = TemplateLibrary::builtin();
        let gateway = Gateway::mock(MockScript::new().on(
            ["`Yes' or `No'"],
            "No, the reasoning is incorrect. Final Answer: step text. The answer is 9",
        ));
        let mut ctx = StageContext::new(&gateway, &templates, "m", "synthetic");
        let mut config = ResamplerConfig::new(ResampleMethod::SelfAskCot);
        config.revision_method = Some(SamplerMethod::SubqQg);
        let decision = conditional_resample(
            &problem(),
            &cot_candidate("wrong. The answer is 7"),
            &config,
            &mut ctx,
        )
        .unwrap();
        let revised = decision.revised.unwrap();
        let steps = revised.trace.steps().unwrap();
        assert_eq!(steps.len(), 1);
        assert_eq!(steps[0].question, problem().question);
    }
}

//! Few-shot prompt templates: instruction + demonstrations + encoded test
//! input + cue. Templates live in external TOML files keyed by
//! (task, stage, method); rendering is a pure function of its inputs.

mod builtin;

use crate::error::{Error, Result};
use crate::model::{ChainStep, Problem, Stage};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

/// One worked example inside a prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub input: String,
    pub result: String,
    /// True for demonstrations written for this library rather than taken
    /// from a published transcript.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub authored: bool,
}

/// Template identity: (task, stage, method).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TemplateId {
    pub task: String,
    pub stage: Stage,
    pub method: String,
}

impl std::fmt::Display for TemplateId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.task, self.stage, self.method)
    }
}

/// A loaded prompt template.
///
/// `input_format` encodes the test input with `{question}`, `{answer}`,
/// `{facts}`, `{choices}`, `{prefix}`, `{subquestion}`, `{subanswer}`
/// placeholders as appropriate for the stage. Chain prompts additionally use
/// `final_input_format`/`final_cue` for the closing step that restates the
/// original question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub task: String,
    pub stage: Stage,
    pub method: String,
    #[serde(default)]
    pub instruction: String,
    pub input_format: String,
    pub cue: String,
    /// Separator between the cue and a demonstration result (default one space).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_sep: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_input_format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_cue: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stop: Vec<String>,
    pub demonstrations: Vec<Demonstration>,
}

impl PromptTemplate {
    pub fn id(&self) -> TemplateId {
        TemplateId {
            task: self.task.clone(),
            stage: self.stage,
            method: self.method.clone(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<PromptTemplate> {
        let template: PromptTemplate =
            toml::from_str(text).map_err(|e| Error::Template(e.to_string()))?;
        template.validate()?;
        Ok(template)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Template(e.to_string()))
    }

    fn validate(&self) -> Result<()> {
        if self.demonstrations.is_empty() {
            return Err(Error::Template(format!(
                "template {} has no demonstrations",
                self.id()
            )));
        }
        for (i, demo) in self.demonstrations.iter().enumerate() {
            if demo.input.is_empty() || demo.result.is_empty() {
                return Err(Error::Template(format!(
                    "template {} demonstration {} is empty",
                    self.id(),
                    i
                )));
            }
        }
        if self.cue.is_empty() {
            return Err(Error::Template(format!("template {} has no cue", self.id())));
        }
        Ok(())
    }

    /// Number of demonstrations rendered when the caller does not override it.
    pub fn default_shots(&self) -> usize {
        self.demonstrations.len()
    }

    fn resolve_shots(&self, shots: Option<usize>) -> Result<usize> {
        let shots = shots.unwrap_or_else(|| self.default_shots());
        if shots == 0 || shots > self.demonstrations.len() {
            return Err(Error::Template(format!(
                "template {} has {} demonstrations, cannot render {} shots",
                self.id(),
                self.demonstrations.len(),
                shots
            )));
        }
        Ok(shots)
    }

    /// Core layout: instruction, demonstrations in order, encoded test input,
    /// then the cue.
    fn render_with_cue(&self, shots: Option<usize>, test_input: &str, cue: &str) -> Result<String> {
        let shots = self.resolve_shots(shots)?;
        let sep = self.result_sep.as_deref().unwrap_or(" ");
        let mut out = String::new();
        if !self.instruction.is_empty() {
            out.push_str(&self.instruction);
            out.push_str("\n\n");
        }
        for demo in &self.demonstrations[..shots] {
            out.push_str(&demo.input);
            out.push('\n');
            out.push_str(&self.cue);
            out.push_str(sep);
            out.push_str(&demo.result);
            out.push_str("\n\n");
        }
        out.push_str(test_input);
        out.push('\n');
        out.push_str(cue);
        Ok(out)
    }

    fn render(&self, shots: Option<usize>, test_input: &str) -> Result<String> {
        self.render_with_cue(shots, test_input, &self.cue)
    }
}

/// Replaces `{name}` placeholders in one pass; unknown placeholders and any
/// braces inside substituted values are left untouched.
fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        match rest[start..].find('}') {
            Some(end_rel) => {
                let name = &rest[start + 1..start + end_rel];
                if let Some((_, value)) = vars.iter().find(|(k, _)| *k == name) {
                    out.push_str(&rest[..start]);
                    out.push_str(value);
                    rest = &rest[start + end_rel + 1..];
                } else {
                    out.push_str(&rest[..=start]);
                    rest = &rest[start + 1..];
                }
            }
            None => break,
        }
    }
    out.push_str(rest);
    out
}

/// Chain position being rendered: all answered steps plus the current
/// question (or the closing restatement of the original question).
#[derive(Debug, Clone, Copy)]
pub struct ChainPosition<'a> {
    pub answered: &'a [ChainStep],
    pub current_question: &'a str,
    pub is_final: bool,
}

/// Candidate encoding for resample prompts.
#[derive(Debug, Clone, Copy)]
pub enum ResampleEncoding<'a> {
    /// The whole trace quoted as one answer.
    WholeTrace { answer: &'a str },
    /// One chain step in context: answered prefix, then the step under check.
    ChainStep {
        prefix: &'a [ChainStep],
        question: &'a str,
        answer: &'a str,
    },
    /// Question only (fact-augmented revision prompts).
    QuestionOnly,
}

/// Renders a sampling prompt; `position` drives subquestion-chain encoding.
pub fn render_sampling_prompt(
    template: &PromptTemplate,
    problem: &Problem,
    position: Option<ChainPosition<'_>>,
    shots: Option<usize>,
) -> Result<String> {
    if problem.question.trim().is_empty() {
        return Err(Error::Template("cannot render an empty question".into()));
    }
    match position {
        None => {
            let test_input = fill(&template.input_format, &[("question", &problem.question)]);
            template.render(shots, &test_input)
        }
        Some(pos) => {
            let mut test_input = fill(&template.input_format, &[("question", &problem.question)]);
            for step in pos.answered {
                test_input.push_str("\nQ: ");
                test_input.push_str(&step.question);
                test_input.push_str("\nA: ");
                test_input.push_str(&step.answer);
            }
            if pos.is_final {
                let final_format = template.final_input_format.as_deref().ok_or_else(|| {
                    Error::Template(format!(
                        "template {} has no final_input_format",
                        template.id()
                    ))
                })?;
                let final_cue = template.final_cue.as_deref().ok_or_else(|| {
                    Error::Template(format!("template {} has no final_cue", template.id()))
                })?;
                test_input.push('\n');
                test_input.push_str(&fill(final_format, &[("question", pos.current_question)]));
                template.render_with_cue(shots, &test_input, final_cue)
            } else {
                test_input.push_str("\nQ: ");
                test_input.push_str(pos.current_question);
                template.render(shots, &test_input)
            }
        }
    }
}

/// Renders a resample (verdict or revision) prompt.
pub fn render_resample_prompt(
    template: &PromptTemplate,
    problem: &Problem,
    encoding: ResampleEncoding<'_>,
    facts: Option<&[String]>,
    shots: Option<usize>,
) -> Result<String> {
    let wants_facts = template.input_format.contains("{facts}");
    if wants_facts && facts.is_none() {
        return Err(Error::Template(format!(
            "template {} requires facts but none were provided",
            template.id()
        )));
    }
    if !wants_facts && facts.is_some() {
        return Err(Error::Template(format!(
            "template {} takes no facts but facts were provided",
            template.id()
        )));
    }
    let facts_text = facts.map(|f| f.join(" ")).unwrap_or_default();
    let test_input = match encoding {
        ResampleEncoding::WholeTrace { answer } => fill(
            &template.input_format,
            &[
                ("question", &problem.question),
                ("answer", answer),
                ("facts", &facts_text),
            ],
        ),
        ResampleEncoding::QuestionOnly => fill(
            &template.input_format,
            &[("question", &problem.question), ("facts", &facts_text)],
        ),
        ResampleEncoding::ChainStep {
            prefix,
            question,
            answer,
        } => {
            let mut prefix_text = String::new();
            for step in prefix {
                prefix_text.push_str(&step.question);
                prefix_text.push(' ');
                prefix_text.push_str(&step.answer);
                prefix_text.push('\n');
            }
            fill(
                &template.input_format,
                &[
                    ("question", &problem.question),
                    ("prefix", &prefix_text),
                    ("subquestion", question),
                    ("subanswer", answer),
                    ("facts", &facts_text),
                ],
            )
        }
    };
    template.render(shots, &test_input)
}

/// Renders an n-way selection prompt; choices are labeled (A), (B), … in the
/// given order.
pub fn render_selection_prompt(
    template: &PromptTemplate,
    problem: &Problem,
    choices: &[String],
    shots: Option<usize>,
) -> Result<String> {
    if choices.len() < 2 {
        return Err(Error::InvalidConfig(
            "selection requires at least 2 choices".into(),
        ));
    }
    if choices.len() > 26 {
        return Err(Error::InvalidConfig(
            "selection supports at most 26 choices".into(),
        ));
    }
    let mut block = String::new();
    for (i, choice) in choices.iter().enumerate() {
        if i > 0 {
            block.push('\n');
        }
        block.push('(');
        block.push((b'A' + i as u8) as char);
        block.push_str(") ");
        block.push_str(choice);
    }
    let test_input = fill(
        &template.input_format,
        &[("question", &problem.question), ("choices", &block)],
    );
    template.render(shots, &test_input)
}

/// Renders the subquestion-generation prompt.
pub fn render_question_gen_prompt(
    template: &PromptTemplate,
    problem: &Problem,
    shots: Option<usize>,
) -> Result<String> {
    if problem.question.trim().is_empty() {
        return Err(Error::Template("cannot render an empty question".into()));
    }
    let test_input = fill(&template.input_format, &[("question", &problem.question)]);
    template.render(shots, &test_input)
}

/// All loaded templates, keyed by (task, stage, method).
pub struct TemplateLibrary {
    templates: HashMap<TemplateId, PromptTemplate>,
}

impl TemplateLibrary {
    pub fn empty() -> TemplateLibrary {
        TemplateLibrary {
            templates: HashMap::new(),
        }
    }

    /// The templates shipped with this crate.
    pub fn builtin() -> TemplateLibrary {
        let mut lib = TemplateLibrary::empty();
        for source in builtin::BUILTIN_TEMPLATES {
            let template = PromptTemplate::from_toml_str(source)
                .unwrap_or_else(|e| panic!("builtin template failed to parse: {e}"));
            lib.insert(template);
        }
        lib
    }

    /// Loads every `*.toml` under `dir` (one template per file), recursively.
    pub fn load_dir(dir: &Path) -> Result<TemplateLibrary> {
        let mut lib = TemplateLibrary::empty();
        lib.load_dir_into(dir)?;
        Ok(lib)
    }

    fn load_dir_into(&mut self, dir: &Path) -> Result<()> {
        let mut paths: Vec<_> = std::fs::read_dir(dir)?
            .collect::<std::io::Result<Vec<_>>>()?
            .into_iter()
            .map(|e| e.path())
            .collect();
        paths.sort();
        for path in paths {
            if path.is_dir() {
                self.load_dir_into(&path)?;
            } else if path.extension().is_some_and(|e| e == "toml") {
                let text = std::fs::read_to_string(&path)?;
                let template = PromptTemplate::from_toml_str(&text).map_err(|e| {
                    Error::Template(format!("{}: {e}", path.display()))
                })?;
                self.insert(template);
            }
        }
        Ok(())
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id(), template);
    }

    pub fn get(&self, task: &str, stage: Stage, method: &str) -> Result<&PromptTemplate> {
        self.templates
            .get(&TemplateId {
                task: task.to_string(),
                stage,
                method: method.to_string(),
            })
            .ok_or_else(|| Error::TemplateNotFound {
                task: task.to_string(),
                stage: stage.to_string(),
                method: method.to_string(),
            })
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PromptTemplate> {
        self.templates.values()
    }
}

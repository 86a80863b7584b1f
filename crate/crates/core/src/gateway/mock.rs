//! Scripted backend for tests and offline runs: ordered substring rules map
//! prompts to canned (or computed) responses.

use super::GenerationRequest;
use crate::error::{Error, Result};
use serde::Deserialize;
use std::path::Path;
use std::sync::Arc;

type ResponderFn = Arc<dyn Fn(&GenerationRequest) -> String + Send + Sync>;

enum Responder {
    Text(String),
    Func(ResponderFn),
}

struct MockRule {
    contains: Vec<String>,
    responder: Responder,
}

/// Ordered prompt-matching rules; the first rule whose substrings all appear
/// in the prompt wins.
#[derive(Default)]
pub struct MockScript {
    rules: Vec<MockRule>,
    fallback: Option<String>,
}

impl MockScript {
    pub fn new() -> MockScript {
        MockScript::default()
    }

    /// Responds with fixed text when every `contains` substring matches.
    pub fn on<I, S>(mut self, contains: I, text: impl Into<String>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.rules.push(MockRule {
            contains: contains.into_iter().map(Into::into).collect(),
            responder: Responder::Text(text.into()),
        });
        self
    }

    /// Responds with a computed string when every `contains` substring matches.
    pub fn on_fn<I, S, F>(mut self, contains: I, f: F) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
        F: Fn(&GenerationRequest) -> String + Send + Sync + 'static,
    {
        self.rules.push(MockRule {
            contains: contains.into_iter().map(Into::into).collect(),
            responder: Responder::Func(Arc::new(f)),
        });
        self
    }

    /// Response used when no rule matches.
    pub fn with_default(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub(crate) fn respond(&self, request: &GenerationRequest) -> Result<String> {
        for rule in &self.rules {
            if rule.contains.iter().all(|s| request.prompt.contains(s)) {
                return Ok(match &rule.responder {
                    Responder::Text(t) => t.clone(),
                    Responder::Func(f) => f(request),
                });
            }
        }
        if let Some(fallback) = &self.fallback {
            return Ok(fallback.clone());
        }
        Err(Error::MockMiss {
            stage: request.stage.to_string(),
            prompt_head: request.prompt.chars().take(80).collect(),
        })
    }

    /// Loads a script of fixed-text rules from a TOML file.
    pub fn from_file(path: &Path) -> Result<MockScript> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Dataset {
            path: path.display().to_string(),
            message: e,
        })
    }

    pub fn from_toml_str(text: &str) -> std::result::Result<MockScript, String> {
        #[derive(Deserialize)]
        struct FileRule {
            contains: Vec<String>,
            respond: String,
        }
        #[derive(Deserialize)]
        struct FileScript {
            #[serde(default)]
            rules: Vec<FileRule>,
            #[serde(default)]
            default: Option<String>,
        }
        let parsed: FileScript = toml::from_str(text).map_err(|e| e.to_string())?;
        let mut script = MockScript::new();
        for rule in parsed.rules {
            script = script.on(rule.contains, rule.respond);
        }
        if let Some(default) = parsed.default {
            script = script.with_default(default);
        }
        Ok(script)
    }
}

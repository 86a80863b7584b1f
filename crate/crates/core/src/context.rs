//! Per-episode call context: bundles the gateway, templates, and model id,
//! and accumulates usage for the episode's ledger.

use crate::error::Result;
use crate::gateway::{Gateway, GenerationRequest};
use crate::model::{Stage, TokenUsage};
use crate::prompts::TemplateLibrary;

pub struct StageContext<'a> {
    pub gateway: &'a Gateway,
    pub templates: &'a TemplateLibrary,
    pub model_id: String,
    /// Task name used for template lookup (e.g. "gsm8k").
    pub task: String,
    pub usage: Vec<TokenUsage>,
    pub calls: u64,
}

impl<'a> StageContext<'a> {
    pub fn new(
        gateway: &'a Gateway,
        templates: &'a TemplateLibrary,
        model_id: impl Into<String>,
        task: impl Into<String>,
    ) -> StageContext<'a> {
        StageContext {
            gateway,
            templates,
            model_id: model_id.into(),
            task: task.into(),
            usage: Vec::new(),
            calls: 0,
        }
    }

    /// Issues one generation call; usage lands in this episode's ledger.
    pub fn generate(
        &mut self,
        stage: Stage,
        prompt: String,
        temperature: f64,
        max_tokens: u32,
        stop_sequences: &[String],
        sample_index: u32,
    ) -> Result<String> {
        let request = GenerationRequest {
            model_id: self.model_id.clone(),
            prompt,
            temperature,
            max_tokens,
            stop_sequences: stop_sequences.to_vec(),
            stage,
            sample_index,
        };
        let response = self.gateway.generate(&request)?;
        self.usage.push(response.usage.clone());
        self.calls += 1;
        Ok(response.text)
    }
}

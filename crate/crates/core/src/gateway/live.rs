//! Live chat-completions client: one HTTP call per generation, bounded
//! retries with exponential backoff, and a cap on concurrent calls.

use super::{GenerationRequest, GenerationResponse};
use crate::error::{Error, Result};
use crate::model::TokenUsage;
use serde::Deserialize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

pub const DEFAULT_BASE_URL: &str = "https://api.openai.com/v1";

/// Connection settings for the live backend.
#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub base_url: String,
    pub api_key: String,
    /// Optional system instruction prepended to every call.
    pub system: Option<String>,
    /// Maximum concurrent in-flight calls.
    pub max_inflight: usize,
    pub max_attempts: u32,
    pub backoff_base: Duration,
    pub backoff_growth: u32,
    pub request_timeout: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            base_url: DEFAULT_BASE_URL.to_string(),
            api_key: String::new(),
            system: None,
            max_inflight: 4,
            max_attempts: 3,
            backoff_base: Duration::from_secs(1),
            backoff_growth: 4,
            request_timeout: Duration::from_secs(120),
        }
    }
}

impl LiveConfig {
    /// Reads the API key from `OPENAI_API_KEY` (fallback `LLM_API_KEY`) and an
    /// optional base URL from `OPENAI_BASE_URL`.
    pub fn from_env() -> Result<LiveConfig> {
        let api_key = std::env::var("OPENAI_API_KEY")
            .or_else(|_| std::env::var("LLM_API_KEY"))
            .map_err(|_| {
                Error::InvalidConfig(
                    "live backend requires OPENAI_API_KEY (or LLM_API_KEY)".into(),
                )
            })?;
        let mut config = LiveConfig {
            api_key,
            ..LiveConfig::default()
        };
        if let Ok(url) = std::env::var("OPENAI_BASE_URL") {
            config.base_url = url.trim_end_matches('/').to_string();
        }
        Ok(config)
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits.max(1)),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut permits = self.permits.lock().expect("semaphore lock");
        while *permits == 0 {
            permits = self.available.wait(permits).expect("semaphore wait");
        }
        *permits -= 1;
    }

    fn release(&self) {
        *self.permits.lock().expect("semaphore lock") += 1;
        self.available.notify_one();
    }
}

pub struct LiveClient {
    config: LiveConfig,
    agent: ureq::Agent,
    inflight: Semaphore,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize, Default)]
struct ChatUsage {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

#[derive(Deserialize)]
struct ChatCompletion {
    choices: Vec<ChatChoice>,
    #[serde(default)]
    usage: Option<ChatUsage>,
}

impl LiveClient {
    pub fn new(config: LiveConfig) -> LiveClient {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(config.request_timeout))
            .build()
            .into();
        let inflight = Semaphore::new(config.max_inflight);
        LiveClient {
            config,
            agent,
            inflight,
        }
    }

    pub fn call(
        &self,
        request: &GenerationRequest,
        transport: &AtomicU64,
    ) -> Result<GenerationResponse> {
        self.inflight.acquire();
        let result = self.call_with_retries(request, transport);
        self.inflight.release();
        result
    }

    fn call_with_retries(
        &self,
        request: &GenerationRequest,
        transport: &AtomicU64,
    ) -> Result<GenerationResponse> {
        let mut last_message = String::new();
        let mut backoff = self.config.backoff_base;
        for attempt in 1..=self.config.max_attempts {
            if attempt > 1 {
                std::thread::sleep(backoff);
                backoff *= self.config.backoff_growth;
            }
            transport.fetch_add(1, Ordering::Relaxed);
            match self.attempt(request) {
                Ok(response) => return Ok(response),
                Err(Retry::Fatal(err)) => return Err(err),
                Err(Retry::Transient { message, retry_after }) => {
                    if let Some(wait) = retry_after {
                        backoff = backoff.max(wait.min(Duration::from_secs(60)));
                    }
                    last_message = message;
                }
            }
        }
        Err(Error::Transport {
            attempts: self.config.max_attempts,
            message: last_message,
        })
    }

    fn attempt(&self, request: &GenerationRequest) -> std::result::Result<GenerationResponse, Retry> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let mut messages = Vec::new();
        if let Some(system) = &self.config.system {
            messages.push(serde_json::json!({"role": "system", "content": system}));
        }
        messages.push(serde_json::json!({"role": "user", "content": request.prompt}));
        let mut body = serde_json::json!({
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        if !request.stop_sequences.is_empty() {
            body["stop"] = serde_json::json!(request.stop_sequences);
        }

        let sent = self
            .agent
            .post(&url)
            .header("Authorization", &format!("Bearer {}", self.config.api_key))
            .send_json(&body);
        let mut response = match sent {
            Ok(r) => r,
            Err(e) => {
                return Err(Retry::Transient {
                    message: e.to_string(),
                    retry_after: None,
                })
            }
        };

        let status = response.status().as_u16();
        if status == 429 || status >= 500 {
            let retry_after = response
                .headers()
                .get("retry-after")
                .and_then(|v| v.to_str().ok())
                .and_then(|v| v.trim().parse::<u64>().ok())
                .map(Duration::from_secs);
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Retry::Transient {
                message: format!("status {status}: {text}"),
                retry_after,
            });
        }
        if status >= 400 {
            let text = response.body_mut().read_to_string().unwrap_or_default();
            return Err(Retry::Fatal(Error::Api {
                status,
                message: text,
            }));
        }

        let parsed: ChatCompletion = response.body_mut().read_json().map_err(|e| {
            Retry::Transient {
                message: format!("malformed completion body: {e}"),
                retry_after: None,
            }
        })?;
        let choice = parsed.choices.into_iter().next().ok_or_else(|| {
            Retry::Fatal(Error::Api {
                status,
                message: "completion had no choices".into(),
            })
        })?;
        let usage = parsed.usage.unwrap_or_default();
        Ok(GenerationResponse {
            text: choice.message.content,
            usage: TokenUsage::new(usage.prompt_tokens, usage.completion_tokens, request.stage),
        })
    }
}

enum Retry {
    Transient {
        message: String,
        retry_after: Option<Duration>,
    },
    Fatal(Error),
}

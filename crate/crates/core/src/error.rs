//! Crate-wide error type.

/// Errors surfaced by pipelines, the gateway, templates, and loaders.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("template not found: {task}/{stage}/{method}")]
    TemplateNotFound {
        task: String,
        stage: String,
        method: String,
    },

    #[error("template error: {0}")]
    Template(String),

    #[error("replay miss: no cassette entry for key {key}")]
    ReplayMiss { key: String },

    #[error("mock script has no response for {stage} prompt starting {prompt_head:?}")]
    MockMiss { stage: String, prompt_head: String },

    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("api error (status {status}): {message}")]
    Api { status: u16, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dataset error in {path}: {message}")]
    Dataset { path: String, message: String },

    #[error("no subquestions parsed from question generation output")]
    EmptySubquestions,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

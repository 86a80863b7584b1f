//! Single entry point for all generation calls: live API, record, replay,
//! and scripted mock backends, with token accounting.

mod cassette;
mod live;
mod mock;

pub use cassette::{load_cassette, CassetteEntry, CassetteResponse};
pub use live::LiveConfig;
pub use mock::MockScript;

use crate::error::{Error, Result};
use crate::model::{Stage, TokenUsage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

fn is_zero(v: &u32) -> bool {
    *v == 0
}

/// One generation request. `sample_index` salts the cache key so repeated
/// same-temperature samples stay distinct under record/replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub sample_index: u32,
}

/// A completion plus its token accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationResponse {
    pub text: String,
    pub usage: TokenUsage,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Content hash of the canonicalized request. Stable across processes and
/// platforms, and independent of serialization field order.
pub fn cache_key(request: &GenerationRequest) -> String {
    let mut hasher = Sha256::new();
    hasher.update(request.model_id.as_bytes());
    hasher.update([0x1f]);
    hasher.update(request.prompt.as_bytes());
    hasher.update([0x1f]);
    hasher.update(format!("{}", request.temperature).as_bytes());
    hasher.update([0x1f]);
    hasher.update(request.max_tokens.to_le_bytes());
    hasher.update([0x1f]);
    for stop in &request.stop_sequences {
        hasher.update(stop.as_bytes());
        hasher.update([0x1e]);
    }
    hasher.update([0x1f]);
    hasher.update(request.sample_index.to_le_bytes());
    hex(&hasher.finalize())
}

enum Inner {
    Live(live::LiveClient),
    Record {
        inner: Box<Inner>,
        store: Mutex<cassette::RecordStore>,
    },
    Replay {
        entries: HashMap<String, GenerationResponse>,
    },
    Mock(MockScript),
}

/// Thread-safe gateway for all stochastic calls.
pub struct Gateway {
    inner: Inner,
    ledger: Mutex<Vec<TokenUsage>>,
    transport_calls: AtomicU64,
}

impl Gateway {
    /// Live API calls only.
    pub fn live(config: LiveConfig) -> Gateway {
        Gateway::new(Inner::Live(live::LiveClient::new(config)))
    }

    /// Live calls recorded to (and resumed from) a cassette file.
    pub fn record_live(path: &Path, config: LiveConfig) -> Result<Gateway> {
        let store = cassette::RecordStore::open(path)?;
        Ok(Gateway::new(Inner::Record {
            inner: Box::new(Inner::Live(live::LiveClient::new(config))),
            store: Mutex::new(store),
        }))
    }

    /// Mock responses recorded to a cassette file; used to build replayable
    /// fixtures without touching the network.
    pub fn record_mock(path: &Path, script: MockScript) -> Result<Gateway> {
        let store = cassette::RecordStore::open(path)?;
        Ok(Gateway::new(Inner::Record {
            inner: Box::new(Inner::Mock(script)),
            store: Mutex::new(store),
        }))
    }

    /// Pure replay from a cassette. Never touches the network.
    pub fn replay(path: &Path) -> Result<Gateway> {
        let entries = cassette::load_responses(path)?;
        Ok(Gateway::new(Inner::Replay { entries }))
    }

    /// Scripted responses only.
    pub fn mock(script: MockScript) -> Gateway {
        Gateway::new(Inner::Mock(script))
    }

    fn new(inner: Inner) -> Gateway {
        Gateway {
            inner,
            ledger: Mutex::new(Vec::new()),
            transport_calls: AtomicU64::new(0),
        }
    }

    /// Issues one generation call and records its usage in the run ledger.
    pub fn generate(&self, request: &GenerationRequest) -> Result<GenerationResponse> {
        let mut response = Self::dispatch(&self.inner, request, &self.transport_calls)?;
        response.usage.stage = request.stage;
        self.ledger
            .lock()
            .expect("ledger lock")
            .push(response.usage.clone());
        Ok(response)
    }

    fn dispatch(
        inner: &Inner,
        request: &GenerationRequest,
        transport: &AtomicU64,
    ) -> Result<GenerationResponse> {
        match inner {
            Inner::Live(client) => client.call(request, transport),
            Inner::Record { inner, store } => {
                let key = cache_key(request);
                if let Some(hit) = store.lock().expect("record store lock").lookup(&key) {
                    return Ok(hit);
                }
                let response = Self::dispatch(inner, request, transport)?;
                store
                    .lock()
                    .expect("record store lock")
                    .append(&key, request, &response)?;
                Ok(response)
            }
            Inner::Replay { entries } => {
                let key = cache_key(request);
                entries
                    .get(&key)
                    .cloned()
                    .ok_or(Error::ReplayMiss { key })
            }
            Inner::Mock(script) => {
                let text = script.respond(request)?;
                let usage = TokenUsage::new(
                    request.prompt.split_whitespace().count() as u64,
                    text.split_whitespace().count() as u64,
                    request.stage,
                );
                Ok(GenerationResponse { text, usage })
            }
        }
    }

    /// Snapshot of every recorded usage entry, in call order.
    pub fn ledger(&self) -> Vec<TokenUsage> {
        self.ledger.lock().expect("ledger lock").clone()
    }

    /// Number of network operations performed so far (zero under replay/mock).
    pub fn transport_calls(&self) -> u64 {
        self.transport_calls.load(Ordering::Relaxed)
    }
}

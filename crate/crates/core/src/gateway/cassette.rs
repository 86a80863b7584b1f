//! Cassette files: JSON Lines of recorded request/response pairs enabling
//! network-free, bit-exact replay.

use super::{cache_key, GenerationRequest, GenerationResponse};
use crate::error::{Error, Result};
use crate::model::TokenUsage;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

/// Response payload as stored on disk; the stage is implied by the request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteResponse {
    pub text: String,
    pub input_tokens: u64,
    pub output_tokens: u64,
}

/// One recorded call, keyed by the canonical request hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub key: String,
    pub request: GenerationRequest,
    pub response: CassetteResponse,
}

impl CassetteEntry {
    fn to_response(&self) -> GenerationResponse {
        GenerationResponse {
            text: self.response.text.clone(),
            usage: TokenUsage::new(
                self.response.input_tokens,
                self.response.output_tokens,
                self.request.stage,
            ),
        }
    }
}

/// Reads every entry of a cassette file.
pub fn load_cassette(path: &Path) -> Result<Vec<CassetteEntry>> {
    let file = File::open(path).map_err(|e| Error::Dataset {
        path: path.display().to_string(),
        message: format!("cannot open cassette: {e}"),
    })?;
    let mut entries = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: CassetteEntry = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            path: path.display().to_string(),
            message: format!("cassette line {}: {e}", lineno + 1),
        })?;
        entries.push(entry);
    }
    Ok(entries)
}

/// Loads a cassette into a key-indexed response map (last entry wins).
pub fn load_responses(path: &Path) -> Result<HashMap<String, GenerationResponse>> {
    let mut map = HashMap::new();
    for entry in load_cassette(path)? {
        map.insert(entry.key.clone(), entry.to_response());
    }
    Ok(map)
}

/// Append-only cassette writer with an in-memory index. Reopening an existing
/// file resumes it: already-recorded keys are served without re-issuing calls.
pub struct RecordStore {
    path: PathBuf,
    file: File,
    memo: HashMap<String, GenerationResponse>,
}

impl RecordStore {
    pub fn open(path: &Path) -> Result<RecordStore> {
        let memo = if path.exists() {
            load_responses(path)?
        } else {
            HashMap::new()
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(RecordStore {
            path: path.to_path_buf(),
            file,
            memo,
        })
    }

    pub fn lookup(&self, key: &str) -> Option<GenerationResponse> {
        self.memo.get(key).cloned()
    }

    pub fn append(
        &mut self,
        key: &str,
        request: &GenerationRequest,
        response: &GenerationResponse,
    ) -> Result<()> {
        let entry = CassetteEntry {
            key: key.to_string(),
            request: request.clone(),
            response: CassetteResponse {
                text: response.text.clone(),
                input_tokens: response.usage.input_tokens,
                output_tokens: response.usage.output_tokens,
            },
        };
        let line = serde_json::to_string(&entry)?;
        writeln!(self.file, "{line}").map_err(|e| Error::Dataset {
            path: self.path.display().to_string(),
            message: format!("cassette write failed: {e}"),
        })?;
        self.file.flush()?;
        self.memo.insert(key.to_string(), response.clone());
        Ok(())
    }
}

#[allow(dead_code)]
fn entry_key_matches(entry: &CassetteEntry) -> bool {
    entry.key == cache_key(&entry.request)
}

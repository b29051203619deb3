use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::RwLock;

use super::{LlmError, LlmRequest, LlmResponse, TemplateName};

/// One recorded exchange, one JSON object per line in a transcript file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptRecord {
    pub digest: String,
    pub template: TemplateName,
    pub response_text: String,
}

/// Request digest → recorded response. Reads are concurrent, writes serialized.
#[derive(Debug, Default)]
pub struct TranscriptStore {
    records: RwLock<BTreeMap<String, TranscriptRecord>>,
}

impl TranscriptStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, LlmError> {
        let store = TranscriptStore::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: TranscriptRecord =
                serde_json::from_str(line).map_err(|e| LlmError::MalformedTranscript {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            store.insert(rec).map_err(|e| LlmError::MalformedTranscript {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path).map_err(|source| LlmError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Records sorted by digest, one per line.
    pub fn to_jsonl(&self) -> String {
        let records = self.records.read().unwrap();
        let mut out = String::new();
        for rec in records.values() {
            out.push_str(&serde_json::to_string(rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<(), LlmError> {
        std::fs::write(path, self.to_jsonl()).map_err(|source| LlmError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.records.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lookup(&self, digest: &str) -> Option<TranscriptRecord> {
        self.records.read().unwrap().get(digest).cloned()
    }

    fn insert(&self, rec: TranscriptRecord) -> Result<(), LlmError> {
        let mut records = self.records.write().unwrap();
        match records.get(&rec.digest) {
            Some(existing) if existing.response_text != rec.response_text => {
                Err(LlmError::DigestCollision { digest: rec.digest })
            }
            Some(_) => Ok(()),
            None => {
                records.insert(rec.digest.clone(), rec);
                Ok(())
            }
        }
    }

    /// Store `response` for `request`. Re-recording the same response is a no-op.
    pub fn record(&self, request: &LlmRequest, response: &LlmResponse) -> Result<(), LlmError> {
        self.insert(TranscriptRecord {
            digest: request.digest(),
            template: request.template,
            response_text: response.text.clone(),
        })
    }

    pub fn replay(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let digest = request.digest();
        self.lookup(&digest)
            .map(|rec| LlmResponse::text(rec.response_text))
            .ok_or(LlmError::ReplayMiss {
                digest,
                template: request.template,
            })
    }

    /// Merge another store into this one.
    pub fn extend_from(&self, other: &TranscriptStore) -> Result<(), LlmError> {
        let theirs = other.records.read().unwrap().clone();
        for rec in theirs.into_values() {
            self.insert(rec)?;
        }
        Ok(())
    }
}

use std::sync::Arc;

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse, TranscriptStore};

/// Answers strictly from a transcript store.
pub struct ReplayBackend {
    store: Arc<TranscriptStore>,
}

impl ReplayBackend {
    pub fn new(store: Arc<TranscriptStore>) -> Self {
        ReplayBackend { store }
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        self.store.replay(request)
    }
}

/// Forwards to another backend and records every successful exchange.
pub struct RecordingBackend {
    inner: Arc<dyn LlmBackend>,
    store: Arc<TranscriptStore>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn LlmBackend>, store: Arc<TranscriptStore>) -> Self {
        RecordingBackend { inner, store }
    }

    pub fn store(&self) -> &Arc<TranscriptStore> {
        &self.store
    }
}

impl LlmBackend for RecordingBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let response = self.inner.complete(request)?;
        self.store.record(request, &response)?;
        Ok(response)
    }
}

/// A backend driven by a closure; used to author fixtures and in tests.
pub struct ScriptedBackend<F> {
    script: F,
}

impl<F> ScriptedBackend<F>
where
    F: Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync,
{
    pub fn new(script: F) -> Self {
        ScriptedBackend { script }
    }
}

impl<F> LlmBackend for ScriptedBackend<F>
where
    F: Fn(&LlmRequest) -> Result<String, LlmError> + Send + Sync,
{
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        (self.script)(request).map(LlmResponse::text)
    }
}

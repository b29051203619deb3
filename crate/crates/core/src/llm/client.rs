use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

use super::{send, Decoding, LlmBackend, LlmError, LlmRequest, LlmResponse};

/// A backend plus the bounded worker pool that fans out independent calls.
#[derive(Clone)]
pub struct LlmClient {
    backend: Arc<dyn LlmBackend>,
    pool: Arc<rayon::ThreadPool>,
    pub decoding: Decoding,
}

impl LlmClient {
    pub fn new(backend: Arc<dyn LlmBackend>, max_concurrency: usize) -> Self {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(max_concurrency.max(1))
            .thread_name(|i| format!("llm-worker-{i}"))
            .build()
            .expect("worker pool");
        LlmClient {
            backend,
            pool: Arc::new(pool),
            decoding: Decoding::default(),
        }
    }

    pub fn send(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        log::debug!("send template={} digest={}", request.template, request.digest());
        send(request, self.backend.as_ref())
    }

    /// Send `request` and parse the answer. A failed parse gets one re-ask with the
    /// error appended to the prompt.
    pub fn ask_parsed<T, E: fmt::Display>(
        &self,
        request: &LlmRequest,
        parse: impl Fn(&str) -> Result<T, E>,
    ) -> Result<T, AskError<E>> {
        let first = self.send(request).map_err(AskError::Llm)?;
        let err = match parse(&first.text) {
            Ok(v) => return Ok(v),
            Err(e) => e,
        };
        log::warn!("template {}: rejected answer ({err}); asking again", request.template);
        let retry = request.clone().with_note(&format!(
            "Your previous answer was rejected: {err}. Answer again with valid JSON only."
        ));
        let second = self.send(&retry).map_err(AskError::Llm)?;
        parse(&second.text).map_err(AskError::Invalid)
    }

    /// Map `f` over `items` on the worker pool, preserving input order in the output.
    pub fn map_concurrent<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Send + Sync,
    {
        self.pool.install(|| items.into_par_iter().map(f).collect())
    }
}

/// Failure of [`LlmClient::ask_parsed`].
#[derive(Debug)]
pub enum AskError<E> {
    Llm(LlmError),
    Invalid(E),
}

//! Multimodal model access: prompt templates, request digests, a transcript store for
//! record/replay and an HTTP chat-completions backend.

mod backend;
mod client;
mod json;
mod live;
mod template;
mod transcript;

pub use backend::{RecordingBackend, ReplayBackend, ScriptedBackend};
pub use client::{AskError, LlmClient};
pub use json::{extract_json, parse_json_response};
pub use live::{LiveBackend, RetryPolicy, API_KEY_ENV};
pub use template::{bindings, PromptTemplate, TemplateName, TEMPLATE_VERSION};
pub use transcript::{TranscriptRecord, TranscriptStore};

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;
use std::sync::Arc;
use thiserror::Error;

use crate::metadata::image_digest;

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("template `{template}` has unbound placeholder `{placeholder}`")]
    UnboundPlaceholder {
        template: TemplateName,
        placeholder: String,
    },
    #[error("template `{template}` expects {expected} image(s), got {got}")]
    ImageArityMismatch {
        template: TemplateName,
        expected: usize,
        got: usize,
    },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("replay miss for template `{template}` (digest {digest})")]
    ReplayMiss {
        digest: String,
        template: TemplateName,
    },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("digest {digest} already recorded with a different response")]
    DigestCollision { digest: String },
    #[error("empty response for template `{template}`")]
    EmptyResponse { template: TemplateName },
    #[error("cannot access transcript {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed transcript line {line}: {message}")]
    MalformedTranscript { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decoding {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for Decoding {
    fn default() -> Self {
        Decoding {
            temperature: 0.0,
            max_tokens: 4096,
        }
    }
}

/// An image attached to a request, with its content digest.
#[derive(Debug, Clone)]
pub struct Attachment {
    pub image: Arc<RgbaImage>,
    pub digest: String,
}

impl Attachment {
    pub fn new(image: Arc<RgbaImage>) -> Self {
        let digest = image_digest(&image);
        Attachment { image, digest }
    }
}

#[derive(Debug, Clone)]
pub struct LlmRequest {
    pub template: TemplateName,
    pub system_text: String,
    pub rendered_text: String,
    pub images: Vec<Attachment>,
    pub decoding: Decoding,
}

impl LlmRequest {
    /// Hex SHA-256 over template name, rendered text, image digests and decoding parameters.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut field = |bytes: &[u8]| {
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        };
        field(self.template.as_str().as_bytes());
        field(self.rendered_text.as_bytes());
        for img in &self.images {
            field(img.digest.as_bytes());
        }
        field(&self.decoding.temperature.to_bits().to_le_bytes());
        field(&self.decoding.max_tokens.to_le_bytes());
        hex::encode(h.finalize())
    }

    /// Append a follow-up instruction (used for re-asks).
    pub fn with_note(mut self, note: &str) -> Self {
        self.rendered_text.push_str("\n\n");
        self.rendered_text.push_str(note);
        self
    }

    /// Replace the images (used for visually annotated re-asks).
    pub fn with_images(mut self, images: Vec<Arc<RgbaImage>>) -> Self {
        self.images = images.into_iter().map(Attachment::new).collect();
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlmResponse {
    pub text: String,
    pub usage: Usage,
}

impl LlmResponse {
    pub fn text(text: impl Into<String>) -> Self {
        LlmResponse {
            text: text.into(),
            usage: Usage::default(),
        }
    }
}

pub trait LlmBackend: Send + Sync {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError>;
}

/// Send a request through `backend`, rejecting empty responses.
pub fn send(request: &LlmRequest, backend: &dyn LlmBackend) -> Result<LlmResponse, LlmError> {
    let response = backend.complete(request)?;
    if response.text.trim().is_empty() {
        return Err(LlmError::EmptyResponse {
            template: request.template,
        });
    }
    Ok(response)
}

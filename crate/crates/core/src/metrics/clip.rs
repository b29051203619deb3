use base64::Engine;
use image::RgbaImage;
use serde::Deserialize;
use std::time::Duration;

use super::MetricsError;
use crate::metadata::encode_png;

/// Environment variable holding the embedding service base URL.
pub const EMBED_URL_ENV: &str = "DESIGNCODER_EMBED_URL";

/// Client of an image-embedding service: `POST {base}/embed` with
/// `{"image": <base64 PNG>}`, answered by `{"embedding": [f, ...]}`.
#[derive(Debug, Clone)]
pub struct EmbedClient {
    base_url: String,
    agent: ureq::Agent,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EmbedAnswer {
    Wrapped { embedding: Vec<f64> },
    Bare(Vec<f64>),
}

impl EmbedClient {
    pub fn new(base_url: &str) -> Self {
        EmbedClient {
            base_url: base_url.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build(),
        }
    }

    /// The client configured by the environment, if any.
    pub fn from_env() -> Option<Self> {
        std::env::var(EMBED_URL_ENV)
            .ok()
            .filter(|u| !u.trim().is_empty())
            .map(|u| EmbedClient::new(&u))
    }

    pub fn embed(&self, image: &RgbaImage) -> Result<Vec<f64>, MetricsError> {
        let err = |m: String| MetricsError::EmbeddingService(m);
        let png = base64::engine::general_purpose::STANDARD.encode(encode_png(image));
        let response = self
            .agent
            .post(&format!("{}/embed", self.base_url))
            .set("Content-Type", "application/json")
            .send_string(&serde_json::json!({ "image": png }).to_string())
            .map_err(|e| err(e.to_string()))?;
        let body = response.into_string().map_err(|e| err(e.to_string()))?;
        let answer: EmbedAnswer = serde_json::from_str(&body).map_err(|e| err(e.to_string()))?;
        let (EmbedAnswer::Wrapped { embedding: v } | EmbedAnswer::Bare(v)) = answer;
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(err("embedding is empty or not finite".into()));
        }
        Ok(v)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricsError> {
    if a.len() != b.len() {
        return Err(MetricsError::EmbeddingService(format!(
            "embedding lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(MetricsError::EmbeddingService("zero-length embedding".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity of the two images' embeddings.
pub fn clip_score(a: &RgbaImage, b: &RgbaImage, client: &EmbedClient) -> Result<f64, MetricsError> {
    cosine(&client.embed(a)?, &client.embed(b)?)
}

use base64::Engine;
use serde_json::{json, Value};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use super::{LlmBackend, LlmError, LlmRequest, LlmResponse, Usage};
use crate::metadata::encode_png;

pub const API_KEY_ENV: &str = "DESIGNCODER_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Semaphore {
            permits: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut p = self.permits.lock().unwrap();
        while *p == 0 {
            p = self.cv.wait(p).unwrap();
        }
        *p -= 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Semaphore);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().unwrap() += 1;
        self.0.cv.notify_one();
    }
}

/// Chat-completions client: `POST {base_url}/chat/completions` with bearer auth.
pub struct LiveBackend {
    base_url: String,
    model: String,
    api_key: String,
    retry: RetryPolicy,
    agent: ureq::Agent,
    in_flight: Semaphore,
}

enum Attempt {
    Done(LlmResponse),
    Retry(String),
    Fatal(LlmError),
}

impl LiveBackend {
    pub fn new(base_url: &str, model: &str, api_key: &str, max_concurrency: usize) -> Self {
        LiveBackend {
            base_url: base_url.trim_end_matches('/').to_string(),
            model: model.to_string(),
            api_key: api_key.to_string(),
            retry: RetryPolicy::default(),
            agent: ureq::AgentBuilder::new()
                .timeout(Duration::from_secs(300))
                .build(),
            in_flight: Semaphore::new(max_concurrency),
        }
    }

    /// Read the API key from the environment.
    pub fn from_env(base_url: &str, model: &str, max_concurrency: usize) -> Result<Self, LlmError> {
        match std::env::var(API_KEY_ENV) {
            Ok(key) if !key.trim().is_empty() => {
                Ok(Self::new(base_url, model, key.trim(), max_concurrency))
            }
            _ => Err(LlmError::Auth(format!("{API_KEY_ENV} is not set"))),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn request_body(&self, request: &LlmRequest) -> Value {
        let mut content = vec![json!({"type": "text", "text": request.rendered_text})];
        for img in &request.images {
            let b64 = base64::engine::general_purpose::STANDARD.encode(encode_png(&img.image));
            content.push(json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{b64}")}
            }));
        }
        json!({
            "model": self.model,
            "temperature": request.decoding.temperature,
            "max_tokens": request.decoding.max_tokens,
            "messages": [
                {"role": "system", "content": request.system_text},
                {"role": "user", "content": content}
            ]
        })
    }

    fn attempt(&self, body: &str) -> Attempt {
        let url = format!("{}/chat/completions", self.base_url);
        let result = self
            .agent
            .post(&url)
            .set("Authorization", &format!("Bearer {}", self.api_key))
            .set("Content-Type", "application/json")
            .send_string(body);
        match result {
            Ok(resp) => match resp.into_string() {
                Ok(text) => match parse_completion(&text) {
                    Ok(r) => Attempt::Done(r),
                    Err(m) => Attempt::Fatal(LlmError::Transport {
                        attempts: 1,
                        message: m,
                    }),
                },
                Err(e) => Attempt::Retry(e.to_string()),
            },
            Err(ureq::Error::Status(code @ (401 | 403), resp)) => Attempt::Fatal(LlmError::Auth(
                format!("HTTP {code}: {}", resp.into_string().unwrap_or_default()),
            )),
            Err(ureq::Error::Status(code, resp)) if code >= 500 => Attempt::Retry(format!(
                "HTTP {code}: {}",
                resp.into_string().unwrap_or_default()
            )),
            Err(ureq::Error::Status(code, resp)) => Attempt::Fatal(LlmError::Transport {
                attempts: 1,
                message: format!("HTTP {code}: {}", resp.into_string().unwrap_or_default()),
            }),
            Err(ureq::Error::Transport(t)) => Attempt::Retry(t.to_string()),
        }
    }
}

fn parse_completion(text: &str) -> Result<LlmResponse, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("bad response body: {e}"))?;
    let content = v["choices"][0]["message"]["content"]
        .as_str()
        .ok_or("response has no choices[0].message.content")?;
    let usage = Usage {
        prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
        completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
    };
    Ok(LlmResponse {
        text: content.to_string(),
        usage,
    })
}

impl LlmBackend for LiveBackend {
    fn complete(&self, request: &LlmRequest) -> Result<LlmResponse, LlmError> {
        let body = self.request_body(request).to_string();
        let _permit = self.in_flight.acquire();
        let mut delay = self.retry.base_delay;
        let mut last = String::new();
        for attempt in 1..=self.retry.attempts.max(1) {
            match self.attempt(&body) {
                Attempt::Done(r) => {
                    log::info!(
                        "template {} answered after {attempt} attempt(s)",
                        request.template
                    );
                    return Ok(r);
                }
                Attempt::Fatal(LlmError::Transport { message, .. }) => {
                    return Err(LlmError::Transport {
                        attempts: attempt,
                        message,
                    })
                }
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(message) => {
                    log::warn!(
                        "template {} attempt {attempt} failed: {message}",
                        request.template
                    );
                    last = message;
                    if attempt < self.retry.attempts {
                        std::thread::sleep(delay);
                        delay *= 2;
                    }
                }
            }
        }
        Err(LlmError::Transport {
            attempts: self.retry.attempts.max(1),
            message: last,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn completion_parsing() {
        let r = parse_completion(
            r#"{"choices":[{"message":{"content":"hi"}}],"usage":{"prompt_tokens":3,"completion_tokens":1}}"#,
        )
        .unwrap();
        assert_eq!(r.text, "hi");
        assert_eq!(r.usage.prompt_tokens, 3);
        assert!(parse_completion(r#"{"choices":[]}"#).is_err());
    }
}

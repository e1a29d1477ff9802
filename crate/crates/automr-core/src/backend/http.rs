//! Client for OpenAI-compatible chat-completions services.
//!
//! Requests are retried up to three times with exponential backoff starting
//! at 500 ms. Embeddings come from an optional embeddings endpoint; without
//! one, the digest fallback produces deterministic unit vectors so the
//! engine still runs against services that only expose chat completions.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde_json::json;

use super::{digest_parts, digest_unit_vector, BackendContract, GenerationResult, ReasoningBackend};
use crate::error::{Error, Result};

pub const API_KEY_ENV: &str = "AUTOMR_API_KEY";
const RETRY_ATTEMPTS: usize = 3;
const RETRY_BASE_MS: u64 = 500;

#[derive(Debug, Clone)]
pub struct HttpBackendConfig {
    pub base_url: String,
    pub model: String,
    /// Embeddings endpoint model; `None` selects the digest fallback.
    pub embeddings_model: Option<String>,
    pub temperature: f64,
    pub embedding_dim: usize,
    pub max_tokens_supported: usize,
    /// Upper bound on concurrent requests.
    pub max_in_flight: usize,
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        Self {
            base_url: "http://localhost:8000".into(),
            model: "default".into(),
            embeddings_model: None,
            temperature: 0.7,
            embedding_dim: 64,
            max_tokens_supported: 4096,
            max_in_flight: 4,
        }
    }
}

/// Counting gate bounding in-flight requests.
struct Gate {
    slots: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(slots: usize) -> Self {
        Self {
            slots: Mutex::new(slots.max(1)),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) {
        let mut slots = self.slots.lock().unwrap();
        while *slots == 0 {
            slots = self.freed.wait(slots).unwrap();
        }
        *slots -= 1;
    }

    fn release(&self) {
        *self.slots.lock().unwrap() += 1;
        self.freed.notify_one();
    }
}

pub struct HttpBackend {
    config: HttpBackendConfig,
    client: reqwest::blocking::Client,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Generation(format!("http client init: {e}")))?;
        let gate = Gate::new(config.max_in_flight);
        Ok(Self {
            config,
            client,
            gate,
        })
    }

    fn bearer() -> Option<String> {
        std::env::var(API_KEY_ENV).ok().filter(|k| !k.is_empty())
    }

    fn post_with_retry(&self, url: &str, body: &serde_json::Value) -> Result<String> {
        let mut detail = String::new();
        self.gate.acquire();
        let result = (|| {
            for attempt in 0..RETRY_ATTEMPTS {
                if attempt > 0 {
                    std::thread::sleep(Duration::from_millis(RETRY_BASE_MS << (attempt - 1)));
                }
                let mut req = self.client.post(url).json(body);
                if let Some(key) = Self::bearer() {
                    req = req.bearer_auth(key);
                }
                match req.send() {
                    Ok(resp) => {
                        let status = resp.status();
                        let text = resp.text().unwrap_or_default();
                        if status.is_success() {
                            return Ok(text);
                        }
                        detail = format!("attempt {}: status {status}: {text}", attempt + 1);
                    }
                    Err(e) => {
                        detail = format!("attempt {}: transport: {e}", attempt + 1);
                    }
                }
            }
            Err(Error::HttpExhausted {
                attempts: RETRY_ATTEMPTS,
                detail: detail.clone(),
            })
        })();
        self.gate.release();
        result
    }

    fn chat(&self, system: &str, user: &str, max_tokens: usize) -> Result<GenerationResult> {
        let body = build_chat_body(&self.config.model, system, user, max_tokens, self.config.temperature);
        let url = format!("{}/v1/chat/completions", self.config.base_url.trim_end_matches('/'));
        let raw = self.post_with_retry(&url, &body)?;
        let (text, token_count) = parse_chat_response(&raw)?;
        if token_count == 0 {
            return Err(Error::EmptyGeneration);
        }
        let embedding = self.embed_only(&text)?;
        Ok(GenerationResult {
            text,
            token_count,
            embedding,
        })
    }
}

/// Request body for the chat-completions endpoint.
pub fn build_chat_body(
    model: &str,
    system: &str,
    user: &str,
    max_tokens: usize,
    temperature: f64,
) -> serde_json::Value {
    json!({
        "model": model,
        "messages": [
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ],
        "max_tokens": max_tokens,
        "temperature": temperature,
    })
}

/// Extracts `choices[0].message.content` and `usage.completion_tokens`.
pub fn parse_chat_response(raw: &str) -> Result<(String, usize)> {
    let value: serde_json::Value = serde_json::from_str(raw)
        .map_err(|e| Error::Generation(format!("chat response is not JSON: {e}")))?;
    let content = value["choices"][0]["message"]["content"]
        .as_str()
        .ok_or_else(|| Error::Generation("missing choices[0].message.content".into()))?
        .to_string();
    let token_count = value["usage"]["completion_tokens"]
        .as_u64()
        .ok_or_else(|| Error::Generation("missing usage.completion_tokens".into()))?
        as usize;
    Ok((content, token_count))
}

/// Extracts `data[0].embedding` from an embeddings response.
pub fn parse_embeddings_response(raw: &str, expected_dim: usize) -> Result<Vec<f64>> {
    let value: serde_json::Value = serde_json::from_str(raw)
        .map_err(|e| Error::Generation(format!("embeddings response is not JSON: {e}")))?;
    let arr = value["data"][0]["embedding"]
        .as_array()
        .ok_or_else(|| Error::Generation("missing data[0].embedding".into()))?;
    let embedding: Vec<f64> = arr.iter().filter_map(|v| v.as_f64()).collect();
    if embedding.len() != expected_dim {
        return Err(Error::DimensionMismatch {
            expected: expected_dim,
            found: embedding.len(),
            context: "embeddings endpoint".into(),
        });
    }
    Ok(embedding)
}

impl ReasoningBackend for HttpBackend {
    fn contract(&self) -> BackendContract {
        BackendContract {
            embedding_dim: self.config.embedding_dim,
            max_tokens_supported: self.config.max_tokens_supported,
            deterministic: false,
        }
    }

    fn generate_step(
        &self,
        context: &[String],
        guidance: &str,
        max_tokens: usize,
        _seed: u64,
    ) -> Result<GenerationResult> {
        self.chat(guidance, &context.join("\n"), max_tokens)
    }

    fn generate_answer(
        &self,
        context: &[String],
        answer_prompt: &str,
        max_tokens: usize,
        _seed: u64,
    ) -> Result<GenerationResult> {
        self.chat(answer_prompt, &context.join("\n"), max_tokens)
    }

    fn embed_only(&self, text: &str) -> Result<Vec<f64>> {
        match &self.config.embeddings_model {
            Some(model) => {
                let url = format!("{}/v1/embeddings", self.config.base_url.trim_end_matches('/'));
                let body = json!({"model": model, "input": text});
                let raw = self.post_with_retry(&url, &body)?;
                parse_embeddings_response(&raw, self.config.embedding_dim)
            }
            None => Ok(digest_unit_vector(
                digest_parts(&["embed", text]),
                self.config.embedding_dim,
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chat_body_has_pinned_fields() {
        let body = build_chat_body("m1", "sys", "usr", 128, 0.7);
        assert_eq!(body["model"], "m1");
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"], "sys");
        assert_eq!(body["messages"][1]["role"], "user");
        assert_eq!(body["max_tokens"], 128);
        assert_eq!(body["temperature"], 0.7);
    }

    #[test]
    fn chat_response_parses_content_and_usage() {
        let raw = r#"{
            "choices": [{"message": {"role": "assistant", "content": "hello there"}}],
            "usage": {"prompt_tokens": 10, "completion_tokens": 2}
        }"#;
        let (text, tokens) = parse_chat_response(raw).unwrap();
        assert_eq!(text, "hello there");
        assert_eq!(tokens, 2);
        assert!(parse_chat_response("{}").is_err());
    }

    #[test]
    fn embeddings_response_checks_dimension() {
        let raw = r#"{"data": [{"embedding": [0.1, 0.2, 0.3]}]}"#;
        assert_eq!(
            parse_embeddings_response(raw, 3).unwrap(),
            vec![0.1, 0.2, 0.3]
        );
        assert!(matches!(
            parse_embeddings_response(raw, 4),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn digest_fallback_embeds_without_network() {
        let backend = HttpBackend::new(HttpBackendConfig {
            embedding_dim: 8,
            ..HttpBackendConfig::default()
        })
        .unwrap();
        let a = backend.embed_only("q").unwrap();
        assert_eq!(a.len(), 8);
        assert_eq!(a, backend.embed_only("q").unwrap());
    }

    #[test]
    fn gate_bounds_in_flight() {
        let gate = Gate::new(2);
        gate.acquire();
        gate.acquire();
        assert_eq!(*gate.slots.lock().unwrap(), 0);
        gate.release();
        assert_eq!(*gate.slots.lock().unwrap(), 1);
        gate.release();
    }
}

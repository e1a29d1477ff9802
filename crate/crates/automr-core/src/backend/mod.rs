//! Text-generation backends behind the search engine.
//!
//! The engine only needs three calls: generate a reasoning step under a
//! guidance prompt, generate a final answer, and embed a text. The mock and
//! scripted backends are pure functions of their inputs and a caller seed,
//! which keeps every episode bit-reproducible; the HTTP backend talks to any
//! OpenAI-compatible chat-completions service.

mod http;
mod mock;
mod scripted;

pub use http::{HttpBackend, HttpBackendConfig};
pub use mock::MockBackend;
pub use scripted::{scripted_dataset, ScriptedBackend, ScriptedEnvSpec};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;

/// One backend generation: text plus its token count and content embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationResult {
    pub text: String,
    pub token_count: usize,
    pub embedding: Vec<f64>,
}

/// Capabilities the engine checks before sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackendContract {
    pub embedding_dim: usize,
    pub max_tokens_supported: usize,
    pub deterministic: bool,
}

/// A pluggable reasoning backend. Implementations must be safe for
/// concurrent calls from independent episodes.
pub trait ReasoningBackend: Send + Sync {
    fn contract(&self) -> BackendContract;

    /// Next base reasoning step for the ordered `context` under `guidance`.
    /// `max_tokens >= 1`; the returned token count must not exceed it.
    fn generate_step(
        &self,
        context: &[String],
        guidance: &str,
        max_tokens: usize,
        seed: u64,
    ) -> Result<GenerationResult>;

    /// Final answer from the ordered context with the answer prompt appended.
    fn generate_answer(
        &self,
        context: &[String],
        answer_prompt: &str,
        max_tokens: usize,
        seed: u64,
    ) -> Result<GenerationResult>;

    /// Embedding of a text that was never generated (the query node).
    fn embed_only(&self, text: &str) -> Result<Vec<f64>>;
}

/// Whitespace-word token rule shared by the offline backends: one token per
/// whitespace-delimited word, minimum 1 for nonempty text.
pub fn count_tokens(text: &str) -> usize {
    if text.trim().is_empty() {
        return 0;
    }
    text.split_whitespace().count().max(1)
}

/// 64-bit FNV-1a over length-prefixed parts; stable across platforms.
pub(crate) fn digest_parts(parts: &[&str]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x100000001b3);
        }
    };
    for part in parts {
        eat(&(part.len() as u64).to_le_bytes());
        eat(part.as_bytes());
    }
    hash
}

/// Deterministic pseudo-random unit vector keyed by a digest.
pub(crate) fn digest_unit_vector(digest: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(digest);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(&mut rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Box-Muller standard normal.
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn token_rule_counts_words() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("   "), 0);
        assert_eq!(count_tokens("one"), 1);
        assert_eq!(count_tokens("a b  c\nd"), 4);
    }

    #[test]
    fn digest_is_order_and_boundary_sensitive() {
        assert_ne!(digest_parts(&["ab", "c"]), digest_parts(&["a", "bc"]));
        assert_ne!(digest_parts(&["a", "b"]), digest_parts(&["b", "a"]));
        assert_eq!(digest_parts(&["x", "y"]), digest_parts(&["x", "y"]));
    }

    #[test]
    fn unit_vectors_are_normalized_and_deterministic() {
        let a = digest_unit_vector(42, 16);
        let b = digest_unit_vector(42, 16);
        assert_eq!(a, b);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        assert_ne!(a, digest_unit_vector(43, 16));
    }
}

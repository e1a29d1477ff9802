//! Deterministic mock backend for tests and reproducibility checks.
//!
//! Texts are digests of the request; the token count is derived from the
//! same digest and the text is emitted with exactly that many whitespace
//! words, so the word-count token rule and the reported count always agree.

use super::{count_tokens, digest_parts, digest_unit_vector, BackendContract, GenerationResult,
            ReasoningBackend};
use crate::error::{Error, Result};

// Mock steps stay small so skeletons grow several nodes before a budget is hit.
const MAX_STEP_WORDS: usize = 24;

#[derive(Debug, Clone)]
pub struct MockBackend {
    embedding_dim: usize,
}

impl MockBackend {
    pub fn new(embedding_dim: usize) -> Self {
        Self { embedding_dim }
    }

    fn digest_text(&self, tag: &str, context: &[String], extra: &str, seed: u64, max_tokens: usize) -> GenerationResult {
        let joined = context.join("\u{1f}");
        let seed_hex = format!("{seed:016x}");
        let digest = digest_parts(&[tag, &joined, extra, &seed_hex]);
        let cap = max_tokens.min(MAX_STEP_WORDS).max(1);
        let token_count = 1 + (digest % cap as u64) as usize;
        let mut words = Vec::with_capacity(token_count);
        words.push(format!("{tag}{digest:016x}"));
        for k in 1..token_count {
            words.push(format!("w{k}"));
        }
        let text = words.join(" ");
        debug_assert_eq!(count_tokens(&text), token_count);
        let embedding = digest_unit_vector(digest_parts(&["embed", &text]), self.embedding_dim);
        GenerationResult {
            text,
            token_count,
            embedding,
        }
    }
}

impl Default for MockBackend {
    fn default() -> Self {
        Self::new(64)
    }
}

impl ReasoningBackend for MockBackend {
    fn contract(&self) -> BackendContract {
        BackendContract {
            embedding_dim: self.embedding_dim,
            max_tokens_supported: usize::MAX,
            deterministic: true,
        }
    }

    fn generate_step(
        &self,
        context: &[String],
        guidance: &str,
        max_tokens: usize,
        seed: u64,
    ) -> Result<GenerationResult> {
        if max_tokens == 0 {
            return Err(Error::Generation("max_tokens must be at least 1".into()));
        }
        Ok(self.digest_text("m", context, guidance, seed, max_tokens))
    }

    fn generate_answer(
        &self,
        context: &[String],
        answer_prompt: &str,
        max_tokens: usize,
        seed: u64,
    ) -> Result<GenerationResult> {
        if max_tokens == 0 {
            return Err(Error::Generation("max_tokens must be at least 1".into()));
        }
        Ok(self.digest_text("a", context, answer_prompt, seed, max_tokens))
    }

    fn embed_only(&self, text: &str) -> Result<Vec<f64>> {
        Ok(digest_unit_vector(
            digest_parts(&["embed", text]),
            self.embedding_dim,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_calls_are_identical() {
        let backend = MockBackend::default();
        let ctx = vec!["query".to_string(), "step".to_string()];
        let a = backend.generate_step(&ctx, "guide", 16, 9).unwrap();
        let b = backend.generate_step(&ctx, "guide", 16, 9).unwrap();
        assert_eq!(a, b);
        let c = backend.generate_step(&ctx, "guide", 16, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn token_count_respects_cap_and_matches_words() {
        let backend = MockBackend::default();
        for seed in 0..50 {
            let r = backend
                .generate_step(&["q".to_string()], "g", 5, seed)
                .unwrap();
            assert!(r.token_count >= 1 && r.token_count <= 5);
            assert_eq!(count_tokens(&r.text), r.token_count);
        }
    }

    #[test]
    fn embeddings_are_unit_and_distinct() {
        let backend = MockBackend::new(32);
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..1000 {
            let e = backend.embed_only(&format!("text {i}")).unwrap();
            assert_eq!(e.len(), 32);
            let norm: f64 = e.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
            let key: Vec<u64> = e.iter().map(|x| x.to_bits()).collect();
            assert!(seen.insert(key), "embedding collision at {i}");
        }
        assert_eq!(
            backend.embed_only("q").unwrap(),
            backend.embed_only("q").unwrap()
        );
    }

    #[test]
    fn answer_is_deterministic() {
        let backend = MockBackend::default();
        let ctx = vec!["q".to_string()];
        let a = backend.generate_answer(&ctx, "answer now", 8, 1).unwrap();
        let b = backend.generate_answer(&ctx, "answer now", 8, 1).unwrap();
        assert_eq!(a, b);
    }
}

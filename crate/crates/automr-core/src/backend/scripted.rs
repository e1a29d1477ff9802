//! Scripted reward environment with a known optimal policy.
//!
//! Step texts record which strategies guided them as `strategy:<Name>`
//! markers. The answer generator returns the gold answer exactly when the
//! first marker in the context equals the environment's target strategy,
//! which makes the first sampled non-zero decision of an episode the only
//! thing that matters for reward. Under a uniform policy the first decision
//! has 8 equiprobable outcomes and exactly one is correct, so the expected
//! reward is 1/8 - 7/8 = -0.75 while the optimum is +1.

use super::{count_tokens, digest_parts, digest_unit_vector, BackendContract, GenerationResult,
            ReasoningBackend};
use crate::catalog::{StrategyCatalog, TaskKind};
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::skeleton::Strategy;

const MARKER_PREFIX: &str = "strategy:";

/// Configuration of the scripted environment.
#[derive(Debug, Clone)]
pub struct ScriptedEnvSpec {
    pub target_strategy: Strategy,
    pub query_template: String,
    pub gold_answer: String,
    pub wrong_answer: String,
    /// Fixed word count of each generated step (before budget capping).
    pub step_tokens: usize,
    pub embedding_dim: usize,
}

impl Default for ScriptedEnvSpec {
    fn default() -> Self {
        Self {
            target_strategy: Strategy::Recall,
            query_template: "Which earlier result settles this question?".into(),
            gold_answer: "42".into(),
            wrong_answer: "unknown".into(),
            step_tokens: 16,
            embedding_dim: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    spec: ScriptedEnvSpec,
    catalog: StrategyCatalog,
}

impl ScriptedBackend {
    pub fn new(spec: ScriptedEnvSpec) -> Result<Self> {
        if spec.target_strategy.is_zero() {
            return Err(Error::ZeroEdgeStrategy);
        }
        Ok(Self {
            spec,
            catalog: StrategyCatalog::builtin(),
        })
    }

    pub fn spec(&self) -> &ScriptedEnvSpec {
        &self.spec
    }

    /// Strategies whose catalog prompt text occurs in the guidance, in enum
    /// order.
    fn strategies_in_guidance(&self, guidance: &str) -> Vec<Strategy> {
        let mut found = Vec::new();
        for strategy in Strategy::NON_ZERO {
            let hit = self
                .catalog
                .variants()
                .iter()
                .any(|v| v.strategy == strategy && guidance.contains(&v.text));
            if hit {
                found.push(strategy);
            }
        }
        found
    }

    /// First `strategy:<Name>` marker across the ordered context, if any.
    fn first_marker(context: &[String]) -> Option<Strategy> {
        for text in context {
            for word in text.split_whitespace() {
                if let Some(name) = word.strip_prefix(MARKER_PREFIX) {
                    if let Ok(strategy) = name.parse() {
                        return Some(strategy);
                    }
                }
            }
        }
        None
    }
}

impl ReasoningBackend for ScriptedBackend {
    fn contract(&self) -> BackendContract {
        BackendContract {
            embedding_dim: self.spec.embedding_dim,
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
        let strategies = self.strategies_in_guidance(guidance);
        let token_count = self.spec.step_tokens.min(max_tokens).max(1);
        let joined = context.join("\u{1f}");
        let salt = digest_parts(&["scripted", &joined, guidance, &format!("{seed:016x}")]);
        let mut words: Vec<String> = strategies
            .iter()
            .map(|s| format!("{MARKER_PREFIX}{s}"))
            .collect();
        words.push(format!("s{salt:016x}"));
        let mut k = 0;
        while words.len() < token_count {
            words.push(format!("f{k}"));
            k += 1;
        }
        words.truncate(token_count);
        let text = words.join(" ");
        debug_assert_eq!(count_tokens(&text), token_count);
        let embedding = self.embed_only(&text)?;
        Ok(GenerationResult {
            text,
            token_count,
            embedding,
        })
    }

    fn generate_answer(
        &self,
        context: &[String],
        _answer_prompt: &str,
        max_tokens: usize,
        _seed: u64,
    ) -> Result<GenerationResult> {
        if max_tokens == 0 {
            return Err(Error::Generation("max_tokens must be at least 1".into()));
        }
        let correct = Self::first_marker(context) == Some(self.spec.target_strategy);
        let text = if correct {
            self.spec.gold_answer.clone()
        } else {
            self.spec.wrong_answer.clone()
        };
        let token_count = count_tokens(&text).clamp(1, max_tokens);
        let embedding = self.embed_only(&text)?;
        Ok(GenerationResult {
            text,
            token_count,
            embedding,
        })
    }

    fn embed_only(&self, text: &str) -> Result<Vec<f64>> {
        Ok(digest_unit_vector(
            digest_parts(&["scripted-embed", text]),
            self.spec.embedding_dim,
        ))
    }
}

/// Training/eval records for the scripted environment: distinct query texts
/// sharing the same gold answer.
pub fn scripted_dataset(spec: &ScriptedEnvSpec, count: usize) -> Vec<DatasetRecord> {
    (0..count)
        .map(|k| DatasetRecord {
            query: format!("{} [case {k}]", spec.query_template),
            answer: spec.gold_answer.clone(),
            task: TaskKind::Generic,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn step_carries_marker_for_guiding_strategy() {
        let backend = ScriptedBackend::new(ScriptedEnvSpec::default()).unwrap();
        let catalog = StrategyCatalog::builtin();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let guidance = catalog
            .guidance_text(&[Strategy::Recall], &[(0, "q")], TaskKind::Generic, &mut rng)
            .unwrap();
        let step = backend
            .generate_step(&["q".to_string()], &guidance, 16, 3)
            .unwrap();
        assert!(step.text.contains("strategy:Recall"));
        assert_eq!(step.token_count, 16);
    }

    #[test]
    fn answer_follows_first_marker_rule() {
        let backend = ScriptedBackend::new(ScriptedEnvSpec::default()).unwrap();
        let ctx_good = vec![
            "q".to_string(),
            "strategy:Recall s1".to_string(),
            "strategy:Next s2".to_string(),
        ];
        let good = backend.generate_answer(&ctx_good, "answer", 8, 0).unwrap();
        assert_eq!(good.text, "42");

        let ctx_bad = vec!["q".to_string(), "strategy:Next s1".to_string()];
        let bad = backend.generate_answer(&ctx_bad, "answer", 8, 0).unwrap();
        assert_eq!(bad.text, "unknown");

        // no markers at all (immediate termination): wrong answer
        let none = backend.generate_answer(&["q".to_string()], "answer", 8, 0).unwrap();
        assert_eq!(none.text, "unknown");
    }

    #[test]
    fn step_caps_at_max_tokens() {
        let backend = ScriptedBackend::new(ScriptedEnvSpec::default()).unwrap();
        let step = backend
            .generate_step(&["q".to_string()], "x strategy y", 3, 1)
            .unwrap();
        assert_eq!(step.token_count, 3);
        assert_eq!(count_tokens(&step.text), 3);
    }

    #[test]
    fn dataset_generation_is_uniform_gold() {
        let spec = ScriptedEnvSpec::default();
        let records = scripted_dataset(&spec, 4);
        assert_eq!(records.len(), 4);
        assert!(records.iter().all(|r| r.answer == "42"));
        assert_ne!(records[0].query, records[1].query);
    }
}

//! Prompt catalog for the meta-reasoning strategies.
//!
//! Each strategy owns one or more prompt variants; some variants only apply
//! to a task kind (math Q&A vs. general multi-choice). Sampling a strategy
//! for an edge picks one matching variant uniformly at random. The built-in
//! catalog can be replaced by a JSON file with the same invariants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::Strategy;

/// Task family a query belongs to; selects which prompt variants apply.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    MathQa,
    MultiChoice,
    #[default]
    Generic,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::MathQa => "math_qa",
            TaskKind::MultiChoice => "multi_choice",
            TaskKind::Generic => "generic",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "math_qa" => Ok(TaskKind::MathQa),
            "multi_choice" => Ok(TaskKind::MultiChoice),
            "generic" => Ok(TaskKind::Generic),
            other => Err(Error::InvalidCatalog(format!("unknown task kind {other:?}"))),
        }
    }
}

/// Which task kinds a prompt variant may serve.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptScope {
    #[default]
    Any,
    MathQa,
    MultiChoice,
}

impl PromptScope {
    pub fn matches(self, task: TaskKind) -> bool {
        match self {
            PromptScope::Any => true,
            PromptScope::MathQa => task == TaskKind::MathQa,
            PromptScope::MultiChoice => task == TaskKind::MultiChoice,
        }
    }
}

/// One prompt text for a strategy, with its task scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptVariant {
    pub strategy: Strategy,
    pub text: String,
    #[serde(default)]
    pub scope: PromptScope,
}

/// Immutable set of prompt variants; safe for concurrent reads.
#[derive(Debug, Clone)]
pub struct StrategyCatalog {
    variants: Vec<PromptVariant>,
}

fn variant(strategy: Strategy, text: &str, scope: PromptScope) -> PromptVariant {
    PromptVariant {
        strategy,
        text: text.to_string(),
        scope,
    }
}

impl Default for StrategyCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

impl StrategyCatalog {
    /// The built-in prompt inventory.
    pub fn builtin() -> Self {
        use PromptScope::{Any, MathQa, MultiChoice};
        use Strategy::*;
        let variants = vec![
            variant(Next, "Next,", Any),
            variant(Next, "Then,", Any),
            variant(Next, "Now, let me move on to the next step.", Any),
            variant(
                Reflect,
                "Let me consider what part of the reasoning feels least certain, and how can it be examined.",
                Any,
            ),
            variant(
                Reflect,
                "Wait, let me think if there anything missing in the current reasoning.",
                Any,
            ),
            variant(
                Reflect,
                "Let me think does the current line of thought have any error.",
                Any,
            ),
            variant(
                Explore,
                "Let me consider which direction of thinking I should explore.",
                Any,
            ),
            variant(
                Explore,
                "Let me think what potential strategy has not yet been considered that could be the next solution path.",
                Any,
            ),
            variant(
                Explore,
                "Let me think what possible solution could be tried next.",
                Any,
            ),
            variant(
                Decompose,
                "This question is a bit complex, let me think how to decompose it into sub-questions that I can solve.",
                Any,
            ),
            variant(
                Decompose,
                "The question feels too broad, let me think what smaller version could I tackle first.",
                Any,
            ),
            variant(
                Decompose,
                "Let me think if I can express the problem in terms of simpler components or modules.",
                Any,
            ),
            variant(Decompose, "Let me consider the options one by one.", MultiChoice),
            variant(Summarize, "Let me summarize what have I established so far.", Any),
            variant(
                Summarize,
                "Let me summarize the current state of reasoning process, what's known, unknown, and assumed?",
                Any,
            ),
            variant(
                Summarize,
                "Let me consider if I can captures the essence of the reasoning so far with single sentence.",
                Any,
            ),
            variant(
                Recall,
                "Let me think if I have encountered similar problems or if learned knowledge and previous intermediate step can be used here.",
                Any,
            ),
            variant(
                Recall,
                "Let me think what prior reasoning steps are directly relevant here or this question connect to earlier results.",
                MathQa,
            ),
            variant(
                Recall,
                "Let me recall which theorems, rules, or principles from earlier knowledge is related to this question.",
                MultiChoice,
            ),
            variant(
                Answer,
                "Let me give the answer according to current reasoning context.",
                Any,
            ),
        ];
        let catalog = Self { variants };
        catalog
            .check_invariants()
            .expect("built-in catalog satisfies its own invariants");
        catalog
    }

    /// Loads a replacement catalog from a JSON array of
    /// `{strategy, text, scope}` records and validates its invariants.
    pub fn from_json(text: &str) -> Result<Self> {
        let variants: Vec<PromptVariant> =
            serde_json::from_str(text).map_err(|e| Error::InvalidCatalog(e.to_string()))?;
        let catalog = Self { variants };
        catalog.check_invariants()?;
        Ok(catalog)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.variants.iter().any(|v| v.strategy.is_zero()) {
            return Err(Error::InvalidCatalog(
                "Zero cannot carry prompt variants".into(),
            ));
        }
        for strategy in Strategy::NON_ZERO {
            for task in [TaskKind::MathQa, TaskKind::MultiChoice, TaskKind::Generic] {
                if self.matching(strategy, task).is_empty() {
                    return Err(Error::InvalidCatalog(format!(
                        "{strategy} has no variant usable for task {}",
                        task.name()
                    )));
                }
            }
        }
        let answers = self
            .variants
            .iter()
            .filter(|v| v.strategy == Strategy::Answer)
            .count();
        if answers != 1 {
            return Err(Error::InvalidCatalog(format!(
                "Answer must have exactly one variant, found {answers}"
            )));
        }
        Ok(())
    }

    /// Every variant record (the full inventory).
    pub fn variants(&self) -> &[PromptVariant] {
        &self.variants
    }

    /// Variants of `strategy` whose scope admits `task`, in catalog order.
    pub fn matching(&self, strategy: Strategy, task: TaskKind) -> Vec<&PromptVariant> {
        self.variants
            .iter()
            .filter(|v| v.strategy == strategy && v.scope.matches(task))
            .collect()
    }

    /// One matching variant, uniformly at random. Deterministic given the
    /// rng state; a single-variant pool consumes no randomness.
    pub fn prompt_for<R: Rng>(&self, strategy: Strategy, task: TaskKind, rng: &mut R) -> Result<&str> {
        if strategy.is_zero() {
            return Err(Error::ZeroEdgeStrategy);
        }
        let pool = self.matching(strategy, task);
        match pool.len() {
            0 => Err(Error::NoMatchingVariant {
                strategy: strategy.to_string(),
                task: task.name().to_string(),
            }),
            1 => Ok(&pool[0].text),
            n => Ok(&pool[rng.gen_range(0..n)].text),
        }
    }

    /// The single Answer prompt.
    pub fn answer_prompt(&self) -> &str {
        &self
            .variants
            .iter()
            .find(|v| v.strategy == Strategy::Answer)
            .expect("catalog invariant: Answer has one variant")
            .text
    }

    /// Assembles the guidance prompt for one node expansion: predecessor
    /// contents labeled by step index (ascending), then one sampled variant
    /// per distinct strategy in enum order.
    pub fn guidance_text<R: Rng>(
        &self,
        strategies: &[Strategy],
        predecessors: &[(usize, &str)],
        task: TaskKind,
        rng: &mut R,
    ) -> Result<String> {
        let mut distinct: Vec<Strategy> = Vec::new();
        for s in strategies {
            if s.is_zero() {
                return Err(Error::ZeroEdgeStrategy);
            }
            if !distinct.contains(s) {
                distinct.push(*s);
            }
        }
        if distinct.is_empty() {
            return Err(Error::EmptyGuidance);
        }
        distinct.sort_by_key(|s| s.index());

        let mut parts: Vec<String> = Vec::with_capacity(predecessors.len() + distinct.len());
        let mut ordered = predecessors.to_vec();
        ordered.sort_by_key(|(index, _)| *index);
        for (index, content) in ordered {
            parts.push(format!("[step {index}] {content}"));
        }
        for strategy in distinct {
            parts.push(self.prompt_for(strategy, task, rng)?.to_string());
        }
        Ok(parts.join("\n"))
    }
}

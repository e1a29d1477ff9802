//! Dynamic skeleton sampling: node-by-node expansion interleaved with base
//! reasoning, plus the forced-replay mode that reproduces a given structure.
//!
//! Expansion starts from the source node (content = query). For each
//! candidate node i, a strategy is sampled for every potential edge (j, i)
//! with j descending from i-1 to 0, each decision conditioned on the
//! predecessor content, the strategies already chosen for node i, and the
//! mean of all existing content embeddings. An all-zero round terminates
//! the skeleton; otherwise the backend generates the node's content under
//! the guidance of the sampled strategies, capped at the remaining token
//! budget.
//!
//! Randomness interleaving per episode is fixed: for each decision one
//! uniform draw for the strategy choice (skipped in greedy and forced
//! modes), then per expanded node one variant draw per distinct strategy in
//! enum order followed by one u64 generation seed; the final answer draws
//! one more u64. This single ordering is what makes traces replayable.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{count_tokens, GenerationResult, ReasoningBackend};
use crate::catalog::{StrategyCatalog, TaskKind};
use crate::error::{Error, Result};
use crate::policy::{
    encode_decision_input, forward, DecisionFeatures, PolicyParameters, StrategyDistribution,
};
use crate::skeleton::{Skeleton, SkeletonEdge, SkeletonTrace, StepNode, Strategy};

/// Why an episode stopped expanding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllZero,
    Budget,
}

/// One sampled edge decision.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    pub node_i: usize,
    pub node_j: usize,
    pub features: DecisionFeatures,
    pub chosen: Strategy,
    pub log_prob: f64,
}

/// A complete sampled episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub skeleton: Skeleton,
    pub decisions: Vec<DecisionRecord>,
    /// Records of the final all-zero round, when one happened.
    pub termination_decisions: Vec<DecisionRecord>,
    pub terminated_by: Termination,
    pub final_answer: String,
    /// Sum of decision log-probs over materialized nodes.
    pub core_log_prob: f64,
    /// Sum over the all-zero round (0 when terminated by budget).
    pub termination_log_prob: f64,
}

/// Sampling knobs for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Token budget B over generated node contents.
    pub budget: usize,
    /// Safety cap on the node count, source included.
    pub max_nodes: usize,
    /// Count the all-zero round into the training log-probability.
    pub include_termination_in_logprob: bool,
    /// Condition later decisions on sampled Zero outcomes too.
    pub condition_on_zero: bool,
    /// Argmax instead of sampling (evaluation mode).
    pub greedy: bool,
    pub task: TaskKind,
    /// Per-step generation cap; the remaining budget always applies on top.
    pub max_step_tokens: Option<usize>,
    /// The final answer is capped separately and not budget-accounted.
    pub answer_max_tokens: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            budget: 1024,
            max_nodes: 64,
            include_termination_in_logprob: true,
            condition_on_zero: true,
            greedy: false,
            task: TaskKind::Generic,
            max_step_tokens: None,
            answer_max_tokens: 256,
            seed: 0,
        }
    }
}

/// How each decision gets its strategy.
enum Selection<'a> {
    Policy { greedy: bool },
    Forced(&'a Skeleton),
}

impl Selection<'_> {
    fn pick<R: Rng>(
        &self,
        dist: &StrategyDistribution,
        node_i: usize,
        node_j: usize,
        rng: &mut R,
    ) -> Strategy {
        match self {
            Selection::Policy { greedy: false } => dist.sample(rng),
            Selection::Policy { greedy: true } => dist.argmax(),
            Selection::Forced(structure) => structure
                .edges
                .iter()
                .find(|e| e.from == node_j && e.to == node_i)
                .map(|e| e.strategy)
                .unwrap_or(Strategy::Zero),
        }
    }
}

struct EpisodeState {
    skeleton: Skeleton,
    decisions: Vec<DecisionRecord>,
    termination_decisions: Vec<DecisionRecord>,
    mlp_calls: usize,
}

/// Samples one decision round for candidate node `i`. Returns the records in
/// sampling order (j descending).
fn decision_round<R: Rng>(
    state: &EpisodeState,
    params: &PolicyParameters,
    selection: &Selection<'_>,
    config: &SamplerConfig,
    i: usize,
    rng: &mut R,
) -> Result<(Vec<DecisionRecord>, usize)> {
    let context_embs: Vec<Vec<f64>> = state
        .skeleton
        .nodes
        .iter()
        .map(|n| n.content_embedding.clone())
        .collect();
    let mut records = Vec::with_capacity(i);
    let mut chosen_so_far: Vec<Strategy> = Vec::with_capacity(i);
    let mut calls = 0;
    for j in (0..i).rev() {
        let features = encode_decision_input(
            params,
            &state.skeleton.nodes[j].content_embedding,
            &chosen_so_far,
            &context_embs,
        )?;
        let dist = forward(params, &features)?;
        calls += 1;
        let chosen = selection.pick(&dist, i, j, rng);
        let log_prob = dist.log_prob(chosen);
        if config.condition_on_zero || !chosen.is_zero() {
            chosen_so_far.push(chosen);
        }
        records.push(DecisionRecord {
            node_i: i,
            node_j: j,
            features,
            chosen,
            log_prob,
        });
    }
    Ok((records, calls))
}

fn expand_node(
    state: &mut EpisodeState,
    records: Vec<DecisionRecord>,
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    config: &SamplerConfig,
    rng: &mut impl Rng,
    i: usize,
) -> Result<()> {
    let nonzero: Vec<&DecisionRecord> = records.iter().filter(|r| !r.chosen.is_zero()).collect();
    let strategies: Vec<Strategy> = nonzero.iter().map(|r| r.chosen).collect();
    let predecessors: Vec<(usize, &str)> = {
        let mut preds: Vec<(usize, &str)> = nonzero
            .iter()
            .map(|r| {
                (
                    r.node_j,
                    state.skeleton.nodes[r.node_j].content.as_str(),
                )
            })
            .collect();
        preds.sort_by_key(|(index, _)| *index);
        preds
    };
    let guidance = catalog.guidance_text(&strategies, &predecessors, config.task, rng)?;

    let remaining = config.budget.saturating_sub(state.skeleton.budget_used());
    let cap = match config.max_step_tokens {
        Some(limit) => remaining.min(limit).max(1),
        None => remaining.max(1),
    };
    let context: Vec<String> = state
        .skeleton
        .nodes
        .iter()
        .map(|n| n.content.clone())
        .collect();
    let gen_seed: u64 = rng.gen();
    let step = backend
        .generate_step(&context, &guidance, cap, gen_seed)
        .map_err(|e| Error::BackendAtNode {
            node: i,
            source: Box::new(e),
        })?;
    if step.token_count == 0 {
        return Err(Error::BackendAtNode {
            node: i,
            source: Box::new(Error::EmptyGeneration),
        });
    }

    state.skeleton.nodes.push(StepNode {
        index: i,
        content: step.text,
        token_count: step.token_count,
        content_embedding: step.embedding,
    });
    for r in &nonzero {
        state.skeleton.edges.push(SkeletonEdge {
            from: r.node_j,
            to: i,
            strategy: r.chosen,
        });
    }
    state.decisions.extend(records);
    Ok(())
}

fn answer_from_context(
    skeleton: &Skeleton,
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    config: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<GenerationResult> {
    let context: Vec<String> = skeleton.nodes.iter().map(|n| n.content.clone()).collect();
    let gen_seed: u64 = rng.gen();
    backend.generate_answer(
        &context,
        catalog.answer_prompt(),
        config.answer_max_tokens.max(1),
        gen_seed,
    )
}

fn run_episode(
    query: &str,
    params: &PolicyParameters,
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    config: &SamplerConfig,
    selection: Selection<'_>,
    forced_len: Option<usize>,
    rng: &mut impl Rng,
) -> Result<(EpisodeTrace, usize)> {
    let contract = backend.contract();
    if contract.embedding_dim != params.dims.d_c {
        return Err(Error::DimensionMismatch {
            expected: params.dims.d_c,
            found: contract.embedding_dim,
            context: "backend embedding dim vs policy d_c".into(),
        });
    }

    let query_embedding = backend.embed_only(query)?;
    let mut state = EpisodeState {
        skeleton: Skeleton::with_source(query, count_tokens(query), query_embedding, config.budget),
        decisions: Vec::new(),
        termination_decisions: Vec::new(),
        mlp_calls: 0,
    };

    let terminated_by;
    let mut i = 1;
    loop {
        let budget_open = state.skeleton.budget_used() < config.budget
            && state.skeleton.node_count() < config.max_nodes;
        let keep_expanding = match forced_len {
            // Forced replay walks the whole structure and then one all-zero
            // round, regardless of budget bookkeeping.
            Some(len) => i <= len,
            None => budget_open,
        };
        if !keep_expanding && forced_len.is_some() {
            // closing all-zero round of a forced replay
            let (records, calls) = decision_round(&state, params, &selection, config, i, rng)?;
            state.mlp_calls += calls;
            debug_assert!(records.iter().all(|r| r.chosen.is_zero()));
            state.termination_decisions = records;
            terminated_by = Termination::AllZero;
            break;
        }
        if !keep_expanding {
            terminated_by = Termination::Budget;
            break;
        }
        let (records, calls) = decision_round(&state, params, &selection, config, i, rng)?;
        state.mlp_calls += calls;
        if records.iter().all(|r| r.chosen.is_zero()) {
            state.termination_decisions = records;
            terminated_by = Termination::AllZero;
            break;
        }
        expand_node(&mut state, records, backend, catalog, config, rng, i)?;
        i += 1;
    }

    let answer = answer_from_context(&state.skeleton, backend, catalog, config, rng)?;
    let core_log_prob = state.decisions.iter().map(|d| d.log_prob).sum();
    let termination_log_prob = state.termination_decisions.iter().map(|d| d.log_prob).sum();
    let trace = EpisodeTrace {
        skeleton: state.skeleton,
        decisions: state.decisions,
        termination_decisions: state.termination_decisions,
        terminated_by,
        final_answer: answer.text,
        core_log_prob,
        termination_log_prob,
    };
    debug_assert!(trace.skeleton.validate().is_ok());
    Ok((trace, state.mlp_calls))
}

/// Samples one episode for `query` under the current policy.
pub fn sample_skeleton(
    query: &str,
    params: &PolicyParameters,
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    config: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<EpisodeTrace> {
    let (trace, _) = run_episode(
        query,
        params,
        backend,
        catalog,
        config,
        Selection::Policy {
            greedy: config.greedy,
        },
        None,
        rng,
    )?;
    Ok(trace)
}

/// Replays the sampler with choices forced to reproduce `structure` exactly
/// (its contents are ignored; the backend regenerates them for `query`).
/// Returns the trace and the number of MLP calls, which is
/// `sum_{i=1}^{|V|-1} i + |V|` (the trailing term is the closing all-zero
/// round).
pub fn forced_replay(
    structure: &Skeleton,
    query: &str,
    params: &PolicyParameters,
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    config: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<(EpisodeTrace, usize)> {
    let report = structure.validate();
    if !report.is_ok() {
        return Err(Error::InvalidSkeleton(report));
    }
    let forced_len = structure.node_count() - 1;
    let (mut trace, mlp_calls) = run_episode(
        query,
        params,
        backend,
        catalog,
        config,
        Selection::Forced(structure),
        Some(forced_len),
        rng,
    )?;
    // Replayed contents may not fit the structure's original budget; widen it
    // so the returned skeleton still validates.
    if trace.skeleton.budget_used() > trace.skeleton.budget {
        trace.skeleton.budget = trace.skeleton.budget_used();
    }
    debug_assert!(trace.skeleton.validate().is_ok());
    Ok((trace, mlp_calls))
}

/// Recomputes the episode log-probability from the stored per-decision
/// features under `params`.
pub fn skeleton_log_prob(
    params: &PolicyParameters,
    trace: &EpisodeTrace,
    include_termination: bool,
) -> Result<f64> {
    let mut total = 0.0;
    for record in &trace.decisions {
        total += forward(params, &record.features)?.log_prob(record.chosen);
    }
    if include_termination {
        for record in &trace.termination_decisions {
            total += forward(params, &record.features)?.log_prob(record.chosen);
        }
    }
    Ok(total)
}

/// Final answer generation from an ordered context (Answer prompt appended).
pub fn generate_final_answer(
    nodes: &[StepNode],
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    max_tokens: usize,
    seed: u64,
) -> Result<GenerationResult> {
    let context: Vec<String> = nodes.iter().map(|n| n.content.clone()).collect();
    backend.generate_answer(&context, catalog.answer_prompt(), max_tokens.max(1), seed)
}

/// Per-decision entry of the exported trace document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceDecision {
    pub i: usize,
    pub j: usize,
    pub chosen: Strategy,
    pub log_prob: f64,
}

/// Episode trace document: the skeleton document extended with decisions,
/// termination kind, and the final answer.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeDocument {
    #[serde(flatten)]
    pub skeleton: SkeletonTrace,
    pub decisions: Vec<TraceDecision>,
    pub terminated_by: Termination,
    pub final_answer: String,
}

impl EpisodeTrace {
    pub fn to_document(&self) -> EpisodeDocument {
        let decisions = self
            .decisions
            .iter()
            .chain(&self.termination_decisions)
            .map(|d| TraceDecision {
                i: d.node_i,
                j: d.node_j,
                chosen: d.chosen,
                log_prob: d.log_prob,
            })
            .collect();
        EpisodeDocument {
            skeleton: self.skeleton.to_trace(),
            decisions,
            terminated_by: self.terminated_by,
            final_answer: self.final_answer.clone(),
        }
    }
}

impl EpisodeDocument {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::TraceMalformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::MockBackend;
    use crate::policy::PolicyDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn setup() -> (PolicyParameters, MockBackend, StrategyCatalog) {
        let params = PolicyParameters::init(PolicyDims::new(64, 32, 64), 11).unwrap();
        (params, MockBackend::new(64), StrategyCatalog::builtin())
    }

    fn config(budget: usize) -> SamplerConfig {
        SamplerConfig {
            budget,
            ..SamplerConfig::default()
        }
    }

    #[test]
    fn zero_budget_yields_source_only_and_no_decisions() {
        let (params, backend, catalog) = setup();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let trace =
            sample_skeleton("the query", &params, &backend, &catalog, &config(0), &mut rng).unwrap();
        assert_eq!(trace.skeleton.node_count(), 1);
        assert!(trace.decisions.is_empty());
        assert!(trace.termination_decisions.is_empty());
        assert_eq!(trace.terminated_by, Termination::Budget);
        assert!(!trace.final_answer.is_empty());
        assert_eq!(trace.skeleton.nodes[0].content, "the query");
    }

    #[test]
    fn forced_zero_probability_terminates_at_first_node() {
        // Zero logits get +30 on the Zero row: softmax is ~1 for Zero.
        let (mut params, backend, catalog) = setup();
        params.b2[Strategy::Zero.index()] = 30.0;
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let trace =
            sample_skeleton("q", &params, &backend, &catalog, &config(64), &mut rng).unwrap();
        assert_eq!(trace.terminated_by, Termination::AllZero);
        assert_eq!(trace.skeleton.node_count(), 1);
        assert_eq!(trace.termination_decisions.len(), 1);
        assert!(trace
            .termination_decisions
            .iter()
            .all(|d| d.chosen == Strategy::Zero));
        assert!(trace.decisions.is_empty());
    }

    #[test]
    fn episodes_are_bit_identical_given_seed() {
        let (params, backend, catalog) = setup();
        let run = || {
            let mut rng = ChaCha12Rng::seed_from_u64(42);
            sample_skeleton("determinism", &params, &backend, &catalog, &config(64), &mut rng)
                .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn budget_is_never_exceeded() {
        let (params, backend, catalog) = setup();
        for budget in [0usize, 1, 16, 1024] {
            for seed in 0..20 {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                let trace = sample_skeleton(
                    "budget check",
                    &params,
                    &backend,
                    &catalog,
                    &config(budget),
                    &mut rng,
                )
                .unwrap();
                assert!(trace.skeleton.budget_used() <= budget);
                assert!(trace.skeleton.validate().is_ok());
            }
        }
    }

    #[test]
    fn decision_rounds_follow_quadratic_count() {
        let (params, backend, catalog) = setup();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let trace =
            sample_skeleton("count", &params, &backend, &catalog, &config(256), &mut rng).unwrap();
        let v = trace.skeleton.node_count();
        let expected_core: usize = (1..v).sum();
        assert_eq!(trace.decisions.len(), expected_core);
        if trace.terminated_by == Termination::AllZero {
            assert_eq!(trace.termination_decisions.len(), v);
        }
        // per-node rounds visit j in descending order
        for w in trace.decisions.windows(2) {
            if w[0].node_i == w[1].node_i {
                assert_eq!(w[0].node_j, w[1].node_j + 1);
            }
        }
    }

    #[test]
    fn conditioning_uses_exactly_prior_decisions_of_same_round() {
        let (params, backend, catalog) = setup();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let trace =
            sample_skeleton("conditioning", &params, &backend, &catalog, &config(128), &mut rng)
                .unwrap();
        let d_c = params.dims.d_c;
        for record in trace.decisions.iter().chain(&trace.termination_decisions) {
            let expected: Vec<Strategy> = trace
                .decisions
                .iter()
                .chain(&trace.termination_decisions)
                .filter(|d| d.node_i == record.node_i && d.node_j > record.node_j)
                .map(|d| d.chosen)
                .collect();
            assert_eq!(record.features.mean_strategies, expected);

            // first block = predecessor embedding, last block = mean over
            // embeddings of exactly nodes 0..i-1
            let nodes = &trace.skeleton.nodes[..record.node_i];
            assert_eq!(
                &record.features.input[..d_c],
                &trace.skeleton.nodes[record.node_j].content_embedding[..]
            );
            let tail = &record.features.input[record.features.input.len() - d_c..];
            for (k, t) in tail.iter().enumerate() {
                let mean: f64 = nodes.iter().map(|n| n.content_embedding[k]).sum::<f64>()
                    / nodes.len() as f64;
                assert!((t - mean).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn backend_failure_carries_node_context() {
        struct FailingBackend;
        impl crate::backend::ReasoningBackend for FailingBackend {
            fn contract(&self) -> crate::backend::BackendContract {
                crate::backend::BackendContract {
                    embedding_dim: 8,
                    max_tokens_supported: usize::MAX,
                    deterministic: true,
                }
            }
            fn generate_step(
                &self,
                _: &[String],
                _: &str,
                _: usize,
                _: u64,
            ) -> crate::error::Result<GenerationResult> {
                Err(Error::Generation("backend down".into()))
            }
            fn generate_answer(
                &self,
                _: &[String],
                _: &str,
                _: usize,
                _: u64,
            ) -> crate::error::Result<GenerationResult> {
                Err(Error::Generation("backend down".into()))
            }
            fn embed_only(&self, _: &str) -> crate::error::Result<Vec<f64>> {
                Ok(vec![0.5; 8])
            }
        }

        let params = crate::policy::PolicyParameters::init(
            crate::policy::PolicyDims::new(8, 4, 8),
            2,
        )
        .unwrap();
        let catalog = StrategyCatalog::builtin();
        // Retry seeds until an episode tries to expand a node (a first-round
        // all-zero draw would fail on answer generation instead).
        let mut found_node_context = false;
        for seed in 0..20 {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            match sample_skeleton("q", &params, &FailingBackend, &catalog, &config(64), &mut rng) {
                Err(Error::BackendAtNode { node, .. }) => {
                    assert_eq!(node, 1);
                    found_node_context = true;
                    break;
                }
                Err(Error::Generation(_)) => continue,
                other => panic!("expected backend failure, got {other:?}"),
            }
        }
        assert!(found_node_context);
    }

    #[test]
    fn core_log_prob_matches_recomputation() {
        let (params, backend, catalog) = setup();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let trace =
            sample_skeleton("logprob", &params, &backend, &catalog, &config(96), &mut rng).unwrap();
        let recomputed = skeleton_log_prob(&params, &trace, false).unwrap();
        assert!((recomputed - trace.core_log_prob).abs() < 1e-10);
        let with_term = skeleton_log_prob(&params, &trace, true).unwrap();
        assert!(
            (with_term - trace.core_log_prob - trace.termination_log_prob).abs() < 1e-10
        );
    }

    #[test]
    fn forced_replay_reproduces_structure_and_counts_calls() {
        let (params, backend, catalog) = setup();
        let structure = Skeleton::sequential(4, Strategy::Next).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let (trace, calls) = forced_replay(
            &structure,
            "replay",
            &params,
            &backend,
            &catalog,
            &config(256),
            &mut rng,
        )
        .unwrap();
        assert_eq!(trace.skeleton.node_count(), 5);
        assert_eq!(trace.skeleton.sorted_edges(), structure.sorted_edges());
        // |V| = 5: sum_{i=1}^{4} i + 5 = 15
        assert_eq!(calls, 15);
        assert_eq!(trace.terminated_by, Termination::AllZero);
        assert_eq!(trace.termination_decisions.len(), 5);
        // replayed contents exist and carry tokens
        assert!(trace.skeleton.nodes[1..].iter().all(|n| n.token_count >= 1));
    }

    #[test]
    fn forced_replay_of_parallel_structure() {
        let (params, backend, catalog) = setup();
        let structure = Skeleton::parallel(&[2, 2], Strategy::Explore).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (trace, calls) = forced_replay(
            &structure,
            "parallel",
            &params,
            &backend,
            &catalog,
            &config(256),
            &mut rng,
        )
        .unwrap();
        assert_eq!(trace.skeleton.sorted_edges(), structure.sorted_edges());
        assert_eq!(calls, (1..5).sum::<usize>() + 5);
    }

    #[test]
    fn forced_replay_rejects_invalid_structure() {
        let (params, backend, catalog) = setup();
        let mut bad = Skeleton::sequential(2, Strategy::Next).unwrap();
        bad.edges.clear();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            forced_replay(&bad, "q", &params, &backend, &catalog, &config(64), &mut rng),
            Err(Error::InvalidSkeleton(_))
        ));
    }

    #[test]
    fn uniform_policy_forced_replay_of_three_nodes() {
        let (_, backend, catalog) = setup();
        let params = PolicyParameters::zeros(PolicyDims::new(64, 32, 64)).unwrap();
        let structure = Skeleton::sequential(2, Strategy::Next).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let (trace, _) = forced_replay(
            &structure,
            "uniform",
            &params,
            &backend,
            &catalog,
            &config(64),
            &mut rng,
        )
        .unwrap();
        // |V| = 3: node 1 has 1 decision, node 2 has 2; uniform gives 1/8 each.
        let lp = skeleton_log_prob(&params, &trace, false).unwrap();
        let expected = 3.0 * (1.0f64 / 8.0).ln();
        assert!((lp - expected).abs() < 1e-12, "{lp} vs {expected}");
    }

    #[test]
    fn dimension_mismatch_rejected_before_sampling() {
        let params = PolicyParameters::init(PolicyDims::new(32, 16, 32), 0).unwrap();
        let backend = MockBackend::new(64);
        let catalog = StrategyCatalog::builtin();
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            sample_skeleton("q", &params, &backend, &catalog, &config(64), &mut rng),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn max_nodes_caps_expansion() {
        let (params, backend, catalog) = setup();
        let cfg = SamplerConfig {
            budget: 1_000_000,
            max_nodes: 3,
            ..SamplerConfig::default()
        };
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        let trace = sample_skeleton("cap", &params, &backend, &catalog, &cfg, &mut rng).unwrap();
        assert!(trace.skeleton.node_count() <= 3);
    }

    #[test]
    fn trace_document_round_trips_with_decisions() {
        let (params, backend, catalog) = setup();
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let trace =
            sample_skeleton("doc", &params, &backend, &catalog, &config(64), &mut rng).unwrap();
        let doc = trace.to_document();
        let json = doc.to_json();
        assert!(json.contains("\"terminated_by\""));
        assert!(json.contains("\"final_answer\""));
        let back = EpisodeDocument::from_json(&json).unwrap();
        assert_eq!(back.decisions.len(), doc.decisions.len());
        let skeleton = Skeleton::from_trace(&back.skeleton).unwrap();
        assert_eq!(skeleton.sorted_edges(), trace.skeleton.sorted_edges());
    }
}

//! Outer search loop: batched episode sampling, exact-match reward, the
//! REINFORCE update with global-norm gradient clipping, plus the random
//! search baseline and evaluation.
//!
//! One iteration samples N queries (with replacement), M episodes per query,
//! and applies
//!
//! ```text
//! theta <- theta + eta * clip( (1/(M*N)) * sum_ij r_ij * grad log P(alpha_ij | q_i) )
//! ```
//!
//! where the per-episode score gradient sums `logprob_and_grad` over the
//! episode's decisions (the all-zero termination round included when the
//! sampler config says so). Episodes are mutually independent; gradient
//! contributions reduce in (query, episode) order so results do not depend
//! on execution interleaving.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::backend::ReasoningBackend;
use crate::catalog::StrategyCatalog;
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::policy::{
    accumulate_logprob_grad, serialize_checkpoint, PolicyGradient, PolicyParameters,
};
use crate::sampler::{forced_replay, sample_skeleton, EpisodeTrace, SamplerConfig};
use crate::skeleton::Skeleton;

/// Answer comparison rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerMatcher {
    /// Trim whitespace, strip trailing punctuation, case-fold, exact compare.
    Normalized,
    /// Extract a final boxed expression (or the last nonempty line), then
    /// compare normalized.
    Extracted,
    /// Fixed reward regardless of the texts (stub for plumbing tests).
    Constant(i32),
}

/// Lowercased text with surrounding whitespace and trailing punctuation
/// removed.
pub fn normalize_answer(text: &str) -> String {
    text.trim()
        .trim_end_matches(['.', ',', ';', ':', '!', '?'])
        .trim()
        .to_lowercase()
}

/// Final `\boxed{...}` content if present, otherwise the last nonempty line.
pub fn extract_answer(text: &str) -> String {
    let boxed = regex::Regex::new(r"\\boxed\{([^{}]*)\}").expect("static pattern");
    if let Some(m) = boxed.captures_iter(text).last() {
        return m[1].to_string();
    }
    text.lines()
        .rev()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
        .to_string()
}

/// Exact-match reward: +1 when the matcher equates the texts, -1 otherwise.
pub fn reward(gold: &str, predicted: &str, matcher: AnswerMatcher) -> i32 {
    match matcher {
        AnswerMatcher::Normalized => {
            if normalize_answer(gold) == normalize_answer(predicted) {
                1
            } else {
                -1
            }
        }
        AnswerMatcher::Extracted => {
            if normalize_answer(&extract_answer(gold)) == normalize_answer(&extract_answer(predicted))
            {
                1
            } else {
                -1
            }
        }
        AnswerMatcher::Constant(r) => r,
    }
}

/// Search hyperparameters. Defaults: N=8, M=16, eta=5e-4, clip 1.0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Queries per batch (N).
    pub queries_per_batch: usize,
    /// Skeletons sampled per query (M).
    pub samples_per_query: usize,
    /// Learning rate eta.
    pub learning_rate: f64,
    /// Max global L2 norm of the applied gradient.
    pub clip_norm: f64,
    pub iterations: usize,
    /// Checkpoint every K iterations (0 disables periodic checkpoints).
    pub checkpoint_interval: usize,
    /// Subtract the batch-mean reward before weighting (variance reducer,
    /// off by default).
    pub use_mean_baseline: bool,
    /// Evaluate with argmax selection instead of sampling.
    pub greedy_eval: bool,
    pub matcher: AnswerMatcher,
    pub sampler: SamplerConfig,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            queries_per_batch: 8,
            samples_per_query: 16,
            learning_rate: 5e-4,
            clip_norm: 1.0,
            iterations: 300,
            checkpoint_interval: 50,
            use_mean_baseline: false,
            greedy_eval: false,
            matcher: AnswerMatcher::Normalized,
            sampler: SamplerConfig::default(),
            seed: 0,
        }
    }
}

/// Reward bookkeeping for one episode of a batch.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RewardRecord {
    pub query_index: usize,
    pub episode_index: usize,
    pub reward: i32,
    pub core_log_prob: f64,
    pub total_log_prob: f64,
}

/// Aggregates of one batch update.
#[derive(Debug, Clone)]
pub struct BatchStats {
    pub mean_reward: f64,
    pub mean_nodes: f64,
    pub mean_tokens: f64,
    pub grad_norm_pre: f64,
    pub grad_norm_post: f64,
    pub rewards: Vec<RewardRecord>,
}

/// One line of the learning curve (JSONL wire format).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub mean_reward: f64,
    pub mean_nodes: f64,
    pub mean_tokens: f64,
    pub grad_norm_pre: f64,
    pub grad_norm_post: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

impl LearningCurve {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for point in &self.points {
            out.push_str(&serde_json::to_string(point).expect("curve point serializes"));
            out.push('\n');
        }
        out
    }

    /// Mean reward over the trailing `window` iterations.
    pub fn trailing_mean_reward(&self, window: usize) -> f64 {
        if self.points.is_empty() {
            return 0.0;
        }
        let tail = &self.points[self.points.len().saturating_sub(window)..];
        tail.iter().map(|p| p.mean_reward).sum::<f64>() / tail.len() as f64
    }
}

/// Receives periodic and final checkpoints during training.
pub trait CheckpointSink {
    fn save(&mut self, iteration: usize, params: &PolicyParameters) -> Result<()>;
}

/// Discards checkpoints.
pub struct NullSink;

impl CheckpointSink for NullSink {
    fn save(&mut self, _iteration: usize, _params: &PolicyParameters) -> Result<()> {
        Ok(())
    }
}

/// Writes `ckpt-<iteration>.json` files into a directory.
pub struct DirSink {
    dir: std::path::PathBuf,
}

impl DirSink {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

impl CheckpointSink for DirSink {
    fn save(&mut self, iteration: usize, params: &PolicyParameters) -> Result<()> {
        std::fs::create_dir_all(&self.dir)
            .and_then(|_| {
                std::fs::write(
                    self.dir.join(format!("ckpt-{iteration}.json")),
                    serialize_checkpoint(params),
                )
            })
            .map_err(|source| Error::CheckpointWrite { iteration, source })
    }
}

fn episode_score_gradient(
    params: &PolicyParameters,
    trace: &EpisodeTrace,
    include_termination: bool,
) -> Result<PolicyGradient> {
    let mut grad = PolicyGradient::zeros(params.dims);
    for record in &trace.decisions {
        accumulate_logprob_grad(params, &record.features, record.chosen, 1.0, &mut grad)?;
    }
    if include_termination {
        for record in &trace.termination_decisions {
            accumulate_logprob_grad(params, &record.features, record.chosen, 1.0, &mut grad)?;
        }
    }
    Ok(grad)
}

/// One REINFORCE update over a batch of query-answer pairs. Returns the new
/// parameter snapshot and the batch statistics; the input snapshot is left
/// untouched for concurrent readers.
pub fn batch_update(
    params: &PolicyParameters,
    batch: &[DatasetRecord],
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    config: &SearchConfig,
    rng: &mut impl Rng,
) -> Result<(PolicyParameters, BatchStats)> {
    let m = config.samples_per_query.max(1);
    let scale = 1.0 / (m * batch.len().max(1)) as f64;

    let mut rewards = Vec::with_capacity(batch.len() * m);
    let mut episode_grads: Vec<(f64, PolicyGradient)> = Vec::with_capacity(batch.len() * m);
    let mut node_total = 0usize;
    let mut token_total = 0usize;

    for (query_index, record) in batch.iter().enumerate() {
        for episode_index in 0..m {
            let mut sampler_config = config.sampler.clone();
            sampler_config.task = record.task;
            let episode_seed: u64 = rng.gen();
            let mut episode_rng = ChaCha12Rng::seed_from_u64(episode_seed);
            let trace = sample_skeleton(
                &record.query,
                params,
                backend,
                catalog,
                &sampler_config,
                &mut episode_rng,
            )?;
            let r = reward(&record.answer, &trace.final_answer, config.matcher);
            node_total += trace.skeleton.node_count();
            token_total += trace.skeleton.budget_used();
            rewards.push(RewardRecord {
                query_index,
                episode_index,
                reward: r,
                core_log_prob: trace.core_log_prob,
                total_log_prob: trace.core_log_prob + trace.termination_log_prob,
            });
            let grad = episode_score_gradient(
                params,
                &trace,
                sampler_config.include_termination_in_logprob,
            )?;
            episode_grads.push((r as f64, grad));
        }
    }

    let episode_count = episode_grads.len().max(1);
    let mean_reward = rewards.iter().map(|r| r.reward as f64).sum::<f64>() / episode_count as f64;
    let baseline = if config.use_mean_baseline { mean_reward } else { 0.0 };

    let mut grad = PolicyGradient::zeros(params.dims);
    for (r, episode_grad) in &episode_grads {
        grad.add_scaled(episode_grad, (r - baseline) * scale);
    }

    let (grad_norm_pre, grad_norm_post) = clip_gradient(&mut grad, config.clip_norm);

    let next = if grad.is_zero() {
        params.clone()
    } else {
        params.apply_step(&grad, config.learning_rate)
    };

    let stats = BatchStats {
        mean_reward,
        mean_nodes: node_total as f64 / episode_count as f64,
        mean_tokens: token_total as f64 / episode_count as f64,
        grad_norm_pre,
        grad_norm_post,
        rewards,
    };
    Ok((next, stats))
}

/// Rescales `grad` in place onto the L2 ball of radius `clip_norm` when it
/// lies outside; direction is unchanged. Returns (pre, post) norms.
pub fn clip_gradient(grad: &mut PolicyGradient, clip_norm: f64) -> (f64, f64) {
    let pre = grad.l2_norm();
    if pre > clip_norm {
        grad.scale(clip_norm / pre);
    }
    (pre, grad.l2_norm())
}

/// Runs the full search: initializes parameters from the seed, then applies
/// `batch_update` for the configured number of iterations, drawing batches
/// uniformly with replacement. Deterministic end-to-end for a deterministic
/// backend.
pub fn train(
    dataset: &[DatasetRecord],
    config: &SearchConfig,
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    dims: crate::policy::PolicyDims,
    sink: &mut dyn CheckpointSink,
) -> Result<(PolicyParameters, LearningCurve)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let init_seed = stream_seed(config.seed, "init");
    let mut params = PolicyParameters::init(dims, init_seed)?;
    let mut batch_rng = ChaCha12Rng::seed_from_u64(stream_seed(config.seed, "batch"));

    let mut curve = LearningCurve::default();
    for iteration in 1..=config.iterations {
        let batch: Vec<DatasetRecord> = (0..config.queries_per_batch)
            .map(|_| dataset[batch_rng.gen_range(0..dataset.len())].clone())
            .collect();
        let (next, stats) = batch_update(&params, &batch, backend, catalog, config, &mut batch_rng)?;
        params = next;
        curve.points.push(CurvePoint {
            iteration,
            mean_reward: stats.mean_reward,
            mean_nodes: stats.mean_nodes,
            mean_tokens: stats.mean_tokens,
            grad_norm_pre: stats.grad_norm_pre,
            grad_norm_post: stats.grad_norm_post,
        });
        if config.checkpoint_interval > 0 && iteration % config.checkpoint_interval == 0 {
            sink.save(iteration, &params)?;
        }
    }
    sink.save(config.iterations, &params)?;
    Ok((params, curve))
}

/// Derives a named stream seed from the master seed.
pub fn stream_seed(master: u64, name: &str) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325 ^ master.rotate_left(17);
    for &b in name.as_bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Default candidate count of the random search baseline.
pub const RS_DEFAULT_CANDIDATES: usize = 48;

/// Random search baseline: sample `n_candidates` structures under the
/// uniform (all-zero) policy, apply each to every training query by forced
/// replay, and return the structure with the highest training accuracy
/// (ties break toward the lowest candidate index).
pub fn random_search_baseline(
    dataset: &[DatasetRecord],
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    n_candidates: usize,
    config: &SearchConfig,
    rng: &mut impl Rng,
) -> Result<(Skeleton, f64)> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_candidates == 0 {
        return Err(Error::EmptyDataset);
    }
    // Zero parameters induce the uniform policy whatever d_s/h are; only
    // d_c must match the backend.
    let defaults = crate::policy::PolicyDims::default();
    let dims = crate::policy::PolicyDims::new(
        backend.contract().embedding_dim,
        defaults.d_s,
        defaults.hidden,
    );
    let uniform = PolicyParameters::zeros(dims)?;

    let mut best: Option<(Skeleton, f64)> = None;
    for candidate_index in 0..n_candidates {
        let record = &dataset[candidate_index % dataset.len()];
        let mut sampler_config = config.sampler.clone();
        sampler_config.task = record.task;
        let seed: u64 = rng.gen();
        let mut episode_rng = ChaCha12Rng::seed_from_u64(seed);
        let trace = sample_skeleton(
            &record.query,
            &uniform,
            backend,
            catalog,
            &sampler_config,
            &mut episode_rng,
        )?;
        let structure = trace.skeleton;

        let mut correct = 0usize;
        for query in dataset {
            let mut replay_config = config.sampler.clone();
            replay_config.task = query.task;
            let replay_seed: u64 = rng.gen();
            let mut replay_rng = ChaCha12Rng::seed_from_u64(replay_seed);
            let (replayed, _) = forced_replay(
                &structure,
                &query.query,
                &uniform,
                backend,
                catalog,
                &replay_config,
                &mut replay_rng,
            )?;
            if reward(&query.answer, &replayed.final_answer, config.matcher) > 0 {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / dataset.len() as f64;
        let better = match &best {
            None => true,
            Some((_, best_acc)) => accuracy > *best_acc,
        };
        if better {
            best = Some((structure, accuracy));
        }
    }
    Ok(best.expect("n_candidates >= 1"))
}

/// Evaluation report: accuracy plus the per-query traces.
pub struct EvalReport {
    pub accuracy: f64,
    pub traces: Vec<EpisodeTrace>,
    pub rewards: Vec<i32>,
}

/// One episode per query (sampled with a per-query fixed seed, or greedy
/// when configured); accuracy is the fraction with reward +1.
pub fn evaluate(
    dataset: &[DatasetRecord],
    params: &PolicyParameters,
    backend: &dyn ReasoningBackend,
    catalog: &StrategyCatalog,
    config: &SearchConfig,
) -> Result<EvalReport> {
    let mut traces = Vec::with_capacity(dataset.len());
    let mut rewards = Vec::with_capacity(dataset.len());
    let mut correct = 0usize;
    let mut eval_rng = ChaCha12Rng::seed_from_u64(stream_seed(config.seed, "eval"));
    for record in dataset {
        let mut sampler_config = config.sampler.clone();
        sampler_config.task = record.task;
        sampler_config.greedy = config.greedy_eval;
        let episode_seed: u64 = eval_rng.gen();
        let mut episode_rng = ChaCha12Rng::seed_from_u64(episode_seed);
        let trace = sample_skeleton(
            &record.query,
            params,
            backend,
            catalog,
            &sampler_config,
            &mut episode_rng,
        )?;
        let r = reward(&record.answer, &trace.final_answer, config.matcher);
        if r > 0 {
            correct += 1;
        }
        rewards.push(r);
        traces.push(trace);
    }
    let accuracy = if dataset.is_empty() {
        0.0
    } else {
        correct as f64 / dataset.len() as f64
    };
    Ok(EvalReport {
        accuracy,
        traces,
        rewards,
    })
}

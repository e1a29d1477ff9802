//! Search engine for query-aware meta-reasoning skeletons.
//!
//! A skeleton is a single-source DAG whose nodes are reasoning steps and
//! whose edges carry meta-reasoning strategies. The engine samples skeletons
//! dynamically while the backend produces step-by-step reasoning text, and
//! optimizes the sampling policy (an embedding table plus a small MLP) with
//! REINFORCE against an exact-match reward.
//!
//! Modules:
//! - [`skeleton`]: the DAG representation, validation, classical-shape
//!   constructors, DOT and trace export.
//! - [`catalog`]: strategy prompt variants and guidance assembly.
//! - [`policy`]: the trainable policy with analytic log-prob gradients and
//!   checkpointing.
//! - [`sampler`]: dynamic node-by-node sampling, forced replay, episode
//!   traces.
//! - [`search`]: the REINFORCE loop, reward, random-search baseline,
//!   evaluation.
//! - [`backend`]: mock, scripted-environment, and OpenAI-compatible HTTP
//!   backends.

pub mod backend;
pub mod catalog;
pub mod dataset;
pub mod error;
pub mod linalg;
pub mod policy;
pub mod sampler;
pub mod search;
pub mod skeleton;

pub use backend::{
    BackendContract, GenerationResult, HttpBackend, HttpBackendConfig, MockBackend,
    ReasoningBackend, ScriptedBackend, ScriptedEnvSpec,
};
pub use catalog::{PromptScope, PromptVariant, StrategyCatalog, TaskKind};
pub use dataset::DatasetRecord;
pub use error::{Error, Result};
pub use policy::{
    deserialize_checkpoint, encode_decision_input, forward, gradient_check, logprob_and_grad,
    serialize_checkpoint, DecisionFeatures, GradCheckReport, PolicyDims, PolicyGradient,
    PolicyParameters, StrategyDistribution, CHECKPOINT_VERSION,
};
pub use sampler::{
    forced_replay, sample_skeleton, skeleton_log_prob, DecisionRecord, EpisodeDocument,
    EpisodeTrace, SamplerConfig, Termination,
};
pub use search::{
    batch_update, evaluate, random_search_baseline, reward, train, AnswerMatcher, BatchStats,
    CheckpointSink, CurvePoint, DirSink, EvalReport, LearningCurve, NullSink, RewardRecord,
    SearchConfig, RS_DEFAULT_CANDIDATES,
};
pub use skeleton::{Skeleton, SkeletonEdge, SkeletonTrace, StepNode, Strategy, ValidationReport};

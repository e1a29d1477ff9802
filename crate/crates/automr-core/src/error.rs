//! Crate-wide error type.

use crate::skeleton::ValidationReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("step count must be at least 1")]
    EmptyStepCount,

    #[error("parallel constructor needs at least one branch")]
    EmptyBranches,

    #[error("branch lengths must be positive (branch {0} is empty)")]
    EmptyBranch(usize),

    #[error("edge strategy must not be Zero")]
    ZeroEdgeStrategy,

    #[error("invalid tree encoding: {0}")]
    InvalidTree(String),

    #[error("skeleton failed validation: {0}")]
    InvalidSkeleton(ValidationReport),

    #[error("unknown strategy name {0:?}")]
    UnknownStrategy(String),

    #[error("catalog invariant broken: {0}")]
    InvalidCatalog(String),

    #[error("no prompt variant for {strategy} under task {task}")]
    NoMatchingVariant { strategy: String, task: String },

    #[error("guidance needs at least one non-Zero strategy")]
    EmptyGuidance,

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("invalid policy dims: {0}")]
    InvalidDims(String),

    #[error("policy produced a non-finite value ({0})")]
    NonFinite(String),

    #[error("unexpected end of checkpoint")]
    CheckpointTruncated,

    #[error("checkpoint version mismatch: expected {expected:?}, found {found:?}")]
    CheckpointVersion { expected: String, found: String },

    #[error("malformed checkpoint: {0}")]
    CheckpointMalformed(String),

    #[error("malformed trace document: {0}")]
    TraceMalformed(String),

    #[error("backend failure at node {node}: {source}")]
    BackendAtNode {
        node: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("backend generation failed: {0}")]
    Generation(String),

    #[error("backend returned an empty generation (token_count = 0)")]
    EmptyGeneration,

    #[error("http request failed after {attempts} attempts: {detail}")]
    HttpExhausted { attempts: usize, detail: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("line {line}: {message}")]
    DatasetLine { line: usize, message: String },

    #[error("checkpoint sink failed at iteration {iteration}: {source}")]
    CheckpointWrite {
        iteration: usize,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

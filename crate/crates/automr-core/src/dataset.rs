//! Query-answer records consumed by training and evaluation.

use serde::{Deserialize, Serialize};

use crate::catalog::TaskKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub query: String,
    pub answer: String,
    #[serde(default)]
    pub task: TaskKind,
}

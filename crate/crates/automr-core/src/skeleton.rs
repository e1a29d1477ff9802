//! Single-source, edge-heterogeneous DAG representation of meta-reasoning
//! skeletons.
//!
//! Nodes are reasoning steps in topological index order; edges carry the
//! strategy under which the step at the head was generated. Acyclicity is
//! structural: every edge must point from a lower index to a higher one, so
//! iterating nodes by index is always a valid topological order.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edge label: the seven meta-reasoning strategies plus the no-edge marker.
///
/// `Zero` is a sampling outcome only; it is never stored on a materialized
/// edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    Next,
    Reflect,
    Explore,
    Decompose,
    Summarize,
    Recall,
    Answer,
    Zero,
}

impl Strategy {
    pub const COUNT: usize = 8;

    pub const ALL: [Strategy; 8] = [
        Strategy::Next,
        Strategy::Reflect,
        Strategy::Explore,
        Strategy::Decompose,
        Strategy::Summarize,
        Strategy::Recall,
        Strategy::Answer,
        Strategy::Zero,
    ];

    pub const NON_ZERO: [Strategy; 7] = [
        Strategy::Next,
        Strategy::Reflect,
        Strategy::Explore,
        Strategy::Decompose,
        Strategy::Summarize,
        Strategy::Recall,
        Strategy::Answer,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Strategy> {
        Strategy::ALL.get(index).copied()
    }

    pub fn is_zero(self) -> bool {
        self == Strategy::Zero
    }

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Next => "Next",
            Strategy::Reflect => "Reflect",
            Strategy::Explore => "Explore",
            Strategy::Decompose => "Decompose",
            Strategy::Summarize => "Summarize",
            Strategy::Recall => "Recall",
            Strategy::Answer => "Answer",
            Strategy::Zero => "Zero",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

/// One reasoning step: topological index, textual content, and the content's
/// token count and embedding as reported by the backend.
///
/// Node 0 holds the query; its token count is excluded from budget
/// accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct StepNode {
    pub index: usize,
    pub content: String,
    pub token_count: usize,
    pub content_embedding: Vec<f64>,
}

impl StepNode {
    pub fn placeholder(index: usize) -> Self {
        Self {
            index,
            content: String::new(),
            token_count: 0,
            content_embedding: Vec::new(),
        }
    }
}

/// Forward edge `from -> to` labeled with a non-Zero strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeletonEdge {
    pub from: usize,
    pub to: usize,
    pub strategy: Strategy,
}

/// A meta-reasoning skeleton: nodes in topological index order plus labeled
/// forward edges, under a token budget for the generated contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton {
    pub nodes: Vec<StepNode>,
    pub edges: Vec<SkeletonEdge>,
    pub budget: usize,
}

/// A single violated invariant, with the offending node or edge.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Node at position `position` carries index `found` instead of `position`.
    IndexGap { position: usize, found: usize },
    /// Edge does not satisfy from < to.
    ForwardEdgeOrder { from: usize, to: usize },
    /// Edge endpoint outside the node range.
    DanglingEdge { from: usize, to: usize },
    /// Edge stored with the Zero label.
    ZeroEdge { from: usize, to: usize },
    /// More than one edge for the same ordered pair.
    DuplicateEdge { from: usize, to: usize },
    /// Non-source node with no incoming edge.
    UnreachableNode { index: usize },
    /// Sum of generated token counts exceeds the budget.
    BudgetExceeded { used: usize, budget: usize },
    /// No nodes at all (the source is mandatory).
    MissingSource,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IndexGap { position, found } => {
                write!(f, "node index gap at position {position} (found {found})")
            }
            Violation::ForwardEdgeOrder { from, to } => {
                write!(f, "forward-edge order at ({from},{to})")
            }
            Violation::DanglingEdge { from, to } => {
                write!(f, "dangling edge ({from},{to})")
            }
            Violation::ZeroEdge { from, to } => {
                write!(f, "zero-labeled edge at ({from},{to})")
            }
            Violation::DuplicateEdge { from, to } => {
                write!(f, "duplicate edge ({from},{to})")
            }
            Violation::UnreachableNode { index } => write!(f, "unreachable node {index}"),
            Violation::BudgetExceeded { used, budget } => {
                write!(f, "budget exceeded ({used} > {budget})")
            }
            Violation::MissingSource => write!(f, "skeleton has no source node"),
        }
    }
}

/// Outcome of [`Skeleton::validate`]: empty means the skeleton is well formed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("ok");
        }
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&msgs.join("; "))
    }
}

impl Skeleton {
    /// Empty skeleton holding only a source node with the given content.
    pub fn with_source(query: &str, token_count: usize, embedding: Vec<f64>, budget: usize) -> Self {
        Self {
            nodes: vec![StepNode {
                index: 0,
                content: query.to_string(),
                token_count,
                content_embedding: embedding,
            }],
            edges: Vec::new(),
            budget,
        }
    }

    /// Sum of token counts over the generated nodes (index >= 1).
    pub fn budget_used(&self) -> usize {
        self.nodes.iter().skip(1).map(|n| n.token_count).sum()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Edges sorted by (to, from); label set equality ignores storage order.
    pub fn sorted_edges(&self) -> Vec<SkeletonEdge> {
        let mut edges = self.edges.clone();
        edges.sort_by_key(|e| (e.to, e.from));
        edges
    }

    /// Checks every structural invariant and reports all violations found.
    /// Violations are data, not failures: the report is always produced.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.nodes.is_empty() {
            violations.push(Violation::MissingSource);
            return ValidationReport { violations };
        }
        for (position, node) in self.nodes.iter().enumerate() {
            if node.index != position {
                violations.push(Violation::IndexGap {
                    position,
                    found: node.index,
                });
            }
        }
        let n = self.nodes.len();
        let mut in_degree = vec![0usize; n];
        let mut seen = std::collections::BTreeSet::new();
        for edge in &self.edges {
            if edge.from >= n || edge.to >= n {
                violations.push(Violation::DanglingEdge {
                    from: edge.from,
                    to: edge.to,
                });
                continue;
            }
            if edge.from >= edge.to {
                violations.push(Violation::ForwardEdgeOrder {
                    from: edge.from,
                    to: edge.to,
                });
            }
            if edge.strategy.is_zero() {
                violations.push(Violation::ZeroEdge {
                    from: edge.from,
                    to: edge.to,
                });
            }
            if !seen.insert((edge.from, edge.to)) {
                violations.push(Violation::DuplicateEdge {
                    from: edge.from,
                    to: edge.to,
                });
            }
            in_degree[edge.to] += 1;
        }
        for index in 1..n {
            if in_degree[index] == 0 {
                violations.push(Violation::UnreachableNode { index });
            }
        }
        let used = self.budget_used();
        if used > self.budget {
            violations.push(Violation::BudgetExceeded {
                used,
                budget: self.budget,
            });
        }
        ValidationReport { violations }
    }

    /// Source followed by a chain of `k` steps, every edge labeled `strategy`.
    pub fn sequential(k: usize, strategy: Strategy) -> Result<Skeleton> {
        if k == 0 {
            return Err(Error::EmptyStepCount);
        }
        if strategy.is_zero() {
            return Err(Error::ZeroEdgeStrategy);
        }
        let nodes = (0..=k).map(StepNode::placeholder).collect();
        let edges = (0..k)
            .map(|i| SkeletonEdge {
                from: i,
                to: i + 1,
                strategy,
            })
            .collect();
        Ok(Skeleton {
            nodes,
            edges,
            budget: 0,
        })
    }

    /// Source fanning out to independent chains, one per branch length.
    pub fn parallel(branch_lengths: &[usize], strategy: Strategy) -> Result<Skeleton> {
        if branch_lengths.is_empty() {
            return Err(Error::EmptyBranches);
        }
        if let Some(pos) = branch_lengths.iter().position(|&len| len == 0) {
            return Err(Error::EmptyBranch(pos));
        }
        if strategy.is_zero() {
            return Err(Error::ZeroEdgeStrategy);
        }
        let total: usize = branch_lengths.iter().sum();
        let nodes = (0..=total).map(StepNode::placeholder).collect();
        let mut edges = Vec::with_capacity(total);
        let mut next = 1;
        for &len in branch_lengths {
            let mut prev = 0;
            for _ in 0..len {
                edges.push(SkeletonEdge {
                    from: prev,
                    to: next,
                    strategy,
                });
                prev = next;
                next += 1;
            }
        }
        Ok(Skeleton {
            nodes,
            edges,
            budget: 0,
        })
    }

    /// Rooted tree: `parents[i]` is the parent of node `i + 1` and must
    /// precede it in index order; `strategies[i]` labels that edge.
    pub fn tree(parents: &[usize], strategies: &[Strategy]) -> Result<Skeleton> {
        if parents.is_empty() {
            return Err(Error::EmptyStepCount);
        }
        if parents.len() != strategies.len() {
            return Err(Error::InvalidTree(format!(
                "{} parents but {} edge labels",
                parents.len(),
                strategies.len()
            )));
        }
        if strategies.iter().any(|s| s.is_zero()) {
            return Err(Error::ZeroEdgeStrategy);
        }
        let mut edges = Vec::with_capacity(parents.len());
        for (offset, (&parent, &strategy)) in parents.iter().zip(strategies).enumerate() {
            let child = offset + 1;
            if parent >= child {
                return Err(Error::InvalidTree(format!(
                    "parent {parent} of node {child} does not precede it"
                )));
            }
            edges.push(SkeletonEdge {
                from: parent,
                to: child,
                strategy,
            });
        }
        let nodes = (0..=parents.len()).map(StepNode::placeholder).collect();
        Ok(Skeleton {
            nodes,
            edges,
            budget: 0,
        })
    }

    /// DOT rendering with one graph node per step (index plus truncated
    /// content) and one labeled edge per skeleton edge. Output ordering is
    /// deterministic.
    pub fn export_dot(&self) -> Result<String> {
        let report = self.validate();
        if !report.is_ok() {
            return Err(Error::InvalidSkeleton(report));
        }
        let mut out = String::from("digraph skeleton {\n");
        out.push_str("    rankdir=LR;\n");
        for node in &self.nodes {
            let label = if node.content.is_empty() {
                format!("{}", node.index)
            } else {
                format!("{}: {}", node.index, truncate_label(&node.content, 24))
            };
            out.push_str(&format!(
                "    n{} [label=\"{}\"];\n",
                node.index,
                escape_dot(&label)
            ));
        }
        for edge in self.sorted_edges() {
            out.push_str(&format!(
                "    n{} -> n{} [label=\"{}\"];\n",
                edge.from, edge.to, edge.strategy
            ));
        }
        out.push_str("}\n");
        Ok(out)
    }

    pub fn to_trace(&self) -> SkeletonTrace {
        SkeletonTrace {
            nodes: self
                .nodes
                .iter()
                .map(|n| TraceNode {
                    index: n.index,
                    content: n.content.clone(),
                    token_count: n.token_count,
                })
                .collect(),
            edges: self.sorted_edges(),
            budget: self.budget,
            budget_used: self.budget_used(),
        }
    }

    /// Rebuilds a skeleton (without embeddings) from its trace document.
    pub fn from_trace(trace: &SkeletonTrace) -> Result<Skeleton> {
        let nodes = trace
            .nodes
            .iter()
            .map(|n| StepNode {
                index: n.index,
                content: n.content.clone(),
                token_count: n.token_count,
                content_embedding: Vec::new(),
            })
            .collect();
        let skeleton = Skeleton {
            nodes,
            edges: trace.edges.clone(),
            budget: trace.budget,
        };
        let report = skeleton.validate();
        if !report.is_ok() {
            return Err(Error::InvalidSkeleton(report));
        }
        Ok(skeleton)
    }
}

fn truncate_label(content: &str, max_chars: usize) -> String {
    let mut out = String::new();
    for (count, ch) in content.chars().enumerate() {
        if count == max_chars {
            out.push('…');
            break;
        }
        out.push(ch);
    }
    out
}

fn escape_dot(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Structure-only node record for the trace document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceNode {
    pub index: usize,
    pub content: String,
    pub token_count: usize,
}

/// Exportable skeleton document; field names are part of the wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkeletonTrace {
    pub nodes: Vec<TraceNode>,
    pub edges: Vec<SkeletonEdge>,
    pub budget: usize,
    pub budget_used: usize,
}

impl SkeletonTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::TraceMalformed(e.to_string()))
    }
}

/// Uniformly-shaped random valid structure for fuzzing: contents empty,
/// every non-source node gets at least one incoming edge, extra forward
/// edges added with probability 1/2, labels drawn from the non-Zero set.
pub fn random_structure<R: Rng>(rng: &mut R, max_nodes: usize, budget: usize) -> Skeleton {
    let n = rng.gen_range(1..=max_nodes.max(1));
    let nodes = (0..n).map(StepNode::placeholder).collect();
    let mut edges = Vec::new();
    for to in 1..n {
        let forced = rng.gen_range(0..to);
        for from in 0..to {
            if from == forced || rng.gen_bool(0.5) {
                let strategy = Strategy::NON_ZERO[rng.gen_range(0..Strategy::NON_ZERO.len())];
                edges.push(SkeletonEdge { from, to, strategy });
            }
        }
    }
    Skeleton {
        nodes,
        edges,
        budget,
    }
}

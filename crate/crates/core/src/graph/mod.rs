//! In-memory property graph.
//!
//! Nodes are keyed by a normalized `(label, name)` pair and edges by their
//! `(source, relation, target)` triple, so repeated inserts behave like set
//! union. Out/in adjacency and the name index are maintained incrementally;
//! [`PropertyGraph::audit`] recomputes them from scratch for verification.

mod persist;
mod store;
mod value;

use std::fmt;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use persist::{load, load_from_str, save, save_to_string};
pub use store::{Direction, PropertyGraph};
pub use value::{properties_from_json, PropValue, Properties};

/// Graph handle shared between the service, the pipeline and the benchmark.
/// Mutations take the write half; everything else reads.
pub type SharedGraph = Arc<RwLock<PropertyGraph>>;

pub fn shared(graph: PropertyGraph) -> SharedGraph {
    Arc::new(RwLock::new(graph))
}

/// Label used when callers do not supply one.
pub const DEFAULT_LABEL: &str = "Concept";

/// The only relation allowed to connect a node to itself.
pub const SELF_LOOP_RELATION: &str = "SAME_AS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub name: String,
    pub label: String,
    #[serde(default)]
    pub properties: Properties,
}

impl NodeRecord {
    pub fn normalized_name(&self) -> String {
        normalize_name(&self.name)
    }

    /// Property lookup where `name` and `label` resolve to the record fields.
    pub fn property(&self, key: &str) -> Option<PropValue> {
        match key {
            "name" => Some(PropValue::Str(self.name.clone())),
            "label" => Some(PropValue::Str(self.label.clone())),
            _ => self.properties.get(key).cloned(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: EdgeId,
    pub source: NodeId,
    pub target: NodeId,
    pub relation: String,
    #[serde(default)]
    pub properties: Properties,
}

impl EdgeRecord {
    pub fn property(&self, key: &str) -> Option<PropValue> {
        match key {
            "relation" => Some(PropValue::Str(self.relation.clone())),
            _ => self.properties.get(key).cloned(),
        }
    }

    /// The endpoint opposite `node`. For self-loops this is `node` itself.
    pub fn other(&self, node: NodeId) -> NodeId {
        if self.source == node {
            self.target
        } else {
            self.source
        }
    }
}

/// Counts of genuinely new or removed items produced by a write.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationSummary {
    pub nodes_created: usize,
    pub edges_created: usize,
    pub nodes_deleted: usize,
    pub edges_deleted: usize,
}

impl MutationSummary {
    pub fn merge(&mut self, other: MutationSummary) {
        self.nodes_created += other.nodes_created;
        self.edges_created += other.edges_created;
        self.nodes_deleted += other.nodes_deleted;
        self.edges_deleted += other.edges_deleted;
    }

    pub fn is_empty(&self) -> bool {
        *self == MutationSummary::default()
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("node name is empty")]
    EmptyName,
    #[error("invalid property value: {0}")]
    InvalidPropertyValue(String),
    #[error("invalid relation name {0:?}: expected upper snake case")]
    InvalidRelation(String),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("unknown edge {0}")]
    UnknownEdge(EdgeId),
    #[error("self-loop not permitted for relation {0}")]
    ForbiddenSelfLoop(String),
    #[error("I/O failure: {0}")]
    IoFailure(String),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

/// Lowercases and collapses internal whitespace; the key used for node identity.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Relation names are upper snake case: `PREREQUISITE_OF`, `SAME_AS`.
pub fn is_valid_relation(relation: &str) -> bool {
    let mut chars = relation.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

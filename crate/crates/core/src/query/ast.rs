use serde::Serialize;

use crate::graph::PropValue;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Query {
    pub clauses: Vec<Clause>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "clause", rename_all = "snake_case")]
pub enum Clause {
    Match {
        pattern: Pattern,
        predicate: Option<Predicate>,
    },
    Create {
        pattern: Pattern,
    },
    /// Node-only merge: match on label and properties, create if absent.
    Merge {
        node: NodePattern,
    },
    Delete {
        variable: String,
        detach: bool,
    },
    Return {
        projections: Vec<Projection>,
        limit: Option<u64>,
    },
}

/// A single linear path: a node followed by zero or more (edge, node) hops.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pattern {
    pub start: NodePattern,
    pub hops: Vec<(RelPattern, NodePattern)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct NodePattern {
    pub variable: Option<String>,
    pub label: Option<String>,
    /// Property equality constraints, in source order.
    pub properties: Vec<(String, PropValue)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelDirection {
    /// `-[..]->`
    Outgoing,
    /// `<-[..]-`
    Incoming,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelPattern {
    pub variable: Option<String>,
    pub relation: Option<String>,
    pub direction: RelDirection,
}

/// Conjunction of comparisons.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Predicate {
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<>")]
    Ne,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub left: Operand,
    pub op: CompareOp,
    pub right: Operand,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Operand {
    Property { variable: String, key: String },
    Literal(PropValue),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Variable(String),
    Property { variable: String, key: String },
}

impl Projection {
    pub fn column_name(&self) -> String {
        match self {
            Projection::Variable(v) => v.clone(),
            Projection::Property { variable, key } => format!("{variable}.{key}"),
        }
    }

    pub fn variable(&self) -> &str {
        match self {
            Projection::Variable(v) | Projection::Property { variable: v, .. } => v,
        }
    }
}

impl Pattern {
    pub fn node(node: NodePattern) -> Self {
        Pattern {
            start: node,
            hops: Vec::new(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodePattern> {
        std::iter::once(&self.start).chain(self.hops.iter().map(|(_, n)| n))
    }

    pub fn rels(&self) -> impl Iterator<Item = &RelPattern> {
        self.hops.iter().map(|(r, _)| r)
    }
}

impl Clause {
    pub fn is_write(&self) -> bool {
        matches!(
            self,
            Clause::Create { .. } | Clause::Merge { .. } | Clause::Delete { .. }
        )
    }
}

impl Query {
    /// True for queries that may mutate the graph.
    pub fn is_write(&self) -> bool {
        self.clauses.iter().any(Clause::is_write)
    }
}

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_name, GraphError, MutationSummary, NodeId, Properties, PropertyGraph, DEFAULT_LABEL};

/// A relation endpoint: a position in the payload's entity list or the name
/// of a node already in the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Endpoint {
    Index(usize),
    Name(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewRelation {
    pub head: Endpoint,
    pub relation: String,
    pub tail: Endpoint,
}

impl NewRelation {
    pub fn new(head: Endpoint, relation: impl Into<String>, tail: Endpoint) -> Self {
        Self {
            head,
            relation: relation.into(),
            tail,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct UpdatePayload {
    pub entities: Vec<String>,
    pub relations: Vec<NewRelation>,
}

impl UpdatePayload {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty() && self.relations.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UpdateError {
    #[error("entity name is empty")]
    EmptyName,
    #[error("relation endpoint {0} matches no entity or node")]
    UnknownEndpoint(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Adds the payload's entities and relations to the graph with set-union
/// semantics: existing nodes (by name, any label) and edges are reused, so
/// applying the same payload twice changes nothing the second time. All or
/// nothing: on error the graph is left untouched.
pub fn apply_update(graph: &mut PropertyGraph, payload: &UpdatePayload) -> Result<MutationSummary, UpdateError> {
    if payload.entities.iter().any(|e| e.trim().is_empty()) {
        return Err(UpdateError::EmptyName);
    }
    graph.transaction(|g| {
        let mut summary = MutationSummary::default();
        let mut ids: Vec<NodeId> = Vec::with_capacity(payload.entities.len());
        for name in &payload.entities {
            let id = match g.find_by_name(name) {
                Some(id) => id,
                None => {
                    summary.nodes_created += 1;
                    g.insert_node(name, DEFAULT_LABEL, Properties::new())?
                }
            };
            ids.push(id);
        }
        let resolve = |g: &PropertyGraph, endpoint: &Endpoint| -> Result<NodeId, UpdateError> {
            match endpoint {
                Endpoint::Index(i) => ids
                    .get(*i)
                    .copied()
                    .ok_or_else(|| UpdateError::UnknownEndpoint(format!("#{i}"))),
                Endpoint::Name(name) => {
                    let key = normalize_name(name);
                    payload
                        .entities
                        .iter()
                        .position(|e| normalize_name(e) == key)
                        .map(|i| ids[i])
                        .or_else(|| g.find_by_name(name))
                        .ok_or_else(|| UpdateError::UnknownEndpoint(name.clone()))
                }
            }
        };
        for rel in &payload.relations {
            let head = resolve(g, &rel.head)?;
            let tail = resolve(g, &rel.tail)?;
            let (_, created) = g.upsert_edge(head, &rel.relation, tail, Properties::new())?;
            if created {
                summary.edges_created += 1;
            }
        }
        Ok(summary)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> PropertyGraph {
        let mut g = PropertyGraph::new();
        g.insert_node("Deep Learning", "Field", Properties::new()).unwrap();
        g
    }

    fn payload() -> UpdatePayload {
        UpdatePayload {
            entities: vec!["Transformers".into()],
            relations: vec![NewRelation::new(
                Endpoint::Name("Transformers".into()),
                "SUBTOPIC_OF",
                Endpoint::Name("deep learning".into()),
            )],
        }
    }

    #[test]
    fn union_then_idempotent() {
        let mut g = fixture();
        let first = apply_update(&mut g, &payload()).unwrap();
        assert_eq!((first.nodes_created, first.edges_created), (1, 1));
        let snapshot = g.clone();
        let second = apply_update(&mut g, &payload()).unwrap();
        assert!(second.is_empty());
        assert_eq!(g, snapshot);
    }

    #[test]
    fn unknown_endpoint_leaves_graph_alone() {
        let mut g = fixture();
        let mut p = payload();
        p.relations[0].tail = Endpoint::Name("Nowhere".into());
        let before = g.clone();
        assert_eq!(apply_update(&mut g, &p), Err(UpdateError::UnknownEndpoint("Nowhere".into())));
        assert_eq!(g, before);
        p.relations[0].tail = Endpoint::Index(4);
        assert!(matches!(apply_update(&mut g, &p), Err(UpdateError::UnknownEndpoint(_))));
    }

    #[test]
    fn empty_name_rejected() {
        let mut g = fixture();
        let p = UpdatePayload { entities: vec![" ".into()], relations: vec![] };
        assert_eq!(apply_update(&mut g, &p), Err(UpdateError::EmptyName));
    }

    #[test]
    fn endpoint_json_shape() {
        let rel: NewRelation = serde_json::from_str(r#"{"head":0,"relation":"R","tail":"X"}"#).unwrap();
        assert_eq!(rel.head, Endpoint::Index(0));
        assert_eq!(rel.tail, Endpoint::Name("X".into()));
    }
}

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::value::check_properties;
use super::{
    is_valid_relation, normalize_name, EdgeId, EdgeRecord, GraphError, MutationSummary, NodeId, NodeRecord,
    Properties, SELF_LOOP_RELATION,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Out,
    In,
    Both,
}

#[derive(Debug, Clone, Default)]
pub struct PropertyGraph {
    nodes: BTreeMap<NodeId, NodeRecord>,
    edges: BTreeMap<EdgeId, EdgeRecord>,
    out_index: BTreeMap<NodeId, BTreeSet<EdgeId>>,
    in_index: BTreeMap<NodeId, BTreeSet<EdgeId>>,
    // (label, normalized name) -> node
    name_index: HashMap<(String, String), NodeId>,
    triple_index: HashMap<(NodeId, String, NodeId), EdgeId>,
    next_node: u64,
    next_edge: u64,
    revision: u64,
    stamp: u64,
}

/// Structural equality: same node and edge records, ids included.
impl PartialEq for PropertyGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.edges == other.edges
    }
}

impl Eq for PropertyGraph {}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Bumped on every mutation that adds or removes a node or edge.
    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Changes on every mutation and is never reused within the process, so
    /// two graphs with the same stamp hold the same content. Unlike
    /// [`revision`](Self::revision) it stays meaningful across diverging clones.
    pub fn stamp(&self) -> u64 {
        self.stamp
    }

    fn touch(&mut self) {
        static NEXT_STAMP: AtomicU64 = AtomicU64::new(1);
        self.revision += 1;
        self.stamp = NEXT_STAMP.fetch_add(1, Ordering::Relaxed);
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.nodes.get(&id)
    }

    pub fn edge(&self, id: EdgeId) -> Option<&EdgeRecord> {
        self.edges.get(&id)
    }

    pub fn contains_node(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    /// Nodes in id order.
    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    /// Edges in id order.
    pub fn edges(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.edges.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.keys().copied()
    }

    fn require_node(&self, id: NodeId) -> Result<&NodeRecord, GraphError> {
        self.nodes.get(&id).ok_or(GraphError::UnknownNode(id))
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &EdgeRecord> {
        self.out_index
            .get(&id)
            .into_iter()
            .flatten()
            .map(|e| &self.edges[e])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &EdgeRecord> {
        self.in_index
            .get(&id)
            .into_iter()
            .flatten()
            .map(|e| &self.edges[e])
    }

    /// Exact lookup by label and (normalized) name.
    pub fn find_node(&self, name: &str, label: &str) -> Option<NodeId> {
        self.name_index
            .get(&(label.to_string(), normalize_name(name)))
            .copied()
    }

    /// Lookup by normalized name across all labels; the smallest id wins
    /// when several labels share the name.
    pub fn find_by_name(&self, name: &str) -> Option<NodeId> {
        let key = normalize_name(name);
        self.name_index
            .iter()
            .filter(|((_, n), _)| *n == key)
            .map(|(_, id)| *id)
            .min()
    }

    pub fn find_edge(&self, source: NodeId, relation: &str, target: NodeId) -> Option<EdgeId> {
        self.triple_index
            .get(&(source, relation.to_string(), target))
            .copied()
    }

    /// Inserts a node or returns the id of the node already holding the same
    /// normalized name under the same label.
    pub fn insert_node(
        &mut self,
        name: &str,
        label: &str,
        properties: Properties,
    ) -> Result<NodeId, GraphError> {
        self.upsert_node(name, label, properties).map(|(id, _)| id)
    }

    /// Like [`insert_node`](Self::insert_node) but also reports whether a node was created.
    pub fn upsert_node(
        &mut self,
        name: &str,
        label: &str,
        properties: Properties,
    ) -> Result<(NodeId, bool), GraphError> {
        let trimmed = name.trim();
        if trimmed.is_empty() {
            return Err(GraphError::EmptyName);
        }
        check_properties(&properties)?;
        if let Some(id) = self.find_node(trimmed, label) {
            return Ok((id, false));
        }
        let id = NodeId(self.next_node);
        self.attach_node(NodeRecord {
            id,
            name: trimmed.to_string(),
            label: label.to_string(),
            properties,
        });
        Ok((id, true))
    }

    pub fn insert_edge(
        &mut self,
        source: NodeId,
        relation: &str,
        target: NodeId,
        properties: Properties,
    ) -> Result<EdgeId, GraphError> {
        self.upsert_edge(source, relation, target, properties)
            .map(|(id, _)| id)
    }

    pub fn upsert_edge(
        &mut self,
        source: NodeId,
        relation: &str,
        target: NodeId,
        properties: Properties,
    ) -> Result<(EdgeId, bool), GraphError> {
        self.require_node(source)?;
        self.require_node(target)?;
        if !is_valid_relation(relation) {
            return Err(GraphError::InvalidRelation(relation.to_string()));
        }
        if source == target && relation != SELF_LOOP_RELATION {
            return Err(GraphError::ForbiddenSelfLoop(relation.to_string()));
        }
        check_properties(&properties)?;
        if let Some(id) = self.find_edge(source, relation, target) {
            return Ok((id, false));
        }
        let id = EdgeId(self.next_edge);
        self.attach_edge(EdgeRecord {
            id,
            source,
            target,
            relation: relation.to_string(),
            properties,
        });
        Ok((id, true))
    }

    /// Removes a node and every incident edge. Returns the number of edges removed.
    pub fn delete_node(&mut self, id: NodeId) -> Result<usize, GraphError> {
        let node = self.require_node(id)?.clone();
        let incident: BTreeSet<EdgeId> = self
            .out_index
            .get(&id)
            .into_iter()
            .chain(self.in_index.get(&id))
            .flatten()
            .copied()
            .collect();
        for edge in &incident {
            self.detach_edge(*edge);
        }
        self.nodes.remove(&id);
        self.out_index.remove(&id);
        self.in_index.remove(&id);
        self.name_index
            .remove(&(node.label.clone(), node.normalized_name()));
        self.touch();
        Ok(incident.len())
    }

    pub fn delete_edge(&mut self, id: EdgeId) -> Result<EdgeRecord, GraphError> {
        if !self.edges.contains_key(&id) {
            return Err(GraphError::UnknownEdge(id));
        }
        let edge = self.detach_edge(id);
        self.touch();
        Ok(edge)
    }

    /// Neighbors ordered by relation, then neighbor normalized name, then edge id.
    pub fn neighbors(
        &self,
        id: NodeId,
        direction: Direction,
        relation: Option<&str>,
    ) -> Result<Vec<(&EdgeRecord, &NodeRecord)>, GraphError> {
        self.require_node(id)?;
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let outgoing = matches!(direction, Direction::Out | Direction::Both);
        let incoming = matches!(direction, Direction::In | Direction::Both);
        let candidates = outgoing
            .then(|| self.out_edges(id))
            .into_iter()
            .flatten()
            .chain(incoming.then(|| self.in_edges(id)).into_iter().flatten());
        for edge in candidates {
            if relation.is_some_and(|r| r != edge.relation) || !seen.insert(edge.id) {
                continue;
            }
            out.push((edge, &self.nodes[&edge.other(id)]));
        }
        out.sort_by_cached_key(|(e, n)| (e.relation.clone(), n.normalized_name(), e.id));
        Ok(out)
    }

    /// Undirected neighbor set (self-loops excluded), optionally restricted
    /// to a relation predicate.
    pub fn undirected_neighbors(
        &self,
        id: NodeId,
        mut keep: impl FnMut(&str) -> bool,
    ) -> BTreeSet<NodeId> {
        self.out_edges(id)
            .chain(self.in_edges(id))
            .filter(|e| keep(&e.relation))
            .map(|e| e.other(id))
            .filter(|n| *n != id)
            .collect()
    }

    /// Recomputes every derived index from the primary records and reports
    /// each discrepancy with the maintained ones. Empty means consistent.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut out_index: BTreeMap<NodeId, BTreeSet<EdgeId>> = BTreeMap::new();
        let mut in_index: BTreeMap<NodeId, BTreeSet<EdgeId>> = BTreeMap::new();
        let mut triples = HashMap::new();
        for edge in self.edges.values() {
            for end in [edge.source, edge.target] {
                if !self.nodes.contains_key(&end) {
                    problems.push(format!("edge {} has dangling endpoint {}", edge.id, end));
                }
            }
            out_index.entry(edge.source).or_default().insert(edge.id);
            in_index.entry(edge.target).or_default().insert(edge.id);
            if triples
                .insert((edge.source, edge.relation.clone(), edge.target), edge.id)
                .is_some()
            {
                problems.push(format!("duplicate triple on edge {}", edge.id));
            }
        }
        let mut names = HashMap::new();
        for node in self.nodes.values() {
            if names
                .insert((node.label.clone(), node.normalized_name()), node.id)
                .is_some()
            {
                problems.push(format!("duplicate normalized name on node {}", node.id));
            }
        }
        let strip = |m: &BTreeMap<NodeId, BTreeSet<EdgeId>>| -> BTreeMap<NodeId, BTreeSet<EdgeId>> {
            m.iter()
                .filter(|(_, s)| !s.is_empty())
                .map(|(k, s)| (*k, s.clone()))
                .collect()
        };
        if strip(&self.out_index) != out_index {
            problems.push("out-edge index out of sync".into());
        }
        if strip(&self.in_index) != in_index {
            problems.push("in-edge index out of sync".into());
        }
        if self.name_index != names {
            problems.push("name index out of sync".into());
        }
        if self.triple_index != triples {
            problems.push("triple index out of sync".into());
        }
        if let Some(max) = self.nodes.keys().next_back() {
            if max.0 >= self.next_node {
                problems.push("node id counter behind existing ids".into());
            }
        }
        if let Some(max) = self.edges.keys().next_back() {
            if max.0 >= self.next_edge {
                problems.push("edge id counter behind existing ids".into());
            }
        }
        problems
    }

    /// SHA-256 over the canonical file serialization.
    pub fn fingerprint(&self) -> String {
        let text = super::save_to_string(self);
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    // Used by the loader, which preserves ids; validation happens there.
    pub(crate) fn restore_node(&mut self, node: NodeRecord) {
        self.attach_node(node);
    }

    pub(crate) fn restore_edge(&mut self, edge: EdgeRecord) {
        self.attach_edge(edge);
    }

    fn attach_node(&mut self, node: NodeRecord) {
        let id = node.id;
        self.next_node = self.next_node.max(id.0 + 1);
        self.name_index
            .insert((node.label.clone(), node.normalized_name()), id);
        self.nodes.insert(id, node);
        self.touch();
    }

    fn attach_edge(&mut self, edge: EdgeRecord) {
        let id = edge.id;
        self.next_edge = self.next_edge.max(id.0 + 1);
        self.out_index.entry(edge.source).or_default().insert(id);
        self.in_index.entry(edge.target).or_default().insert(id);
        self.triple_index
            .insert((edge.source, edge.relation.clone(), edge.target), id);
        self.edges.insert(id, edge);
        self.touch();
    }

    fn detach_edge(&mut self, id: EdgeId) -> EdgeRecord {
        let edge = self.edges.remove(&id).expect("edge present");
        if let Some(set) = self.out_index.get_mut(&edge.source) {
            set.remove(&id);
        }
        if let Some(set) = self.in_index.get_mut(&edge.target) {
            set.remove(&id);
        }
        self.triple_index
            .remove(&(edge.source, edge.relation.clone(), edge.target));
        edge
    }

    /// Runs `f` against a copy and commits only if it succeeds.
    pub fn transaction<T, E>(
        &mut self,
        f: impl FnOnce(&mut PropertyGraph) -> Result<T, E>,
    ) -> Result<T, E> {
        let mut scratch = self.clone();
        let value = f(&mut scratch)?;
        *self = scratch;
        Ok(value)
    }

    /// Set union with `other`: nodes match by label and normalized name,
    /// edges by triple. Properties of existing items are kept. All or nothing.
    pub fn merge(&mut self, other: &PropertyGraph) -> Result<MutationSummary, GraphError> {
        self.transaction(|g| {
            let mut summary = MutationSummary::default();
            let mut ids = BTreeMap::new();
            for node in other.nodes() {
                let (id, created) = g.upsert_node(&node.name, &node.label, node.properties.clone())?;
                summary.nodes_created += usize::from(created);
                ids.insert(node.id, id);
            }
            for edge in other.edges() {
                let (_, created) =
                    g.upsert_edge(ids[&edge.source], &edge.relation, ids[&edge.target], edge.properties.clone())?;
                summary.edges_created += usize::from(created);
            }
            Ok(summary)
        })
    }
}

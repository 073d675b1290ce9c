//! Deterministic graph algorithms behind the six predefined tasks.
//!
//! Every kernel is a pure function of the graph and its arguments.

mod search;
mod structure;

use std::collections::BTreeSet;
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalize_name, EdgeId, EdgeRecord, NodeId, PropertyGraph};
use crate::task::TaskKind;

pub use search::{
    path_search, prerequisite_prediction, relation_judgment, HopDirection, Judgment, PathResult,
    Prerequisite, Prerequisites, WitnessHop, DEFAULT_PREREQUISITE_RELATION, MAX_JUDGMENT_HOPS,
};
pub use structure::{
    concept_clustering, idea_context, subgraph_completion, Cluster, Completion, IdeaContext,
    RelationFilter, Suggestion, IDEA_TRIPLE_CAP, MAX_PROPAGATION_ROUNDS,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn require(graph: &PropertyGraph, id: NodeId) -> Result<(), KernelError> {
    if graph.contains_node(id) {
        Ok(())
    } else {
        Err(KernelError::UnknownNode(id))
    }
}

/// Edges leaving (`forward`) or entering `node`, ordered by the normalized
/// name of the node at the other end. Self-loops are skipped.
fn sorted_steps<'g>(
    graph: &'g PropertyGraph,
    node: NodeId,
    forward: bool,
    relation: Option<&str>,
) -> Vec<&'g EdgeRecord> {
    let edges: Box<dyn Iterator<Item = &EdgeRecord>> = if forward {
        Box::new(graph.out_edges(node))
    } else {
        Box::new(graph.in_edges(node))
    };
    let mut steps: Vec<(String, NodeId, &EdgeRecord)> = edges
        .filter(|e| e.source != e.target && relation.is_none_or(|r| r == e.relation))
        .map(|e| {
            let other = e.other(node);
            let name = graph.node(other).map(|n| n.normalized_name()).unwrap_or_default();
            (name, other, e)
        })
        .collect();
    steps.sort_by(|x, y| {
        (&x.0, x.1, &x.2.relation, x.2.id).cmp(&(&y.0, y.1, &y.2.relation, y.2.id))
    });
    steps.into_iter().map(|(_, _, e)| e).collect()
}

/// Tunable kernel arguments that do not come from the user's text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelParams {
    pub max_hops: usize,
    pub prerequisite_relation: String,
    pub path_relation: Option<String>,
    pub cluster_relations: RelationFilter,
    pub completion_k: usize,
    pub idea_radius: usize,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            max_hops: 1,
            prerequisite_relation: DEFAULT_PREREQUISITE_RELATION.to_string(),
            path_relation: None,
            cluster_relations: RelationFilter::All,
            completion_k: 3,
            idea_radius: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelPayload {
    RelationJudgment { a: NodeId, b: NodeId, judgment: Judgment },
    PrerequisitePrediction(Prerequisites),
    PathSearching(PathResult),
    ConceptClustering { clusters: Vec<Cluster> },
    SubgraphCompletion(Completion),
    IdeaHamster(IdeaContext),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

impl Provenance {
    fn new(nodes: impl IntoIterator<Item = NodeId>, edges: impl IntoIterator<Item = EdgeId>) -> Self {
        Self {
            nodes: nodes.into_iter().collect::<BTreeSet<_>>().into_iter().collect(),
            edges: edges.into_iter().collect::<BTreeSet<_>>().into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelResult {
    pub kind: TaskKind,
    pub payload: KernelPayload,
    pub provenance: Provenance,
    pub warnings: Vec<String>,
}

/// Runs the kernel for `kind` with `concepts` as its node arguments, in order.
pub fn run_kernel(
    graph: &PropertyGraph,
    kind: TaskKind,
    concepts: &[NodeId],
    params: &KernelParams,
) -> Result<KernelResult, KernelError> {
    if concepts.len() < kind.required_concepts() {
        return Err(KernelError::InvalidArgument(format!(
            "{kind} needs {} concepts, got {}",
            kind.required_concepts(),
            concepts.len()
        )));
    }
    let mut warnings = Vec::new();
    let (payload, provenance) = match kind {
        TaskKind::RelationJudgment => {
            let (a, b) = (concepts[0], concepts[1]);
            let judgment = relation_judgment(graph, a, b, params.max_hops)?;
            let hops = judgment.witness.iter().flatten();
            let provenance = Provenance::new(
                [a, b].into_iter().chain(hops.clone().map(|h| h.to)),
                hops.map(|h| h.edge),
            );
            (KernelPayload::RelationJudgment { a, b, judgment }, provenance)
        }
        TaskKind::PrerequisitePrediction => {
            let result = prerequisite_prediction(graph, concepts[0], &params.prerequisite_relation)?;
            if result.cycle_detected {
                warnings.push(format!(
                    "cycle detected among {} edges above {}",
                    result.relation,
                    graph.node(result.target).map(|n| n.name.as_str()).unwrap_or_default()
                ));
            }
            let provenance = Provenance::new(
                std::iter::once(result.target).chain(result.prerequisites.iter().map(|p| p.node)),
                result.edges.iter().copied(),
            );
            (KernelPayload::PrerequisitePrediction(result), provenance)
        }
        TaskKind::PathSearching => {
            let result = path_search(graph, concepts[0], concepts[1], params.path_relation.as_deref())?;
            let provenance = Provenance::new(
                [result.start, result.goal].into_iter().chain(result.nodes.iter().copied()),
                result.edges.iter().copied(),
            );
            (KernelPayload::PathSearching(result), provenance)
        }
        TaskKind::ConceptClustering => {
            let clusters = concept_clustering(graph, &params.cluster_relations)?;
            let provenance = Provenance::new(clusters.iter().flat_map(|c| c.members.iter().copied()), []);
            (KernelPayload::ConceptClustering { clusters }, provenance)
        }
        TaskKind::SubgraphCompletion => {
            let result = subgraph_completion(graph, concepts, params.completion_k)?;
            let provenance = Provenance::new(result.seeds.iter().copied(), result.induced_edges.iter().copied());
            (KernelPayload::SubgraphCompletion(result), provenance)
        }
        TaskKind::IdeaHamster => {
            let result = idea_context(graph, concepts, params.idea_radius)?;
            let ends = result
                .edges
                .iter()
                .filter_map(|id| graph.edge(*id))
                .flat_map(|e| [e.source, e.target]);
            let provenance = Provenance::new(result.seeds.iter().copied().chain(ends), result.edges.iter().copied());
            (KernelPayload::IdeaHamster(result), provenance)
        }
        TaskKind::FreeForm => {
            return Err(KernelError::InvalidArgument("free-form questions have no kernel".into()))
        }
    };
    Ok(KernelResult {
        kind,
        payload,
        provenance,
        warnings,
    })
}

fn node_name(graph: &PropertyGraph, id: NodeId) -> String {
    graph
        .node(id)
        .map(|n| n.name.clone())
        .unwrap_or_else(|| format!("<{id}>"))
}

impl KernelResult {
    /// Checks the result against its task's output schema and the graph it
    /// was computed on. Returns the first problem found.
    pub fn validate(&self, graph: &PropertyGraph) -> Result<(), String> {
        for n in &self.provenance.nodes {
            if !graph.contains_node(*n) {
                return Err(format!("provenance node {n} does not exist"));
            }
        }
        for e in &self.provenance.edges {
            if graph.edge(*e).is_none() {
                return Err(format!("provenance edge {e} does not exist"));
            }
        }
        let expected = match &self.payload {
            KernelPayload::RelationJudgment { .. } => TaskKind::RelationJudgment,
            KernelPayload::PrerequisitePrediction(_) => TaskKind::PrerequisitePrediction,
            KernelPayload::PathSearching(_) => TaskKind::PathSearching,
            KernelPayload::ConceptClustering { .. } => TaskKind::ConceptClustering,
            KernelPayload::SubgraphCompletion(_) => TaskKind::SubgraphCompletion,
            KernelPayload::IdeaHamster(_) => TaskKind::IdeaHamster,
        };
        if expected != self.kind {
            return Err(format!("payload is for {expected}, result claims {}", self.kind));
        }
        match &self.payload {
            KernelPayload::RelationJudgment { a, b, judgment } => check_judgment(graph, *a, *b, judgment),
            KernelPayload::PrerequisitePrediction(p) => check_prerequisites(p),
            KernelPayload::PathSearching(p) => check_path(graph, p),
            KernelPayload::ConceptClustering { clusters } => check_partition(graph, clusters),
            KernelPayload::SubgraphCompletion(c) => check_completion(graph, c),
            KernelPayload::IdeaHamster(ctx) => {
                if ctx.edges.len() > IDEA_TRIPLE_CAP || ctx.edges.len() > ctx.total_edges {
                    return Err("idea context exceeds its triple cap".into());
                }
                if !ctx.text.starts_with("SEEDS:") {
                    return Err("idea context text lacks its SEEDS header".into());
                }
                Ok(())
            }
        }
    }

    /// Plain-text rendering handed to the reasoning and response stages.
    pub fn render(&self, graph: &PropertyGraph) -> String {
        let name = |id: NodeId| node_name(graph, id);
        let mut out = format!("TASK: {}\n", self.kind);
        match &self.payload {
            KernelPayload::RelationJudgment { a, b, judgment } => {
                let _ = writeln!(
                    out,
                    "CONNECTED: {} ({} / {})",
                    if judgment.connected { "yes" } else { "no" },
                    name(*a),
                    name(*b)
                );
                for hop in judgment.witness.iter().flatten() {
                    let edge = graph.edge(hop.edge);
                    if let Some(e) = edge {
                        let _ = writeln!(out, "{} -{}-> {}", name(e.source), e.relation, name(e.target));
                    }
                }
            }
            KernelPayload::PrerequisitePrediction(p) => {
                let _ = writeln!(out, "PREREQUISITES OF {} VIA {}:", name(p.target), p.relation);
                if p.prerequisites.is_empty() {
                    out.push_str("(none)\n");
                }
                for (i, pre) in p.prerequisites.iter().enumerate() {
                    let _ = writeln!(out, "{}. {} (distance {})", i + 1, pre.name, pre.distance);
                }
            }
            KernelPayload::PathSearching(p) => {
                if p.nodes.is_empty() {
                    let _ = writeln!(out, "PATH: none from {} to {}", name(p.start), name(p.goal));
                } else {
                    let names: Vec<String> = p.nodes.iter().map(|n| name(*n)).collect();
                    let _ = writeln!(out, "PATH: {}", names.join(" -> "));
                }
            }
            KernelPayload::ConceptClustering { clusters } => {
                for (i, c) in clusters.iter().enumerate() {
                    let names: Vec<String> = c.members.iter().map(|n| name(*n)).collect();
                    let _ = writeln!(out, "CLUSTER {} [{}]: {}", i + 1, c.label, names.join(", "));
                }
                if clusters.is_empty() {
                    out.push_str("(no concepts)\n");
                }
            }
            KernelPayload::SubgraphCompletion(c) => {
                out.push_str("EXISTING LINKS:\n");
                for id in &c.induced_edges {
                    if let Some(e) = graph.edge(*id) {
                        let _ = writeln!(out, "{} -{}-> {}", name(e.source), e.relation, name(e.target));
                    }
                }
                out.push_str("SUGGESTED LINKS:\n");
                for s in &c.suggestions {
                    let _ = writeln!(
                        out,
                        "{} -- {} (common neighbors {}, jaccard {:.4})",
                        s.a_name, s.b_name, s.common_neighbors, s.jaccard
                    );
                }
            }
            KernelPayload::IdeaHamster(ctx) => out.push_str(&ctx.text),
        }
        for w in &self.warnings {
            let _ = writeln!(out, "WARNING: {w}");
        }
        out
    }

    /// Names of the concepts the result reports, as opposed to its inputs.
    pub fn output_names(&self, graph: &PropertyGraph) -> Vec<String> {
        let ids: Vec<NodeId> = match &self.payload {
            KernelPayload::RelationJudgment { judgment, .. } => {
                judgment.witness.iter().flatten().map(|h| h.to).collect()
            }
            KernelPayload::PrerequisitePrediction(p) => p.prerequisites.iter().map(|p| p.node).collect(),
            KernelPayload::PathSearching(p) => p.nodes.clone(),
            KernelPayload::ConceptClustering { clusters } => {
                return clusters.iter().map(|c| c.label.clone()).collect()
            }
            KernelPayload::SubgraphCompletion(c) => {
                c.suggestions.iter().flat_map(|s| [s.a, s.b]).collect()
            }
            KernelPayload::IdeaHamster(ctx) => ctx.seeds.clone(),
        };
        let mut seen = BTreeSet::new();
        ids.into_iter()
            .map(|id| node_name(graph, id))
            .filter(|n| seen.insert(normalize_name(n)))
            .collect()
    }
}

fn check_judgment(graph: &PropertyGraph, a: NodeId, b: NodeId, j: &Judgment) -> Result<(), String> {
    match (&j.witness, j.connected) {
        (None, false) => return Ok(()),
        (Some(_), true) => {}
        _ => return Err("connected flag disagrees with witness".into()),
    }
    let hops = j.witness.as_ref().expect("checked above");
    let mut at = a;
    for hop in hops {
        let edge = graph.edge(hop.edge).ok_or("witness edge missing")?;
        let (from, to) = match hop.direction {
            HopDirection::Forward => (edge.source, edge.target),
            HopDirection::Backward => (edge.target, edge.source),
        };
        if from != at || hop.from != at || hop.to != to {
            return Err("witness is not a contiguous walk".into());
        }
        if hop.direction != hops[0].direction {
            return Err("witness mixes directions".into());
        }
        at = to;
    }
    if at != b {
        return Err("witness does not end at the second concept".into());
    }
    Ok(())
}

fn check_prerequisites(p: &Prerequisites) -> Result<(), String> {
    if p.prerequisites.iter().any(|x| x.node == p.target || x.distance == 0) {
        return Err("target listed as its own prerequisite".into());
    }
    let keys: Vec<(usize, String)> =
        p.prerequisites.iter().map(|x| (x.distance, normalize_name(&x.name))).collect();
    if keys.windows(2).any(|w| w[0] > w[1]) {
        return Err("prerequisites out of order".into());
    }
    Ok(())
}

fn check_path(graph: &PropertyGraph, p: &PathResult) -> Result<(), String> {
    if p.nodes.is_empty() {
        return if p.edges.is_empty() { Ok(()) } else { Err("edges without nodes".into()) };
    }
    if p.nodes.first() != Some(&p.start) || p.nodes.last() != Some(&p.goal) {
        return Err("path does not join start and goal".into());
    }
    if p.nodes.len() != p.edges.len() + 1 {
        return Err("path node and edge counts disagree".into());
    }
    for (i, id) in p.edges.iter().enumerate() {
        let e = graph.edge(*id).ok_or("path edge missing")?;
        if e.source != p.nodes[i] || e.target != p.nodes[i + 1] {
            return Err(format!("path edge {id} does not link consecutive nodes"));
        }
        if p.relation.as_ref().is_some_and(|r| *r != e.relation) {
            return Err(format!("path edge {id} has the wrong relation"));
        }
    }
    Ok(())
}

fn check_partition(graph: &PropertyGraph, clusters: &[Cluster]) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for c in clusters {
        if c.members.is_empty() || c.members.windows(2).any(|w| w[0] >= w[1]) {
            return Err("cluster members must be non-empty and sorted".into());
        }
        for m in &c.members {
            if !seen.insert(*m) {
                return Err(format!("node {m} appears in two clusters"));
            }
        }
        if !c.members.iter().any(|m| graph.node(*m).is_some_and(|n| n.name == c.label)) {
            return Err("cluster label is not a member name".into());
        }
    }
    if seen.len() != graph.node_count() {
        return Err("clusters do not cover every node".into());
    }
    Ok(())
}

fn check_completion(graph: &PropertyGraph, c: &Completion) -> Result<(), String> {
    let seeds: BTreeSet<NodeId> = c.seeds.iter().copied().collect();
    for id in &c.induced_edges {
        let e = graph.edge(*id).ok_or("induced edge missing")?;
        if !seeds.contains(&e.source) || !seeds.contains(&e.target) {
            return Err("induced edge leaves the seed set".into());
        }
    }
    for s in &c.suggestions {
        if !seeds.contains(&s.a) || !seeds.contains(&s.b) || s.a == s.b {
            return Err("suggestion outside the seed set".into());
        }
        if graph.undirected_neighbors(s.a, |_| true).contains(&s.b) {
            return Err("suggested pair is already adjacent".into());
        }
        if !(0.0..=1.0).contains(&s.jaccard) {
            return Err("jaccard outside [0, 1]".into());
        }
    }
    Ok(())
}

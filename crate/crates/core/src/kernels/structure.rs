use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{require, KernelError};
use crate::graph::{normalize_name, EdgeId, NodeId, PropertyGraph};

pub const MAX_PROPAGATION_ROUNDS: usize = 100;
pub const IDEA_TRIPLE_CAP: usize = 200;

/// Which relations a kernel considers.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationFilter {
    #[default]
    All,
    Only(BTreeSet<String>),
}

impl RelationFilter {
    pub fn only<S: Into<String>>(relations: impl IntoIterator<Item = S>) -> Self {
        RelationFilter::Only(relations.into_iter().map(Into::into).collect())
    }

    pub fn keeps(&self, relation: &str) -> bool {
        match self {
            RelationFilter::All => true,
            RelationFilter::Only(set) => set.contains(relation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cluster {
    /// Sorted ascending.
    pub members: Vec<NodeId>,
    /// Name of the member with the most neighbors.
    pub label: String,
}

/// Synchronous label propagation on the undirected projection.
///
/// Every node starts with its own id as label. Each round, every node adopts
/// the label held most often among its neighbors and itself, the smallest
/// label winning ties. Stops at a fixed point or after
/// [`MAX_PROPAGATION_ROUNDS`] rounds.
pub fn concept_clustering(
    graph: &PropertyGraph,
    relations: &RelationFilter,
) -> Result<Vec<Cluster>, KernelError> {
    if matches!(relations, RelationFilter::Only(set) if set.is_empty()) {
        return Err(KernelError::InvalidArgument("relation set is empty".into()));
    }
    let adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> = graph
        .node_ids()
        .map(|id| (id, graph.undirected_neighbors(id, |r| relations.keeps(r))))
        .collect();
    let mut labels: BTreeMap<NodeId, NodeId> = adjacency.keys().map(|id| (*id, *id)).collect();
    for _ in 0..MAX_PROPAGATION_ROUNDS {
        let next: BTreeMap<NodeId, NodeId> = adjacency
            .iter()
            .map(|(id, neighbors)| {
                let mut counts: BTreeMap<NodeId, usize> = BTreeMap::new();
                for n in neighbors.iter().chain(std::iter::once(id)) {
                    *counts.entry(labels[n]).or_default() += 1;
                }
                // Highest count; among equal counts the smallest label.
                let best = counts
                    .into_iter()
                    .max_by_key(|(label, count)| (*count, std::cmp::Reverse(*label)))
                    .map(|(label, _)| label)
                    .expect("own label counted");
                (*id, best)
            })
            .collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    let mut groups: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for (id, label) in labels {
        groups.entry(label).or_default().push(id);
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .map(|members| {
            let hub = members
                .iter()
                .max_by_key(|id| {
                    let name = normalize_name(&graph.node(**id).expect("listed").name);
                    (adjacency[*id].len(), std::cmp::Reverse((name, **id)))
                })
                .expect("groups are non-empty");
            Cluster {
                label: graph.node(*hub).expect("listed").name.clone(),
                members,
            }
        })
        .collect();
    clusters.sort_by_key(|c| (std::cmp::Reverse(c.members.len()), c.members[0]));
    Ok(clusters)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub a: NodeId,
    pub b: NodeId,
    pub a_name: String,
    pub b_name: String,
    pub common_neighbors: usize,
    pub jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub seeds: Vec<NodeId>,
    pub induced_edges: Vec<EdgeId>,
    pub suggestions: Vec<Suggestion>,
}

/// Edges among the seeds, plus the `k` best-scoring non-adjacent seed pairs.
///
/// Pairs are ranked by common-neighbor count over the whole undirected
/// graph, then Jaccard similarity of neighborhoods, then by name. Each pair
/// lists the name-smaller node first.
pub fn subgraph_completion(
    graph: &PropertyGraph,
    seeds: &[NodeId],
    k: usize,
) -> Result<Completion, KernelError> {
    for s in seeds {
        require(graph, *s)?;
    }
    if k == 0 {
        return Err(KernelError::InvalidArgument("k must be at least 1".into()));
    }
    let seeds: Vec<NodeId> = seeds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let seed_set: BTreeSet<NodeId> = seeds.iter().copied().collect();
    let induced_edges: Vec<EdgeId> = graph
        .edges()
        .filter(|e| seed_set.contains(&e.source) && seed_set.contains(&e.target))
        .map(|e| e.id)
        .collect();
    let neighbors: BTreeMap<NodeId, BTreeSet<NodeId>> = seeds
        .iter()
        .map(|s| (*s, graph.undirected_neighbors(*s, |_| true)))
        .collect();
    let named = |id: NodeId| {
        let name = graph.node(id).expect("seed exists").name.clone();
        (normalize_name(&name), id, name)
    };
    let mut suggestions = Vec::new();
    for (i, a) in seeds.iter().enumerate() {
        for b in &seeds[i + 1..] {
            if neighbors[a].contains(b) {
                continue;
            }
            let common = neighbors[a].intersection(&neighbors[b]).count();
            let union = neighbors[a].union(&neighbors[b]).count();
            let jaccard = if union == 0 { 0.0 } else { common as f64 / union as f64 };
            let (first, second) = {
                let (x, y) = (named(*a), named(*b));
                if (&x.0, x.1) <= (&y.0, y.1) { (x, y) } else { (y, x) }
            };
            suggestions.push((first, second, common, jaccard));
        }
    }
    suggestions.sort_by(|x, y| {
        y.2.cmp(&x.2)
            .then(y.3.total_cmp(&x.3))
            .then_with(|| (&x.0 .0, x.0 .1, &x.1 .0, x.1 .1).cmp(&(&y.0 .0, y.0 .1, &y.1 .0, y.1 .1)))
    });
    let suggestions = suggestions
        .into_iter()
        .take(k)
        .map(|(a, b, common, jaccard)| Suggestion {
            a: a.1,
            b: b.1,
            a_name: a.2,
            b_name: b.2,
            common_neighbors: common,
            jaccard,
        })
        .collect();
    Ok(Completion {
        seeds,
        induced_edges,
        suggestions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaContext {
    pub seeds: Vec<NodeId>,
    pub radius: usize,
    /// Edges in the ball, at most [`IDEA_TRIPLE_CAP`], sorted by rendered triple.
    pub edges: Vec<EdgeId>,
    /// Number of edges in the ball before capping.
    pub total_edges: usize,
    pub text: String,
}

/// Renders the edges within `radius` undirected hops of the seeds as
/// `name -RELATION-> name` lines. When over the cap, the edges nearest to
/// the seeds are kept.
pub fn idea_context(
    graph: &PropertyGraph,
    seeds: &[NodeId],
    radius: usize,
) -> Result<IdeaContext, KernelError> {
    for s in seeds {
        require(graph, *s)?;
    }
    if !(1..=2).contains(&radius) {
        return Err(KernelError::InvalidArgument(format!("radius must be 1 or 2, got {radius}")));
    }
    if seeds.is_empty() {
        return Err(KernelError::InvalidArgument("at least one seed is required".into()));
    }
    let seeds: Vec<NodeId> = seeds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let mut distance: BTreeMap<NodeId, usize> = seeds.iter().map(|s| (*s, 0)).collect();
    let mut queue: VecDeque<NodeId> = seeds.iter().copied().collect();
    while let Some(node) = queue.pop_front() {
        let d = distance[&node];
        if d == radius {
            continue;
        }
        for n in graph.undirected_neighbors(node, |_| true) {
            if !distance.contains_key(&n) {
                distance.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    let name = |id: NodeId| graph.node(id).expect("ball node exists").name.as_str();
    let mut ball: Vec<(usize, usize, String, EdgeId)> = graph
        .edges()
        .filter_map(|e| {
            let (ds, dt) = (distance.get(&e.source)?, distance.get(&e.target)?);
            let triple = format!("{} -{}-> {}", name(e.source), e.relation, name(e.target));
            Some((*ds.max(dt), *ds.min(dt), triple, e.id))
        })
        .collect();
    let total_edges = ball.len();
    ball.sort();
    ball.truncate(IDEA_TRIPLE_CAP);
    ball.sort_by(|x, y| (&x.2, x.3).cmp(&(&y.2, y.3)));

    let mut text = String::new();
    let seed_names: Vec<&str> = seeds.iter().map(|s| name(*s)).collect();
    let _ = writeln!(text, "SEEDS: {}", seed_names.join(", "));
    if total_edges > ball.len() {
        let _ = writeln!(text, "TRIPLES ({} of {}):", ball.len(), total_edges);
    } else {
        let _ = writeln!(text, "TRIPLES ({}):", ball.len());
    }
    for (_, _, triple, _) in &ball {
        let _ = writeln!(text, "{triple}");
    }
    Ok(IdeaContext {
        seeds,
        radius,
        edges: ball.into_iter().map(|(_, _, _, id)| id).collect(),
        total_edges,
        text,
    })
}

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{require, sorted_steps, KernelError};
use crate::graph::{EdgeId, EdgeRecord, NodeId, PropertyGraph};

pub const DEFAULT_PREREQUISITE_RELATION: &str = "PREREQUISITE_OF";
pub const MAX_JUDGMENT_HOPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HopDirection {
    /// The edge points along the walk.
    Forward,
    /// The edge points against the walk.
    Backward,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessHop {
    pub edge: EdgeId,
    pub from: NodeId,
    pub to: NodeId,
    pub relation: String,
    pub direction: HopDirection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub connected: bool,
    /// A shortest walk from `a` to `b` whose hops all share one direction.
    pub witness: Option<Vec<WitnessHop>>,
}

/// Breadth-first search from `start` following edges forward or backward,
/// expanding neighbors in normalized-name order. Returns the edge walk to
/// `goal`, if reachable within `limit` hops.
fn bfs<'g>(
    graph: &'g PropertyGraph,
    start: NodeId,
    goal: NodeId,
    forward: bool,
    relation: Option<&str>,
    limit: usize,
) -> Option<Vec<&'g EdgeRecord>> {
    if start == goal {
        return Some(Vec::new());
    }
    let mut parent: HashMap<NodeId, &EdgeRecord> = HashMap::new();
    let mut depth: HashMap<NodeId, usize> = HashMap::from([(start, 0)]);
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        let d = depth[&node];
        if d == limit {
            continue;
        }
        for edge in sorted_steps(graph, node, forward, relation) {
            let next = edge.other(node);
            if depth.contains_key(&next) {
                continue;
            }
            depth.insert(next, d + 1);
            parent.insert(next, edge);
            if next == goal {
                let mut walk = Vec::new();
                let mut at = goal;
                while at != start {
                    let e = parent[&at];
                    walk.push(e);
                    at = e.other(at);
                }
                walk.reverse();
                return Some(walk);
            }
            queue.push_back(next);
        }
    }
    None
}

/// Whether `a` and `b` are joined by a path of at most `max_hops` edges that
/// runs entirely from `a` to `b` or entirely from `b` to `a`.
pub fn relation_judgment(
    graph: &PropertyGraph,
    a: NodeId,
    b: NodeId,
    max_hops: usize,
) -> Result<Judgment, KernelError> {
    require(graph, a)?;
    require(graph, b)?;
    if !(1..=MAX_JUDGMENT_HOPS).contains(&max_hops) {
        return Err(KernelError::InvalidArgument(format!(
            "max_hops must be between 1 and {MAX_JUDGMENT_HOPS}, got {max_hops}"
        )));
    }
    let forward = bfs(graph, a, b, true, None, max_hops);
    let backward = bfs(graph, a, b, false, None, max_hops);
    let chosen = match (forward, backward) {
        (Some(f), Some(r)) if r.len() < f.len() => Some((r, HopDirection::Backward)),
        (Some(f), _) => Some((f, HopDirection::Forward)),
        (None, Some(r)) => Some((r, HopDirection::Backward)),
        (None, None) => None,
    };
    Ok(match chosen {
        None => Judgment {
            connected: false,
            witness: None,
        },
        Some((walk, direction)) => {
            let mut at = a;
            let hops = walk
                .into_iter()
                .map(|e| {
                    let to = e.other(at);
                    let hop = WitnessHop {
                        edge: e.id,
                        from: at,
                        to,
                        relation: e.relation.clone(),
                        direction,
                    };
                    at = to;
                    hop
                })
                .collect();
            Judgment {
                connected: true,
                witness: Some(hops),
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prerequisite {
    pub node: NodeId,
    pub name: String,
    pub distance: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prerequisites {
    pub target: NodeId,
    pub relation: String,
    pub prerequisites: Vec<Prerequisite>,
    /// Edges walked while collecting ancestors.
    pub edges: Vec<EdgeId>,
    pub cycle_detected: bool,
}

/// Every node with a `relation` path into `target`, nearest first, ties by
/// normalized name. Cycles do not stop the walk; they set `cycle_detected`.
pub fn prerequisite_prediction(
    graph: &PropertyGraph,
    target: NodeId,
    relation: &str,
) -> Result<Prerequisites, KernelError> {
    require(graph, target)?;
    let mut distance: BTreeMap<NodeId, usize> = BTreeMap::from([(target, 0)]);
    let mut edges = BTreeSet::new();
    let mut queue = VecDeque::from([target]);
    while let Some(node) = queue.pop_front() {
        let d = distance[&node];
        for edge in graph.in_edges(node).filter(|e| e.relation == relation) {
            edges.insert(edge.id);
            if !distance.contains_key(&edge.source) {
                distance.insert(edge.source, d + 1);
                queue.push_back(edge.source);
            }
        }
    }
    let cycle_detected = has_cycle(graph, &distance, &edges);
    let mut prerequisites: Vec<Prerequisite> = distance
        .iter()
        .filter(|(id, _)| **id != target)
        .map(|(id, d)| Prerequisite {
            node: *id,
            name: graph.node(*id).expect("reached node exists").name.clone(),
            distance: *d,
        })
        .collect();
    prerequisites.sort_by_cached_key(|p| (p.distance, crate::graph::normalize_name(&p.name), p.node));
    Ok(Prerequisites {
        target,
        relation: relation.to_string(),
        prerequisites,
        edges: edges.into_iter().collect(),
        cycle_detected,
    })
}

/// Kahn's algorithm over the given nodes and edges.
fn has_cycle(graph: &PropertyGraph, nodes: &BTreeMap<NodeId, usize>, edges: &BTreeSet<EdgeId>) -> bool {
    let mut indegree: BTreeMap<NodeId, usize> = nodes.keys().map(|n| (*n, 0)).collect();
    let mut out: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for id in edges {
        let e = graph.edge(*id).expect("walked edge exists");
        *indegree.get_mut(&e.target).expect("endpoint collected") += 1;
        out.entry(e.source).or_default().push(e.target);
    }
    let mut ready: Vec<NodeId> = indegree.iter().filter(|(_, d)| **d == 0).map(|(n, _)| *n).collect();
    let mut removed = 0;
    while let Some(n) = ready.pop() {
        removed += 1;
        for m in out.get(&n).into_iter().flatten() {
            let d = indegree.get_mut(m).expect("endpoint collected");
            *d -= 1;
            if *d == 0 {
                ready.push(*m);
            }
        }
    }
    removed < nodes.len()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathResult {
    pub start: NodeId,
    pub goal: NodeId,
    pub relation: Option<String>,
    /// Empty when `goal` is unreachable.
    pub nodes: Vec<NodeId>,
    pub edges: Vec<EdgeId>,
}

/// Shortest directed path from `start` to `goal`, optionally restricted to
/// one relation.
pub fn path_search(
    graph: &PropertyGraph,
    start: NodeId,
    goal: NodeId,
    relation: Option<&str>,
) -> Result<PathResult, KernelError> {
    require(graph, start)?;
    require(graph, goal)?;
    let walk = bfs(graph, start, goal, true, relation, usize::MAX);
    let (nodes, edges) = match walk {
        None => (Vec::new(), Vec::new()),
        Some(walk) => {
            let mut nodes = vec![start];
            nodes.extend(walk.iter().map(|e| e.target));
            (nodes, walk.iter().map(|e| e.id).collect())
        }
    };
    Ok(PathResult {
        start,
        goal,
        relation: relation.map(str::to_string),
        nodes,
        edges,
    })
}

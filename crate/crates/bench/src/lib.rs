//! Seeded workload generators for the criterion benches.

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use graphchat::graph::{NodeId, PropValue, Properties, PropertyGraph};

pub const RELATIONS: [&str; 4] = ["PREREQUISITE_OF", "RELATED_TO", "SUBTOPIC_OF", "PART_OF"];
const LABELS: [&str; 3] = ["Concept", "Field", "Method"];

/// `nodes` concepts with about `degree` outgoing edges each. Same seed, same graph.
pub fn synthetic_graph(nodes: usize, degree: usize, seed: u64) -> PropertyGraph {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut g = PropertyGraph::new();
    let ids: Vec<NodeId> = (0..nodes)
        .map(|i| {
            let mut props = Properties::new();
            props.insert("level".into(), PropValue::Int(rng.random_range(0..5)));
            let label = LABELS.choose(&mut rng).expect("non-empty");
            g.insert_node(&format!("Concept {i}"), label, props).expect("fresh name")
        })
        .collect();
    if nodes < 2 {
        return g;
    }
    for &a in &ids {
        for _ in 0..degree {
            let b = *ids.choose(&mut rng).expect("non-empty");
            let rel = RELATIONS.choose(&mut rng).expect("non-empty");
            if a != b && g.find_edge(a, rel, b).is_none() {
                g.insert_edge(a, rel, b, Properties::new()).expect("valid edge");
            }
        }
    }
    g
}

/// Read queries of increasing pattern length over [`synthetic_graph`] data.
pub fn read_queries() -> Vec<(&'static str, String)> {
    vec![
        ("scan", "MATCH (n:Field) RETURN n.name".to_string()),
        ("lookup", "MATCH (n {name: 'Concept 7'}) RETURN n".to_string()),
        (
            "one_hop",
            "MATCH (a {name: 'Concept 3'})-[:PREREQUISITE_OF]->(b) RETURN b.name".to_string(),
        ),
        (
            "two_hop",
            "MATCH (a)-[:PREREQUISITE_OF]->(b)-[:SUBTOPIC_OF]->(c) WHERE a.level = 1 RETURN a.name, c.name LIMIT 50"
                .to_string(),
        ),
    ]
}

/// Random node pairs for kernel benches.
pub fn node_pairs(graph: &PropertyGraph, count: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let ids: Vec<NodeId> = graph.node_ids().collect();
    (0..count)
        .map(|_| (*ids.choose(&mut rng).expect("non-empty graph"), *ids.choose(&mut rng).expect("non-empty graph")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use graphchat::graph::shared;
    use graphchat::query;

    #[test]
    fn graphs_are_reproducible() {
        assert_eq!(synthetic_graph(50, 3, 9), synthetic_graph(50, 3, 9));
        assert_ne!(synthetic_graph(50, 3, 9), synthetic_graph(50, 3, 10));
    }

    #[test]
    fn bench_queries_run() {
        let g = shared(synthetic_graph(200, 3, 1));
        for (name, text) in read_queries() {
            assert!(query::run(&g, &text).is_ok(), "{name}");
        }
    }
}

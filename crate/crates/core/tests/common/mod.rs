//! Random generators and brute-force oracles shared by the oracle tests and
//! the acceptance suite. The oracles deliberately avoid the engine's own
//! traversal code: queries are answered by enumerating every edge tuple,
//! distances by Bellman-Ford relaxation, reachability by transitive closure.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;

use graphchat::graph::{normalize_name, EdgeId, EdgeRecord, NodeId, PropValue, Properties, PropertyGraph};
use graphchat::kernels::{
    concept_clustering, path_search, prerequisite_prediction, subgraph_completion, RelationFilter,
};
use graphchat::pipeline::{Endpoint, NewRelation, UpdatePayload};
use graphchat::query::{
    execute_read, parse, render, Cell, Clause, CompareOp, Comparison, NodePattern, Operand, Pattern, Predicate,
    Projection, Query, RelDirection, RelPattern,
};

pub const LABELS: [&str; 3] = ["A", "B", "C"];
pub const RELATIONS: [&str; 3] = ["R", "S", "T"];
const NODE_VARS: [&str; 4] = ["a", "b", "c", "d"];
const REL_VARS: [&str; 2] = ["r", "s"];
const NODE_KEYS: [&str; 5] = ["name", "label", "rank", "flag", "score"];
const EDGE_KEYS: [&str; 2] = ["relation", "w"];

// ---------------------------------------------------------------------------
// Graphs

/// Up to `max_nodes` nodes with labels A/B/C and a few optional scalar
/// properties; up to `max_edges` edges over R/S/T, no self-loops.
pub fn random_graph(rng: &mut StdRng, max_nodes: usize, max_edges: usize) -> PropertyGraph {
    let n = rng.random_range(1..=max_nodes);
    let mut g = PropertyGraph::new();
    let mut ids = Vec::with_capacity(n);
    for i in 0..n {
        let mut props = Properties::new();
        if rng.random_bool(0.6) {
            props.insert("rank".into(), PropValue::Int(rng.random_range(0..4)));
        }
        if rng.random_bool(0.5) {
            props.insert("flag".into(), PropValue::Bool(rng.random()));
        }
        if rng.random_bool(0.4) {
            props.insert("score".into(), PropValue::Float(*[0.5, 1.0, 2.0, 3.0].choose(rng).unwrap()));
        }
        let label = LABELS.choose(rng).unwrap();
        ids.push(g.insert_node(&format!("n{i}"), label, props).unwrap());
    }
    if n > 1 {
        for _ in 0..rng.random_range(0..=max_edges) {
            let (a, b) = (*ids.choose(rng).unwrap(), *ids.choose(rng).unwrap());
            let rel = RELATIONS.choose(rng).unwrap();
            if a == b || g.find_edge(a, rel, b).is_some() {
                continue;
            }
            let mut props = Properties::new();
            if rng.random_bool(0.3) {
                props.insert("w".into(), PropValue::Int(rng.random_range(0..3)));
            }
            g.insert_edge(a, rel, b, props).unwrap();
        }
    }
    g
}

/// A DAG on `n` nodes: edges only go forward in a random topological order.
pub fn random_dag(rng: &mut StdRng, n: usize, density: f64, relations: &[&str]) -> PropertyGraph {
    let mut g = PropertyGraph::new();
    let ids: Vec<NodeId> = (0..n)
        .map(|i| g.insert_node(&format!("c{i}"), "Concept", Properties::new()).unwrap())
        .collect();
    let mut order = ids.clone();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(density) {
                let rel = relations.choose(rng).unwrap();
                g.insert_edge(order[i], rel, order[j], Properties::new()).unwrap();
            }
        }
    }
    g
}

/// A directed graph that may contain cycles.
pub fn random_digraph(rng: &mut StdRng, n: usize, edges: usize, relations: &[&str]) -> PropertyGraph {
    let mut g = PropertyGraph::new();
    let ids: Vec<NodeId> = (0..n)
        .map(|i| g.insert_node(&format!("Topic {i}"), "Concept", Properties::new()).unwrap())
        .collect();
    for _ in 0..edges {
        let (a, b) = (*ids.choose(rng).unwrap(), *ids.choose(rng).unwrap());
        let rel = relations.choose(rng).unwrap();
        if a != b && g.find_edge(a, rel, b).is_none() {
            g.insert_edge(a, rel, b, Properties::new()).unwrap();
        }
    }
    g
}

/// A disjoint union of cliques; returns the graph and the expected groups.
pub fn random_cliques(rng: &mut StdRng, max_groups: usize) -> (PropertyGraph, Vec<BTreeSet<NodeId>>) {
    let mut g = PropertyGraph::new();
    let mut groups = Vec::new();
    let mut counter = 0;
    for _ in 0..rng.random_range(1..=max_groups) {
        let size = rng.random_range(1..=6);
        let members: Vec<NodeId> = (0..size)
            .map(|_| {
                counter += 1;
                g.insert_node(&format!("k{counter}"), "Concept", Properties::new()).unwrap()
            })
            .collect();
        for (i, a) in members.iter().enumerate() {
            for b in &members[i + 1..] {
                // Random orientation: clustering ignores direction.
                let (x, y) = if rng.random_bool(0.5) { (*a, *b) } else { (*b, *a) };
                g.insert_edge(x, "RELATED_TO", y, Properties::new()).unwrap();
            }
        }
        groups.push(members.into_iter().collect());
    }
    (g, groups)
}

// ---------------------------------------------------------------------------
// Read queries over the random graphs

fn small_literal(rng: &mut StdRng) -> PropValue {
    match rng.random_range(0..5) {
        0 => PropValue::Int(rng.random_range(0..4)),
        1 => PropValue::Float(*[0.5, 1.0, 2.0].choose(rng).unwrap()),
        2 => PropValue::Bool(rng.random()),
        3 => PropValue::Str(format!("n{}", rng.random_range(0..12))),
        _ => PropValue::Str(LABELS.choose(rng).unwrap().to_string()),
    }
}

fn node_atom(rng: &mut StdRng, nodes: &mut Vec<String>) -> NodePattern {
    let variable = rng.random_bool(0.8).then(|| NODE_VARS.choose(rng).unwrap().to_string());
    if let Some(v) = &variable {
        if !nodes.contains(v) {
            nodes.push(v.clone());
        }
    }
    let label = rng
        .random_bool(0.3)
        .then(|| ["A", "B", "C", "Z"].choose(rng).unwrap().to_string());
    let properties = if rng.random_bool(0.2) {
        vec![(NODE_KEYS.choose(rng).unwrap().to_string(), small_literal(rng))]
    } else {
        Vec::new()
    };
    NodePattern { variable, label, properties }
}

fn property_operand(rng: &mut StdRng, nodes: &[String], rels: &[String]) -> Operand {
    let pick_rel = !rels.is_empty() && (nodes.is_empty() || rng.random_bool(0.3));
    let (variable, keys): (&String, &[&str]) = if pick_rel {
        (rels.choose(rng).unwrap(), &EDGE_KEYS)
    } else {
        (nodes.choose(rng).unwrap(), &NODE_KEYS)
    };
    // Occasionally ask for a key the bound kind never carries.
    let key = if rng.random_bool(0.1) { "missing" } else { keys.choose(rng).unwrap() };
    Operand::Property { variable: variable.clone(), key: key.to_string() }
}

/// A read query with up to two MATCH clauses and at most two hops in total.
pub fn random_read_query(rng: &mut StdRng) -> Query {
    let mut nodes: Vec<String> = Vec::new();
    let mut rels: Vec<String> = Vec::new();
    let mut free_rels: Vec<&str> = REL_VARS.to_vec();
    let n_clauses = if rng.random_bool(0.35) { 2 } else { 1 };
    let mut hop_budget = 2;
    let mut clauses = Vec::new();
    for c in 0..n_clauses {
        let hops = if c + 1 == n_clauses { rng.random_range(0..=hop_budget) } else { rng.random_range(0..=1) };
        hop_budget -= hops;
        let mut start = node_atom(rng, &mut nodes);
        if c == 0 && start.variable.is_none() {
            start.variable = Some("a".into());
            nodes.push("a".into());
        }
        let mut hop_list = Vec::new();
        for _ in 0..hops {
            let variable = if !free_rels.is_empty() && rng.random_bool(0.5) {
                let v = free_rels.remove(rng.random_range(0..free_rels.len())).to_string();
                rels.push(v.clone());
                Some(v)
            } else {
                None
            };
            let relation = rng
                .random_bool(0.5)
                .then(|| RELATIONS.choose(rng).unwrap().to_string());
            let direction = if rng.random_bool(0.5) { RelDirection::Outgoing } else { RelDirection::Incoming };
            let rel = RelPattern { variable, relation, direction };
            hop_list.push((rel, node_atom(rng, &mut nodes)));
        }
        let predicate = rng.random_bool(0.5).then(|| Predicate {
            comparisons: (0..rng.random_range(1..=2))
                .map(|_| Comparison {
                    left: property_operand(rng, &nodes, &rels),
                    op: if rng.random_bool(0.6) { CompareOp::Eq } else { CompareOp::Ne },
                    right: if rng.random_bool(0.7) {
                        Operand::Literal(small_literal(rng))
                    } else {
                        property_operand(rng, &nodes, &rels)
                    },
                })
                .collect(),
        });
        clauses.push(Clause::Match {
            pattern: Pattern { start, hops: hop_list },
            predicate,
        });
    }
    let bound: Vec<String> = nodes.iter().chain(&rels).cloned().collect();
    let projections = (0..rng.random_range(1..=3))
        .map(|_| {
            let v = bound.choose(rng).unwrap().clone();
            if rng.random_bool(0.4) {
                Projection::Variable(v)
            } else {
                let keys: &[&str] = if rels.contains(&v) { &EDGE_KEYS } else { &NODE_KEYS };
                Projection::Property { variable: v, key: keys.choose(rng).unwrap().to_string() }
            }
        })
        .collect();
    let limit = rng.random_bool(0.3).then(|| rng.random_range(0..6));
    clauses.push(Clause::Return { projections, limit });
    Query { clauses }
}

// ---------------------------------------------------------------------------
// Brute-force query oracle

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Node(NodeId),
    Edge(EdgeId),
}

type Binding = BTreeMap<String, Bound>;

/// Integers and floats compare numerically; otherwise same type and value.
fn values_equal(a: &PropValue, b: &PropValue) -> bool {
    match (a, b) {
        (PropValue::Int(x), PropValue::Int(y)) => x == y,
        (PropValue::Float(x), PropValue::Float(y)) => x == y,
        (PropValue::Int(x), PropValue::Float(y)) | (PropValue::Float(y), PropValue::Int(x)) => *x as f64 == *y,
        (PropValue::Bool(x), PropValue::Bool(y)) => x == y,
        (PropValue::Str(x), PropValue::Str(y)) => x == y,
        _ => false,
    }
}

fn node_value(g: &PropertyGraph, id: NodeId, key: &str) -> Option<PropValue> {
    let n = g.node(id).unwrap();
    match key {
        "name" => Some(PropValue::Str(n.name.clone())),
        "label" => Some(PropValue::Str(n.label.clone())),
        _ => n.properties.get(key).cloned(),
    }
}

fn edge_value(g: &PropertyGraph, id: EdgeId, key: &str) -> Option<PropValue> {
    let e = g.edge(id).unwrap();
    match key {
        "relation" => Some(PropValue::Str(e.relation.clone())),
        _ => e.properties.get(key).cloned(),
    }
}

fn lookup(g: &PropertyGraph, b: &Binding, var: &str, key: &str) -> Option<PropValue> {
    match b.get(var)? {
        Bound::Node(id) => node_value(g, *id, key),
        Bound::Edge(id) => edge_value(g, *id, key),
    }
}

fn atom_accepts(g: &PropertyGraph, id: NodeId, atom: &NodePattern) -> bool {
    let n = g.node(id).unwrap();
    atom.label.as_ref().is_none_or(|l| *l == n.label)
        && atom
            .properties
            .iter()
            .all(|(k, v)| node_value(g, id, k).is_some_and(|actual| values_equal(&actual, v)))
}

fn assign(b: &mut Binding, var: &Option<String>, value: Bound) -> bool {
    match var {
        None => true,
        Some(v) => match b.get(v) {
            Some(existing) => *existing == value,
            None => {
                b.insert(v.clone(), value);
                true
            }
        },
    }
}

/// Every binding of one pattern, found by enumerating all edge tuples.
fn pattern_bindings(g: &PropertyGraph, pattern: &Pattern) -> Vec<Binding> {
    let edges: Vec<&EdgeRecord> = g.edges().collect();
    let k = pattern.hops.len();
    let mut out = Vec::new();
    let finish = |nodes: &[NodeId], chosen: &[&EdgeRecord]| -> Option<Binding> {
        let mut b = Binding::new();
        let atoms = std::iter::once(&pattern.start).chain(pattern.hops.iter().map(|(_, n)| n));
        for (atom, id) in atoms.zip(nodes) {
            if !atom_accepts(g, *id, atom) || !assign(&mut b, &atom.variable, Bound::Node(*id)) {
                return None;
            }
        }
        for ((rel, _), e) in pattern.hops.iter().zip(chosen) {
            if rel.relation.as_ref().is_some_and(|r| *r != e.relation)
                || !assign(&mut b, &rel.variable, Bound::Edge(e.id))
            {
                return None;
            }
        }
        Some(b)
    };
    if k == 0 {
        for n in g.nodes() {
            out.extend(finish(&[n.id], &[]));
        }
        return out;
    }
    let total = edges.len().pow(k as u32);
    'tuples: for code in 0..total {
        let mut rest = code;
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            chosen.push(edges[rest % edges.len()]);
            rest /= edges.len();
        }
        for i in 0..k {
            if chosen[..i].iter().any(|e| e.id == chosen[i].id) {
                continue 'tuples;
            }
        }
        let ends = |e: &EdgeRecord, d: RelDirection| match d {
            RelDirection::Outgoing => (e.source, e.target),
            RelDirection::Incoming => (e.target, e.source),
        };
        let mut nodes = vec![ends(chosen[0], pattern.hops[0].0.direction).0];
        for (i, (rel, _)) in pattern.hops.iter().enumerate() {
            let (from, to) = ends(chosen[i], rel.direction);
            if from != nodes[i] {
                continue 'tuples;
            }
            nodes.push(to);
        }
        out.extend(finish(&nodes, &chosen));
    }
    out
}

fn join(left: &Binding, right: &Binding) -> Option<Binding> {
    let mut merged = left.clone();
    for (k, v) in right {
        match merged.get(k) {
            Some(existing) if existing != v => return None,
            Some(_) => {}
            None => {
                merged.insert(k.clone(), *v);
            }
        }
    }
    Some(merged)
}

fn holds(g: &PropertyGraph, b: &Binding, cmp: &Comparison) -> bool {
    let value = |o: &Operand| match o {
        Operand::Literal(v) => Some(v.clone()),
        Operand::Property { variable, key } => lookup(g, b, variable, key),
    };
    match (value(&cmp.left), value(&cmp.right)) {
        (Some(l), Some(r)) => match cmp.op {
            CompareOp::Eq => values_equal(&l, &r),
            CompareOp::Ne => !values_equal(&l, &r),
        },
        _ => false,
    }
}

/// Expected rows of a read query: the natural join of every MATCH clause's
/// bindings, filtered by all predicates, projected, sorted by rendered text
/// then value, deduplicated and truncated.
pub fn oracle_rows(g: &PropertyGraph, q: &Query) -> Vec<Vec<Cell>> {
    let mut rows = vec![Binding::new()];
    let mut predicates = Vec::new();
    for clause in &q.clauses {
        if let Clause::Match { pattern, predicate } = clause {
            let found = pattern_bindings(g, pattern);
            rows = rows
                .iter()
                .flat_map(|r| found.iter().filter_map(move |b| join(r, b)))
                .collect();
            predicates.extend(predicate.iter().flat_map(|p| p.comparisons.iter()));
        }
    }
    rows.retain(|b| predicates.iter().all(|c| holds(g, b, c)));
    let Some(Clause::Return { projections, limit }) = q.clauses.last() else {
        panic!("generated read queries end with RETURN");
    };
    let mut table: Vec<Vec<Cell>> = rows
        .iter()
        .map(|b| {
            projections
                .iter()
                .map(|p| match p {
                    Projection::Property { variable, key } => {
                        lookup(g, b, variable, key).map(Cell::Value).unwrap_or(Cell::Null)
                    }
                    Projection::Variable(v) => match b[v] {
                        Bound::Node(id) => Cell::Node { node: id, name: g.node(id).unwrap().name.clone() },
                        Bound::Edge(id) => Cell::Edge { edge: id, relation: g.edge(id).unwrap().relation.clone() },
                    },
                })
                .collect()
        })
        .collect();
    table.sort_by_cached_key(|cells| (cells.iter().map(Cell::render).collect::<Vec<_>>(), cells.clone()));
    table.dedup();
    if let Some(n) = limit {
        table.truncate(*n as usize);
    }
    table
}

/// Runs the query through the engine, both from the AST and from its
/// rendered text, and compares with the oracle.
pub fn check_query(g: &PropertyGraph, q: &Query) -> Result<(), String> {
    let text = render(q);
    let expected = oracle_rows(g, q);
    let direct = execute_read(g, q).map_err(|e| format!("{text}: {e}"))?;
    if direct.rows != expected {
        return Err(format!("{text}\nengine: {:?}\noracle: {:?}", direct.rows, expected));
    }
    let reparsed = parse(&text).map_err(|e| format!("{text}: {e}"))?;
    let via_text = execute_read(g, &reparsed).map_err(|e| format!("{text}: {e}"))?;
    if via_text != direct {
        return Err(format!("{text}: result differs after render and parse"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Arbitrary ASTs for the parser round-trip

fn random_ident(rng: &mut StdRng) -> String {
    const ODD: [&str; 10] = ["match", "RETURN", "Limit", "and", "a b", "x`y", "é", "1abc", "with-dash", "_"];
    if rng.random_bool(0.25) {
        return ODD.choose(rng).unwrap().to_string();
    }
    let first = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_";
    let rest = b"abcdefghijklmnopqrstuvwxyz0123456789_";
    let mut s = String::new();
    s.push(*first.choose(rng).unwrap() as char);
    for _ in 0..rng.random_range(0..6) {
        s.push(*rest.choose(rng).unwrap() as char);
    }
    s
}

fn random_string(rng: &mut StdRng) -> String {
    const PIECES: [&str; 12] = ["a", "Z", " ", "'", "''", "\\", "`", "é", "中", "\n", "0", "{"];
    (0..rng.random_range(0..8)).map(|_| *PIECES.choose(rng).unwrap()).collect()
}

fn random_float(rng: &mut StdRng) -> f64 {
    const SPECIAL: [f64; 8] = [0.0, -0.0, 1.0, -2.5, 1e-7, 1e300, f64::MIN_POSITIVE, f64::MAX];
    if rng.random_bool(0.3) {
        return *SPECIAL.choose(rng).unwrap();
    }
    let mantissa: f64 = rng.random_range(-1000.0..1000.0);
    mantissa * 10f64.powi(rng.random_range(-20..20))
}

pub fn random_literal(rng: &mut StdRng) -> PropValue {
    match rng.random_range(0..4) {
        0 => PropValue::Int(rng.random_range(-1_000_000_000_000..1_000_000_000_000)),
        1 => PropValue::Float(random_float(rng)),
        2 => PropValue::Bool(rng.random()),
        _ => PropValue::Str(random_string(rng)),
    }
}

fn distinct_idents(rng: &mut StdRng, n: usize, avoid: &BTreeSet<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    while out.len() < n {
        let s = random_ident(rng);
        if !avoid.contains(&s) && !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

fn property_map(rng: &mut StdRng, named: bool) -> Vec<(String, PropValue)> {
    let mut keys: Vec<String> = Vec::new();
    for _ in 0..rng.random_range(0..3) {
        let k = random_ident(rng);
        if k != "name" && !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut props: Vec<(String, PropValue)> = keys.into_iter().map(|k| (k, random_literal(rng))).collect();
    if named {
        let mut name = random_string(rng);
        if name.trim().is_empty() {
            name.push('n');
        }
        let at = rng.random_range(0..=props.len());
        props.insert(at, ("name".into(), PropValue::Str(name)));
    }
    props
}

struct Vars {
    nodes: Vec<String>,
    rels: Vec<String>,
}

fn match_clause(rng: &mut StdRng, vars: &mut Vars, node_pool: &[String], rel_pool: &mut Vec<String>) -> Clause {
    let atom = |rng: &mut StdRng, vars: &mut Vars| {
        let variable = rng.random_bool(0.8).then(|| node_pool.choose(rng).unwrap().clone());
        if let Some(v) = &variable {
            if !vars.nodes.contains(v) {
                vars.nodes.push(v.clone());
            }
        }
        NodePattern {
            variable,
            label: rng.random_bool(0.4).then(|| random_ident(rng)),
            properties: property_map(rng, false),
        }
    };
    let start = atom(rng, vars);
    let mut hops = Vec::new();
    for _ in 0..rng.random_range(0..=3) {
        let variable = (!rel_pool.is_empty() && rng.random_bool(0.5)).then(|| {
            let v = rel_pool.pop().unwrap();
            vars.rels.push(v.clone());
            v
        });
        let rel = RelPattern {
            variable,
            relation: rng.random_bool(0.6).then(|| random_ident(rng)),
            direction: if rng.random_bool(0.5) { RelDirection::Outgoing } else { RelDirection::Incoming },
        };
        hops.push((rel, atom(rng, vars)));
    }
    let bound: Vec<String> = vars.nodes.iter().chain(&vars.rels).cloned().collect();
    let operand = |rng: &mut StdRng| {
        if bound.is_empty() || rng.random_bool(0.4) {
            Operand::Literal(random_literal(rng))
        } else {
            Operand::Property { variable: bound.choose(rng).unwrap().clone(), key: random_ident(rng) }
        }
    };
    let predicate = rng.random_bool(0.5).then(|| Predicate {
        comparisons: (0..rng.random_range(1..=3))
            .map(|_| Comparison {
                left: operand(rng),
                op: if rng.random_bool(0.5) { CompareOp::Eq } else { CompareOp::Ne },
                right: operand(rng),
            })
            .collect(),
    });
    Clause::Match { pattern: Pattern { start, hops }, predicate }
}

/// A valid query of any shape: read, create/merge, or match-then-delete,
/// with arbitrary identifiers and literals.
pub fn random_any_query(rng: &mut StdRng) -> Query {
    let node_pool = distinct_idents(rng, 4, &BTreeSet::new());
    let mut rel_pool = distinct_idents(rng, 3, &node_pool.iter().cloned().collect());
    let mut vars = Vars { nodes: Vec::new(), rels: Vec::new() };
    let mut clauses = Vec::new();
    match rng.random_range(0..3) {
        0 => {
            while clauses.is_empty() || vars.nodes.is_empty() && vars.rels.is_empty() {
                clauses.push(match_clause(rng, &mut vars, &node_pool, &mut rel_pool));
            }
            if rng.random_bool(0.3) {
                clauses.push(match_clause(rng, &mut vars, &node_pool, &mut rel_pool));
            }
            let bound: Vec<String> = vars.nodes.iter().chain(&vars.rels).cloned().collect();
            let projections = (0..rng.random_range(1..=3))
                .map(|_| {
                    let v = bound.choose(rng).unwrap().clone();
                    if rng.random_bool(0.5) {
                        Projection::Variable(v)
                    } else {
                        Projection::Property { variable: v, key: random_ident(rng) }
                    }
                })
                .collect();
            let limit = rng.random_bool(0.4).then(|| rng.random_range(0..10_000u64));
            clauses.push(Clause::Return { projections, limit });
        }
        1 => {
            for _ in 0..rng.random_range(1..=3) {
                if rng.random_bool(0.3) {
                    let fresh: Vec<&String> = node_pool.iter().filter(|v| !vars.nodes.contains(v)).collect();
                    let variable = fresh.choose(rng).map(|v| (*v).clone()).filter(|_| rng.random_bool(0.7));
                    if let Some(v) = &variable {
                        vars.nodes.push(v.clone());
                    }
                    let node = NodePattern {
                        variable,
                        label: rng.random_bool(0.5).then(|| random_ident(rng)),
                        properties: property_map(rng, true),
                    };
                    clauses.push(Clause::Merge { node });
                    continue;
                }
                let atom = |rng: &mut StdRng, vars: &mut Vars| {
                    let reuse = !vars.nodes.is_empty() && rng.random_bool(0.3);
                    if reuse {
                        return NodePattern {
                            variable: Some(vars.nodes.choose(rng).unwrap().clone()),
                            ..NodePattern::default()
                        };
                    }
                    let fresh: Vec<&String> = node_pool.iter().filter(|v| !vars.nodes.contains(v)).collect();
                    let variable = fresh.choose(rng).map(|v| (*v).clone()).filter(|_| rng.random_bool(0.7));
                    if let Some(v) = &variable {
                        vars.nodes.push(v.clone());
                    }
                    NodePattern {
                        variable,
                        label: rng.random_bool(0.5).then(|| random_ident(rng)),
                        properties: property_map(rng, true),
                    }
                };
                let start = atom(rng, &mut vars);
                let mut hops = Vec::new();
                for _ in 0..rng.random_range(0..=2) {
                    let variable = (!rel_pool.is_empty() && rng.random_bool(0.4)).then(|| rel_pool.pop().unwrap());
                    let rel = RelPattern {
                        variable,
                        relation: Some(random_ident(rng)),
                        direction: if rng.random_bool(0.5) { RelDirection::Outgoing } else { RelDirection::Incoming },
                    };
                    hops.push((rel, atom(rng, &mut vars)));
                }
                clauses.push(Clause::Create { pattern: Pattern { start, hops } });
            }
        }
        _ => {
            while vars.nodes.is_empty() && vars.rels.is_empty() {
                clauses.push(match_clause(rng, &mut vars, &node_pool, &mut rel_pool));
            }
            let bound: Vec<String> = vars.nodes.iter().chain(&vars.rels).cloned().collect();
            clauses.push(Clause::Delete { variable: bound.choose(rng).unwrap().clone(), detach: rng.random() });
        }
    }
    Query { clauses }
}

/// `parse(render(q)) == q` and rendering the reparsed query is a fixed point.
pub fn check_round_trip(q: &Query) -> Result<(), String> {
    let text = render(q);
    let parsed = parse(&text).map_err(|e| format!("{text:?}: {e}"))?;
    if parsed != *q {
        return Err(format!("{text:?} reparsed to a different AST:\n{parsed:?}\nvs\n{q:?}"));
    }
    let again = render(&parsed);
    if again != text {
        return Err(format!("render is not stable: {text:?} then {again:?}"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Kernel oracles

/// Unit-weight shortest distances from `source` by Bellman-Ford relaxation,
/// following edges forward (or backward when `reverse`).
pub fn relaxed_distances(
    g: &PropertyGraph,
    source: NodeId,
    relation: Option<&str>,
    reverse: bool,
) -> BTreeMap<NodeId, usize> {
    let mut dist = BTreeMap::from([(source, 0usize)]);
    loop {
        let mut changed = false;
        for e in g.edges() {
            if relation.is_some_and(|r| r != e.relation) {
                continue;
            }
            let (from, to) = if reverse { (e.target, e.source) } else { (e.source, e.target) };
            if let Some(d) = dist.get(&from).copied() {
                if dist.get(&to).is_none_or(|cur| d + 1 < *cur) {
                    dist.insert(to, d + 1);
                    changed = true;
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

pub fn check_path(g: &PropertyGraph, start: NodeId, goal: NodeId, relation: Option<&str>) -> Result<(), String> {
    let result = path_search(g, start, goal, relation).map_err(|e| e.to_string())?;
    let dist = relaxed_distances(g, start, relation, false);
    match dist.get(&goal) {
        None if result.nodes.is_empty() && result.edges.is_empty() => Ok(()),
        None => Err(format!("{start}->{goal}: found a path but the goal is unreachable")),
        Some(d) => {
            if result.edges.len() != *d || result.nodes.len() != d + 1 {
                return Err(format!("{start}->{goal}: path of {} edges, shortest is {d}", result.edges.len()));
            }
            if result.nodes.first() != Some(&start) || result.nodes.last() != Some(&goal) {
                return Err(format!("{start}->{goal}: path endpoints are wrong"));
            }
            for (i, id) in result.edges.iter().enumerate() {
                let e = g.edge(*id).ok_or("path uses a missing edge")?;
                if e.source != result.nodes[i] || e.target != result.nodes[i + 1] {
                    return Err(format!("{start}->{goal}: edge {id} does not connect the path"));
                }
                if relation.is_some_and(|r| r != e.relation) {
                    return Err(format!("{start}->{goal}: edge {id} has the wrong relation"));
                }
            }
            Ok(())
        }
    }
}

/// Ancestors by reverse relaxation, ordering, walked edges and the cycle flag
/// (via boolean transitive closure over the walked edges).
pub fn check_prerequisites(g: &PropertyGraph, target: NodeId, relation: &str) -> Result<(), String> {
    let result = prerequisite_prediction(g, target, relation).map_err(|e| e.to_string())?;
    let dist = relaxed_distances(g, target, Some(relation), true);
    let mut expected: Vec<(usize, String, NodeId)> = dist
        .iter()
        .filter(|(id, _)| **id != target)
        .map(|(id, d)| (*d, normalize_name(&g.node(*id).unwrap().name), *id))
        .collect();
    expected.sort();
    let actual: Vec<(usize, String, NodeId)> = result
        .prerequisites
        .iter()
        .map(|p| (p.distance, normalize_name(&p.name), p.node))
        .collect();
    if actual != expected {
        return Err(format!("prerequisites of {target}: {actual:?} vs {expected:?}"));
    }
    let walked: BTreeSet<EdgeId> = g
        .edges()
        .filter(|e| e.relation == relation && dist.contains_key(&e.target))
        .map(|e| e.id)
        .collect();
    if result.edges.iter().copied().collect::<BTreeSet<_>>() != walked {
        return Err(format!("prerequisites of {target}: walked edges differ"));
    }
    let index: BTreeMap<NodeId, usize> = dist.keys().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = index.len();
    let mut reach = vec![vec![false; n]; n];
    for id in &walked {
        let e = g.edge(*id).unwrap();
        reach[index[&e.source]][index[&e.target]] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if reach[i][k] {
                for j in 0..n {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    let cyclic = (0..n).any(|i| reach[i][i]);
    if cyclic != result.cycle_detected {
        return Err(format!("prerequisites of {target}: cycle flag {} expected {cyclic}", result.cycle_detected));
    }
    Ok(())
}

fn undirected(g: &PropertyGraph, id: NodeId) -> BTreeSet<NodeId> {
    g.edges()
        .filter_map(|e| {
            if e.source == id {
                Some(e.target)
            } else if e.target == id {
                Some(e.source)
            } else {
                None
            }
        })
        .collect()
}

/// Ranks every non-adjacent seed pair by common neighbours, Jaccard, then
/// names; compares the top `k` and the induced edge set.
pub fn check_completion(g: &PropertyGraph, seeds: &[NodeId], k: usize) -> Result<(), String> {
    let result = subgraph_completion(g, seeds, k).map_err(|e| e.to_string())?;
    let set: BTreeSet<NodeId> = seeds.iter().copied().collect();
    let induced: Vec<EdgeId> = g
        .edges()
        .filter(|e| set.contains(&e.source) && set.contains(&e.target))
        .map(|e| e.id)
        .collect();
    let mut got_induced = result.induced_edges.clone();
    got_induced.sort();
    if got_induced != induced {
        return Err("induced edges differ".into());
    }
    let key = |id: NodeId| (normalize_name(&g.node(id).unwrap().name), id);
    let mut pairs = Vec::new();
    let list: Vec<NodeId> = set.iter().copied().collect();
    for i in 0..list.len() {
        for j in 0..list.len() {
            let (a, b) = (list[i], list[j]);
            if key(a) >= key(b) {
                continue;
            }
            let (na, nb) = (undirected(g, a), undirected(g, b));
            if na.contains(&b) {
                continue;
            }
            let common = na.intersection(&nb).count();
            let union = na.union(&nb).count();
            let jaccard = if union == 0 { 0.0 } else { common as f64 / union as f64 };
            pairs.push((common, jaccard, key(a), key(b)));
        }
    }
    pairs.sort_by(|x, y| {
        y.0.cmp(&x.0)
            .then(y.1.total_cmp(&x.1))
            .then_with(|| (&x.2, &x.3).cmp(&(&y.2, &y.3)))
    });
    pairs.truncate(k);
    let expected: Vec<(NodeId, NodeId, usize, f64)> = pairs.iter().map(|p| (p.2 .1, p.3 .1, p.0, p.1)).collect();
    let actual: Vec<(NodeId, NodeId, usize, f64)> = result
        .suggestions
        .iter()
        .map(|s| (s.a, s.b, s.common_neighbors, s.jaccard))
        .collect();
    if actual != expected {
        return Err(format!("suggestions {actual:?} vs {expected:?}"));
    }
    Ok(())
}

/// Clusters cover every node exactly once.
pub fn check_partition(g: &PropertyGraph) -> Result<(), String> {
    let clusters = concept_clustering(g, &RelationFilter::All).map_err(|e| e.to_string())?;
    let mut seen = BTreeSet::new();
    for c in &clusters {
        if c.members.is_empty() {
            return Err("empty cluster".into());
        }
        for m in &c.members {
            if !seen.insert(*m) {
                return Err(format!("node {m} in two clusters"));
            }
        }
    }
    let all: BTreeSet<NodeId> = g.node_ids().collect();
    if seen != all {
        return Err("clusters do not cover the graph".into());
    }
    Ok(())
}

pub fn check_clique_clusters(g: &PropertyGraph, groups: &[BTreeSet<NodeId>]) -> Result<(), String> {
    check_partition(g)?;
    let clusters = concept_clustering(g, &RelationFilter::All).map_err(|e| e.to_string())?;
    let got: BTreeSet<BTreeSet<NodeId>> = clusters.iter().map(|c| c.members.iter().copied().collect()).collect();
    let want: BTreeSet<BTreeSet<NodeId>> = groups.iter().cloned().collect();
    if got != want {
        return Err(format!("clusters {got:?} vs components {want:?}"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Update payloads

/// Entities are fresh names or case variants of existing ones; endpoints mix
/// indices, existing names and an unknown name.
pub fn random_payload(rng: &mut StdRng, g: &PropertyGraph) -> UpdatePayload {
    let existing: Vec<String> = g.nodes().map(|n| n.name.clone()).collect();
    let fresh = ["Attention", "Transformers", "  transformers ", "Tokenization", "BERT"];
    let entities: Vec<String> = (0..rng.random_range(0..4))
        .map(|_| {
            if rng.random_bool(0.3) && !existing.is_empty() {
                existing.choose(rng).unwrap().to_uppercase()
            } else {
                fresh.choose(rng).unwrap().to_string()
            }
        })
        .collect();
    let endpoint = |rng: &mut StdRng| {
        if !entities.is_empty() && rng.random_bool(0.6) {
            Endpoint::Index(rng.random_range(0..entities.len()))
        } else if !existing.is_empty() && rng.random_bool(0.9) {
            Endpoint::Name(existing.choose(rng).unwrap().clone())
        } else {
            Endpoint::Name("nowhere".into())
        }
    };
    let relations = (0..rng.random_range(0..4))
        .map(|_| {
            let rel = ["PREREQUISITE_OF", "RELATED_TO", "SUBTOPIC_OF"].choose(rng).unwrap();
            NewRelation::new(endpoint(rng), *rel, endpoint(rng))
        })
        .collect();
    UpdatePayload { entities, relations }
}

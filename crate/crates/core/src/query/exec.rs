use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::*;
use super::QueryError;
use crate::graph::{
    EdgeId, EdgeRecord, MutationSummary, NodeId, NodeRecord, PropValue, Properties,
    PropertyGraph, DEFAULT_LABEL,
};

/// One value in a result row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Null,
    Value(PropValue),
    Node { node: NodeId, name: String },
    Edge { edge: EdgeId, relation: String },
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Null => "null".into(),
            Cell::Value(v) => v.to_string(),
            Cell::Node { name, .. } => name.clone(),
            Cell::Edge { relation, .. } => format!(":{relation}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultTable {
    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Pipe-separated text rendering, header first.
    pub fn render_text(&self) -> String {
        let mut out = self.columns.join(" | ");
        out.push('\n');
        if self.rows.is_empty() {
            out.push_str("(no rows)\n");
        }
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(" | "));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Bound {
    Node(NodeId),
    Edge(EdgeId),
}

type Row = BTreeMap<String, Bound>;

/// Evaluates a read query. The graph is only borrowed immutably.
pub fn execute_read(graph: &PropertyGraph, query: &Query) -> Result<ResultTable, QueryError> {
    if query.is_write() {
        return Err(QueryError::NotReadQuery);
    }
    let rows = match_rows(graph, &query.clauses)?;
    let Some(Clause::Return { projections, limit }) = query.clauses.last() else {
        return Err(QueryError::InvalidQuery("read query must end with RETURN".into()));
    };
    let mut projected: Vec<Vec<Cell>> = rows
        .iter()
        .map(|row| {
            projections
                .iter()
                .map(|p| project(graph, row, p))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    projected.sort_by_cached_key(|cells| {
        (cells.iter().map(Cell::render).collect::<Vec<_>>(), cells.clone())
    });
    projected.dedup();
    if let Some(n) = limit {
        projected.truncate(usize::try_from(*n).unwrap_or(usize::MAX));
    }
    Ok(ResultTable {
        columns: projections.iter().map(Projection::column_name).collect(),
        rows: projected,
    })
}

/// Evaluates a write query atomically: either every clause applies or none does.
pub fn execute_write(
    graph: &mut PropertyGraph,
    query: &Query,
) -> Result<MutationSummary, QueryError> {
    if !query.is_write() {
        return Err(QueryError::NotWriteQuery);
    }
    graph.transaction(|g| apply_write(g, query))
}

fn apply_write(graph: &mut PropertyGraph, query: &Query) -> Result<MutationSummary, QueryError> {
    let mut summary = MutationSummary::default();
    let has_match = query.clauses.iter().any(|c| matches!(c, Clause::Match { .. }));
    // MATCH only pairs with DELETE (validated at parse time). Without MATCH a
    // single environment row is extended by CREATE/MERGE.
    let all_rows = if has_match {
        Some(match_rows(graph, &query.clauses)?)
    } else {
        None
    };
    let mut env = Row::new();

    let mut delete_nodes: BTreeMap<NodeId, bool> = BTreeMap::new();
    let mut delete_edges: BTreeSet<EdgeId> = BTreeSet::new();

    for clause in &query.clauses {
        match clause {
            Clause::Match { .. } | Clause::Return { .. } => {}
            Clause::Create { pattern } => {
                let mut current = create_node(graph, &mut env, &pattern.start, &mut summary)?;
                for (rel, node) in &pattern.hops {
                    let next = create_node(graph, &mut env, node, &mut summary)?;
                    let (source, target) = match rel.direction {
                        RelDirection::Outgoing => (current, next),
                        RelDirection::Incoming => (next, current),
                    };
                    let relation = rel.relation.as_deref().unwrap_or_default();
                    let (edge, created) =
                        graph.upsert_edge(source, relation, target, Properties::new())?;
                    if created {
                        summary.edges_created += 1;
                    }
                    if let Some(v) = &rel.variable {
                        env.insert(v.clone(), Bound::Edge(edge));
                    }
                    current = next;
                }
            }
            Clause::Merge { node } => {
                let existing = graph
                    .nodes()
                    .find(|n| node_matches(n, node))
                    .map(|n| n.id);
                let id = match existing {
                    Some(id) => id,
                    None => {
                        let (id, created) = upsert_from_atom(graph, node)?;
                        if created {
                            summary.nodes_created += 1;
                        }
                        id
                    }
                };
                if let Some(v) = &node.variable {
                    env.insert(v.clone(), Bound::Node(id));
                }
            }
            Clause::Delete { variable, detach } => {
                let rows: Vec<&Row> = match &all_rows {
                    Some(rows) => rows.iter().collect(),
                    None => vec![&env],
                };
                for row in rows {
                    match row.get(variable) {
                        Some(Bound::Node(id)) => {
                            let entry = delete_nodes.entry(*id).or_insert(*detach);
                            *entry |= *detach;
                        }
                        Some(Bound::Edge(id)) => {
                            delete_edges.insert(*id);
                        }
                        None => return Err(QueryError::UnboundVariable(variable.clone())),
                    }
                }
            }
        }
    }

    for (id, detach) in &delete_nodes {
        if *detach {
            continue;
        }
        let blocked = graph
            .out_edges(*id)
            .chain(graph.in_edges(*id))
            .any(|e| !delete_edges.contains(&e.id));
        if blocked {
            return Err(QueryError::DeleteConnectedNode(*id));
        }
    }
    for id in delete_edges {
        if graph.edge(id).is_some() {
            graph.delete_edge(id)?;
            summary.edges_deleted += 1;
        }
    }
    for id in delete_nodes.keys() {
        summary.edges_deleted += graph.delete_node(*id)?;
        summary.nodes_deleted += 1;
    }
    Ok(summary)
}

fn create_node(
    graph: &mut PropertyGraph,
    env: &mut Row,
    atom: &NodePattern,
    summary: &mut MutationSummary,
) -> Result<NodeId, QueryError> {
    if let Some(v) = &atom.variable {
        match env.get(v) {
            Some(Bound::Node(id)) => return Ok(*id),
            Some(Bound::Edge(_)) => return Err(QueryError::VariableConflict(v.clone())),
            None => {}
        }
    }
    let (id, created) = upsert_from_atom(graph, atom)?;
    if created {
        summary.nodes_created += 1;
    }
    if let Some(v) = &atom.variable {
        env.insert(v.clone(), Bound::Node(id));
    }
    Ok(id)
}

fn upsert_from_atom(
    graph: &mut PropertyGraph,
    atom: &NodePattern,
) -> Result<(NodeId, bool), QueryError> {
    let mut name = None;
    let mut props = Properties::new();
    for (k, v) in &atom.properties {
        if k == "name" {
            name = v.as_str().map(str::to_string);
        } else {
            props.insert(k.clone(), v.clone());
        }
    }
    let name = name.ok_or_else(|| QueryError::InvalidWrite("missing name".into()))?;
    let label = atom.label.as_deref().unwrap_or(DEFAULT_LABEL);
    Ok(graph.upsert_node(&name, label, props)?)
}

fn node_matches(node: &NodeRecord, atom: &NodePattern) -> bool {
    if atom.label.as_ref().is_some_and(|l| *l != node.label) {
        return false;
    }
    atom.properties
        .iter()
        .all(|(k, v)| node.property(k).is_some_and(|actual| actual.loose_eq(v)))
}

/// All bindings produced by the MATCH clauses, applied left to right.
fn match_rows(graph: &PropertyGraph, clauses: &[Clause]) -> Result<Vec<Row>, QueryError> {
    let mut rows = vec![Row::new()];
    for clause in clauses {
        let Clause::Match { pattern, predicate } = clause else {
            continue;
        };
        let mut next = Vec::new();
        for row in &rows {
            let mut matched = Vec::new();
            match_pattern(graph, pattern, row, &mut matched);
            for candidate in matched {
                let keep = match predicate {
                    Some(p) => eval_predicate(graph, &candidate, p)?,
                    None => true,
                };
                if keep {
                    next.push(candidate);
                }
            }
        }
        rows = next;
        if rows.is_empty() {
            break;
        }
    }
    Ok(rows)
}

fn match_pattern(graph: &PropertyGraph, pattern: &Pattern, row: &Row, out: &mut Vec<Row>) {
    let start = &pattern.start;
    let bound = start.variable.as_ref().and_then(|v| row.get(v));
    let candidates: Vec<&NodeRecord> = match bound {
        Some(Bound::Node(id)) => graph.node(*id).into_iter().collect(),
        Some(Bound::Edge(_)) => Vec::new(),
        None => graph.nodes().collect(),
    };
    for node in candidates {
        if !node_matches(node, start) {
            continue;
        }
        let mut row = row.clone();
        if let Some(v) = &start.variable {
            row.insert(v.clone(), Bound::Node(node.id));
        }
        let mut used = Vec::with_capacity(pattern.hops.len());
        walk(graph, pattern, 0, node.id, &mut row, &mut used, out);
    }
}

fn walk(
    graph: &PropertyGraph,
    pattern: &Pattern,
    hop: usize,
    current: NodeId,
    row: &mut Row,
    used: &mut Vec<EdgeId>,
    out: &mut Vec<Row>,
) {
    let Some((rel, atom)) = pattern.hops.get(hop) else {
        out.push(row.clone());
        return;
    };
    let edges: Box<dyn Iterator<Item = &EdgeRecord>> = match rel.direction {
        RelDirection::Outgoing => Box::new(graph.out_edges(current)),
        RelDirection::Incoming => Box::new(graph.in_edges(current)),
    };
    for edge in edges {
        if rel.relation.as_ref().is_some_and(|r| *r != edge.relation) || used.contains(&edge.id) {
            continue;
        }
        if let Some(v) = &rel.variable {
            match row.get(v) {
                Some(Bound::Edge(id)) if *id != edge.id => continue,
                Some(Bound::Node(_)) => continue,
                _ => {}
            }
        }
        let next = match rel.direction {
            RelDirection::Outgoing => edge.target,
            RelDirection::Incoming => edge.source,
        };
        let node = &graph.node(next).expect("edge endpoint exists");
        if !node_matches(node, atom) {
            continue;
        }
        if let Some(v) = &atom.variable {
            match row.get(v) {
                Some(Bound::Node(id)) if *id != next => continue,
                Some(Bound::Edge(_)) => continue,
                _ => {}
            }
        }
        let saved: Vec<(String, Option<Bound>)> = [
            rel.variable.as_ref().map(|v| (v.clone(), Bound::Edge(edge.id))),
            atom.variable.as_ref().map(|v| (v.clone(), Bound::Node(next))),
        ]
        .into_iter()
        .flatten()
        .map(|(k, b)| {
            let prev = row.insert(k.clone(), b);
            (k, prev)
        })
        .collect();
        used.push(edge.id);
        walk(graph, pattern, hop + 1, next, row, used, out);
        used.pop();
        for (k, prev) in saved.into_iter().rev() {
            match prev {
                Some(b) => {
                    row.insert(k, b);
                }
                None => {
                    row.remove(&k);
                }
            }
        }
    }
}

fn resolve(
    graph: &PropertyGraph,
    row: &Row,
    variable: &str,
    key: &str,
) -> Result<Option<PropValue>, QueryError> {
    match row.get(variable) {
        Some(Bound::Node(id)) => Ok(graph.node(*id).and_then(|n| n.property(key))),
        Some(Bound::Edge(id)) => Ok(graph.edge(*id).and_then(|e| e.property(key))),
        None => Err(QueryError::Execution(format!("variable {variable} not bound"))),
    }
}

fn eval_predicate(
    graph: &PropertyGraph,
    row: &Row,
    predicate: &Predicate,
) -> Result<bool, QueryError> {
    for cmp in &predicate.comparisons {
        let value = |operand: &Operand| -> Result<Option<PropValue>, QueryError> {
            match operand {
                Operand::Literal(v) => Ok(Some(v.clone())),
                Operand::Property { variable, key } => resolve(graph, row, variable, key),
            }
        };
        let (left, right) = (value(&cmp.left)?, value(&cmp.right)?);
        // Comparisons involving a missing property are never true.
        let holds = match (left, right, cmp.op) {
            (Some(l), Some(r), CompareOp::Eq) => l.loose_eq(&r),
            (Some(l), Some(r), CompareOp::Ne) => !l.loose_eq(&r),
            _ => false,
        };
        if !holds {
            return Ok(false);
        }
    }
    Ok(true)
}

fn project(graph: &PropertyGraph, row: &Row, projection: &Projection) -> Result<Cell, QueryError> {
    match projection {
        Projection::Property { variable, key } => Ok(resolve(graph, row, variable, key)?
            .map(Cell::Value)
            .unwrap_or(Cell::Null)),
        Projection::Variable(v) => match row.get(v) {
            Some(Bound::Node(id)) => {
                let node = graph
                    .node(*id)
                    .ok_or_else(|| QueryError::Execution(format!("node {id} vanished")))?;
                Ok(Cell::Node { node: *id, name: node.name.clone() })
            }
            Some(Bound::Edge(id)) => {
                let edge = graph
                    .edge(*id)
                    .ok_or_else(|| QueryError::Execution(format!("edge {id} vanished")))?;
                Ok(Cell::Edge { edge: *id, relation: edge.relation.clone() })
            }
            None => Err(QueryError::Execution(format!("variable {v} not bound"))),
        },
    }
}

//! Line-delimited JSON graph files.
//!
//! ```text
//! {"kind":"node","id":0,"name":"Graph Theory","label":"Concept","properties":{}}
//! {"kind":"edge","id":0,"source":0,"target":1,"relation":"PREREQUISITE_OF","properties":{}}
//! ```
//!
//! Nodes precede the edges that reference them. Unknown fields are rejected.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::value::check_properties;
use super::{
    is_valid_relation, EdgeId, EdgeRecord, GraphError, NodeId, NodeRecord, Properties,
    PropertyGraph, SELF_LOOP_RELATION,
};

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Node(NodeLine),
    Edge(EdgeLine),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeLine {
    id: NodeId,
    name: String,
    label: String,
    #[serde(default)]
    properties: Properties,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeLine {
    id: EdgeId,
    source: NodeId,
    target: NodeId,
    relation: String,
    #[serde(default)]
    properties: Properties,
}

pub fn save_to_string(graph: &PropertyGraph) -> String {
    let mut out = String::new();
    for node in graph.nodes() {
        let line = Line::Node(NodeLine {
            id: node.id,
            name: node.name.clone(),
            label: node.label.clone(),
            properties: node.properties.clone(),
        });
        out.push_str(&serde_json::to_string(&line).expect("node serializes"));
        out.push('\n');
    }
    for edge in graph.edges() {
        let line = Line::Edge(EdgeLine {
            id: edge.id,
            source: edge.source,
            target: edge.target,
            relation: edge.relation.clone(),
            properties: edge.properties.clone(),
        });
        out.push_str(&serde_json::to_string(&line).expect("edge serializes"));
        out.push('\n');
    }
    out
}

pub fn save(graph: &PropertyGraph, path: impl AsRef<Path>) -> Result<(), GraphError> {
    let path = path.as_ref();
    let io = |e: std::io::Error| GraphError::IoFailure(format!("{}: {e}", path.display()));
    let mut file = fs::File::create(path).map_err(io)?;
    file.write_all(save_to_string(graph).as_bytes()).map_err(io)?;
    file.sync_all().map_err(io)
}

pub fn load(path: impl AsRef<Path>) -> Result<PropertyGraph, GraphError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| GraphError::IoFailure(format!("{}: {e}", path.display())))?;
    load_from_str(&text)
}

pub fn load_from_str(text: &str) -> Result<PropertyGraph, GraphError> {
    let mut graph = PropertyGraph::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| GraphError::MalformedRecord { line, message };
        let record: Line = serde_json::from_str(raw).map_err(|e| malformed(e.to_string()))?;
        match record {
            Line::Node(n) => {
                if n.name.trim().is_empty() {
                    return Err(malformed("empty node name".into()));
                }
                if graph.contains_node(n.id) {
                    return Err(malformed(format!("duplicate node id {}", n.id)));
                }
                if graph.find_node(&n.name, &n.label).is_some() {
                    return Err(malformed(format!("duplicate node name {:?}", n.name)));
                }
                check_properties(&n.properties).map_err(|e| malformed(e.to_string()))?;
                graph.restore_node(NodeRecord {
                    id: n.id,
                    name: n.name,
                    label: n.label,
                    properties: n.properties,
                });
            }
            Line::Edge(e) => {
                for end in [e.source, e.target] {
                    if !graph.contains_node(end) {
                        return Err(malformed(format!("edge references unknown node {end}")));
                    }
                }
                if graph.edge(e.id).is_some() {
                    return Err(malformed(format!("duplicate edge id {}", e.id)));
                }
                if !is_valid_relation(&e.relation) {
                    return Err(malformed(format!("invalid relation {:?}", e.relation)));
                }
                if e.source == e.target && e.relation != SELF_LOOP_RELATION {
                    return Err(malformed(format!("self-loop on {}", e.relation)));
                }
                if graph.find_edge(e.source, &e.relation, e.target).is_some() {
                    return Err(malformed("duplicate edge triple".into()));
                }
                check_properties(&e.properties).map_err(|err| malformed(err.to_string()))?;
                graph.restore_edge(EdgeRecord {
                    id: e.id,
                    source: e.source,
                    target: e.target,
                    relation: e.relation,
                    properties: e.properties,
                });
            }
        }
    }
    Ok(graph)
}

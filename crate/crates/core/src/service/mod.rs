//! JSON-over-HTTP API: chat sessions, graph reads and edits, traces.
//!
//! Every non-2xx response body is an [`ApiError`]. Graph writes go through
//! the shared graph's write lock, so a write is visible to the next read.
//! Chats in one session run one at a time; different sessions run
//! concurrently.

mod error;
mod session;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tower_http::cors::CorsLayer;

use crate::graph::{
    properties_from_json, Direction, EdgeId, EdgeRecord, MutationSummary, NodeId, NodeRecord,
    SharedGraph, DEFAULT_LABEL,
};
use crate::pipeline::{AgentTrace, Pipeline, PipelineError, TraceEntry, TraceStore};

pub use error::ApiError;
pub use session::{Session, SessionTurn, Sessions};

/// Largest page `GET /api/graph` serves.
pub const MAX_PAGE: usize = 5000;
pub const DEFAULT_PAGE: usize = 1000;

#[derive(Clone)]
pub struct AppState {
    pub graph: SharedGraph,
    pub pipeline: Arc<Pipeline>,
    pub traces: Arc<TraceStore>,
    pub sessions: Arc<Sessions>,
}

impl AppState {
    pub fn new(graph: SharedGraph, pipeline: Pipeline, traces: TraceStore, idle_timeout: Duration) -> Self {
        Self {
            graph,
            pipeline: Arc::new(pipeline),
            traces: Arc::new(traces),
            sessions: Arc::new(Sessions::new(idle_timeout)),
        }
    }
}

pub fn router(state: AppState, ui_origin: Option<&str>) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/chat", post(chat))
        .route("/api/graph", get(graph_page))
        .route("/api/graph/nodes", post(create_node))
        .route("/api/graph/nodes/{id}", delete(delete_node))
        .route("/api/graph/edges", post(create_edge))
        .route("/api/graph/edges/{id}", delete(delete_edge))
        .route("/api/graph/neighbors/{id}", get(neighbors))
        .route("/api/trace/{id}", get(trace))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(state);
    if let Some(origin) = ui_origin.and_then(|o| HeaderValue::from_str(o).ok()) {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(origin)
                .allow_methods([Method::GET, Method::POST, Method::DELETE])
                .allow_headers([axum::http::header::CONTENT_TYPE]),
        );
    }
    app
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.body_text()))
}

fn params<T>(query: Result<Query<T>, QueryRejection>) -> Result<T, ApiError> {
    query
        .map(|Query(v)| v)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_query", e.body_text()))
}

fn path_id(raw: &str) -> Result<u64, ApiError> {
    raw.parse()
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "invalid_id", format!("{raw:?} is not an id")))
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Debug, Deserialize)]
pub struct ChatRequestBody {
    #[serde(default)]
    pub session_id: Option<String>,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChatResponse {
    pub session_id: String,
    pub answer: String,
    pub task_type: String,
    pub trace_id: String,
}

async fn chat(State(state): State<AppState>, payload: Result<Json<ChatRequestBody>, JsonRejection>) -> ApiResult<ChatResponse> {
    let req = body(payload)?;
    if req.message.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "empty_message", "message is empty"));
    }
    let session = match &req.session_id {
        Some(id) => state.sessions.get(id).ok_or_else(|| {
            ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no active session {id}"))
        })?,
        None => state.sessions.create(),
    };
    // Held across the run: one chat at a time per session.
    let mut session = session.lock_owned().await;
    let trace_id = uuid::Uuid::new_v4().simple().to_string();
    let history = session.turns();
    let (pipeline, graph, message, id) = (state.pipeline.clone(), state.graph.clone(), req.message.clone(), trace_id.clone());
    let outcome = tokio::task::spawn_blocking(move || pipeline.run(&graph, &message, &history, &id))
        .await
        .map_err(|e| ApiError::internal(format!("pipeline task failed: {e}")))?;
    state
        .traces
        .save(&outcome.trace)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    let task_type = outcome.trace.intent.map(|k| k.label().to_string());
    match outcome.result {
        Ok(answer) => {
            session.push(SessionTurn {
                user: req.message,
                answer: answer.clone(),
                trace_id: trace_id.clone(),
            });
            Ok(Json(ChatResponse {
                session_id: session.session_id.clone(),
                answer,
                task_type: task_type.unwrap_or_default(),
                trace_id,
            }))
        }
        Err(err) => {
            let status = match err {
                PipelineError::EmptyQuery => StatusCode::BAD_REQUEST,
                PipelineError::BackendUnavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
                _ => StatusCode::UNPROCESSABLE_ENTITY,
            };
            Err(ApiError::new(status, err.code(), err.to_string()).with_details(json!({
                "session_id": session.session_id,
                "trace_id": trace_id,
                "task_type": task_type,
            })))
        }
    }
}

#[derive(Debug, Deserialize)]
pub struct PageParams {
    pub limit: Option<usize>,
    pub offset: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GraphPage {
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
    pub total_nodes: usize,
    pub total_edges: usize,
}

async fn graph_page(State(state): State<AppState>, query: Result<Query<PageParams>, QueryRejection>) -> ApiResult<GraphPage> {
    let p = params(query)?;
    let limit = p.limit.unwrap_or(DEFAULT_PAGE);
    if limit == 0 || limit > MAX_PAGE {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "invalid_pagination",
            format!("limit must be between 1 and {MAX_PAGE}"),
        ));
    }
    let graph = state.graph.read();
    let mut nodes: Vec<&NodeRecord> = graph.nodes().collect();
    nodes.sort_by_cached_key(|n| (n.normalized_name(), n.id));
    let page: Vec<NodeRecord> = nodes
        .into_iter()
        .skip(p.offset.unwrap_or(0))
        .take(limit)
        .cloned()
        .collect();
    let ids: BTreeSet<NodeId> = page.iter().map(|n| n.id).collect();
    let edges = graph
        .edges()
        .filter(|e| ids.contains(&e.source) && ids.contains(&e.target))
        .cloned()
        .collect();
    Ok(Json(GraphPage {
        nodes: page,
        edges,
        total_nodes: graph.node_count(),
        total_edges: graph.edge_count(),
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EditResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeRecord>,
    pub mutation: MutationSummary,
    /// Audit trace of the edit.
    pub trace_id: String,
}

/// Records a graph edit as a one-entry trace.
fn audit(state: &AppState, action: &str, request: Value, mutation: MutationSummary) -> Result<String, ApiError> {
    let trace_id = uuid::Uuid::new_v4().simple().to_string();
    let mut trace = AgentTrace::new(&trace_id, action);
    let mut entry = TraceEntry::new("edit");
    entry.parsed = request;
    entry.mutation = Some(mutation);
    trace.entries.push(entry);
    state.traces.save(&trace).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(trace_id)
}

#[derive(Debug, Deserialize)]
pub struct NewNode {
    pub name: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub properties: Map<String, Value>,
}

async fn create_node(State(state): State<AppState>, payload: Result<Json<Value>, JsonRejection>) -> ApiResult<EditResponse> {
    let raw = body(payload)?;
    let req: NewNode = serde_json::from_value(raw.clone())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string()))?;
    let properties = properties_from_json(req.properties)?;
    let label = req.label.as_deref().unwrap_or(DEFAULT_LABEL);
    let (node, mutation) = {
        let mut graph = state.graph.write();
        let (id, created) = graph.upsert_node(&req.name, label, properties)?;
        let mutation = MutationSummary {
            nodes_created: usize::from(created),
            ..MutationSummary::default()
        };
        (graph.node(id).cloned(), mutation)
    };
    let trace_id = audit(&state, "POST /api/graph/nodes", raw, mutation)?;
    Ok(Json(EditResponse { node, edge: None, mutation, trace_id }))
}

#[derive(Debug, Deserialize)]
pub struct NewEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub relation: String,
    #[serde(default)]
    pub properties: Map<String, Value>,
}

async fn create_edge(State(state): State<AppState>, payload: Result<Json<Value>, JsonRejection>) -> ApiResult<EditResponse> {
    let raw = body(payload)?;
    let req: NewEdge = serde_json::from_value(raw.clone())
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "invalid_body", e.to_string()))?;
    let properties = properties_from_json(req.properties)?;
    let (edge, mutation) = {
        let mut graph = state.graph.write();
        let (id, created) = graph.upsert_edge(req.source, &req.relation, req.target, properties)?;
        let mutation = MutationSummary {
            edges_created: usize::from(created),
            ..MutationSummary::default()
        };
        (graph.edge(id).cloned(), mutation)
    };
    let trace_id = audit(&state, "POST /api/graph/edges", raw, mutation)?;
    Ok(Json(EditResponse { node: None, edge, mutation, trace_id }))
}

async fn delete_node(State(state): State<AppState>, Path(raw): Path<String>) -> ApiResult<EditResponse> {
    let id = NodeId(path_id(&raw)?);
    let edges_deleted = state.graph.write().delete_node(id)?;
    let mutation = MutationSummary {
        nodes_deleted: 1,
        edges_deleted,
        ..MutationSummary::default()
    };
    let trace_id = audit(&state, "DELETE /api/graph/nodes", json!({ "id": id }), mutation)?;
    Ok(Json(EditResponse { node: None, edge: None, mutation, trace_id }))
}

async fn delete_edge(State(state): State<AppState>, Path(raw): Path<String>) -> ApiResult<EditResponse> {
    let id = EdgeId(path_id(&raw)?);
    state.graph.write().delete_edge(id)?;
    let mutation = MutationSummary {
        edges_deleted: 1,
        ..MutationSummary::default()
    };
    let trace_id = audit(&state, "DELETE /api/graph/edges", json!({ "id": id }), mutation)?;
    Ok(Json(EditResponse { node: None, edge: None, mutation, trace_id }))
}

#[derive(Debug, Deserialize)]
pub struct NeighborParams {
    #[serde(default)]
    pub direction: Direction,
    pub relation: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Neighbor {
    pub edge: EdgeRecord,
    pub node: NodeRecord,
}

async fn neighbors(
    State(state): State<AppState>,
    Path(raw): Path<String>,
    query: Result<Query<NeighborParams>, QueryRejection>,
) -> ApiResult<Vec<Neighbor>> {
    let id = NodeId(path_id(&raw)?);
    let p = params(query)?;
    let graph = state.graph.read();
    let list = graph
        .neighbors(id, p.direction, p.relation.as_deref())?
        .into_iter()
        .map(|(edge, node)| Neighbor {
            edge: edge.clone(),
            node: node.clone(),
        })
        .collect();
    Ok(Json(list))
}

async fn trace(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<AgentTrace> {
    match state.traces.get(&id) {
        Ok(Some(trace)) => Ok(Json(trace)),
        Ok(None) => Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_trace", format!("no trace {id}"))),
        Err(e) => Err(ApiError::internal(e.to_string())),
    }
}

/// Sessions not yet expired.
pub fn active_sessions(state: &AppState) -> usize {
    state.sessions.len()
}


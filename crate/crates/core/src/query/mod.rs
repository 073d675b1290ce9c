//! A small Cypher-like query language.
//!
//! Supported: `MATCH` over a single linear path with optional `WHERE`
//! (`=`, `<>`, `AND`), `CREATE`, node-only `MERGE`, `DELETE` /
//! `DETACH DELETE`, and `RETURN` with property projections and `LIMIT`.
//! A query either reads (`MATCH ... RETURN`) or writes; `MATCH` may precede
//! `DELETE` to select what to remove. See `docs/query-grammar.md`.

mod ast;
mod exec;
mod lexer;
mod parser;
mod render;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use exec::{execute_read, execute_write, Cell, ResultTable};
pub use parser::parse;
pub use render::{ident as render_ident, literal as render_literal, render};

use crate::graph::{GraphError, MutationSummary, SharedGraph};

/// Parse failure location and the token kinds that would have been accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub offset: usize,
    pub message: String,
    pub expected: Vec<String>,
}

#[derive(Debug, Error, PartialEq)]
pub enum QueryError {
    #[error("syntax error at offset {}: {} (expected one of: {})", .0.offset, .0.message, .0.expected.join(", "))]
    Syntax(Diagnostic),
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("query mixes read and write clauses")]
    MixedReadWrite,
    #[error("variable {0} is used inconsistently")]
    VariableConflict(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid write: {0}")]
    InvalidWrite(String),
    #[error("expected a read query")]
    NotReadQuery,
    #[error("expected a write query")]
    NotWriteQuery,
    #[error("node {0} still has relationships; use DETACH DELETE")]
    DeleteConnectedNode(crate::graph::NodeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("execution error: {0}")]
    Execution(String),
}

impl QueryError {
    /// True for errors raised before execution (syntax and validation).
    pub fn is_parse_error(&self) -> bool {
        matches!(
            self,
            QueryError::Syntax(_)
                | QueryError::UnboundVariable(_)
                | QueryError::MixedReadWrite
                | QueryError::VariableConflict(_)
                | QueryError::InvalidQuery(_)
                | QueryError::InvalidWrite(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryOutcome {
    Rows(ResultTable),
    Mutation(MutationSummary),
}

/// Executes against a shared graph, taking the read or write lock as the
/// query class requires.
pub fn execute(graph: &SharedGraph, query: &Query) -> Result<QueryOutcome, QueryError> {
    if query.is_write() {
        let mut guard = graph.write();
        execute_write(&mut guard, query).map(QueryOutcome::Mutation)
    } else {
        let guard = graph.read();
        execute_read(&guard, query).map(QueryOutcome::Rows)
    }
}

/// Parses then executes.
pub fn run(graph: &SharedGraph, text: &str) -> Result<QueryOutcome, QueryError> {
    execute(graph, &parse(text)?)
}

//! Graph-grounded chat agent.
//!
//! A question is classified into one of seven task kinds, its concepts are
//! extracted and linked to graph nodes, and a deterministic kernel (or, for
//! free-form questions, a bounded query loop) produces the evidence that
//! the final answer is written from. Every stage is recorded in a trace.
//!
//! - [`graph`]: in-memory property graph with JSONL persistence.
//! - [`query`]: Cypher-like query language.
//! - [`kernels`]: the six structured graph tasks.
//! - [`pipeline`]: the agent stages, traces and graph updates.
//! - [`benchmark`]: intent accuracy and execution-success evaluation.
//! - [`service`]: HTTP API.

pub mod graph;
pub mod query;
pub mod llm;
pub mod linker;
pub mod kernels;
pub mod task;
pub mod pipeline;
pub mod benchmark;
pub mod config;
pub mod service;

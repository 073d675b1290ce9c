//! Intent-classification and execution-success benchmark.
//!
//! Datasets are JSONL files of [`BenchmarkRecord`]s. Each record is run
//! through the full pipeline on its own copy of the graph; the predicted
//! intent feeds a 7x7 confusion matrix and the run's outcome decides
//! execution success.

mod metrics;
mod script;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{shared, PropertyGraph};
use crate::pipeline::Pipeline;
use crate::task::TaskKind;

pub use metrics::{compute_metrics, report, ClassMetrics, Metrics, ReportFormat};
pub use script::{gold_script, gold_script_with};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRecord {
    pub query: String,
    pub gold_task: TaskKind,
    /// Node names the query mentions, in order of appearance.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gold_concepts: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BenchmarkError {
    #[error("cannot read dataset: {0}")]
    Io(String),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<BenchmarkRecord>, BenchmarkError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| BenchmarkError::Io(format!("{}: {e}", path.display())))?;
    parse_dataset(&text)
}

/// One record per non-blank line.
pub fn parse_dataset(text: &str) -> Result<Vec<BenchmarkRecord>, BenchmarkError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| BenchmarkError::MalformedRecord { line: i + 1, message };
        let record: BenchmarkRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if record.query.trim().is_empty() {
            return Err(malformed("query is empty".into()));
        }
        records.push(record);
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordLog {
    pub index: usize,
    pub query: String,
    pub gold: TaskKind,
    pub predicted: TaskKind,
    pub exec_success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub trace_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub metrics: Metrics,
    pub records: Vec<RecordLog>,
}

fn evaluate(pipeline: &Pipeline, graph: &PropertyGraph, index: usize, record: &BenchmarkRecord) -> RecordLog {
    let trace_id = format!("bench-{index:04}");
    let shared = shared(graph.clone());
    let outcome = pipeline.run(&shared, &record.query, &[], &trace_id);
    // A run that failed before classification predicted nothing; it counts
    // as the fallback class.
    let predicted = outcome.trace.intent.unwrap_or(TaskKind::FreeForm);
    let mut error = outcome.result.as_ref().err().map(|e| e.to_string());
    let exec_success = match &outcome.result {
        Err(_) => false,
        Ok(answer) if answer.trim().is_empty() => {
            error = Some("empty answer".into());
            false
        }
        Ok(_) if predicted.is_predefined() => match &outcome.kernel {
            None => {
                error = Some("no kernel output".into());
                false
            }
            Some(k) => match k.validate(&shared.read()) {
                Ok(()) if k.kind == predicted => true,
                Ok(()) => {
                    error = Some(format!("kernel {} ran for intent {predicted}", k.kind));
                    false
                }
                Err(why) => {
                    error = Some(why);
                    false
                }
            },
        },
        Ok(_) => true,
    };
    RecordLog {
        index,
        query: record.query.clone(),
        gold: record.gold_task,
        predicted,
        exec_success,
        error,
        trace_id,
    }
}

/// Runs every record, up to `parallelism` at a time. The result does not
/// depend on `parallelism`.
pub fn run_benchmark(
    pipeline: &Pipeline,
    graph: &PropertyGraph,
    records: &[BenchmarkRecord],
    parallelism: usize,
) -> BenchmarkRun {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool");
    let logs: Vec<RecordLog> = pool.install(|| {
        records
            .par_iter()
            .enumerate()
            .map(|(i, r)| evaluate(pipeline, graph, i, r))
            .collect()
    });
    let pairs: Vec<(TaskKind, TaskKind)> = logs.iter().map(|l| (l.gold, l.predicted)).collect();
    let exec: Vec<bool> = logs.iter().map(|l| l.exec_success).collect();
    BenchmarkRun {
        metrics: compute_metrics(&pairs, &exec),
        records: logs,
    }
}

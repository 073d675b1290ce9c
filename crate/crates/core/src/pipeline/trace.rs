use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::graph::MutationSummary;
use crate::llm::ReactStep;
use crate::task::TaskKind;

/// One stage of a request: what the model was shown, what it said, and
/// what was made of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_id: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_output: Option<String>,
    #[serde(default)]
    pub parsed: Value,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub react_steps: Vec<ReactStepRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutation: Option<MutationSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub duration_ms: f64,
}

impl TraceEntry {
    pub fn new(stage: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            step_id: None,
            prompt: None,
            raw_output: None,
            parsed: Value::Null,
            react_steps: Vec::new(),
            mutation: None,
            warnings: Vec::new(),
            error: None,
            duration_ms: 0.0,
        }
    }
}

/// Serializable mirror of [`ReactStep`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactStepRecord {
    pub thought: String,
    pub action: Value,
    pub observation: String,
    pub raw_output: String,
}

impl From<&ReactStep> for ReactStepRecord {
    fn from(step: &ReactStep) -> Self {
        Self {
            thought: step.thought.clone(),
            action: serde_json::to_value(&step.action).unwrap_or(Value::Null),
            observation: step.observation.clone(),
            raw_output: step.raw_output.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceFailure {
    /// `step_failed`, `missing_concepts`, `backend_unavailable`, ...
    pub code: String,
    pub stage: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_id: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub trace_id: String,
    pub query: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intent: Option<TaskKind>,
    pub entries: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<TraceFailure>,
}

impl AgentTrace {
    pub fn new(trace_id: impl Into<String>, query: impl Into<String>) -> Self {
        Self {
            trace_id: trace_id.into(),
            query: query.into(),
            intent: None,
            entries: Vec::new(),
            answer: None,
            failure: None,
        }
    }

    pub fn stages(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.stage.as_str()).collect()
    }

    /// Copy with every wall-clock field zeroed, for comparing runs.
    pub fn without_timing(&self) -> AgentTrace {
        let mut copy = self.clone();
        for entry in &mut copy.entries {
            entry.duration_ms = 0.0;
        }
        copy
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("traces serialize")
    }
}

#[derive(Debug, Error)]
pub enum TraceStoreError {
    #[error("invalid trace id {0:?}")]
    InvalidId(String),
    #[error("trace I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace file is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
}

/// Keeps traces in memory and, when a directory is configured, as one
/// `<trace_id>.json` file each.
#[derive(Debug, Default)]
pub struct TraceStore {
    dir: Option<PathBuf>,
    memory: RwLock<HashMap<String, AgentTrace>>,
}

fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl TraceStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Result<Self, TraceStoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir: Some(dir),
            memory: RwLock::default(),
        })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn save(&self, trace: &AgentTrace) -> Result<(), TraceStoreError> {
        if !valid_id(&trace.trace_id) {
            return Err(TraceStoreError::InvalidId(trace.trace_id.clone()));
        }
        if let Some(dir) = &self.dir {
            let path = dir.join(format!("{}.json", trace.trace_id));
            let tmp = dir.join(format!(".{}.json.tmp", trace.trace_id));
            fs::write(&tmp, trace.to_json())?;
            fs::rename(tmp, path)?;
        }
        self.memory.write().insert(trace.trace_id.clone(), trace.clone());
        Ok(())
    }

    pub fn get(&self, trace_id: &str) -> Result<Option<AgentTrace>, TraceStoreError> {
        if !valid_id(trace_id) {
            return Ok(None);
        }
        if let Some(trace) = self.memory.read().get(trace_id) {
            return Ok(Some(trace.clone()));
        }
        let Some(dir) = &self.dir else {
            return Ok(None);
        };
        let path = dir.join(format!("{trace_id}.json"));
        match fs::read_to_string(&path) {
            Ok(text) => Ok(Some(serde_json::from_str(&text)?)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}

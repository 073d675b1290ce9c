//! Application configuration, read from a JSON file.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linker::DEFAULT_LINK_THRESHOLD;
use crate::llm::{ChatBackend, HttpBackend, HttpConfig, LlmError, MockBackend, MockScript, PromptSet};
use crate::pipeline::{PipelineConfig, DEFAULT_MAX_REACT_STEPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend {other:?}, expected mock or http")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub backend: BackendKind,
    /// Chat-completions endpoint for the HTTP backend.
    pub endpoint: Option<String>,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub link_threshold: f64,
    pub max_react_steps: usize,
    /// JSONL graph loaded at startup and written back on shutdown.
    pub graph_path: Option<PathBuf>,
    /// Traces are persisted here when set, otherwise kept in memory.
    pub trace_dir: Option<PathBuf>,
    /// Origin allowed by CORS.
    pub ui_origin: Option<String>,
    pub port: u16,
    /// Mock script for the mock backend.
    pub script_path: Option<PathBuf>,
    /// Directory of prompt overrides.
    pub prompt_dir: Option<PathBuf>,
    pub session_idle_secs: u64,
    pub request_timeout_secs: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Mock,
            endpoint: None,
            model: "gpt-4o".to_string(),
            api_key_env: Some("OPENAI_API_KEY".to_string()),
            link_threshold: DEFAULT_LINK_THRESHOLD,
            max_react_steps: DEFAULT_MAX_REACT_STEPS,
            graph_path: None,
            trace_dir: None,
            ui_origin: None,
            port: 8080,
            script_path: None,
            prompt_dir: None,
            session_idle_secs: 3600,
            request_timeout_secs: 60,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

impl AppConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: AppConfig = serde_json::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.link_threshold) {
            return Err(ConfigError::Invalid(format!(
                "link_threshold {} is outside [0, 1]",
                self.link_threshold
            )));
        }
        if self.max_react_steps == 0 {
            return Err(ConfigError::Invalid("max_react_steps must be at least 1".into()));
        }
        if self.backend == BackendKind::Http && self.endpoint.as_deref().is_none_or(str::is_empty) {
            return Err(ConfigError::Invalid("the http backend needs an endpoint".into()));
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            link_threshold: self.link_threshold,
            max_react_steps: self.max_react_steps,
            ..PipelineConfig::default()
        }
    }

    pub fn prompts(&self) -> Result<PromptSet, ConfigError> {
        match &self.prompt_dir {
            Some(dir) => Ok(PromptSet::load_dir(dir)?),
            None => Ok(PromptSet::default()),
        }
    }

    /// The configured backend. Without a script the mock answers every
    /// request with `INTENT: FREE_FORM`.
    pub fn backend(&self) -> Result<Arc<dyn ChatBackend>, ConfigError> {
        match self.backend {
            BackendKind::Mock => {
                let script = match &self.script_path {
                    Some(path) => MockScript::load(path)?,
                    None => MockScript::new(Vec::new(), "INTENT: FREE_FORM"),
                };
                Ok(Arc::new(MockBackend::new(script)?))
            }
            BackendKind::Http => {
                let endpoint = self.endpoint.clone().unwrap_or_default();
                let mut http = HttpConfig::new(endpoint, self.model.clone());
                http.api_key_env = self.api_key_env.clone();
                http.timeout = Duration::from_secs(self.request_timeout_secs.max(1));
                Ok(Arc::new(HttpBackend::new(http)?))
            }
        }
    }
}

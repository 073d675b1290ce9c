use std::fs;
use std::path::Path;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ChatBackend, ChatRequest, LlmError};

/// Script file format:
///
/// ```json
/// {"rules": [{"match": "classify", "response": "RELATION_JUDGMENT"},
///            {"match": ["STAGE: extract", "graph theory"], "response": "ENTITY: graph theory|0|12"},
///            {"match": "(?s)STAGE: react.*PREVIOUS STEPS", "regex": true, "response": "ACTION: FINISH done"}],
///  "default": "FREE_FORM"}
/// ```
///
/// A rule fires when every pattern in `match` occurs in the request
/// transcript. Rules are tried in order; the first match wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockScript {
    pub rules: Vec<MockRule>,
    #[serde(rename = "default")]
    pub default_response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MockRule {
    #[serde(rename = "match")]
    pub matcher: Matcher,
    pub response: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub regex: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Matcher {
    One(String),
    All(Vec<String>),
}

impl Matcher {
    fn patterns(&self) -> &[String] {
        match self {
            Matcher::One(s) => std::slice::from_ref(s),
            Matcher::All(v) => v,
        }
    }
}

impl MockRule {
    pub fn new(matcher: impl Into<String>, response: impl Into<String>) -> Self {
        Self {
            matcher: Matcher::One(matcher.into()),
            response: response.into(),
            regex: false,
        }
    }

    pub fn all<S: Into<String>>(
        matchers: impl IntoIterator<Item = S>,
        response: impl Into<String>,
    ) -> Self {
        Self {
            matcher: Matcher::All(matchers.into_iter().map(Into::into).collect()),
            response: response.into(),
            regex: false,
        }
    }
}

impl MockScript {
    pub fn new(rules: Vec<MockRule>, default_response: impl Into<String>) -> Self {
        Self {
            rules,
            default_response: default_response.into(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LlmError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| LlmError::Script(format!("{}: {e}", path.display())))
    }
}

enum CompiledMatcher {
    Substrings(Vec<String>),
    Patterns(Vec<Regex>),
}

/// Deterministic scripted backend: the response is a pure function of the
/// script and the request transcript.
pub struct MockBackend {
    script: MockScript,
    compiled: Vec<CompiledMatcher>,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Result<Self, LlmError> {
        let compiled = script
            .rules
            .iter()
            .map(|rule| {
                if rule.regex {
                    rule.matcher
                        .patterns()
                        .iter()
                        .map(|p| Regex::new(p).map_err(|e| LlmError::Script(e.to_string())))
                        .collect::<Result<Vec<_>, _>>()
                        .map(CompiledMatcher::Patterns)
                } else {
                    Ok(CompiledMatcher::Substrings(rule.matcher.patterns().to_vec()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { script, compiled })
    }

    /// A backend that always answers `response`.
    pub fn constant(response: impl Into<String>) -> Self {
        Self::new(MockScript::new(Vec::new(), response)).expect("no rules to compile")
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    fn respond(&self, transcript: &str) -> &str {
        for (rule, matcher) in self.script.rules.iter().zip(&self.compiled) {
            let hit = match matcher {
                CompiledMatcher::Substrings(subs) => subs.iter().all(|s| transcript.contains(s.as_str())),
                CompiledMatcher::Patterns(res) => res.iter().all(|r| r.is_match(transcript)),
            };
            if hit {
                return &rule.response;
            }
        }
        &self.script.default_response
    }
}

impl ChatBackend for MockBackend {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        request.validate()?;
        let response = self.respond(&request.transcript());
        if response.trim().is_empty() {
            return Err(LlmError::EmptyCompletion);
        }
        Ok(response.to_string())
    }

    fn name(&self) -> &str {
        "mock"
    }
}

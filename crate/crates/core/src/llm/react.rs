use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;
use thiserror::Error;

use super::{render_prompt, ChatBackend, ChatRequest, LlmError, PromptTemplate, DEFAULT_MAX_TOKENS};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReactAction {
    Query { text: String },
    Finish { answer: String },
    /// Output without a well-formed action line.
    Invalid,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReactStep {
    pub thought: String,
    pub action: ReactAction,
    pub observation: String,
    pub raw_output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReactOutcome {
    pub answer: String,
    pub steps: Vec<ReactStep>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReactError {
    #[error("no FINISH action within {} steps", .0.len())]
    BudgetExhausted(Vec<ReactStep>),
    #[error("backend failed after {} steps: {error}", .steps.len())]
    Backend {
        error: LlmError,
        steps: Vec<ReactStep>,
    },
    #[error(transparent)]
    Setup(LlmError),
}

impl ReactError {
    pub fn steps(&self) -> &[ReactStep] {
        match self {
            ReactError::BudgetExhausted(steps) | ReactError::Backend { steps, .. } => steps,
            ReactError::Setup(_) => &[],
        }
    }
}

/// Callbacks available to the model during an episode.
pub trait ReactTools {
    /// Runs a query and returns the observation text shown to the model.
    /// Failures are reported in-band (`PARSE_ERROR: ...`, `EXEC_ERROR: ...`).
    fn query(&mut self, text: &str) -> String;
}

impl<F: FnMut(&str) -> String> ReactTools for F {
    fn query(&mut self, text: &str) -> String {
        self(text)
    }
}

pub const ACTION_PARSE_ERROR: &str =
    "PARSE_ERROR: expected a line `ACTION: QUERY <query>` or `ACTION: FINISH <answer>`";

/// Splits model output into thought and action. The first line starting
/// with `ACTION:` carries the verb; its argument runs to the end of output.
pub fn parse_action(output: &str) -> (String, ReactAction) {
    let lines: Vec<&str> = output.lines().collect();
    let action_at = lines.iter().position(|l| {
        l.trim_start()
            .get(..7)
            .is_some_and(|p| p.eq_ignore_ascii_case("ACTION:"))
    });
    let thought_lines = &lines[..action_at.unwrap_or(lines.len())];
    let thought = thought_lines
        .iter()
        .map(|l| {
            let t = l.trim();
            match t.get(..8) {
                Some(p) if p.eq_ignore_ascii_case("THOUGHT:") => t[8..].trim(),
                _ => t,
            }
        })
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n");
    let Some(at) = action_at else {
        return (thought, ReactAction::Invalid);
    };
    let first = lines[at].trim_start()[7..].trim_start();
    let (verb, rest) = first.split_once(char::is_whitespace).unwrap_or((first, ""));
    let mut argument = rest.trim().to_string();
    for extra in &lines[at + 1..] {
        argument.push('\n');
        argument.push_str(extra);
    }
    let argument = argument.trim().to_string();
    let action = match verb.to_ascii_uppercase().as_str() {
        "QUERY" if !argument.is_empty() => ReactAction::Query { text: argument },
        "FINISH" if !argument.is_empty() => ReactAction::Finish { answer: argument },
        _ => ReactAction::Invalid,
    };
    (thought, action)
}

fn transcript(steps: &[ReactStep]) -> String {
    let mut out = String::from("\n\nPREVIOUS STEPS:\n");
    for (i, step) in steps.iter().enumerate() {
        let action = match &step.action {
            ReactAction::Query { text } => format!("ACTION: QUERY {text}"),
            ReactAction::Finish { answer } => format!("ACTION: FINISH {answer}"),
            ReactAction::Invalid => format!("(unparseable) {}", step.raw_output.trim()),
        };
        let _ = write!(
            out,
            "STEP {}\nTHOUGHT: {}\n{}\nOBSERVATION: {}\n",
            i + 1,
            step.thought,
            action,
            step.observation.trim_end()
        );
    }
    out
}

/// Runs a thought/action/observation loop for at most `max_steps` model calls.
pub fn run_react(
    backend: &dyn ChatBackend,
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
    tools: &mut dyn ReactTools,
    max_steps: usize,
) -> Result<ReactOutcome, ReactError> {
    if max_steps == 0 {
        return Err(ReactError::Setup(LlmError::InvalidRequest(
            "max_steps must be at least 1".into(),
        )));
    }
    let prompt = render_prompt(template, bindings).map_err(ReactError::Setup)?;
    let mut steps: Vec<ReactStep> = Vec::new();
    while steps.len() < max_steps {
        let mut user = prompt.clone();
        if !steps.is_empty() {
            user.push_str(&transcript(&steps));
        }
        let request = ChatRequest {
            system_prompt: template.system.clone(),
            messages: vec![super::ChatMessage::user(user)],
            temperature: template.temperature.unwrap_or(0.0),
            max_tokens: DEFAULT_MAX_TOKENS,
        };
        let raw = match backend.complete(&request) {
            Ok(raw) => raw,
            Err(error) => return Err(ReactError::Backend { error, steps }),
        };
        let (thought, action) = parse_action(&raw);
        let observation = match &action {
            ReactAction::Query { text } => tools.query(text),
            ReactAction::Finish { .. } => String::new(),
            ReactAction::Invalid => ACTION_PARSE_ERROR.to_string(),
        };
        let finished = match &action {
            ReactAction::Finish { answer } => Some(answer.clone()),
            _ => None,
        };
        steps.push(ReactStep {
            thought,
            action,
            observation,
            raw_output: raw,
        });
        if let Some(answer) = finished {
            return Ok(ReactOutcome { answer, steps });
        }
    }
    Err(ReactError::BudgetExhausted(steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::{MockBackend, MockRule, MockScript};

    fn template() -> PromptTemplate {
        PromptTemplate::new("react", "STAGE: react\nQuestion: {query}")
    }

    fn bindings() -> BTreeMap<String, String> {
        [("query".to_string(), "what follows A?".to_string())].into()
    }

    #[test]
    fn parses_actions() {
        let (t, a) = parse_action("THOUGHT: look it up\nACTION: QUERY MATCH (n) RETURN n");
        assert_eq!(t, "look it up");
        assert_eq!(a, ReactAction::Query { text: "MATCH (n) RETURN n".into() });
        let (_, a) = parse_action("action: finish It is B.\nSecond line.");
        assert_eq!(a, ReactAction::Finish { answer: "It is B.\nSecond line.".into() });
        assert_eq!(parse_action("gibberish").1, ReactAction::Invalid);
        assert_eq!(parse_action("ACTION: JUMP now").1, ReactAction::Invalid);
        assert_eq!(parse_action("ACTION: FINISH").1, ReactAction::Invalid);
    }

    #[test]
    fn query_then_finish() {
        let backend = MockBackend::new(MockScript::new(
            vec![
                MockRule::new("PREVIOUS STEPS:", "THOUGHT: done\nACTION: FINISH B follows A"),
                MockRule::new("STAGE: react", "THOUGHT: check\nACTION: QUERY MATCH (a)-->(b) RETURN b.name"),
            ],
            "",
        ))
        .unwrap();
        let mut seen = Vec::new();
        let mut tools = |q: &str| {
            seen.push(q.to_string());
            "b.name\nB\n".to_string()
        };
        let out = run_react(&backend, &template(), &bindings(), &mut tools, 5).unwrap();
        assert_eq!(out.answer, "B follows A");
        assert_eq!(out.steps.len(), 2);
        assert_eq!(out.steps[0].observation, "b.name\nB\n");
        assert_eq!(seen, ["MATCH (a)-->(b) RETURN b.name"]);
    }

    #[test]
    fn gibberish_exhausts_budget() {
        let backend = MockBackend::constant("I like turtles");
        let mut calls = 0;
        let mut tools = |_: &str| {
            calls += 1;
            String::new()
        };
        match run_react(&backend, &template(), &bindings(), &mut tools, 3) {
            Err(ReactError::BudgetExhausted(steps)) => {
                assert_eq!(steps.len(), 3);
                assert!(steps.iter().all(|s| s.observation.starts_with("PARSE_ERROR")));
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(calls, 0);
    }

    #[test]
    fn syntax_error_is_repaired() {
        // Step 1 emits a bad query; its observation carries PARSE_ERROR, which
        // the second rule keys on to emit a fixed query; the third finishes.
        let backend = MockBackend::new(MockScript::new(
            vec![
                MockRule::all(["STEP 2", "OBSERVATION: B"], "ACTION: FINISH B"),
                MockRule::new("PARSE_ERROR", "THOUGHT: fix\nACTION: QUERY MATCH (a) RETURN a.name"),
                MockRule::new("STAGE: react", "ACTION: QUERY MATCH (a RETURN a"),
            ],
            "",
        ))
        .unwrap();
        let mut tools = |q: &str| match crate::query::parse(q) {
            Ok(_) => "B".to_string(),
            Err(e) => format!("PARSE_ERROR: {e}"),
        };
        let out = run_react(&backend, &template(), &bindings(), &mut tools, 5).unwrap();
        assert_eq!(out.steps.len(), 3);
        assert!(out.steps[0].observation.contains("PARSE_ERROR"));
        assert_eq!(out.steps[1].observation, "B");
        assert_eq!(out.answer, "B");
    }

    #[test]
    fn zero_budget_rejected() {
        let backend = MockBackend::constant("x");
        let mut tools = |_: &str| String::new();
        assert!(matches!(
            run_react(&backend, &template(), &bindings(), &mut tools, 0),
            Err(ReactError::Setup(_))
        ));
    }

    #[test]
    fn backend_failure_keeps_prefix() {
        let backend = MockBackend::new(MockScript::new(
            vec![MockRule::new("PREVIOUS STEPS:", " ")],
            "ACTION: QUERY MATCH (n) RETURN n",
        ))
        .unwrap();
        let mut tools = |_: &str| "rows".to_string();
        match run_react(&backend, &template(), &bindings(), &mut tools, 4) {
            Err(ReactError::Backend { error, steps }) => {
                assert_eq!(error, LlmError::EmptyCompletion);
                assert_eq!(steps.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }
}

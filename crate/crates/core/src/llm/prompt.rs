use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::LlmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningStyle {
    #[default]
    Plain,
    ChainOfThought,
    React,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShot {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    pub name: String,
    #[serde(default)]
    pub system: String,
    /// Text with `{placeholder}` slots; `{{` and `}}` are literal braces.
    pub body: String,
    #[serde(default)]
    pub few_shot_examples: Vec<FewShot>,
    #[serde(default)]
    pub reasoning_style: ReasoningStyle,
    /// Overrides the pipeline's default sampling temperature.
    #[serde(default)]
    pub temperature: Option<f64>,
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, body: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            system: String::new(),
            body: body.into(),
            few_shot_examples: Vec::new(),
            reasoning_style: ReasoningStyle::Plain,
            temperature: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, LlmError> {
        let template: PromptTemplate =
            toml::from_str(text).map_err(|e| LlmError::Template(e.to_string()))?;
        placeholders(&template.body)?;
        Ok(template)
    }
}

enum Piece<'a> {
    Text(&'a str),
    Brace(char),
    Slot(&'a str),
}

fn pieces(body: &str) -> Result<Vec<Piece<'_>>, LlmError> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                out.push(Piece::Text(&body[start..i]));
                out.push(Piece::Brace('{'));
                i += 2;
                start = i;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                out.push(Piece::Text(&body[start..i]));
                out.push(Piece::Brace('}'));
                i += 2;
                start = i;
            }
            b'{' => {
                let close = body[i + 1..]
                    .find('}')
                    .map(|j| i + 1 + j)
                    .ok_or_else(|| LlmError::Template(format!("unclosed '{{' at byte {i}")))?;
                let name = &body[i + 1..close];
                let valid = name
                    .chars()
                    .next()
                    .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                    && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
                if !valid {
                    return Err(LlmError::Template(format!(
                        "invalid placeholder {{{name}}}; use {{{{ for a literal brace"
                    )));
                }
                out.push(Piece::Text(&body[start..i]));
                out.push(Piece::Slot(name));
                i = close + 1;
                start = i;
            }
            b'}' => {
                return Err(LlmError::Template(format!(
                    "stray '}}' at byte {i}; use }}}} for a literal brace"
                )))
            }
            _ => i += 1,
        }
    }
    out.push(Piece::Text(&body[start..]));
    Ok(out)
}

/// Placeholder names in order of first appearance.
pub fn placeholders(body: &str) -> Result<Vec<String>, LlmError> {
    let mut names: Vec<String> = Vec::new();
    for piece in pieces(body)? {
        if let Piece::Slot(name) = piece {
            if !names.iter().any(|n| n == name) {
                names.push(name.to_string());
            }
        }
    }
    Ok(names)
}

fn style_preamble(style: ReasoningStyle) -> &'static str {
    match style {
        ReasoningStyle::Plain => "",
        ReasoningStyle::ChainOfThought => {
            "Think step by step. Write your reasoning first, then give the final answer on the last line.\n\n"
        }
        ReasoningStyle::React => {
            "Work in steps. In each reply write one line `THOUGHT: <reasoning>` followed by exactly one action line:\n\
             ACTION: QUERY <query>   (run a read query against the knowledge graph)\n\
             ACTION: FINISH <answer> (stop and give the final answer)\n\n"
        }
    }
}

/// Renders the style preamble, the few-shot block and then the body with
/// every placeholder substituted.
///
/// Substitution is a single pass over the template, so bound values are
/// never re-expanded: for fixed other bindings, distinct values of one slot
/// always render to distinct prompts.
pub fn render_prompt(
    template: &PromptTemplate,
    bindings: &BTreeMap<String, String>,
) -> Result<String, LlmError> {
    let mut out = String::new();
    out.push_str(style_preamble(template.reasoning_style));
    if !template.few_shot_examples.is_empty() {
        out.push_str("EXAMPLES:\n");
        for (i, ex) in template.few_shot_examples.iter().enumerate() {
            let _ = write!(
                out,
                "--- example {} ---\nINPUT:\n{}\nOUTPUT:\n{}\n",
                i + 1,
                ex.input,
                ex.output
            );
        }
        out.push_str("--- end of examples ---\n\n");
    }
    for piece in pieces(&template.body)? {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Brace(c) => out.push(c),
            Piece::Slot(name) => {
                let value = bindings
                    .get(name)
                    .ok_or_else(|| LlmError::MissingPlaceholder(name.to_string()))?;
                out.push_str(value);
            }
        }
    }
    Ok(out)
}

/// The templates used by each pipeline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub intent: PromptTemplate,
    pub extract: PromptTemplate,
    pub react: PromptTemplate,
    pub reason: PromptTemplate,
    pub respond: PromptTemplate,
    pub idea: PromptTemplate,
}

const STAGES: &[&str] = &["intent", "extract", "react", "reason", "respond", "idea"];

impl Default for PromptSet {
    fn default() -> Self {
        let parse = |text: &str| PromptTemplate::from_toml(text).expect("bundled template is valid");
        Self {
            intent: parse(include_str!("../../prompts/intent.toml")),
            extract: parse(include_str!("../../prompts/extract.toml")),
            react: parse(include_str!("../../prompts/react.toml")),
            reason: parse(include_str!("../../prompts/reason.toml")),
            respond: parse(include_str!("../../prompts/respond.toml")),
            idea: parse(include_str!("../../prompts/idea.toml")),
        }
    }
}

impl PromptSet {
    /// Bundled templates, overridden by any `<stage>.toml` found in `dir`.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, LlmError> {
        let mut set = Self::default();
        for stage in STAGES {
            let path = dir.as_ref().join(format!("{stage}.toml"));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
            let template = PromptTemplate::from_toml(&text)
                .map_err(|e| LlmError::Template(format!("{}: {e}", path.display())))?;
            *set.get_mut(stage).expect("known stage") = template;
        }
        Ok(set)
    }

    fn get_mut(&mut self, stage: &str) -> Option<&mut PromptTemplate> {
        Some(match stage {
            "intent" => &mut self.intent,
            "extract" => &mut self.extract,
            "react" => &mut self.react,
            "reason" => &mut self.reason,
            "respond" => &mut self.respond,
            "idea" => &mut self.idea,
            _ => return None,
        })
    }
}

//! The conversational agent: intent classification, concept extraction and
//! linking, planning, graph interaction, reasoning, response and optional
//! graph update, each recorded in an [`AgentTrace`].

mod plan;
mod trace;
mod update;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{normalize_name, SharedGraph};
use crate::kernels::{run_kernel, KernelParams, KernelResult};
use crate::linker::{extract, Extraction, LinkError, Linker, DEFAULT_LINK_THRESHOLD};
use crate::llm::{
    render_prompt, run_react, ChatBackend, ChatRequest, LlmError, PromptSet, PromptTemplate,
    ReactError,
};
use crate::query::{execute_read, parse};
use crate::task::TaskKind;

pub use plan::{parse_intent, plan, Concept, Intent, StepInput, StepKind, TaskPlan, TaskStep};
pub use trace::{AgentTrace, ReactStepRecord, TraceEntry, TraceFailure, TraceStore, TraceStoreError};
pub use update::{apply_update, Endpoint, NewRelation, UpdateError, UpdatePayload};

pub const HISTORY_WINDOW: usize = 6;
pub const DEFAULT_MAX_REACT_STEPS: usize = 5;
const OBSERVATION_ROW_CAP: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("backend unavailable: {0}")]
    BackendUnavailable(LlmError),
    #[error("{kind} needs {needed} linked concepts, found {found}")]
    MissingConcepts {
        kind: TaskKind,
        needed: usize,
        found: usize,
    },
    #[error("step {step} ({stage}) failed: {cause}")]
    StepFailed {
        step: usize,
        stage: String,
        cause: String,
    },
    #[error("stage {stage} failed: {cause}")]
    StageFailed { stage: String, cause: String },
}

impl PipelineError {
    pub fn code(&self) -> &'static str {
        match self {
            PipelineError::EmptyQuery => "empty_query",
            PipelineError::BackendUnavailable(_) => "backend_unavailable",
            PipelineError::MissingConcepts { .. } => "missing_concepts",
            PipelineError::StepFailed { .. } => "step_failed",
            PipelineError::StageFailed { .. } => "stage_failed",
        }
    }

    fn from_llm(stage: &str, err: LlmError) -> Self {
        if err.is_unavailable() {
            PipelineError::BackendUnavailable(err)
        } else {
            PipelineError::StageFailed {
                stage: stage.to_string(),
                cause: err.to_string(),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub link_threshold: f64,
    pub max_react_steps: usize,
    /// Add an update step when the user asserts new relations.
    pub auto_update: bool,
    pub kernel: KernelParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            link_threshold: DEFAULT_LINK_THRESHOLD,
            max_react_steps: DEFAULT_MAX_REACT_STEPS,
            auto_update: true,
            kernel: KernelParams::default(),
        }
    }
}

/// One completed exchange of a conversation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub user: String,
    pub answer: String,
}

/// The last [`HISTORY_WINDOW`] turns as prompt text.
pub fn render_history(history: &[Turn]) -> String {
    let recent = &history[history.len().saturating_sub(HISTORY_WINDOW)..];
    if recent.is_empty() {
        return "(none)".to_string();
    }
    let mut out = String::new();
    for turn in recent {
        let _ = writeln!(out, "USER: {}\nASSISTANT: {}", turn.user, turn.answer);
    }
    out.trim_end().to_string()
}

/// What the plan executes against besides the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRequest {
    pub query: String,
    pub intent: TaskKind,
    pub history: Vec<Turn>,
    pub concepts: Vec<Concept>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub trace: AgentTrace,
    pub result: Result<String, PipelineError>,
    pub intent: Option<Intent>,
    /// Output of the kernel step, when one ran.
    pub kernel: Option<KernelResult>,
}

pub struct Pipeline {
    backend: Arc<dyn ChatBackend>,
    prompts: PromptSet,
    linker: Linker,
    config: PipelineConfig,
}

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn complete(backend: &dyn ChatBackend, template: &PromptTemplate, prompt: &str) -> Result<String, LlmError> {
    let mut request = ChatRequest::new(template.system.clone(), prompt);
    request.temperature = template.temperature.unwrap_or(0.0);
    backend.complete(&request)
}

fn bindings<const N: usize>(pairs: [(&str, &str); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

impl Pipeline {
    pub fn new(backend: Arc<dyn ChatBackend>, prompts: PromptSet, config: PipelineConfig) -> Self {
        Self {
            linker: Linker::trigram(config.link_threshold),
            backend,
            prompts,
            config,
        }
    }

    pub fn with_linker(mut self, linker: Linker) -> Self {
        self.linker = linker;
        self
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn backend(&self) -> &dyn ChatBackend {
        self.backend.as_ref()
    }

    /// Classifies `query`; unmatchable model output falls back to free-form.
    pub fn classify_intent(&self, query: &str, history: &[Turn]) -> Result<(Intent, TraceEntry), PipelineError> {
        if query.trim().is_empty() {
            return Err(PipelineError::EmptyQuery);
        }
        let start = Instant::now();
        let template = &self.prompts.intent;
        let history = render_history(history);
        let prompt = render_prompt(template, &bindings([("query", query), ("history", &history)]))
            .map_err(|e| PipelineError::from_llm("intent", e))?;
        let mut entry = TraceEntry::new("intent");
        entry.prompt = Some(prompt.clone());
        let raw = complete(self.backend.as_ref(), template, &prompt).map_err(|e| PipelineError::from_llm("intent", e))?;
        let intent = Intent {
            kind: parse_intent(&raw),
            confidence_note: raw.clone(),
        };
        entry.raw_output = Some(raw);
        entry.parsed = json!({ "kind": intent.kind });
        entry.duration_ms = ms_since(start);
        Ok((intent, entry))
    }

    fn extract_and_link(&self, graph: &SharedGraph, query: &str) -> Result<(Extraction, TraceEntry), PipelineError> {
        let start = Instant::now();
        let mut entry = TraceEntry::new("extract");
        let run = match extract(self.backend.as_ref(), &self.prompts.extract, query) {
            Ok(run) => run,
            Err(LinkError::Llm(e)) => return Err(PipelineError::from_llm("extract", e)),
            Err(e) => {
                return Err(PipelineError::StageFailed {
                    stage: "extract".into(),
                    cause: e.to_string(),
                })
            }
        };
        entry.prompt = Some(run.prompt);
        entry.raw_output = Some(run.raw_output);
        let extraction = match run.result {
            Ok(ex) => ex,
            Err(LinkError::ExtractionParseFailure { warnings, .. }) => {
                entry.error = Some("no line of the extraction output could be parsed".into());
                entry.warnings = warnings;
                Extraction {
                    mentions: Vec::new(),
                    relations: Vec::new(),
                    warnings: Vec::new(),
                }
            }
            Err(e) => {
                return Err(PipelineError::StageFailed {
                    stage: "extract".into(),
                    cause: e.to_string(),
                })
            }
        };
        let linked = self.linker.link_all(&graph.read(), &extraction);
        entry.warnings.extend(linked.warnings.iter().cloned());
        entry.parsed = serde_json::to_value(&linked).unwrap_or(Value::Null);
        entry.duration_ms = ms_since(start);
        Ok((linked, entry))
    }

    fn concepts(&self, graph: &SharedGraph, extraction: &Extraction) -> Vec<Concept> {
        let graph = graph.read();
        let mut seen = BTreeSet::new();
        extraction
            .mentions
            .iter()
            .filter_map(|m| {
                let node = m.linked_node?;
                seen.insert(node).then(|| Concept {
                    node,
                    name: graph.node(node).map(|n| n.name.clone()).unwrap_or_default(),
                    surface: m.surface.clone(),
                    score: m.score,
                })
            })
            .collect()
    }

    /// New facts asserted in the request: endpoints that linked to a node
    /// are referenced by that node's name, the rest become new entities.
    pub fn update_payload(&self, graph: &SharedGraph, extraction: &Extraction) -> UpdatePayload {
        let graph = graph.read();
        let mut payload = UpdatePayload::default();
        let endpoint = |m: &crate::linker::Mention, payload: &mut UpdatePayload| match m
            .linked_node
            .and_then(|id| graph.node(id))
        {
            Some(node) => Endpoint::Name(node.name.clone()),
            None => {
                let key = normalize_name(&m.surface);
                let at = match payload.entities.iter().position(|e| normalize_name(e) == key) {
                    Some(i) => i,
                    None => {
                        payload.entities.push(m.surface.clone());
                        payload.entities.len() - 1
                    }
                };
                Endpoint::Index(at)
            }
        };
        for rel in &extraction.relations {
            let head = endpoint(&rel.head, &mut payload);
            let tail = endpoint(&rel.tail, &mut payload);
            payload.relations.push(NewRelation::new(head, rel.relation.clone(), tail));
        }
        payload
    }

    /// Runs the whole request. The trace is returned even when a stage fails.
    pub fn run(&self, graph: &SharedGraph, query: &str, history: &[Turn], trace_id: &str) -> RunOutcome {
        let mut trace = AgentTrace::new(trace_id, query);
        let fail = |mut trace: AgentTrace, err: PipelineError, stage: &str, intent: Option<Intent>| {
            trace.failure = Some(TraceFailure {
                code: err.code().to_string(),
                stage: stage.to_string(),
                step_id: None,
                message: err.to_string(),
            });
            RunOutcome {
                trace,
                result: Err(err),
                intent,
                kernel: None,
            }
        };

        let (intent, entry) = match self.classify_intent(query, history) {
            Ok(ok) => ok,
            Err(err) => return fail(trace, err, "intent", None),
        };
        trace.intent = Some(intent.kind);
        trace.entries.push(entry);

        let (extraction, entry) = match self.extract_and_link(graph, query) {
            Ok(ok) => ok,
            Err(err) => return fail(trace, err, "extract", Some(intent)),
        };
        trace.entries.push(entry);

        let start = Instant::now();
        let concepts = self.concepts(graph, &extraction);
        let update = (self.config.auto_update && !extraction.relations.is_empty())
            .then(|| self.update_payload(graph, &extraction));
        let mut entry = TraceEntry::new("plan");
        let task_plan = plan(intent.kind, &concepts, update);
        match &task_plan {
            Ok(p) => entry.parsed = json!({ "concepts": concepts, "plan": p }),
            Err(e) => {
                entry.parsed = json!({ "concepts": concepts });
                entry.error = Some(e.to_string());
            }
        }
        entry.duration_ms = ms_since(start);
        trace.entries.push(entry);
        let task_plan = match task_plan {
            Ok(p) => p,
            Err(err) => return fail(trace, err, "plan", Some(intent)),
        };

        let request = PlanRequest {
            query: query.to_string(),
            intent: intent.kind,
            history: history.to_vec(),
            concepts,
        };
        let mut outcome = self.execute_into(graph, &request, &task_plan, trace);
        outcome.intent = Some(intent);
        outcome
    }

    /// Executes `plan` step by step. The trace holds one entry per step
    /// attempted; execution stops at the first failing step.
    pub fn execute_plan(&self, graph: &SharedGraph, request: &PlanRequest, plan: &TaskPlan, trace_id: &str) -> RunOutcome {
        self.execute_into(graph, request, plan, AgentTrace::new(trace_id, request.query.clone()))
    }

    fn execute_into(&self, graph: &SharedGraph, request: &PlanRequest, plan: &TaskPlan, mut trace: AgentTrace) -> RunOutcome {
        trace.intent = Some(request.intent);
        let mut outputs: BTreeMap<usize, String> = BTreeMap::new();
        let mut kernel: Option<KernelResult> = None;
        if let Err(why) = plan.validate() {
            let err = PipelineError::StageFailed {
                stage: "plan".into(),
                cause: why,
            };
            trace.failure = Some(TraceFailure {
                code: err.code().into(),
                stage: "plan".into(),
                step_id: None,
                message: err.to_string(),
            });
            return RunOutcome { trace, result: Err(err), intent: None, kernel };
        }
        for step in &plan.steps {
            let start = Instant::now();
            let mut entry = TraceEntry::new(step.kind.stage());
            entry.step_id = Some(step.id);
            let result = self.run_step(graph, request, step, &outputs, &kernel, &mut entry);
            entry.duration_ms = ms_since(start);
            match result {
                Ok(StepOutput { text, kernel: k }) => {
                    if k.is_some() {
                        kernel = k;
                    }
                    outputs.insert(step.id, text);
                    trace.entries.push(entry);
                }
                Err(failure) => {
                    let err = match failure {
                        StepError::Unavailable(e) => PipelineError::BackendUnavailable(e),
                        StepError::Failed(cause) => PipelineError::StepFailed {
                            step: step.id,
                            stage: step.kind.stage().to_string(),
                            cause,
                        },
                    };
                    entry.error = Some(err.to_string());
                    trace.entries.push(entry);
                    trace.failure = Some(TraceFailure {
                        code: err.code().to_string(),
                        stage: step.kind.stage().to_string(),
                        step_id: Some(step.id),
                        message: err.to_string(),
                    });
                    return RunOutcome { trace, result: Err(err), intent: None, kernel };
                }
            }
        }
        let answer = outputs
            .get(&plan.steps.last().expect("validated non-empty").id)
            .cloned()
            .unwrap_or_default();
        trace.answer = Some(answer.clone());
        RunOutcome {
            trace,
            result: Ok(answer),
            intent: None,
            kernel,
        }
    }

    fn input_text(step: &TaskStep, key: &str, outputs: &BTreeMap<usize, String>) -> Result<String, StepError> {
        match step.inputs.get(key) {
            Some(StepInput::Step(id)) => outputs
                .get(id)
                .cloned()
                .ok_or_else(|| StepError::Failed(format!("output of step {id} is not available"))),
            Some(StepInput::Text(text)) => Ok(text.clone()),
            Some(other) => Err(StepError::Failed(format!("input {key} has unexpected type {other:?}"))),
            None => Err(StepError::Failed(format!("missing input {key}"))),
        }
    }

    fn llm_stage(
        &self,
        template: &PromptTemplate,
        bindings: &BTreeMap<String, String>,
        entry: &mut TraceEntry,
    ) -> Result<String, StepError> {
        let prompt = render_prompt(template, bindings).map_err(|e| StepError::Failed(e.to_string()))?;
        entry.prompt = Some(prompt.clone());
        let raw = complete(self.backend.as_ref(), template, &prompt).map_err(StepError::from)?;
        entry.raw_output = Some(raw.clone());
        Ok(raw)
    }

    fn run_step(
        &self,
        graph: &SharedGraph,
        request: &PlanRequest,
        step: &TaskStep,
        outputs: &BTreeMap<usize, String>,
        kernel: &Option<KernelResult>,
        entry: &mut TraceEntry,
    ) -> Result<StepOutput, StepError> {
        let nodes = || match step.inputs.get("concepts") {
            Some(StepInput::Nodes(ids)) => Ok(ids.clone()),
            None => Ok(Vec::new()),
            Some(other) => Err(StepError::Failed(format!("concepts input has unexpected type {other:?}"))),
        };
        match step.kind {
            StepKind::Kernel { task } => {
                let ids = nodes()?;
                let guard = graph.read();
                let result = run_kernel(&guard, task, &ids, &self.config.kernel)
                    .map_err(|e| StepError::Failed(e.to_string()))?;
                result
                    .validate(&guard)
                    .map_err(|e| StepError::Failed(format!("kernel output failed validation: {e}")))?;
                entry.parsed = serde_json::to_value(&result).unwrap_or(Value::Null);
                entry.warnings = result.warnings.clone();
                Ok(StepOutput {
                    text: result.render(&guard),
                    kernel: Some(result),
                })
            }
            StepKind::Query => {
                let ids = nodes()?;
                let concepts = {
                    let guard = graph.read();
                    let mut lines = Vec::new();
                    for id in &ids {
                        let node = guard
                            .node(*id)
                            .ok_or_else(|| StepError::Failed(format!("unknown node {id}")))?;
                        lines.push(format!("- {} (label {})", node.name, node.label));
                    }
                    if lines.is_empty() {
                        "(none)".to_string()
                    } else {
                        lines.join("\n")
                    }
                };
                let history = render_history(&request.history);
                let binds = bindings([("query", request.query.as_str()), ("history", &history), ("concepts", &concepts)]);
                let mut tools = |text: &str| observe(graph, text);
                let outcome = run_react(
                    self.backend.as_ref(),
                    &self.prompts.react,
                    &binds,
                    &mut tools,
                    self.config.max_react_steps,
                );
                let steps = match &outcome {
                    Ok(o) => &o.steps[..],
                    Err(e) => e.steps(),
                };
                entry.react_steps = steps.iter().map(ReactStepRecord::from).collect();
                entry.prompt = render_prompt(&self.prompts.react, &binds).ok();
                match outcome {
                    Ok(o) => {
                        entry.parsed = json!({ "answer": o.answer });
                        let mut text = String::new();
                        for (i, s) in o.steps.iter().enumerate() {
                            if let crate::llm::ReactAction::Query { text: q } = &s.action {
                                let _ = writeln!(text, "QUERY {}: {}\nRESULT:\n{}", i + 1, q, s.observation.trim_end());
                            }
                        }
                        let _ = write!(text, "ANSWER FROM GRAPH EXPLORATION: {}", o.answer);
                        Ok(StepOutput { text, kernel: None })
                    }
                    Err(ReactError::Backend { error, .. }) | Err(ReactError::Setup(error)) => Err(StepError::from(error)),
                    Err(e @ ReactError::BudgetExhausted(_)) => Err(StepError::Failed(e.to_string())),
                }
            }
            StepKind::Reason => {
                let results = self.all_results(outputs, step)?;
                let binds = bindings([
                    ("intent", request.intent.label()),
                    ("query", request.query.as_str()),
                    ("results", &results),
                ]);
                let raw = self.llm_stage(&self.prompts.reason, &binds, entry)?;
                if let Some(k) = kernel {
                    let guard = graph.read();
                    let lower = raw.to_lowercase();
                    let names = k.output_names(&guard);
                    let cited: Vec<&String> = names.iter().filter(|n| lower.contains(&n.to_lowercase())).collect();
                    let missing: Vec<&String> = names.iter().filter(|n| !lower.contains(&n.to_lowercase())).collect();
                    entry.parsed = json!({ "cited": cited, "not_cited": missing });
                    if !missing.is_empty() {
                        entry.warnings.push(format!(
                            "reasoning does not mention kernel output: {}",
                            missing.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
                        ));
                    }
                }
                Ok(StepOutput { text: raw, kernel: None })
            }
            StepKind::Update => {
                let Some(StepInput::Update(payload)) = step.inputs.get("payload") else {
                    return Err(StepError::Failed("update step has no payload".into()));
                };
                entry.parsed = serde_json::to_value(payload).unwrap_or(Value::Null);
                let summary = apply_update(&mut graph.write(), payload).map_err(|e| StepError::Failed(e.to_string()))?;
                entry.mutation = Some(summary);
                Ok(StepOutput {
                    text: format!(
                        "GRAPH UPDATED: {} nodes and {} edges created",
                        summary.nodes_created, summary.edges_created
                    ),
                    kernel: None,
                })
            }
            StepKind::Respond => {
                let results = Self::input_text(step, "results", outputs)?;
                let reasoning = Self::input_text(step, "reasoning", outputs)?;
                let template = if request.intent == TaskKind::IdeaHamster {
                    &self.prompts.idea
                } else {
                    &self.prompts.respond
                };
                let binds = bindings([
                    ("intent", request.intent.label()),
                    ("query", request.query.as_str()),
                    ("results", &results),
                    ("reasoning", &reasoning),
                ]);
                let raw = self.llm_stage(template, &binds, entry)?;
                let answer = raw.trim().to_string();
                entry.parsed = json!({ "answer": answer });
                Ok(StepOutput { text: answer, kernel: None })
            }
        }
    }

    /// Every earlier output this step depends on, labelled by step.
    fn all_results(&self, outputs: &BTreeMap<usize, String>, step: &TaskStep) -> Result<String, StepError> {
        let mut text = String::new();
        for id in &step.depends_on {
            let out = outputs
                .get(id)
                .ok_or_else(|| StepError::Failed(format!("output of step {id} is not available")))?;
            let _ = writeln!(text, "[step {id}]\n{}", out.trim_end());
        }
        Ok(text.trim_end().to_string())
    }
}

struct StepOutput {
    text: String,
    kernel: Option<KernelResult>,
}

enum StepError {
    Unavailable(LlmError),
    Failed(String),
}

impl From<LlmError> for StepError {
    fn from(e: LlmError) -> Self {
        if e.is_unavailable() {
            StepError::Unavailable(e)
        } else {
            StepError::Failed(e.to_string())
        }
    }
}

/// Runs one read-only query for the ReAct loop and renders what the model sees.
pub fn observe(graph: &SharedGraph, text: &str) -> String {
    let query = match parse(text) {
        Ok(q) => q,
        Err(e) => return format!("PARSE_ERROR: {e}"),
    };
    if query.is_write() {
        return "EXEC_ERROR: only read queries are allowed here".to_string();
    }
    match execute_read(&graph.read(), &query) {
        Ok(mut table) => {
            let total = table.rows.len();
            table.rows.truncate(OBSERVATION_ROW_CAP);
            let mut out = table.render_text();
            if total > OBSERVATION_ROW_CAP {
                let _ = write!(out, "\n({} more rows not shown)", total - OBSERVATION_ROW_CAP);
            }
            out
        }
        Err(e) => format!("EXEC_ERROR: {e}"),
    }
}


use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::update::UpdatePayload;
use super::PipelineError;
use crate::graph::NodeId;
use crate::task::TaskKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub kind: TaskKind,
    /// The classifier's raw rationale.
    pub confidence_note: String,
}

/// Reads a task label out of classifier output.
///
/// An `INTENT: <LABEL>` line wins. Otherwise the label occurring last in the
/// text (case-insensitive, spaces and hyphens read as underscores) is used.
/// Output naming no label is [`TaskKind::FreeForm`].
pub fn parse_intent(output: &str) -> TaskKind {
    for line in output.lines().rev() {
        let line = line.trim().trim_start_matches(['*', '#', ' ']);
        if line.len() >= 7 && line[..7].eq_ignore_ascii_case("INTENT:") {
            let label = line[7..].trim().trim_matches(|c: char| !c.is_ascii_alphanumeric() && c != '_');
            if let Ok(kind) = label.parse::<TaskKind>() {
                return kind;
            }
        }
    }
    let text = output.to_ascii_uppercase().replace([' ', '-'], "_");
    TaskKind::ALL
        .into_iter()
        .filter_map(|k| text.rfind(k.label()).map(|at| (at, k)))
        .max_by_key(|(at, _)| *at)
        .map(|(_, k)| k)
        .unwrap_or(TaskKind::FreeForm)
}

/// A mention resolved to a graph node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub node: NodeId,
    pub name: String,
    pub surface: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepKind {
    Kernel { task: TaskKind },
    Query,
    Reason,
    Update,
    Respond,
}

impl StepKind {
    pub fn stage(self) -> &'static str {
        match self {
            StepKind::Kernel { .. } => "kernel",
            StepKind::Query => "query",
            StepKind::Reason => "reason",
            StepKind::Update => "update",
            StepKind::Respond => "respond",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum StepInput {
    Text(String),
    Nodes(Vec<NodeId>),
    /// The output of an earlier step.
    Step(usize),
    Update(UpdatePayload),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskStep {
    pub id: usize,
    #[serde(flatten)]
    pub kind: StepKind,
    pub inputs: BTreeMap<String, StepInput>,
    pub depends_on: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPlan {
    pub intent: TaskKind,
    pub steps: Vec<TaskStep>,
}

impl TaskPlan {
    /// Steps are numbered from 1 in order, depend only on earlier steps,
    /// reference only declared dependencies, and end with a response.
    pub fn validate(&self) -> Result<(), String> {
        if self.steps.is_empty() {
            return Err("plan has no steps".into());
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.id != i + 1 {
                return Err(format!("step {} should have id {}", step.id, i + 1));
            }
            if let Some(d) = step.depends_on.iter().find(|d| **d == 0 || **d >= step.id) {
                return Err(format!("step {} depends on later or unknown step {d}", step.id));
            }
            for input in step.inputs.values() {
                if let StepInput::Step(d) = input {
                    if !step.depends_on.contains(d) {
                        return Err(format!("step {} reads step {d} without depending on it", step.id));
                    }
                }
            }
        }
        if self.steps.last().map(|s| s.kind) != Some(StepKind::Respond) {
            return Err("last step must respond".into());
        }
        Ok(())
    }

    pub fn has_update(&self) -> bool {
        self.steps.iter().any(|s| s.kind == StepKind::Update)
    }
}

/// Builds the fixed step sequence for an intent.
///
/// Predefined tasks run their kernel, then reasoning, then the response;
/// free-form questions replace the kernel with a ReAct query loop. A
/// non-empty `update` adds a graph-update step before the response.
pub fn plan(
    intent: TaskKind,
    concepts: &[Concept],
    update: Option<UpdatePayload>,
) -> Result<TaskPlan, PipelineError> {
    let needed = intent.required_concepts();
    if concepts.len() < needed {
        return Err(PipelineError::MissingConcepts {
            kind: intent,
            needed,
            found: concepts.len(),
        });
    }
    let nodes = StepInput::Nodes(concepts.iter().map(|c| c.node).collect());
    let first = TaskStep {
        id: 1,
        kind: if intent.is_predefined() {
            StepKind::Kernel { task: intent }
        } else {
            StepKind::Query
        },
        inputs: BTreeMap::from([("concepts".to_string(), nodes)]),
        depends_on: Vec::new(),
    };
    let reason = TaskStep {
        id: 2,
        kind: StepKind::Reason,
        inputs: BTreeMap::from([("results".to_string(), StepInput::Step(1))]),
        depends_on: vec![1],
    };
    let mut steps = vec![first, reason];
    if let Some(payload) = update.filter(|p| !p.is_empty()) {
        steps.push(TaskStep {
            id: 3,
            kind: StepKind::Update,
            inputs: BTreeMap::from([("payload".to_string(), StepInput::Update(payload))]),
            depends_on: Vec::new(),
        });
    }
    steps.push(TaskStep {
        id: steps.len() + 1,
        kind: StepKind::Respond,
        inputs: BTreeMap::from([
            ("results".to_string(), StepInput::Step(1)),
            ("reasoning".to_string(), StepInput::Step(2)),
        ]),
        depends_on: vec![1, 2],
    });
    let plan = TaskPlan { intent, steps };
    debug_assert_eq!(plan.validate(), Ok(()));
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn concept(id: u64) -> Concept {
        Concept {
            node: NodeId(id),
            name: format!("n{id}"),
            surface: format!("n{id}"),
            score: 1.0,
        }
    }

    #[test]
    fn intent_parsing() {
        assert_eq!(parse_intent("PATH_SEARCHING"), TaskKind::PathSearching);
        assert_eq!(parse_intent("i have no idea"), TaskKind::FreeForm);
        assert_eq!(parse_intent("reasoning...\nINTENT: concept clustering"), TaskKind::ConceptClustering);
        assert_eq!(
            parse_intent("Not RELATION_JUDGMENT; rather prerequisite prediction."),
            TaskKind::PrerequisitePrediction
        );
        assert_eq!(parse_intent("INTENT: **IDEA_HAMSTER**"), TaskKind::IdeaHamster);
        assert_eq!(parse_intent("INTENT: nonsense\nsubgraph completion"), TaskKind::SubgraphCompletion);
    }

    #[test]
    fn skeletons() {
        let p = plan(TaskKind::RelationJudgment, &[concept(1), concept(2)], None).unwrap();
        assert_eq!(p.steps.len(), 3);
        assert_eq!(p.steps[0].kind, StepKind::Kernel { task: TaskKind::RelationJudgment });
        p.validate().unwrap();

        let p = plan(TaskKind::FreeForm, &[], None).unwrap();
        assert_eq!(p.steps[0].kind, StepKind::Query);

        let payload = UpdatePayload { entities: vec!["x".into()], relations: vec![] };
        let p = plan(TaskKind::IdeaHamster, &[concept(1)], Some(payload)).unwrap();
        assert_eq!(
            p.steps.iter().map(|s| s.kind.stage()).collect::<Vec<_>>(),
            ["kernel", "reason", "update", "respond"]
        );
        p.validate().unwrap();
    }

    #[test]
    fn missing_concepts() {
        assert_eq!(
            plan(TaskKind::PathSearching, &[concept(1)], None),
            Err(PipelineError::MissingConcepts { kind: TaskKind::PathSearching, needed: 2, found: 1 })
        );
    }

    #[test]
    fn validation_rejects_bad_plans() {
        let mut p = plan(TaskKind::ConceptClustering, &[], None).unwrap();
        p.steps[1].depends_on = vec![2];
        assert!(p.validate().is_err());
        let mut p = plan(TaskKind::ConceptClustering, &[], None).unwrap();
        p.steps.pop();
        assert!(p.validate().is_err());
        let mut p = plan(TaskKind::ConceptClustering, &[], None).unwrap();
        p.steps[2].depends_on = vec![1];
        assert!(p.validate().is_err());
    }

    #[test]
    fn plan_json_shape() {
        let p = plan(TaskKind::PathSearching, &[concept(4), concept(7)], None).unwrap();
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v["steps"][0]["kind"], "kernel");
        assert_eq!(v["steps"][0]["task"], "PATH_SEARCHING");
        assert_eq!(v["steps"][0]["inputs"]["concepts"]["value"], serde_json::json!([4, 7]));
        let back: TaskPlan = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }
}

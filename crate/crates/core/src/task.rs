use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The seven intent categories: six graph tasks plus free-form questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskKind {
    RelationJudgment,
    PrerequisitePrediction,
    PathSearching,
    ConceptClustering,
    SubgraphCompletion,
    IdeaHamster,
    FreeForm,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::RelationJudgment,
        TaskKind::PrerequisitePrediction,
        TaskKind::PathSearching,
        TaskKind::ConceptClustering,
        TaskKind::SubgraphCompletion,
        TaskKind::IdeaHamster,
        TaskKind::FreeForm,
    ];

    pub fn label(self) -> &'static str {
        match self {
            TaskKind::RelationJudgment => "RELATION_JUDGMENT",
            TaskKind::PrerequisitePrediction => "PREREQUISITE_PREDICTION",
            TaskKind::PathSearching => "PATH_SEARCHING",
            TaskKind::ConceptClustering => "CONCEPT_CLUSTERING",
            TaskKind::SubgraphCompletion => "SUBGRAPH_COMPLETION",
            TaskKind::IdeaHamster => "IDEA_HAMSTER",
            TaskKind::FreeForm => "FREE_FORM",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).expect("listed")
    }

    /// Number of linked concepts the task's kernel needs.
    pub fn required_concepts(self) -> usize {
        match self {
            TaskKind::RelationJudgment | TaskKind::PathSearching | TaskKind::SubgraphCompletion => 2,
            TaskKind::PrerequisitePrediction | TaskKind::IdeaHamster => 1,
            TaskKind::ConceptClustering | TaskKind::FreeForm => 0,
        }
    }

    pub fn is_predefined(self) -> bool {
        self != TaskKind::FreeForm
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task kind {0:?}")]
pub struct UnknownTaskKind(pub String);

impl FromStr for TaskKind {
    type Err = UnknownTaskKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_uppercase().replace([' ', '-'], "_");
        Self::ALL
            .into_iter()
            .find(|k| k.label() == wanted)
            .ok_or_else(|| UnknownTaskKind(s.to_string()))
    }
}

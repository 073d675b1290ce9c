use std::fmt::Write;

use super::BenchmarkRecord;
use crate::llm::{MockRule, MockScript};
use crate::task::TaskKind;

const FREE_FORM_QUERY: &str = "MATCH (f:Field) RETURN f.name LIMIT 10";

fn quoted(query: &str) -> String {
    format!("<<<{query}>>>")
}

fn entity_lines(record: &BenchmarkRecord) -> String {
    let mut out = String::new();
    for concept in &record.gold_concepts {
        if let Some(start) = record.query.find(concept.as_str()) {
            let _ = writeln!(out, "ENTITY: {concept}|{start}|{}", start + concept.len());
        }
    }
    if out.is_empty() {
        "NONE".to_string()
    } else {
        out.trim_end().to_string()
    }
}

/// A mock script that answers every record as an ideal model would: gold
/// intents, gold concept spans, and one graph query for free-form questions.
pub fn gold_script(records: &[BenchmarkRecord]) -> MockScript {
    gold_script_with(records, |r| r.gold_task)
}

/// Like [`gold_script`] with the classifier's answer chosen by `predict`.
pub fn gold_script_with(records: &[BenchmarkRecord], predict: impl Fn(&BenchmarkRecord) -> TaskKind) -> MockScript {
    let mut rules = Vec::new();
    for record in records {
        let q = quoted(&record.query);
        let kind = predict(record);
        rules.push(MockRule::all(
            ["STAGE: intent".to_string(), q.clone()],
            format!("The request matches the {} task.\nINTENT: {}", kind.label().to_lowercase().replace('_', " "), kind.label()),
        ));
        rules.push(MockRule::all(["STAGE: extract".to_string(), q.clone()], entity_lines(record)));
        rules.push(MockRule::all(
            ["STAGE: react".to_string(), q.clone(), "PREVIOUS STEPS:".to_string()],
            "THOUGHT: The observation is enough.\nACTION: FINISH The graph lists its fields above.",
        ));
        rules.push(MockRule::all(
            ["STAGE: react".to_string(), q],
            format!("THOUGHT: Look at the top-level fields.\nACTION: QUERY {FREE_FORM_QUERY}"),
        ));
    }
    rules.push(MockRule::new(
        "STAGE: reason",
        "The intermediate results answer the question directly.",
    ));
    rules.push(MockRule::new("STAGE: respond", "Here is what the knowledge graph shows."));
    MockScript::new(rules, "INTENT: FREE_FORM")
}

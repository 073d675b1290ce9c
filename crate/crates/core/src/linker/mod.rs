//! Entity and relation extraction from user text, and linking of the
//! extracted mentions to graph nodes by embedding similarity.
//!
//! The extraction stage asks the model for one item per line:
//!
//! ```text
//! ENTITY: <surface>|<start>|<end>
//! REL: <head index>|<RELATION>|<tail index>
//! ```
//!
//! where offsets are bytes into the query and indices count `ENTITY` lines
//! from zero. A bare `NONE` means nothing was found.

mod embed;

use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{is_valid_relation, normalize_name, NodeId, PropertyGraph};
use crate::llm::{render_prompt, ChatBackend, ChatRequest, LlmError, PromptTemplate};

pub use embed::{
    cosine, embed_trigram, is_zero_vector, l2_norm, trigrams, EmbeddingProvider, TrigramEmbedder,
    TRIGRAM_DIMENSION,
};

pub const DEFAULT_LINK_THRESHOLD: f64 = 0.60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub surface: String,
    /// Byte offsets `[start, end)` into the query.
    pub span: (usize, usize),
    pub linked_node: Option<NodeId>,
    pub score: f64,
}

impl Mention {
    pub fn unlinked(surface: impl Into<String>, span: (usize, usize)) -> Self {
        Self {
            surface: surface.into(),
            span,
            linked_node: None,
            score: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: Mention,
    pub relation: String,
    pub tail: Mention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub mentions: Vec<Mention>,
    pub relations: Vec<RelationTriple>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinkError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("no line of the extraction output could be parsed")]
    ExtractionParseFailure { raw_output: String, warnings: Vec<String> },
    #[error(transparent)]
    Llm(#[from] LlmError),
}

/// Parses extraction output against the query it was produced for.
///
/// Malformed lines are skipped with a warning. A stated span that does not
/// match the surface text is replaced by the first case-insensitive
/// occurrence of the surface; a surface absent from the query is dropped.
pub fn parse_extraction(query: &str, output: &str) -> Result<Extraction, LinkError> {
    let lines: Vec<(usize, &str)> = output
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    if lines.is_empty() || (lines.len() == 1 && lines[0].1.eq_ignore_ascii_case("NONE")) {
        return Ok(Extraction {
            mentions: Vec::new(),
            relations: Vec::new(),
            warnings: Vec::new(),
        });
    }

    let mut warnings = Vec::new();
    let mut parsed = 0usize;
    // Entity index as stated by the model -> parsed mention (None if dropped).
    let mut entities: Vec<Option<Mention>> = Vec::new();
    let mut raw_rels: Vec<(usize, usize, usize, String)> = Vec::new();

    for (line_no, line) in &lines {
        if let Some(rest) = strip_tag(line, "ENTITY:") {
            match parse_entity(query, rest) {
                Ok((mention, note)) => {
                    parsed += 1;
                    if let Some(note) = note {
                        warnings.push(format!("line {line_no}: {note}"));
                    }
                    entities.push(Some(mention));
                }
                Err(why) => {
                    warnings.push(format!("line {line_no}: dropped entity ({why}): {line}"));
                    entities.push(None);
                }
            }
        } else if let Some(rest) = strip_tag(line, "REL:") {
            match parse_rel(rest) {
                Some((head, relation, tail)) => raw_rels.push((*line_no, head, tail, relation)),
                None => warnings.push(format!("line {line_no}: dropped malformed relation: {line}")),
            }
        } else {
            warnings.push(format!("line {line_no}: unrecognized line: {line}"));
        }
    }

    let mut relations = Vec::new();
    for (line_no, head, tail, relation) in raw_rels {
        let lookup = |i: usize| entities.get(i).and_then(Option::as_ref);
        match (lookup(head), lookup(tail)) {
            _ if head == tail => {
                warnings.push(format!("line {line_no}: dropped relation with identical endpoints"))
            }
            (Some(h), Some(t)) if h.span != t.span => {
                parsed += 1;
                relations.push(RelationTriple {
                    head: h.clone(),
                    relation,
                    tail: t.clone(),
                });
            }
            (Some(_), Some(_)) => {
                warnings.push(format!("line {line_no}: dropped relation with identical endpoints"))
            }
            _ => warnings.push(format!(
                "line {line_no}: dropped relation referencing unknown entity {head} or {tail}"
            )),
        }
    }

    if parsed == 0 {
        return Err(LinkError::ExtractionParseFailure {
            raw_output: output.to_string(),
            warnings,
        });
    }

    let mut mentions: Vec<Mention> = Vec::new();
    for mention in entities.into_iter().flatten() {
        if mentions.iter().any(|m| m.span == mention.span) {
            warnings.push(format!("duplicate mention {:?} ignored", mention.surface));
        } else {
            mentions.push(mention);
        }
    }
    mentions.sort_by_key(|m| m.span);
    Ok(Extraction {
        mentions,
        relations,
        warnings,
    })
}

fn strip_tag<'a>(line: &'a str, tag: &str) -> Option<&'a str> {
    let head = line.get(..tag.len())?;
    head.eq_ignore_ascii_case(tag).then(|| line[tag.len()..].trim())
}

fn parse_entity(query: &str, rest: &str) -> Result<(Mention, Option<String>), String> {
    // Offsets are the last two fields, so the surface itself may contain '|'.
    let mut fields = rest.rsplitn(3, '|');
    let end = fields.next().map(str::trim);
    let start = fields.next().map(str::trim);
    let surface = fields.next().map(str::trim);
    let (surface, stated) = match (surface, start, end) {
        (Some(s), Some(a), Some(b)) => (s, a.parse::<usize>().ok().zip(b.parse::<usize>().ok())),
        _ => (rest.trim(), None),
    };
    if surface.is_empty() {
        return Err("empty surface".into());
    }
    if let Some((a, b)) = stated {
        if query.get(a..b) == Some(surface) {
            return Ok((Mention::unlinked(surface, (a, b)), None));
        }
    }
    let haystack = query.to_ascii_lowercase();
    let needle = surface.to_ascii_lowercase();
    match haystack.find(&needle) {
        Some(at) => {
            let span = (at, at + needle.len());
            let actual = &query[span.0..span.1];
            Ok((
                Mention::unlinked(actual, span),
                Some(format!("span for {surface:?} corrected to {}..{}", span.0, span.1)),
            ))
        }
        None => Err(format!("{surface:?} does not occur in the query")),
    }
}

fn parse_rel(rest: &str) -> Option<(usize, String, usize)> {
    let fields: Vec<&str> = rest.split('|').map(str::trim).collect();
    let [head, relation, tail] = fields.as_slice() else {
        return None;
    };
    let relation = relation
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
        .to_ascii_uppercase();
    if !is_valid_relation(&relation) {
        return None;
    }
    Some((head.parse().ok()?, relation, tail.parse().ok()?))
}

/// Result of the extraction stage together with what the model saw.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionRun {
    pub prompt: String,
    pub raw_output: String,
    pub result: Result<Extraction, LinkError>,
}

/// Asks the model for mentions and relations in `query`.
pub fn extract(
    backend: &dyn ChatBackend,
    template: &PromptTemplate,
    query: &str,
) -> Result<ExtractionRun, LinkError> {
    if query.trim().is_empty() {
        return Err(LinkError::EmptyQuery);
    }
    let bindings = BTreeMap::from([("query".to_string(), query.to_string())]);
    let prompt = render_prompt(template, &bindings)?;
    let mut request = ChatRequest::new(template.system.clone(), prompt.clone());
    request.temperature = template.temperature.unwrap_or(0.0);
    let raw_output = backend.complete(&request)?;
    let result = parse_extraction(query, &raw_output);
    Ok(ExtractionRun {
        prompt,
        raw_output,
        result,
    })
}

struct Entry {
    id: NodeId,
    normalized: String,
    vector: Vec<f64>,
}

fn index(provider: &dyn EmbeddingProvider, graph: &PropertyGraph) -> Vec<Entry> {
    graph
        .nodes()
        .map(|n| Entry {
            id: n.id,
            normalized: n.normalized_name(),
            vector: provider.embed(&n.name),
        })
        .collect()
}

fn best_match(
    provider: &dyn EmbeddingProvider,
    entries: &[Entry],
    mention: &Mention,
    threshold: f64,
) -> Mention {
    let key = normalize_name(&mention.surface);
    let query = provider.embed(&mention.surface);
    let mut best: Option<(f64, &Entry)> = None;
    for entry in entries {
        let score = if entry.normalized == key && !key.is_empty() {
            1.0
        } else {
            cosine(&query, &entry.vector)
        };
        let better = match best {
            None => true,
            Some((s, b)) => {
                score > s || (score == s && (&entry.normalized, entry.id) < (&b.normalized, b.id))
            }
        };
        if better {
            best = Some((score, entry));
        }
    }
    let mut linked = mention.clone();
    match best {
        Some((score, entry)) => {
            linked.score = score;
            linked.linked_node = (score >= threshold).then_some(entry.id);
        }
        None => {
            linked.score = 0.0;
            linked.linked_node = None;
        }
    }
    linked
}

/// Links one mention without caching: the node with the highest cosine
/// similarity wins if it reaches `threshold`. An exact normalized name match
/// scores 1. Ties go to the smaller normalized name, then the smaller id.
pub fn link(
    provider: &dyn EmbeddingProvider,
    graph: &PropertyGraph,
    mention: &Mention,
    threshold: f64,
) -> Mention {
    best_match(provider, &index(provider, graph), mention, threshold)
}

/// Linker holding node-name embeddings, rebuilt whenever the graph changes.
pub struct Linker {
    provider: Arc<dyn EmbeddingProvider>,
    threshold: f64,
    cache: RwLock<Option<(u64, Arc<Vec<Entry>>)>>,
}

impl Linker {
    pub fn new(provider: Arc<dyn EmbeddingProvider>, threshold: f64) -> Self {
        Self {
            provider,
            threshold,
            cache: RwLock::new(None),
        }
    }

    pub fn trigram(threshold: f64) -> Self {
        Self::new(Arc::new(TrigramEmbedder), threshold)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn entries(&self, graph: &PropertyGraph) -> Arc<Vec<Entry>> {
        if let Some((stamp, entries)) = &*self.cache.read() {
            if *stamp == graph.stamp() {
                return entries.clone();
            }
        }
        let entries = Arc::new(index(self.provider.as_ref(), graph));
        *self.cache.write() = Some((graph.stamp(), entries.clone()));
        entries
    }

    pub fn link(&self, graph: &PropertyGraph, mention: &Mention) -> Mention {
        best_match(self.provider.as_ref(), &self.entries(graph), mention, self.threshold)
    }

    /// Links every mention, including the copies held by relation triples.
    pub fn link_all(&self, graph: &PropertyGraph, extraction: &Extraction) -> Extraction {
        let entries = self.entries(graph);
        let link = |m: &Mention| best_match(self.provider.as_ref(), &entries, m, self.threshold);
        Extraction {
            mentions: extraction.mentions.iter().map(link).collect(),
            relations: extraction
                .relations
                .iter()
                .map(|r| RelationTriple {
                    head: link(&r.head),
                    relation: r.relation.clone(),
                    tail: link(&r.tail),
                })
                .collect(),
            warnings: extraction.warnings.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Properties;
    use crate::llm::{MockBackend, PromptSet};

    fn graph(names: &[&str]) -> PropertyGraph {
        let mut g = PropertyGraph::new();
        for n in names {
            g.insert_node(n, "Concept", Properties::new()).unwrap();
        }
        g
    }

    #[test]
    fn scripted_entity() {
        let q = "neural networks and more";
        let backend = MockBackend::constant("ENTITY: neural networks|0|15");
        let run = extract(&backend, &PromptSet::default().extract, q).unwrap();
        let ex = run.result.unwrap();
        assert_eq!(ex.mentions, [Mention::unlinked("neural networks", (0, 15))]);
        assert!(ex.warnings.is_empty());
        assert!(run.prompt.contains(q));
    }

    #[test]
    fn empty_query() {
        let backend = MockBackend::constant("x");
        assert_eq!(
            extract(&backend, &PromptSet::default().extract, "  "),
            Err(LinkError::EmptyQuery)
        );
    }

    #[test]
    fn malformed_line_dropped_with_warning() {
        let ex = parse_extraction("about graphs", "garbage here\nENTITY: graphs|6|12").unwrap();
        assert_eq!(ex.mentions.len(), 1);
        assert_eq!(ex.warnings.len(), 1);
    }

    #[test]
    fn nothing_parses() {
        assert!(matches!(
            parse_extraction("q", "total nonsense"),
            Err(LinkError::ExtractionParseFailure { .. })
        ));
        assert!(parse_extraction("q", "NONE").unwrap().mentions.is_empty());
        assert!(parse_extraction("q", "").unwrap().mentions.is_empty());
    }

    #[test]
    fn span_fixups() {
        let q = "Is Graph Theory before Algorithms?";
        let ex = parse_extraction(q, "ENTITY: graph theory|0|3\nENTITY: Algorithms\nENTITY: chemistry|1|2").unwrap();
        assert_eq!(ex.mentions[0].surface, "Graph Theory");
        assert_eq!(ex.mentions[0].span, (3, 15));
        assert_eq!(ex.mentions[1].span, (23, 33));
        assert_eq!(ex.warnings.len(), 3);
    }

    #[test]
    fn relations_and_ordering() {
        let q = "Transformers are part of Deep Learning";
        let out = "ENTITY: Deep Learning|25|38\nENTITY: Transformers|0|12\nREL: 1|subtopic of|0\nREL: 0|X|0\nREL: 0|Y|9";
        let ex = parse_extraction(q, out).unwrap();
        assert_eq!(ex.mentions[0].surface, "Transformers");
        assert_eq!(ex.relations.len(), 1);
        assert_eq!(ex.relations[0].relation, "SUBTOPIC_OF");
        assert_eq!(ex.relations[0].head.surface, "Transformers");
        assert_eq!(ex.warnings.len(), 2);
    }

    #[test]
    fn surface_with_pipe() {
        let ex = parse_extraction("a|b c", "ENTITY: a|b|0|3").unwrap();
        assert_eq!(ex.mentions[0].surface, "a|b");
    }

    #[test]
    fn exact_match_links_with_score_one() {
        let g = graph(&["Graph Theory", "Game Theory"]);
        let m = link(&TrigramEmbedder, &g, &Mention::unlinked("graph  theory", (0, 13)), 0.6);
        assert_eq!(m.linked_node, g.find_by_name("Graph Theory"));
        assert_eq!(m.score, 1.0);
    }

    #[test]
    fn empty_graph_unlinked() {
        let m = link(&TrigramEmbedder, &PropertyGraph::new(), &Mention::unlinked("x", (0, 1)), 0.6);
        assert_eq!((m.linked_node, m.score), (None, 0.0));
    }

    #[test]
    fn below_threshold_unlinked() {
        let g = graph(&["Organic Chemistry"]);
        let m = link(&TrigramEmbedder, &g, &Mention::unlinked("graph theory", (0, 12)), 0.6);
        assert!(m.score < 0.6);
        assert_eq!(m.linked_node, None);
    }

    #[test]
    fn cache_follows_mutations() {
        let mut g = graph(&["Alpha"]);
        let linker = Linker::trigram(0.6);
        let m = Mention::unlinked("beta", (0, 4));
        assert_eq!(linker.link(&g, &m).linked_node, None);
        let fork = g.clone();
        let b = g.insert_node("Beta", "Concept", Properties::new()).unwrap();
        assert_eq!(linker.link(&g, &m).linked_node, Some(b));
        assert_eq!(linker.link(&fork, &m).linked_node, None);
    }
}

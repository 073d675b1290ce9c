use std::fmt::Write;

use super::ast::*;
use super::lexer::keyword;
use crate::graph::PropValue;

/// Renders a query back to text such that `parse(render(q)) == q`.
pub fn render(query: &Query) -> String {
    let mut parts = Vec::with_capacity(query.clauses.len());
    for clause in &query.clauses {
        let mut out = String::new();
        match clause {
            Clause::Match { pattern, predicate } => {
                out.push_str("MATCH ");
                pattern_text(&mut out, pattern);
                if let Some(pred) = predicate {
                    out.push_str(" WHERE ");
                    for (i, cmp) in pred.comparisons.iter().enumerate() {
                        if i > 0 {
                            out.push_str(" AND ");
                        }
                        operand_text(&mut out, &cmp.left);
                        out.push_str(match cmp.op {
                            CompareOp::Eq => " = ",
                            CompareOp::Ne => " <> ",
                        });
                        operand_text(&mut out, &cmp.right);
                    }
                }
            }
            Clause::Create { pattern } => {
                out.push_str("CREATE ");
                pattern_text(&mut out, pattern);
            }
            Clause::Merge { node } => {
                out.push_str("MERGE ");
                node_text(&mut out, node);
            }
            Clause::Delete { variable, detach } => {
                if *detach {
                    out.push_str("DETACH ");
                }
                out.push_str("DELETE ");
                out.push_str(&ident(variable));
            }
            Clause::Return { projections, limit } => {
                out.push_str("RETURN ");
                let cols: Vec<String> = projections
                    .iter()
                    .map(|p| match p {
                        Projection::Variable(v) => ident(v),
                        Projection::Property { variable, key } => {
                            format!("{}.{}", ident(variable), ident(key))
                        }
                    })
                    .collect();
                out.push_str(&cols.join(", "));
                if let Some(n) = limit {
                    let _ = write!(out, " LIMIT {n}");
                }
            }
        }
        parts.push(out);
    }
    parts.join(" ")
}

/// Plain identifiers stay bare; keywords and anything else are backtick-quoted.
pub fn ident(name: &str) -> String {
    let plain = name
        .chars()
        .next()
        .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if plain && keyword(name).is_none() {
        name.to_string()
    } else {
        format!("`{}`", name.replace('`', "``"))
    }
}

pub fn literal(value: &PropValue) -> String {
    match value {
        PropValue::Str(s) => format!("'{}'", s.replace('\'', "''")),
        PropValue::Int(i) => i.to_string(),
        // Debug formatting always keeps a '.' or exponent, so it re-lexes as a float.
        PropValue::Float(f) => format!("{f:?}"),
        PropValue::Bool(true) => "TRUE".into(),
        PropValue::Bool(false) => "FALSE".into(),
    }
}

fn operand_text(out: &mut String, operand: &Operand) {
    match operand {
        Operand::Property { variable, key } => {
            let _ = write!(out, "{}.{}", ident(variable), ident(key));
        }
        Operand::Literal(v) => out.push_str(&literal(v)),
    }
}

fn pattern_text(out: &mut String, pattern: &Pattern) {
    node_text(out, &pattern.start);
    for (rel, node) in &pattern.hops {
        let mut inner = String::new();
        if let Some(v) = &rel.variable {
            inner.push_str(&ident(v));
        }
        if let Some(r) = &rel.relation {
            inner.push(':');
            inner.push_str(&ident(r));
        }
        match rel.direction {
            RelDirection::Outgoing => {
                let _ = write!(out, "-[{inner}]->");
            }
            RelDirection::Incoming => {
                let _ = write!(out, "<-[{inner}]-");
            }
        }
        node_text(out, node);
    }
}

fn node_text(out: &mut String, node: &NodePattern) {
    out.push('(');
    if let Some(v) = &node.variable {
        out.push_str(&ident(v));
    }
    if let Some(label) = &node.label {
        out.push(':');
        out.push_str(&ident(label));
    }
    if !node.properties.is_empty() {
        if node.variable.is_some() || node.label.is_some() {
            out.push(' ');
        }
        out.push('{');
        for (i, (k, v)) in node.properties.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{}: {}", ident(k), literal(v));
        }
        out.push('}');
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::super::parse;
    use super::*;

    fn round_trip(text: &str) {
        let ast = parse(text).unwrap();
        let rendered = render(&ast);
        assert_eq!(parse(&rendered).unwrap(), ast, "rendered: {rendered}");
    }

    #[test]
    fn examples_round_trip() {
        round_trip("MATCH (a:Concept {name:'X'})-[:PREREQUISITE_OF]->(b) RETURN b.name");
        round_trip("MERGE (n:Concept {name:'Z'})");
        round_trip("MATCH (a)<-[r]-(b) WHERE a.x = 1.5 AND b.y <> FALSE RETURN a, r LIMIT 2");
        round_trip("CREATE (a:Concept {name:'A'})-[e:R]->(b:Concept {name:'B', n: -4})");
    }

    #[test]
    fn detach_delete_rendered() {
        let ast = parse("MATCH (n {name:'A'}) DETACH DELETE n").unwrap();
        let text = render(&ast);
        assert!(text.contains("DETACH DELETE"), "{text}");
        round_trip(&text);
    }

    #[test]
    fn quotes_are_reescaped() {
        let ast = parse("MERGE (n {name:'it''s'})").unwrap();
        let text = render(&ast);
        assert!(text.contains("'it''s'"), "{text}");
        round_trip(&text);
    }

    #[test]
    fn keyword_identifiers_are_quoted() {
        assert_eq!(ident("match"), "`match`");
        assert_eq!(ident("has space"), "`has space`");
        assert_eq!(ident("plain_1"), "plain_1");
        round_trip("MATCH (`return`:`Limit`) RETURN `return`.`where`");
    }
}

use std::collections::HashMap;

use super::ast::*;
use super::lexer::{tokenize, Keyword, Tok, Token};
use super::{Diagnostic, QueryError};
use crate::graph::PropValue;

/// Parses and validates a query.
pub fn parse(text: &str) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let query = parser.query()?;
    validate(&query)?;
    Ok(query)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

const CLAUSE_STARTS: &[&str] = &["MATCH", "CREATE", "MERGE", "DELETE", "DETACH DELETE", "RETURN"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |t| t.offset)
    }

    fn bump(&mut self) -> Option<Tok> {
        let tok = self.tokens.get(self.pos).map(|t| t.tok.clone());
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn error<T>(&self, expected: &[&str]) -> Result<T, QueryError> {
        let message = match self.peek() {
            Some(tok) => format!("unexpected {}", describe(tok)),
            None => "unexpected end of query".to_string(),
        };
        Err(QueryError::Syntax(Diagnostic {
            offset: self.offset(),
            message,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }))
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), QueryError> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.error(&[name])
        }
    }

    fn eat_keyword(&mut self, kw: Keyword) -> bool {
        self.eat(&Tok::Keyword(kw))
    }

    fn ident(&mut self) -> Result<String, QueryError> {
        match self.peek() {
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                self.pos += 1;
                Ok(name)
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        let mut clauses = Vec::new();
        loop {
            while self.eat(&Tok::Semicolon) {}
            let Some(tok) = self.peek().cloned() else {
                break;
            };
            let clause = match tok {
                Tok::Keyword(Keyword::Match) => {
                    self.bump();
                    let pattern = self.pattern()?;
                    let predicate = if self.eat_keyword(Keyword::Where) {
                        Some(self.predicate()?)
                    } else {
                        None
                    };
                    Clause::Match { pattern, predicate }
                }
                Tok::Keyword(Keyword::Create) => {
                    self.bump();
                    Clause::Create {
                        pattern: self.pattern()?,
                    }
                }
                Tok::Keyword(Keyword::Merge) => {
                    self.bump();
                    Clause::Merge {
                        node: self.node()?,
                    }
                }
                Tok::Keyword(Keyword::Detach) => {
                    self.bump();
                    if !self.eat_keyword(Keyword::Delete) {
                        return self.error(&["DELETE"]);
                    }
                    Clause::Delete {
                        variable: self.ident()?,
                        detach: true,
                    }
                }
                Tok::Keyword(Keyword::Delete) => {
                    self.bump();
                    Clause::Delete {
                        variable: self.ident()?,
                        detach: false,
                    }
                }
                Tok::Keyword(Keyword::Return) => {
                    self.bump();
                    self.return_clause()?
                }
                _ => return self.error(CLAUSE_STARTS),
            };
            clauses.push(clause);
        }
        if clauses.is_empty() {
            return self.error(CLAUSE_STARTS);
        }
        Ok(Query { clauses })
    }

    fn return_clause(&mut self) -> Result<Clause, QueryError> {
        let mut projections = vec![self.projection()?];
        while self.eat(&Tok::Comma) {
            projections.push(self.projection()?);
        }
        let limit = if self.eat_keyword(Keyword::Limit) {
            match self.peek() {
                Some(Tok::Number(text, false)) => {
                    let value = text.parse::<u64>().ok();
                    match value {
                        Some(v) => {
                            self.pos += 1;
                            Some(v)
                        }
                        None => return self.error(&["non-negative integer"]),
                    }
                }
                _ => return self.error(&["non-negative integer"]),
            }
        } else {
            None
        };
        Ok(Clause::Return { projections, limit })
    }

    fn projection(&mut self) -> Result<Projection, QueryError> {
        let variable = self.ident()?;
        if self.eat(&Tok::Dot) {
            let key = self.ident()?;
            Ok(Projection::Property { variable, key })
        } else {
            Ok(Projection::Variable(variable))
        }
    }

    fn pattern(&mut self) -> Result<Pattern, QueryError> {
        let start = self.node()?;
        let mut hops = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Dash) | Some(Tok::Lt) => {
                    let rel = self.rel()?;
                    let node = self.node()?;
                    hops.push((rel, node));
                }
                _ => break,
            }
        }
        Ok(Pattern { start, hops })
    }

    fn node(&mut self) -> Result<NodePattern, QueryError> {
        self.expect(Tok::LParen, "(")?;
        let mut node = NodePattern::default();
        if let Some(Tok::Ident(_)) = self.peek() {
            node.variable = Some(self.ident()?);
        }
        if self.eat(&Tok::Colon) {
            node.label = Some(self.ident()?);
        }
        if self.peek() == Some(&Tok::LBrace) {
            node.properties = self.property_map()?;
        }
        if !self.eat(&Tok::RParen) {
            let mut expected = Vec::new();
            if node.variable.is_none() && node.label.is_none() && node.properties.is_empty() {
                expected.push("identifier");
            }
            if node.label.is_none() && node.properties.is_empty() {
                expected.push(":");
            }
            if node.properties.is_empty() {
                expected.push("{");
            }
            expected.push(")");
            return self.error(&expected);
        }
        Ok(node)
    }

    fn rel(&mut self) -> Result<RelPattern, QueryError> {
        let incoming = self.eat(&Tok::Lt);
        self.expect(Tok::Dash, "-")?;
        let mut rel = RelPattern {
            variable: None,
            relation: None,
            direction: if incoming {
                RelDirection::Incoming
            } else {
                RelDirection::Outgoing
            },
        };
        if self.eat(&Tok::LBracket) {
            if let Some(Tok::Ident(_)) = self.peek() {
                rel.variable = Some(self.ident()?);
            }
            if self.eat(&Tok::Colon) {
                rel.relation = Some(self.ident()?);
            }
            if !self.eat(&Tok::RBracket) {
                let mut expected = Vec::new();
                if rel.variable.is_none() && rel.relation.is_none() {
                    expected.push("identifier");
                }
                if rel.relation.is_none() {
                    expected.push(":");
                }
                expected.push("]");
                return self.error(&expected);
            }
        }
        self.expect(Tok::Dash, "-")?;
        if !incoming {
            self.expect(Tok::Gt, ">")?;
        } else if self.peek() == Some(&Tok::Gt) {
            return self.error(&["("]);
        }
        Ok(rel)
    }

    fn property_map(&mut self) -> Result<Vec<(String, PropValue)>, QueryError> {
        self.expect(Tok::LBrace, "{")?;
        let mut props = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(props);
        }
        loop {
            let key = self.ident()?;
            self.expect(Tok::Colon, ":")?;
            let value = self.literal()?;
            props.push((key, value));
            if self.eat(&Tok::Comma) {
                continue;
            }
            if self.eat(&Tok::RBrace) {
                return Ok(props);
            }
            return self.error(&[",", "}"]);
        }
    }

    fn literal(&mut self) -> Result<PropValue, QueryError> {
        const EXPECTED: &[&str] = &["string", "number", "TRUE", "FALSE"];
        let negative = self.eat(&Tok::Dash);
        match self.peek().cloned() {
            Some(Tok::Number(text, is_float)) => {
                let text = if negative { format!("-{text}") } else { text };
                let value = if is_float {
                    text.parse::<f64>().ok().filter(|f| f.is_finite()).map(PropValue::Float)
                } else {
                    text.parse::<i64>().ok().map(PropValue::Int)
                };
                match value {
                    Some(v) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    None => self.error(&["number in range"]),
                }
            }
            _ if negative => self.error(&["number"]),
            Some(Tok::Str(s)) => {
                self.pos += 1;
                Ok(PropValue::Str(s))
            }
            Some(Tok::Keyword(Keyword::True)) => {
                self.pos += 1;
                Ok(PropValue::Bool(true))
            }
            Some(Tok::Keyword(Keyword::False)) => {
                self.pos += 1;
                Ok(PropValue::Bool(false))
            }
            _ => self.error(EXPECTED),
        }
    }

    fn predicate(&mut self) -> Result<Predicate, QueryError> {
        let mut comparisons = vec![self.comparison()?];
        while self.eat_keyword(Keyword::And) {
            comparisons.push(self.comparison()?);
        }
        Ok(Predicate { comparisons })
    }

    fn comparison(&mut self) -> Result<Comparison, QueryError> {
        let left = self.operand()?;
        let op = if self.eat(&Tok::Eq) {
            CompareOp::Eq
        } else if self.eat(&Tok::Ne) {
            CompareOp::Ne
        } else {
            return self.error(&["=", "<>"]);
        };
        let right = self.operand()?;
        Ok(Comparison { left, op, right })
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        if let Some(Tok::Ident(_)) = self.peek() {
            let variable = self.ident()?;
            self.expect(Tok::Dot, ".")?;
            let key = self.ident()?;
            Ok(Operand::Property { variable, key })
        } else {
            match self.literal() {
                Ok(v) => Ok(Operand::Literal(v)),
                Err(_) => self.error(&["identifier", "string", "number", "TRUE", "FALSE"]),
            }
        }
    }
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Keyword(k) => format!("keyword {k:?}").to_uppercase(),
        Tok::Ident(s) => format!("identifier {s:?}"),
        Tok::Str(s) => format!("string {s:?}"),
        Tok::Number(n, _) => format!("number {n}"),
        other => format!("{other:?}"),
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Node,
    Edge,
}

/// Semantic checks: clause ordering, read/write separation, variable binding
/// and kind consistency, and the minimum content of write patterns.
pub(crate) fn validate(query: &Query) -> Result<(), QueryError> {
    let clauses = &query.clauses;
    if let Some(pos) = clauses.iter().position(|c| matches!(c, Clause::Return { .. })) {
        if pos != clauses.len() - 1 {
            return Err(QueryError::InvalidQuery(
                "RETURN must be the last clause".into(),
            ));
        }
    }
    let has_match = clauses.iter().any(|c| matches!(c, Clause::Match { .. }));
    let has_return = clauses.iter().any(|c| matches!(c, Clause::Return { .. }));
    let has_create = clauses
        .iter()
        .any(|c| matches!(c, Clause::Create { .. } | Clause::Merge { .. }));
    let has_delete = clauses.iter().any(|c| matches!(c, Clause::Delete { .. }));
    let is_write = has_create || has_delete;
    if is_write && (has_return || (has_match && has_create)) {
        return Err(QueryError::MixedReadWrite);
    }
    if !is_write && !has_return {
        return Err(QueryError::InvalidQuery(
            "read query must end with RETURN".into(),
        ));
    }

    let mut bound: HashMap<String, VarKind> = HashMap::new();
    let bind = |bound: &mut HashMap<String, VarKind>, name: &str, kind: VarKind| {
        match bound.insert(name.to_string(), kind) {
            Some(prev) if prev != kind => Err(QueryError::VariableConflict(name.to_string())),
            _ => Ok(()),
        }
    };
    let require = |bound: &HashMap<String, VarKind>, name: &str| {
        if bound.contains_key(name) {
            Ok(())
        } else {
            Err(QueryError::UnboundVariable(name.to_string()))
        }
    };

    for clause in clauses {
        match clause {
            Clause::Match { pattern, predicate } => {
                let mut edge_vars = Vec::new();
                for node in pattern.nodes() {
                    if let Some(v) = &node.variable {
                        bind(&mut bound, v, VarKind::Node)?;
                    }
                }
                for rel in pattern.rels() {
                    if let Some(v) = &rel.variable {
                        if edge_vars.contains(&v) {
                            return Err(QueryError::VariableConflict(v.clone()));
                        }
                        edge_vars.push(v);
                        bind(&mut bound, v, VarKind::Edge)?;
                    }
                }
                if let Some(pred) = predicate {
                    for cmp in &pred.comparisons {
                        for operand in [&cmp.left, &cmp.right] {
                            if let Operand::Property { variable, .. } = operand {
                                require(&bound, variable)?;
                            }
                        }
                    }
                }
            }
            Clause::Create { pattern } => {
                for node in pattern.nodes() {
                    let existing = node
                        .variable
                        .as_ref()
                        .and_then(|v| bound.get(v).copied());
                    match existing {
                        Some(VarKind::Edge) => {
                            return Err(QueryError::VariableConflict(
                                node.variable.clone().unwrap_or_default(),
                            ))
                        }
                        Some(VarKind::Node) => {
                            if node.label.is_some() || !node.properties.is_empty() {
                                return Err(QueryError::InvalidWrite(format!(
                                    "variable {} is already bound; it cannot be redeclared",
                                    node.variable.as_deref().unwrap_or_default()
                                )));
                            }
                        }
                        None => {
                            check_named(node)?;
                            if let Some(v) = &node.variable {
                                bind(&mut bound, v, VarKind::Node)?;
                            }
                        }
                    }
                }
                for rel in pattern.rels() {
                    if rel.relation.is_none() {
                        return Err(QueryError::InvalidWrite(
                            "CREATE relationships need a relation type".into(),
                        ));
                    }
                    if let Some(v) = &rel.variable {
                        if bound.contains_key(v) {
                            return Err(QueryError::VariableConflict(v.clone()));
                        }
                        bind(&mut bound, v, VarKind::Edge)?;
                    }
                }
            }
            Clause::Merge { node } => {
                if let Some(v) = &node.variable {
                    if bound.contains_key(v) {
                        return Err(QueryError::VariableConflict(v.clone()));
                    }
                }
                check_named(node)?;
                if let Some(v) = &node.variable {
                    bind(&mut bound, v, VarKind::Node)?;
                }
            }
            Clause::Delete { variable, .. } => require(&bound, variable)?,
            Clause::Return { projections, .. } => {
                for p in projections {
                    require(&bound, p.variable())?;
                }
            }
        }
    }
    Ok(())
}

fn check_named(node: &NodePattern) -> Result<(), QueryError> {
    let named = node
        .properties
        .iter()
        .filter(|(k, _)| k == "name")
        .collect::<Vec<_>>();
    match named.as_slice() {
        [(_, PropValue::Str(s))] if !s.trim().is_empty() => Ok(()),
        [] => Err(QueryError::InvalidWrite(
            "new nodes need a non-empty string name property".into(),
        )),
        _ => Err(QueryError::InvalidWrite(
            "name must be a single non-empty string".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syntax(text: &str) -> Diagnostic {
        match parse(text) {
            Err(QueryError::Syntax(d)) => d,
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn match_return() {
        let q = parse("MATCH (a:Concept {name:'X'})-[:PREREQUISITE_OF]->(b) RETURN b.name").unwrap();
        assert_eq!(q.clauses.len(), 2);
        let Clause::Match { pattern, predicate } = &q.clauses[0] else {
            panic!()
        };
        assert!(predicate.is_none());
        assert_eq!(pattern.start.variable.as_deref(), Some("a"));
        assert_eq!(pattern.start.label.as_deref(), Some("Concept"));
        assert_eq!(pattern.start.properties, vec![("name".into(), PropValue::from("X"))]);
        assert_eq!(pattern.hops.len(), 1);
        assert_eq!(pattern.hops[0].0.relation.as_deref(), Some("PREREQUISITE_OF"));
        assert_eq!(pattern.hops[0].0.direction, RelDirection::Outgoing);
        assert_eq!(pattern.hops[0].1.variable.as_deref(), Some("b"));
        assert!(!q.is_write());
    }

    #[test]
    fn unbound_return_variable() {
        assert_eq!(parse("RETURN a.name"), Err(QueryError::UnboundVariable("a".into())));
    }

    #[test]
    fn mixed_read_write() {
        assert_eq!(
            parse("MATCH (a) CREATE (b:Concept {name:'Y'}) RETURN a"),
            Err(QueryError::MixedReadWrite)
        );
        assert_eq!(
            parse("CREATE (b:Concept {name:'Y'}) RETURN b"),
            Err(QueryError::MixedReadWrite)
        );
    }

    #[test]
    fn match_delete_is_a_write() {
        let q = parse("MATCH (a:Concept {name:'X'}) DETACH DELETE a").unwrap();
        assert!(q.is_write());
        assert_eq!(
            q.clauses[1],
            Clause::Delete { variable: "a".into(), detach: true }
        );
    }

    #[test]
    fn incoming_and_shorthand_edges() {
        let q = parse("MATCH (a)<-[r:R]-(b)-->(c) RETURN r, c").unwrap();
        let Clause::Match { pattern, .. } = &q.clauses[0] else { panic!() };
        assert_eq!(pattern.hops[0].0.direction, RelDirection::Incoming);
        assert_eq!(pattern.hops[0].0.variable.as_deref(), Some("r"));
        assert_eq!(pattern.hops[1].0.relation, None);
    }

    #[test]
    fn where_conjunction() {
        let q = parse("match (a) where a.x = 1 and a.y <> 'z' and 2.5 = a.w return a limit 3").unwrap();
        let Clause::Match { predicate: Some(p), .. } = &q.clauses[0] else { panic!() };
        assert_eq!(p.comparisons.len(), 3);
        assert_eq!(p.comparisons[1].op, CompareOp::Ne);
        assert_eq!(p.comparisons[2].left, Operand::Literal(PropValue::Float(2.5)));
        assert_eq!(
            q.clauses[1],
            Clause::Return { projections: vec![Projection::Variable("a".into())], limit: Some(3) }
        );
    }

    #[test]
    fn negative_literals() {
        let q = parse("MATCH (a {x: -3, y: -0.5}) RETURN a").unwrap();
        let Clause::Match { pattern, .. } = &q.clauses[0] else { panic!() };
        assert_eq!(pattern.start.properties[0].1, PropValue::Int(-3));
        assert_eq!(pattern.start.properties[1].1, PropValue::Float(-0.5));
        assert!(parse(&format!("MATCH (a {{x: {}}}) RETURN a", i64::MIN)).is_ok());
    }

    #[test]
    fn syntax_errors_carry_offset_and_expected() {
        let d = syntax("MATCH (a RETURN a");
        assert_eq!(d.offset, 9);
        assert!(d.expected.contains(&")".to_string()));

        let d = syntax("");
        assert_eq!(d.offset, 0);
        assert!(d.expected.contains(&"MATCH".to_string()));

        let d = syntax("MATCH (a)-[:R]-(b) RETURN a");
        assert_eq!(d.offset, 15);
        assert_eq!(d.expected, [">"]);

        let d = syntax("MATCH (a) WHERE a.x > 1 RETURN a");
        assert_eq!(d.expected, ["=", "<>"]);
    }

    #[test]
    fn return_must_be_last() {
        assert!(matches!(
            parse("MATCH (a) RETURN a MATCH (b) RETURN b"),
            Err(QueryError::InvalidQuery(_))
        ));
    }

    #[test]
    fn read_query_needs_return() {
        assert!(matches!(parse("MATCH (a)"), Err(QueryError::InvalidQuery(_))));
    }

    #[test]
    fn variable_kind_conflict() {
        assert_eq!(
            parse("MATCH (a)-[a:R]->(b) RETURN b"),
            Err(QueryError::VariableConflict("a".into()))
        );
        assert_eq!(
            parse("MATCH (a)-[r]->(b)-[r]->(c) RETURN c"),
            Err(QueryError::VariableConflict("r".into()))
        );
    }

    #[test]
    fn where_sees_only_bound_variables() {
        assert_eq!(
            parse("MATCH (a) WHERE b.x = 1 RETURN a"),
            Err(QueryError::UnboundVariable("b".into()))
        );
    }

    #[test]
    fn create_requires_names_and_relations() {
        assert!(matches!(parse("CREATE (a:Concept)"), Err(QueryError::InvalidWrite(_))));
        assert!(matches!(
            parse("CREATE (a:Concept {name:'A'})-->(b:Concept {name:'B'})"),
            Err(QueryError::InvalidWrite(_))
        ));
        assert!(parse("CREATE (a:Concept {name:'A'}) CREATE (a)-[:R]->(b {name:'B'})").is_ok());
        assert!(matches!(parse("MERGE (n {name: 3})"), Err(QueryError::InvalidWrite(_))));
    }

    #[test]
    fn merge_is_node_only() {
        let d = syntax("MERGE (a {name:'A'})-[:R]->(b {name:'B'})");
        assert_eq!(d.offset, 20);
    }

    #[test]
    fn delete_requires_binding() {
        assert_eq!(parse("DELETE n"), Err(QueryError::UnboundVariable("n".into())));
    }

    #[test]
    fn semicolons_are_ignored() {
        assert!(parse("MATCH (a) RETURN a;").is_ok());
    }
}

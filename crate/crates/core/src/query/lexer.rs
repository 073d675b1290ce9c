use super::{Diagnostic, QueryError};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Keyword(Keyword),
    Ident(String),
    Str(String),
    /// Unsigned numeric text and whether it is a float literal.
    Number(String, bool),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Colon,
    Comma,
    Dot,
    Dash,
    Lt,
    Gt,
    Eq,
    Ne,
    Semicolon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Keyword {
    Match,
    Where,
    Create,
    Merge,
    Delete,
    Detach,
    Return,
    Limit,
    And,
    True,
    False,
}

pub(crate) const KEYWORDS: &[(&str, Keyword)] = &[
    ("MATCH", Keyword::Match),
    ("WHERE", Keyword::Where),
    ("CREATE", Keyword::Create),
    ("MERGE", Keyword::Merge),
    ("DELETE", Keyword::Delete),
    ("DETACH", Keyword::Detach),
    ("RETURN", Keyword::Return),
    ("LIMIT", Keyword::Limit),
    ("AND", Keyword::And),
    ("TRUE", Keyword::True),
    ("FALSE", Keyword::False),
];

pub(crate) fn keyword(text: &str) -> Option<Keyword> {
    KEYWORDS
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(text))
        .map(|(_, kw)| *kw)
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Token>, QueryError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut chars = text.char_indices().peekable();
    let error = |offset: usize, message: &str, expected: &[&str]| {
        QueryError::Syntax(Diagnostic {
            offset,
            message: message.to_string(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        })
    };

    while let Some(&(start, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let simple = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            ':' => Some(Tok::Colon),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            '-' => Some(Tok::Dash),
            '>' => Some(Tok::Gt),
            '=' => Some(Tok::Eq),
            ';' => Some(Tok::Semicolon),
            _ => None,
        };
        if let Some(tok) = simple {
            chars.next();
            tokens.push(Token { tok, offset: start });
            continue;
        }
        match c {
            '<' => {
                chars.next();
                if matches!(chars.peek(), Some((_, '>'))) {
                    chars.next();
                    tokens.push(Token { tok: Tok::Ne, offset: start });
                } else {
                    tokens.push(Token { tok: Tok::Lt, offset: start });
                }
            }
            '\'' => {
                chars.next();
                let mut value = String::new();
                loop {
                    match chars.next() {
                        Some((_, '\'')) => {
                            if matches!(chars.peek(), Some((_, '\''))) {
                                chars.next();
                                value.push('\'');
                            } else {
                                break;
                            }
                        }
                        Some((_, ch)) => value.push(ch),
                        None => {
                            return Err(error(text.len(), "unterminated string literal", &["'"]))
                        }
                    }
                }
                tokens.push(Token { tok: Tok::Str(value), offset: start });
            }
            '`' => {
                chars.next();
                let mut value = String::new();
                loop {
                    match chars.next() {
                        Some((_, '`')) => {
                            if matches!(chars.peek(), Some((_, '`'))) {
                                chars.next();
                                value.push('`');
                            } else {
                                break;
                            }
                        }
                        Some((_, ch)) => value.push(ch),
                        None => {
                            return Err(error(text.len(), "unterminated quoted identifier", &["`"]))
                        }
                    }
                }
                if value.is_empty() {
                    return Err(error(start, "empty quoted identifier", &["identifier"]));
                }
                tokens.push(Token { tok: Tok::Ident(value), offset: start });
            }
            c if c.is_ascii_digit() => {
                let mut end = start;
                let mut is_float = false;
                while end < bytes.len() && bytes[end].is_ascii_digit() {
                    end += 1;
                }
                if end + 1 < bytes.len() && bytes[end] == b'.' && bytes[end + 1].is_ascii_digit() {
                    is_float = true;
                    end += 1;
                    while end < bytes.len() && bytes[end].is_ascii_digit() {
                        end += 1;
                    }
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut probe = end + 1;
                    if probe < bytes.len() && (bytes[probe] == b'+' || bytes[probe] == b'-') {
                        probe += 1;
                    }
                    if probe < bytes.len() && bytes[probe].is_ascii_digit() {
                        is_float = true;
                        end = probe;
                        while end < bytes.len() && bytes[end].is_ascii_digit() {
                            end += 1;
                        }
                    }
                }
                if end < bytes.len() && is_ident_start(bytes[end] as char) {
                    return Err(error(end, "malformed number", &["number"]));
                }
                while chars.peek().is_some_and(|(i, _)| *i < end) {
                    chars.next();
                }
                tokens.push(Token {
                    tok: Tok::Number(text[start..end].to_string(), is_float),
                    offset: start,
                });
            }
            c if is_ident_start(c) => {
                let mut end = start;
                while let Some(&(i, ch)) = chars.peek() {
                    if is_ident_continue(ch) {
                        end = i + ch.len_utf8();
                        chars.next();
                    } else {
                        break;
                    }
                }
                let word = &text[start..end];
                let tok = match keyword(word) {
                    Some(kw) => Tok::Keyword(kw),
                    None => Tok::Ident(word.to_string()),
                };
                tokens.push(Token { tok, offset: start });
            }
            other => {
                return Err(error(
                    start,
                    &format!("unexpected character {other:?}"),
                    &[],
                ))
            }
        }
    }
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn keywords_are_case_insensitive() {
        assert_eq!(toks("match Return"), [Tok::Keyword(Keyword::Match), Tok::Keyword(Keyword::Return)]);
    }

    #[test]
    fn quoted_identifier_is_never_keyword() {
        assert_eq!(toks("`match`"), [Tok::Ident("match".into())]);
        assert_eq!(toks("`a``b`"), [Tok::Ident("a`b".into())]);
    }

    #[test]
    fn string_escape_doubles_quote() {
        assert_eq!(toks("'it''s'"), [Tok::Str("it's".into())]);
    }

    #[test]
    fn numbers() {
        assert_eq!(toks("12"), [Tok::Number("12".into(), false)]);
        assert_eq!(toks("1.5"), [Tok::Number("1.5".into(), true)]);
        assert_eq!(toks("1e-7"), [Tok::Number("1e-7".into(), true)]);
        // `1.` followed by a non-digit is an integer then a dot.
        assert_eq!(toks("1.x"), [Tok::Number("1".into(), false), Tok::Dot, Tok::Ident("x".into())]);
    }

    #[test]
    fn arrows_and_inequality() {
        assert_eq!(toks("<>"), [Tok::Ne]);
        assert_eq!(toks("<-"), [Tok::Lt, Tok::Dash]);
        assert_eq!(toks("->"), [Tok::Dash, Tok::Gt]);
    }

    #[test]
    fn unterminated_string_reports_end_offset() {
        match tokenize("RETURN 'abc") {
            Err(QueryError::Syntax(d)) => assert_eq!(d.offset, 11),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unexpected_character() {
        match tokenize("MATCH (a) RETURN a + 1") {
            Err(QueryError::Syntax(d)) => assert_eq!(d.offset, 19),
            other => panic!("{other:?}"),
        }
    }
}

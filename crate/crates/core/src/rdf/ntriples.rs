//! Line-oriented N-Triples reader and writer.

use std::fmt::Write as _;

use thiserror::Error;

use super::{LiteralTag, RdfGraph, Term, Triple};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NtError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid UTF-8 on line {line}")]
    Encoding { line: usize },
}

/// Parses an N-Triples document into a graph.
pub fn parse_ntriples(input: &[u8]) -> Result<RdfGraph, NtError> {
    Ok(RdfGraph::from_triples(parse_triples(input)?))
}

/// Parses an N-Triples document into its triples, in document order.
pub fn parse_triples(input: &[u8]) -> Result<Vec<Triple>, NtError> {
    let mut triples = Vec::new();
    for (idx, raw) in input.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let text = std::str::from_utf8(raw).map_err(|_| NtError::Encoding { line })?;
        let mut cursor = Cursor::new(text, line);
        cursor.skip_ws();
        if cursor.at_end_or_comment() {
            continue;
        }
        let s = match cursor.peek() {
            Some('<') => Term::Iri(cursor.iri()?),
            Some('_') => cursor.blank()?,
            _ => return Err(cursor.error("expected IRI or blank node as subject")),
        };
        cursor.skip_ws();
        if cursor.peek() != Some('<') {
            return Err(cursor.error("expected IRI as predicate"));
        }
        let p = cursor.iri()?;
        cursor.skip_ws();
        let o = cursor.object()?;
        cursor.skip_ws();
        if !cursor.eat('.') {
            return Err(cursor.error("expected '.' terminating the triple"));
        }
        cursor.skip_ws();
        if !cursor.at_end_or_comment() {
            return Err(cursor.error("unexpected content after '.'"));
        }
        triples.push(Triple { s, p, o });
    }
    Ok(triples)
}

/// Parses one term in N-Triples syntax (`<iri>`, `_:label`, or a literal).
/// The whole input must be consumed.
pub fn parse_term(text: &str) -> Result<Term, NtError> {
    let mut cursor = Cursor::new(text, 1);
    cursor.skip_ws();
    let term = cursor.object()?;
    cursor.skip_ws();
    if cursor.peek().is_some() {
        return Err(cursor.error("unexpected content after term"));
    }
    Ok(term)
}

/// Serializes the graph, one triple per line, in edge order.
pub fn write_ntriples(g: &RdfGraph) -> String {
    let mut out = String::new();
    for t in g.triples() {
        let _ = writeln!(out, "{} <{}> {} .", t.s, escape_iri(&t.p), t.o);
    }
    out
}

/// Escapes a literal's value for use between double quotes.
pub fn escape_string(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c == '\u{7f}' => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

pub(crate) fn escape_iri(iri: &str) -> String {
    let mut out = String::with_capacity(iri.len());
    for c in iri.chars() {
        if matches!(c, '<' | '>' | '"' | '{' | '}' | '|' | '^' | '`' | '\\') || (c as u32) <= 0x20 {
            let _ = write!(out, "\\u{:04X}", c as u32);
        } else {
            out.push(c);
        }
    }
    out
}

struct Cursor {
    chars: Vec<char>,
    pos: usize,
    line: usize,
}

impl Cursor {
    fn new(text: &str, line: usize) -> Self {
        Cursor {
            chars: text.chars().collect(),
            pos: 0,
            line,
        }
    }

    fn error(&self, message: impl Into<String>) -> NtError {
        NtError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, offset: usize) -> Option<char> {
        self.chars.get(self.pos + offset).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn eat(&mut self, expected: char) -> bool {
        if self.peek() == Some(expected) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
    }

    fn at_end_or_comment(&self) -> bool {
        matches!(self.peek(), None | Some('#'))
    }

    fn object(&mut self) -> Result<Term, NtError> {
        match self.peek() {
            Some('<') => Ok(Term::Iri(self.iri()?)),
            Some('_') => self.blank(),
            Some('"') => self.literal(),
            _ => Err(self.error("expected IRI, blank node or literal")),
        }
    }

    fn iri(&mut self) -> Result<String, NtError> {
        self.bump();
        let mut iri = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated IRI")),
                Some('>') => return Ok(iri),
                Some('\\') => iri.push(self.unicode_escape()?),
                Some(c) if c == '<' || c == '"' || c == ' ' || (c as u32) < 0x20 => {
                    return Err(self.error(format!("character {c:?} not allowed in IRI")))
                }
                Some(c) => iri.push(c),
            }
        }
    }

    fn blank(&mut self) -> Result<Term, NtError> {
        self.bump();
        if !self.eat(':') {
            return Err(self.error("expected ':' after '_'"));
        }
        let is_label_char = |c: char| c.is_alphanumeric() || matches!(c, '_' | '-' | '\u{b7}');
        let mut label = String::new();
        while let Some(c) = self.peek() {
            // A '.' belongs to the label only when more label characters follow it.
            let take = is_label_char(c)
                || (c == '.'
                    && self
                        .peek_at(1)
                        .is_some_and(|n| is_label_char(n) || n == '.'));
            if !take {
                break;
            }
            label.push(c);
            self.pos += 1;
        }
        if label.is_empty() {
            return Err(self.error("empty blank node label"));
        }
        if label.ends_with('.') {
            return Err(self.error("blank node label may not end with '.'"));
        }
        Ok(Term::Blank(label))
    }

    fn literal(&mut self) -> Result<Term, NtError> {
        self.bump();
        let mut value = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated literal")),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.peek() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u' | 'U') => {
                            value.push(self.unicode_escape()?);
                            continue;
                        }
                        _ => return Err(self.error("invalid escape sequence in literal")),
                    };
                    self.bump();
                    value.push(c);
                }
                Some(c) => value.push(c),
            }
        }
        let tag = if self.eat('@') {
            let mut lang = String::new();
            while let Some(c) = self.peek() {
                if c.is_ascii_alphanumeric() || c == '-' {
                    lang.push(c);
                    self.bump();
                } else {
                    break;
                }
            }
            if lang.is_empty() || lang.starts_with('-') || lang.ends_with('-') {
                return Err(self.error("malformed language tag"));
            }
            LiteralTag::Lang(lang)
        } else if self.eat('^') {
            if !self.eat('^') || self.peek() != Some('<') {
                return Err(self.error("expected '^^<datatype>'"));
            }
            LiteralTag::Typed(self.iri()?)
        } else {
            LiteralTag::Simple
        };
        Ok(Term::Literal(super::Literal::new(value, tag)))
    }

    /// Reads `uXXXX` or `UXXXXXXXX` after a backslash.
    fn unicode_escape(&mut self) -> Result<char, NtError> {
        let len = match self.bump() {
            Some('u') => 4,
            Some('U') => 8,
            _ => return Err(self.error("expected \\u or \\U escape")),
        };
        let mut code = 0u32;
        for _ in 0..len {
            let digit = self
                .bump()
                .and_then(|c| c.to_digit(16))
                .ok_or_else(|| self.error("invalid hex digit in escape"))?;
            code = code * 16 + digit;
        }
        char::from_u32(code).ok_or_else(|| self.error("escape is not a Unicode scalar value"))
    }
}

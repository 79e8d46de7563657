//! Recursive-descent parser for the supported SPARQL subset:
//! `SELECT` over groups of triple patterns with nested groups, `OPTIONAL`,
//! `UNION` and `FILTER`. `PREFIX` declarations are expanded while parsing.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use super::{
    CompareOp, EdgeLabel, FilterExpr, GeneralQuery, Operand, Pattern, QueryGraph, VertexBinding,
};
use crate::rdf::{Literal, LiteralTag, Term, RDF_TYPE, XSD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Position {
    pub offset: usize,
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("syntax error at {position}: {message}")]
    Syntax { position: Position, message: String },
    #[error("unsupported feature at {position}: {feature}")]
    Unsupported { position: Position, feature: String },
    #[error("projected variable ?{0} does not occur in any triple pattern")]
    UnknownProjection(String),
}

pub fn parse_sparql(text: &str) -> Result<GeneralQuery, QueryError> {
    let tokens = Lexer::new(text).tokenize()?;
    let mut parser = Parser {
        text,
        tokens,
        pos: 0,
        prefixes: HashMap::new(),
    };
    parser.query()
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Var(String),
    Iri(String),
    PName(String, String),
    Str(String),
    LangTag(String),
    Number(String),
    Word(String),
    Punct(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    offset: usize,
}

fn position_at(text: &str, offset: usize) -> Position {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    Position {
        offset,
        line,
        column,
    }
}

struct Lexer<'a> {
    text: &'a str,
    pos: usize,
}

const PUNCT: &[&str] = &[
    "&&", "||", "!=", "<=", ">=", "^^", "{", "}", "(", ")", ".", ";", ",", "*", "!", "=", "<", ">",
    "-", "+", "/", "|", "^", "[", "]",
];

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer { text, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.text[self.pos..]
    }

    fn syntax(&self, offset: usize, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            position: position_at(self.text, offset),
            message: message.into(),
        }
    }

    fn tokenize(mut self) -> Result<Vec<Token>, QueryError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws_and_comments();
            let offset = self.pos;
            let Some(c) = self.rest().chars().next() else {
                out.push(Token {
                    tok: Tok::Eof,
                    offset,
                });
                return Ok(out);
            };
            let tok = match c {
                '?' | '$' => {
                    self.pos += 1;
                    let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                    if name.is_empty() {
                        return Err(self.syntax(offset, "empty variable name"));
                    }
                    Tok::Var(name.to_owned())
                }
                '<' if self.looks_like_iri() => {
                    self.pos += 1;
                    let body = self.take_while(|c| c != '>');
                    self.pos += 1;
                    Tok::Iri(body.to_owned())
                }
                '"' | '\'' => Tok::Str(self.string(c)?),
                '@' => {
                    self.pos += 1;
                    let tag = self.take_while(|c| c.is_ascii_alphanumeric() || c == '-');
                    if tag.is_empty() {
                        return Err(self.syntax(offset, "empty language tag"));
                    }
                    Tok::LangTag(tag.to_owned())
                }
                '_' if self.rest().starts_with("_:") => {
                    return Err(QueryError::Unsupported {
                        position: position_at(self.text, offset),
                        feature: "blank nodes in queries".into(),
                    })
                }
                c if c.is_ascii_digit() => Tok::Number(self.number()),
                c if c.is_alphabetic() || c == ':' || c == '_' => self.word_or_pname()?,
                _ => {
                    let Some(p) = PUNCT.iter().find(|p| self.rest().starts_with(**p)) else {
                        return Err(self.syntax(offset, format!("unexpected character {c:?}")));
                    };
                    self.pos += p.len();
                    Tok::Punct(p)
                }
            };
            out.push(Token { tok, offset });
        }
    }

    fn skip_ws_and_comments(&mut self) {
        loop {
            let rest = self.rest();
            let trimmed = rest.trim_start();
            self.pos += rest.len() - trimmed.len();
            if self.rest().starts_with('#') {
                let line_len = self.rest().find('\n').unwrap_or(self.rest().len());
                self.pos += line_len;
            } else {
                return;
            }
        }
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let rest = self.rest();
        let len = rest.find(|c: char| !pred(c)).unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    /// `<` opens an IRI when a `>` closes it with no whitespace or IRI-forbidden
    /// characters in between; otherwise it is the less-than operator.
    fn looks_like_iri(&self) -> bool {
        let body = &self.rest()[1..];
        if body.starts_with(['=', '?', '$']) {
            return false;
        }
        match body.find('>') {
            Some(end) => !body[..end].chars().any(|c| {
                c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\')
            }),
            None => false,
        }
    }

    fn string(&mut self, quote: char) -> Result<String, QueryError> {
        let start = self.pos;
        self.pos += 1;
        let mut value = String::new();
        loop {
            let Some(c) = self.rest().chars().next() else {
                return Err(self.syntax(start, "unterminated string literal"));
            };
            self.pos += c.len_utf8();
            match c {
                c if c == quote => return Ok(value),
                '\n' | '\r' => return Err(self.syntax(start, "newline in string literal")),
                '\\' => {
                    let Some(e) = self.rest().chars().next() else {
                        return Err(self.syntax(start, "unterminated string literal"));
                    };
                    self.pos += e.len_utf8();
                    value.push(match e {
                        't' => '\t',
                        'n' => '\n',
                        'r' => '\r',
                        'b' => '\u{8}',
                        'f' => '\u{c}',
                        '"' => '"',
                        '\'' => '\'',
                        '\\' => '\\',
                        'u' | 'U' => {
                            let len = if e == 'u' { 4 } else { 8 };
                            let hex = self
                                .rest()
                                .get(..len)
                                .ok_or_else(|| self.syntax(self.pos, "short unicode escape"))?;
                            let code = u32::from_str_radix(hex, 16)
                                .map_err(|_| self.syntax(self.pos, "invalid unicode escape"))?;
                            self.pos += len;
                            char::from_u32(code)
                                .ok_or_else(|| self.syntax(self.pos, "invalid unicode scalar"))?
                        }
                        other => {
                            return Err(
                                self.syntax(self.pos - 1, format!("invalid escape \\{other}"))
                            )
                        }
                    });
                }
                c => value.push(c),
            }
        }
    }

    fn number(&mut self) -> String {
        let start = self.pos;
        self.take_while(|c| c.is_ascii_digit());
        if self.rest().starts_with('.')
            && self.rest()[1..].starts_with(|c: char| c.is_ascii_digit())
        {
            self.pos += 1;
            self.take_while(|c| c.is_ascii_digit());
        }
        if self.rest().starts_with(['e', 'E']) {
            let save = self.pos;
            self.pos += 1;
            if self.rest().starts_with(['+', '-']) {
                self.pos += 1;
            }
            if self.take_while(|c| c.is_ascii_digit()).is_empty() {
                self.pos = save;
            }
        }
        self.text[start..self.pos].to_owned()
    }

    fn word_or_pname(&mut self) -> Result<Tok, QueryError> {
        let is_name = |c: char| c.is_alphanumeric() || c == '_' || c == '-';
        let prefix = self.take_while(is_name).to_owned();
        if self.rest().starts_with(':') {
            self.pos += 1;
            let rest = self.rest();
            let mut len = 0;
            for (i, c) in rest.char_indices() {
                if is_name(c)
                    || c == ':'
                    || (c == '.' && rest[i + 1..].starts_with(|n: char| is_name(n)))
                {
                    len = i + c.len_utf8();
                } else {
                    break;
                }
            }
            self.pos += len;
            return Ok(Tok::PName(prefix, rest[..len].to_owned()));
        }
        Ok(Tok::Word(prefix))
    }
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
    prefixes: HashMap<String, String>,
}

const UNSUPPORTED_WORDS: &[&str] = &[
    "ORDER",
    "LIMIT",
    "OFFSET",
    "GROUP",
    "HAVING",
    "GRAPH",
    "MINUS",
    "BIND",
    "VALUES",
    "SERVICE",
    "CONSTRUCT",
    "ASK",
    "DESCRIBE",
    "FROM",
    "BASE",
    "EXISTS",
    "NOT",
    "REGEX",
    "STR",
    "LANG",
    "DATATYPE",
];

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn offset(&self) -> usize {
        self.tokens[self.pos].offset
    }

    fn advance(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn position(&self) -> Position {
        position_at(self.text, self.offset())
    }

    fn syntax(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            position: self.position(),
            message: message.into(),
        }
    }

    fn unsupported(&self, feature: impl Into<String>) -> QueryError {
        QueryError::Unsupported {
            position: self.position(),
            feature: feature.into(),
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(word))
    }

    fn eat_word(&mut self, word: &str) -> bool {
        if self.is_word(word) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), QueryError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.syntax(format!("expected '{p}'")))
        }
    }

    fn reject_unsupported_word(&self) -> Result<(), QueryError> {
        if let Tok::Word(w) = self.peek() {
            if let Some(u) = UNSUPPORTED_WORDS.iter().find(|u| w.eq_ignore_ascii_case(u)) {
                return Err(self.unsupported(u.to_string()));
            }
        }
        Ok(())
    }

    fn query(&mut self) -> Result<GeneralQuery, QueryError> {
        while self.eat_word("PREFIX") {
            let Tok::PName(prefix, local) = self.advance() else {
                return Err(self.syntax("expected 'prefix:' after PREFIX"));
            };
            if !local.is_empty() {
                return Err(self.syntax("prefix declaration must end with ':'"));
            }
            let Tok::Iri(iri) = self.advance() else {
                return Err(self.syntax("expected <iri> in PREFIX declaration"));
            };
            self.prefixes.insert(prefix, iri);
        }
        self.reject_unsupported_word()?;
        if !self.eat_word("SELECT") {
            return Err(self.syntax("expected SELECT"));
        }
        let _ = self.eat_word("DISTINCT") || self.eat_word("REDUCED");
        let mut projection = Vec::new();
        let star = self.eat_punct("*");
        if !star {
            while let Tok::Var(name) = self.peek().clone() {
                self.advance();
                if !projection.contains(&name) {
                    projection.push(name);
                }
            }
            if projection.is_empty() {
                if self.is_punct("(") {
                    return Err(self.unsupported("expressions in SELECT"));
                }
                return Err(self.syntax("expected '*' or variables after SELECT"));
            }
        }
        self.reject_unsupported_word()?;
        let _ = self.eat_word("WHERE");
        if !self.is_punct("{") {
            return Err(self.syntax("expected '{'"));
        }
        let pattern = self.group()?;
        self.reject_unsupported_word()?;
        if *self.peek() != Tok::Eof {
            return Err(self.syntax("unexpected content after the query pattern"));
        }
        let bound = pattern.variables();
        if star {
            projection = bound;
        } else if let Some(missing) = projection.iter().find(|v| !bound.contains(v)) {
            return Err(QueryError::UnknownProjection(missing.clone()));
        }
        Ok(GeneralQuery {
            pattern,
            projection,
        })
    }

    /// `{ ... }`. Elements combine left to right: a triples block joins the
    /// accumulated pattern, OPTIONAL left-joins it, a nested group or UNION
    /// chain joins it. FILTERs apply to the whole group. Triples separated
    /// only by FILTERs form one BGP.
    fn group(&mut self) -> Result<Pattern, QueryError> {
        self.expect_punct("{")?;
        let mut bgp = QueryGraph::new();
        let mut vertex_vars: Vec<String> = Vec::new();
        let mut label_vars: Vec<String> = Vec::new();
        let mut acc: Option<Pattern> = None;
        let mut filters = Vec::new();
        fn flush(acc: &mut Option<Pattern>, bgp: &mut QueryGraph) {
            if !bgp.is_empty() {
                let block = Pattern::Bgp(std::mem::take(bgp));
                *acc = Some(match acc.take() {
                    Some(a) => Pattern::and(a, block),
                    None => block,
                });
            }
        }
        loop {
            self.reject_unsupported_word()?;
            if self.eat_punct("}") {
                break;
            }
            if self.eat_punct(".") {
                continue;
            }
            if self.eat_word("OPTIONAL") {
                let right = self.group()?;
                flush(&mut acc, &mut bgp);
                let left = acc
                    .take()
                    .unwrap_or_else(|| Pattern::Bgp(QueryGraph::new()));
                acc = Some(Pattern::opt(left, right));
            } else if self.eat_word("FILTER") {
                filters.push(self.constraint()?);
            } else if self.is_punct("{") {
                let mut chain = self.group()?;
                while self.eat_word("UNION") {
                    chain = Pattern::union(chain, self.group()?);
                }
                flush(&mut acc, &mut bgp);
                acc = Some(match acc.take() {
                    Some(a) => Pattern::and(a, chain),
                    None => chain,
                });
            } else if *self.peek() == Tok::Eof {
                return Err(self.syntax("unterminated group, expected '}'"));
            } else {
                self.triples_same_subject(&mut bgp, &mut vertex_vars, &mut label_vars)?;
            }
        }
        flush(&mut acc, &mut bgp);
        let mut acc = acc.unwrap_or_else(|| Pattern::Bgp(QueryGraph::new()));
        for f in filters {
            acc = Pattern::filter(acc, f);
        }
        Ok(acc)
    }

    fn triples_same_subject(
        &mut self,
        bgp: &mut QueryGraph,
        vertex_vars: &mut Vec<String>,
        label_vars: &mut Vec<String>,
    ) -> Result<(), QueryError> {
        let subject = self.vertex_term(vertex_vars, label_vars)?;
        loop {
            let label = self.verb(vertex_vars, label_vars)?;
            loop {
                let object = self.vertex_term(vertex_vars, label_vars)?;
                bgp.add_pattern(subject.clone(), label.clone(), object);
                if !self.eat_punct(",") {
                    break;
                }
            }
            if !self.eat_punct(";") {
                break;
            }
            while self.eat_punct(";") {}
            if self.is_punct(".")
                || self.is_punct("}")
                || self.is_punct("{")
                || self.is_word("OPTIONAL")
                || self.is_word("FILTER")
            {
                break;
            }
        }
        let can_follow = self.is_punct(".")
            || self.is_punct("}")
            || self.is_punct("{")
            || self.is_word("OPTIONAL")
            || self.is_word("FILTER");
        if !can_follow {
            self.reject_unsupported_word()?;
            if matches!(self.peek(), Tok::Punct("/" | "|" | "^" | "*" | "+")) {
                return Err(self.unsupported("property paths"));
            }
            return Err(self.syntax("expected '.' or '}' after triple pattern"));
        }
        Ok(())
    }

    fn verb(
        &mut self,
        vertex_vars: &[String],
        label_vars: &mut Vec<String>,
    ) -> Result<EdgeLabel, QueryError> {
        if matches!(self.peek(), Tok::Punct("^")) {
            return Err(self.unsupported("property paths"));
        }
        let label = match self.peek().clone() {
            Tok::Var(name) => {
                if vertex_vars.contains(&name) {
                    return Err(
                        self.unsupported(format!("?{name} used both as vertex and as predicate"))
                    );
                }
                if !label_vars.contains(&name) {
                    label_vars.push(name.clone());
                }
                EdgeLabel::Variable(name)
            }
            Tok::Word(w) if w == "a" => EdgeLabel::Constant(RDF_TYPE.to_owned()),
            Tok::Iri(_) | Tok::PName(..) => {
                let Term::Iri(iri) = self.iri_term()? else {
                    unreachable!()
                };
                return self.after_verb(EdgeLabel::Constant(iri));
            }
            Tok::Punct("[") => return Err(self.unsupported("blank nodes in queries")),
            _ => {
                return Err(self.syntax("expected predicate (IRI, prefixed name, variable or 'a')"))
            }
        };
        self.advance();
        self.after_verb(label)
    }

    fn after_verb(&self, label: EdgeLabel) -> Result<EdgeLabel, QueryError> {
        if matches!(self.peek(), Tok::Punct("/" | "|" | "*" | "+")) {
            return Err(self.unsupported("property paths"));
        }
        Ok(label)
    }

    fn vertex_term(
        &mut self,
        vertex_vars: &mut Vec<String>,
        label_vars: &[String],
    ) -> Result<VertexBinding, QueryError> {
        if let Tok::Var(name) = self.peek().clone() {
            if label_vars.contains(&name) {
                return Err(
                    self.unsupported(format!("?{name} used both as vertex and as predicate"))
                );
            }
            self.advance();
            if !vertex_vars.contains(&name) {
                vertex_vars.push(name.clone());
            }
            return Ok(VertexBinding::Variable(name));
        }
        if self.is_punct("[") || self.is_punct("(") {
            return Err(self.unsupported("blank nodes and collections in queries"));
        }
        Ok(VertexBinding::Constant(self.constant_term()?))
    }

    fn iri_term(&mut self) -> Result<Term, QueryError> {
        match self.peek().clone() {
            Tok::Iri(iri) => {
                self.advance();
                Ok(Term::Iri(iri))
            }
            Tok::PName(prefix, local) => {
                let Some(ns) = self.prefixes.get(&prefix) else {
                    return Err(self.syntax(format!("undeclared prefix '{prefix}:'")));
                };
                let iri = format!("{ns}{local}");
                self.advance();
                Ok(Term::Iri(iri))
            }
            _ => Err(self.syntax("expected IRI")),
        }
    }

    /// IRI, literal, number or boolean.
    fn constant_term(&mut self) -> Result<Term, QueryError> {
        match self.peek().clone() {
            Tok::Iri(_) | Tok::PName(..) => self.iri_term(),
            Tok::Str(value) => {
                self.advance();
                let tag = match self.peek().clone() {
                    Tok::LangTag(lang) => {
                        self.advance();
                        LiteralTag::Lang(lang)
                    }
                    Tok::Punct("^^") => {
                        self.advance();
                        let Term::Iri(dt) = self.iri_term()? else {
                            unreachable!()
                        };
                        LiteralTag::Typed(dt)
                    }
                    _ => LiteralTag::Simple,
                };
                Ok(Term::Literal(Literal::new(value, tag)))
            }
            Tok::Punct(sign @ ("-" | "+")) => {
                self.advance();
                let Tok::Number(n) = self.peek().clone() else {
                    return Err(self.syntax("expected number after sign"));
                };
                self.advance();
                Ok(number_term(&format!(
                    "{}{n}",
                    if sign == "-" { "-" } else { "" }
                )))
            }
            Tok::Number(n) => {
                self.advance();
                Ok(number_term(&n))
            }
            Tok::Word(w) if w == "true" || w == "false" => {
                self.advance();
                Ok(Term::typed_literal(w, format!("{XSD}boolean")))
            }
            _ => Err(self.syntax("expected a variable, IRI or literal")),
        }
    }

    fn constraint(&mut self) -> Result<FilterExpr, QueryError> {
        if self.is_word("bound") {
            return self.primary();
        }
        self.reject_unsupported_word()?;
        if !self.is_punct("(") {
            if matches!(self.peek(), Tok::Word(_)) {
                return Err(self.unsupported("filter functions"));
            }
            return Err(self.syntax("expected '(' after FILTER"));
        }
        self.advance();
        let e = self.or_expr()?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn or_expr(&mut self) -> Result<FilterExpr, QueryError> {
        let mut e = self.and_expr()?;
        while self.eat_punct("||") {
            e = FilterExpr::or(e, self.and_expr()?);
        }
        Ok(e)
    }

    fn and_expr(&mut self) -> Result<FilterExpr, QueryError> {
        let mut e = self.unary()?;
        while self.eat_punct("&&") {
            e = FilterExpr::and(e, self.unary()?);
        }
        Ok(e)
    }

    fn unary(&mut self) -> Result<FilterExpr, QueryError> {
        if self.eat_punct("!") {
            return Ok(FilterExpr::negate(self.unary()?));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<FilterExpr, QueryError> {
        if self.eat_punct("(") {
            let e = self.or_expr()?;
            self.expect_punct(")")?;
            return Ok(e);
        }
        if self.eat_word("bound") {
            self.expect_punct("(")?;
            let Tok::Var(name) = self.advance() else {
                return Err(self.syntax("expected variable in bound()"));
            };
            self.expect_punct(")")?;
            return Ok(FilterExpr::Bound(name));
        }
        self.reject_unsupported_word()?;
        let left = self.operand()?;
        let op = match self.peek() {
            Tok::Punct("=") => CompareOp::Eq,
            Tok::Punct("!=") => CompareOp::Ne,
            Tok::Punct("<") => CompareOp::Lt,
            Tok::Punct("<=") => CompareOp::Le,
            Tok::Punct(">") => CompareOp::Gt,
            Tok::Punct(">=") => CompareOp::Ge,
            _ => {
                return match left {
                    Operand::Term(Term::Literal(ref lit))
                        if lit.datatype() == Some(format!("{XSD}boolean").as_str()) =>
                    {
                        Ok(FilterExpr::Const(lit.value() == "true"))
                    }
                    _ => Err(self.unsupported("effective boolean value of a non-boolean operand")),
                };
            }
        };
        self.advance();
        let right = self.operand()?;
        Ok(FilterExpr::Compare(op, left, right))
    }

    fn operand(&mut self) -> Result<Operand, QueryError> {
        if let Tok::Var(name) = self.peek().clone() {
            self.advance();
            return Ok(Operand::Var(name));
        }
        if let Tok::Word(w) = self.peek() {
            if w != "true" && w != "false" {
                return Err(self.unsupported(format!("function or keyword '{w}' in filter")));
            }
        }
        Ok(Operand::Term(self.constant_term()?))
    }
}

fn number_term(text: &str) -> Term {
    let local = if text.contains(['e', 'E']) {
        "double"
    } else if text.contains('.') {
        "decimal"
    } else {
        "integer"
    };
    Term::typed_literal(text, format!("{XSD}{local}"))
}

//! RDF terms and the in-memory labeled multigraph.
//!
//! Terms and predicates are interned once at load time. Everything downstream
//! (fragments, matching, assembly) works on [`VertexId`] and [`PredicateId`].

mod ntriples;

use std::collections::HashMap;
use std::fmt;

pub use ntriples::{
    escape_string, parse_ntriples, parse_term, parse_triples, write_ntriples, NtError,
};

/// IRI of `rdf:type`, used by the `a` keyword in queries.
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
/// XML Schema namespace prefix.
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

/// Dense identifier of a graph vertex, assigned in order of first appearance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Dense identifier of an edge label (predicate IRI).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PredicateId(pub u32);

impl PredicateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermKind {
    Iri,
    Literal,
    Blank,
}

/// Language tag or datatype attached to a literal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LiteralTag {
    Simple,
    Lang(String),
    Typed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    value: String,
    tag: LiteralTag,
}

impl Literal {
    pub fn new(value: impl Into<String>, tag: LiteralTag) -> Self {
        Literal {
            value: value.into(),
            tag,
        }
    }

    /// The unescaped string between the quotes.
    pub fn value(&self) -> &str {
        &self.value
    }

    pub fn tag(&self) -> &LiteralTag {
        &self.tag
    }

    pub fn datatype(&self) -> Option<&str> {
        match &self.tag {
            LiteralTag::Typed(dt) => Some(dt),
            _ => None,
        }
    }

    /// Numeric value when the datatype is one of the XSD numeric types.
    pub fn numeric_value(&self) -> Option<f64> {
        let dt = self.datatype()?;
        let local = dt.strip_prefix(XSD)?;
        const NUMERIC: &[&str] = &[
            "integer",
            "decimal",
            "double",
            "float",
            "int",
            "long",
            "short",
            "byte",
            "nonNegativeInteger",
            "positiveInteger",
            "negativeInteger",
            "nonPositiveInteger",
            "unsignedInt",
            "unsignedLong",
            "unsignedShort",
            "unsignedByte",
        ];
        if !NUMERIC.contains(&local) {
            return None;
        }
        let text = self.value.trim();
        match text {
            "INF" | "+INF" => Some(f64::INFINITY),
            "-INF" => Some(f64::NEG_INFINITY),
            "NaN" => Some(f64::NAN),
            _ => text.parse::<f64>().ok(),
        }
    }
}

/// An RDF term. Equality is syntactic: kind plus every byte of the lexical form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(String),
    Blank(String),
    Literal(Literal),
}

impl Term {
    pub fn iri(iri: impl Into<String>) -> Self {
        Term::Iri(iri.into())
    }

    pub fn blank(label: impl Into<String>) -> Self {
        Term::Blank(label.into())
    }

    pub fn literal(value: impl Into<String>) -> Self {
        Term::Literal(Literal::new(value, LiteralTag::Simple))
    }

    pub fn lang_literal(value: impl Into<String>, lang: impl Into<String>) -> Self {
        Term::Literal(Literal::new(value, LiteralTag::Lang(lang.into())))
    }

    pub fn typed_literal(value: impl Into<String>, datatype: impl Into<String>) -> Self {
        Term::Literal(Literal::new(value, LiteralTag::Typed(datatype.into())))
    }

    pub fn integer(value: i64) -> Self {
        Term::typed_literal(value.to_string(), format!("{XSD}integer"))
    }

    pub fn kind(&self) -> TermKind {
        match self {
            Term::Iri(_) => TermKind::Iri,
            Term::Blank(_) => TermKind::Blank,
            Term::Literal(_) => TermKind::Literal,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            _ => None,
        }
    }

    /// Lexical form: the bare IRI, `_:label` for blank nodes, and the quoted
    /// N-Triples form (with language tag or datatype) for literals.
    pub fn lexical(&self) -> String {
        match self {
            Term::Iri(iri) => iri.clone(),
            Term::Blank(_) | Term::Literal(_) => self.to_string(),
        }
    }
}

/// Formats the term in N-Triples syntax.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => write!(f, "<{}>", ntriples::escape_iri(iri)),
            Term::Blank(label) => write!(f, "_:{label}"),
            Term::Literal(lit) => {
                write!(f, "\"{}\"", escape_string(&lit.value))?;
                match &lit.tag {
                    LiteralTag::Simple => Ok(()),
                    LiteralTag::Lang(lang) => write!(f, "@{lang}"),
                    LiteralTag::Typed(dt) => write!(f, "^^<{}>", ntriples::escape_iri(dt)),
                }
            }
        }
    }
}

/// A parsed triple before interning. The predicate is an IRI string.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub s: Term,
    pub p: String,
    pub o: Term,
}

impl Triple {
    pub fn new(s: Term, p: impl Into<String>, o: Term) -> Self {
        Triple { s, p: p.into(), o }
    }
}

/// An interned edge `s --p--> o`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub s: VertexId,
    pub p: PredicateId,
    pub o: VertexId,
}

/// Directed labeled multigraph. Each `(s, p, o)` occurs once; several
/// predicates between the same ordered pair are kept.
#[derive(Debug, Clone, Default)]
pub struct RdfGraph {
    terms: Vec<Term>,
    term_ids: HashMap<Term, VertexId>,
    predicates: Vec<String>,
    predicate_ids: HashMap<String, PredicateId>,
    edges: Vec<Edge>,
    /// Per vertex: `(target, label)` sorted by target then label.
    out: Vec<Vec<(VertexId, PredicateId)>>,
    /// Per vertex: `(source, label)` sorted by source then label.
    inc: Vec<Vec<(VertexId, PredicateId)>>,
}

impl RdfGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from triples, collapsing duplicates.
    pub fn from_triples<I: IntoIterator<Item = Triple>>(triples: I) -> Self {
        let mut g = RdfGraph::new();
        for t in triples {
            g.insert(t);
        }
        g.finish();
        g
    }

    fn intern_term(&mut self, term: Term) -> VertexId {
        if let Some(&id) = self.term_ids.get(&term) {
            return id;
        }
        let id = VertexId(u32::try_from(self.terms.len()).expect("more than u32::MAX vertices"));
        self.terms.push(term.clone());
        self.term_ids.insert(term, id);
        self.out.push(Vec::new());
        self.inc.push(Vec::new());
        id
    }

    fn intern_predicate(&mut self, p: String) -> PredicateId {
        if let Some(&id) = self.predicate_ids.get(&p) {
            return id;
        }
        let id = PredicateId(self.predicates.len() as u32);
        self.predicates.push(p.clone());
        self.predicate_ids.insert(p, id);
        id
    }

    fn insert(&mut self, t: Triple) {
        let s = self.intern_term(t.s);
        let p = self.intern_predicate(t.p);
        let o = self.intern_term(t.o);
        self.edges.push(Edge { s, p, o });
    }

    fn finish(&mut self) {
        self.edges.sort_unstable();
        self.edges.dedup();
        for list in self.out.iter_mut().chain(self.inc.iter_mut()) {
            list.clear();
        }
        for e in &self.edges {
            self.out[e.s.index()].push((e.o, e.p));
            self.inc[e.o.index()].push((e.s, e.p));
        }
        for list in self.out.iter_mut().chain(self.inc.iter_mut()) {
            list.sort_unstable();
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.terms.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn predicate_count(&self) -> usize {
        self.predicates.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.terms.len() as u32).map(VertexId)
    }

    pub fn term(&self, v: VertexId) -> &Term {
        &self.terms[v.index()]
    }

    pub fn vertex_id(&self, term: &Term) -> Option<VertexId> {
        self.term_ids.get(term).copied()
    }

    pub fn predicate(&self, p: PredicateId) -> &str {
        &self.predicates[p.index()]
    }

    pub fn predicate_id(&self, iri: &str) -> Option<PredicateId> {
        self.predicate_ids.get(iri).copied()
    }

    /// Edges sorted by `(s, p, o)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn out_edges(&self, v: VertexId) -> &[(VertexId, PredicateId)] {
        &self.out[v.index()]
    }

    pub fn in_edges(&self, v: VertexId) -> &[(VertexId, PredicateId)] {
        &self.inc[v.index()]
    }

    /// Labels of the edges `u -> v` (the multiset L(u→v); each label at most once).
    pub fn labels_between(
        &self,
        u: VertexId,
        v: VertexId,
    ) -> impl Iterator<Item = PredicateId> + '_ {
        let out = &self.out[u.index()];
        let start = out.partition_point(|&(t, _)| t < v);
        out[start..]
            .iter()
            .take_while(move |&&(t, _)| t == v)
            .map(|&(_, p)| p)
    }

    /// Term-level convenience over [`RdfGraph::labels_between`].
    pub fn labels_between_terms(&self, u: &Term, v: &Term) -> Vec<&str> {
        match (self.vertex_id(u), self.vertex_id(v)) {
            (Some(u), Some(v)) => self
                .labels_between(u, v)
                .map(|p| self.predicate(p))
                .collect(),
            _ => Vec::new(),
        }
    }

    pub fn triple(&self, e: Edge) -> Triple {
        Triple::new(
            self.term(e.s).clone(),
            self.predicate(e.p),
            self.term(e.o).clone(),
        )
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.edges.iter().map(|&e| self.triple(e))
    }
}

//! Query graphs for basic graph patterns and the general query tree built
//! from them with AND, UNION, OPTIONAL and FILTER.

mod parser;
mod printer;

use std::collections::{BTreeSet, HashMap};

pub use parser::{parse_sparql, Position, QueryError};

use crate::rdf::Term;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VertexBinding {
    Constant(Term),
    Variable(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeLabel {
    Constant(String),
    Variable(String),
}

impl EdgeLabel {
    pub fn variable(&self) -> Option<&str> {
        match self {
            EdgeLabel::Variable(name) => Some(name),
            EdgeLabel::Constant(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryVertex {
    pub binding: VertexBinding,
}

impl QueryVertex {
    pub fn variable(&self) -> Option<&str> {
        match &self.binding {
            VertexBinding::Variable(name) => Some(name),
            VertexBinding::Constant(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QueryEdge {
    pub from: usize,
    pub to: usize,
    pub label: EdgeLabel,
}

/// A basic graph pattern as a labeled multigraph over query vertices `0..n`.
///
/// Vertices are unique per variable name and per constant term. Adding an
/// edge identical to an existing one is a no-op, so repeated triple patterns
/// collapse.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct QueryGraph {
    vertices: Vec<QueryVertex>,
    edges: Vec<QueryEdge>,
    index: HashMap<VertexBinding, usize>,
}

impl QueryGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of the vertex with this binding, creating it if needed.
    pub fn vertex(&mut self, binding: VertexBinding) -> usize {
        if let Some(&id) = self.index.get(&binding) {
            return id;
        }
        let id = self.vertices.len();
        self.vertices.push(QueryVertex {
            binding: binding.clone(),
        });
        self.index.insert(binding, id);
        id
    }

    pub fn var(&mut self, name: &str) -> usize {
        self.vertex(VertexBinding::Variable(name.to_owned()))
    }

    pub fn constant(&mut self, term: Term) -> usize {
        self.vertex(VertexBinding::Constant(term))
    }

    pub fn add_edge(&mut self, from: usize, to: usize, label: EdgeLabel) {
        assert!(
            from < self.vertices.len() && to < self.vertices.len(),
            "edge endpoint out of range"
        );
        let edge = QueryEdge { from, to, label };
        if !self.edges.contains(&edge) {
            self.edges.push(edge);
        }
    }

    /// Adds the triple pattern `s p o`, creating vertices as needed.
    pub fn add_pattern(&mut self, s: VertexBinding, p: EdgeLabel, o: VertexBinding) {
        let s = self.vertex(s);
        let o = self.vertex(o);
        self.add_edge(s, o, p);
    }

    pub fn n(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[QueryVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[QueryEdge] {
        &self.edges
    }

    pub fn vertex_of_variable(&self, name: &str) -> Option<usize> {
        self.index
            .get(&VertexBinding::Variable(name.to_owned()))
            .copied()
    }

    /// Vertex and edge-label variables in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut push = |name: &str| {
            if seen.insert(name.to_owned()) {
                out.push(name.to_owned());
            }
        };
        for e in &self.edges {
            if let Some(v) = self.vertices[e.from].variable() {
                push(v);
            }
            if let Some(v) = e.label.variable() {
                push(v);
            }
            if let Some(v) = self.vertices[e.to].variable() {
                push(v);
            }
        }
        for v in &self.vertices {
            if let Some(name) = v.variable() {
                push(name);
            }
        }
        out
    }

    /// Undirected neighbours of every vertex (self-loops excluded), ascending.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![BTreeSet::new(); self.n()];
        for e in &self.edges {
            if e.from != e.to {
                adj[e.from].insert(e.to);
                adj[e.to].insert(e.from);
            }
        }
        adj.into_iter().map(|s| s.into_iter().collect()).collect()
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    /// Weakly connected components, each renumbered from 0 in original vertex order.
    pub fn connected_components(&self) -> Vec<QueryGraph> {
        let n = self.n();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.from), find(&mut parent, e.to));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut component_of_root: HashMap<usize, usize> = HashMap::new();
        let mut components: Vec<(QueryGraph, Vec<usize>)> = Vec::new();
        let mut local = vec![0; n];
        for (v, slot) in local.iter_mut().enumerate() {
            let root = find(&mut parent, v);
            let c = *component_of_root.entry(root).or_insert_with(|| {
                components.push((QueryGraph::new(), Vec::new()));
                components.len() - 1
            });
            *slot = components[c].0.vertex(self.vertices[v].binding.clone());
            components[c].1.push(v);
        }
        for e in &self.edges {
            let c = component_of_root[&find(&mut parent, e.from)];
            components[c]
                .0
                .add_edge(local[e.from], local[e.to], e.label.clone());
        }
        components.into_iter().map(|(g, _)| g).collect()
    }

    /// The triple patterns as a set, independent of vertex numbering.
    pub fn triple_patterns(&self) -> BTreeSet<(VertexBinding, EdgeLabel, VertexBinding)> {
        self.edges
            .iter()
            .map(|e| {
                (
                    self.vertices[e.from].binding.clone(),
                    e.label.clone(),
                    self.vertices[e.to].binding.clone(),
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(String),
    Term(Term),
}

/// Boolean filter condition over one row of bindings.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FilterExpr {
    Const(bool),
    Bound(String),
    Compare(CompareOp, Operand, Operand),
    Not(Box<FilterExpr>),
    And(Box<FilterExpr>, Box<FilterExpr>),
    Or(Box<FilterExpr>, Box<FilterExpr>),
}

impl FilterExpr {
    pub fn compare(op: CompareOp, a: Operand, b: Operand) -> Self {
        FilterExpr::Compare(op, a, b)
    }

    pub fn and(a: FilterExpr, b: FilterExpr) -> Self {
        FilterExpr::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: FilterExpr, b: FilterExpr) -> Self {
        FilterExpr::Or(Box::new(a), Box::new(b))
    }

    pub fn negate(a: FilterExpr) -> Self {
        FilterExpr::Not(Box::new(a))
    }
}

/// Graph pattern tree. Leaves are basic graph patterns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pattern {
    Bgp(QueryGraph),
    And(Box<Pattern>, Box<Pattern>),
    Union(Box<Pattern>, Box<Pattern>),
    Opt(Box<Pattern>, Box<Pattern>),
    Filter(Box<Pattern>, FilterExpr),
}

impl Pattern {
    pub fn and(a: Pattern, b: Pattern) -> Self {
        Pattern::And(Box::new(a), Box::new(b))
    }

    pub fn union(a: Pattern, b: Pattern) -> Self {
        Pattern::Union(Box::new(a), Box::new(b))
    }

    pub fn opt(a: Pattern, b: Pattern) -> Self {
        Pattern::Opt(Box::new(a), Box::new(b))
    }

    pub fn filter(a: Pattern, f: FilterExpr) -> Self {
        Pattern::Filter(Box::new(a), f)
    }

    /// Variables bound by some BGP beneath this node, in first-appearance order.
    pub fn variables(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Bgp(q) => {
                for v in q.variables() {
                    if !out.contains(&v) {
                        out.push(v);
                    }
                }
            }
            Pattern::And(a, b) | Pattern::Union(a, b) | Pattern::Opt(a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
            Pattern::Filter(a, _) => a.collect_variables(out),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Pattern::Bgp(_) => 0,
            Pattern::And(a, b) | Pattern::Union(a, b) | Pattern::Opt(a, b) => {
                1 + a.depth().max(b.depth())
            }
            Pattern::Filter(a, _) => 1 + a.depth(),
        }
    }

    /// Structural equality that compares BGPs as sets of triple patterns.
    pub fn isomorphic(&self, other: &Pattern) -> bool {
        match (self, other) {
            (Pattern::Bgp(a), Pattern::Bgp(b)) => a.triple_patterns() == b.triple_patterns(),
            (Pattern::And(a1, b1), Pattern::And(a2, b2))
            | (Pattern::Union(a1, b1), Pattern::Union(a2, b2))
            | (Pattern::Opt(a1, b1), Pattern::Opt(a2, b2)) => {
                a1.isomorphic(a2) && b1.isomorphic(b2)
            }
            (Pattern::Filter(a1, f1), Pattern::Filter(a2, f2)) => f1 == f2 && a1.isomorphic(a2),
            _ => false,
        }
    }
}

/// A parsed `SELECT` query: its pattern tree and projected variable names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneralQuery {
    pub pattern: Pattern,
    pub projection: Vec<String>,
}

impl GeneralQuery {
    /// Projects every variable of the pattern.
    pub fn select_all(pattern: Pattern) -> Self {
        let projection = pattern.variables();
        GeneralQuery {
            pattern,
            projection,
        }
    }

    /// Renders the query as SPARQL text that parses back to an isomorphic tree.
    pub fn to_sparql(&self) -> String {
        printer::print_query(self)
    }
}

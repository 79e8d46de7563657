//! Partial evaluation inside one fragment: local partial matches (LPMs) and
//! inner matches of a connected query graph.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::fragment::{Fragment, FragmentId, Role};
use crate::query::{EdgeLabel, QueryGraph, VertexBinding};
use crate::rdf::{PredicateId, RdfGraph, VertexId};

/// Query vertices are tracked in `u64` bitsets.
pub const MAX_QUERY_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatchError {
    #[error("query has {0} vertices, at most {MAX_QUERY_VERTICES} are supported")]
    TooManyVertices(usize),
}

/// A full assignment of query vertices to data vertices.
pub type CompleteMatch = Vec<VertexId>;

/// A partial function from query vertices to data vertices.
///
/// `internal` marks the query vertices whose image is internal to some
/// fragment that contributed to this match, `provenance` the contributing
/// fragments and `touched` the home fragments of every image.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialMatch {
    pub func: Vec<Option<VertexId>>,
    pub internal: u64,
    pub provenance: u64,
    pub touched: u64,
}

impl PartialMatch {
    pub fn bound_count(&self) -> usize {
        self.func.iter().filter(|x| x.is_some()).count()
    }

    pub fn is_total(&self) -> bool {
        self.func.iter().all(Option::is_some)
    }

    pub fn is_internal(&self, v: usize) -> bool {
        self.internal >> v & 1 == 1
    }

    pub fn to_complete(&self) -> Option<CompleteMatch> {
        self.func.iter().copied().collect()
    }

    pub fn provenance_fragments(&self) -> impl Iterator<Item = FragmentId> + '_ {
        bits(self.provenance).map(|i| FragmentId(i as u32))
    }
}

pub(crate) fn bits(mut mask: u64) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if mask == 0 {
            return None;
        }
        let i = mask.trailing_zeros() as usize;
        mask &= mask - 1;
        Some(i)
    })
}

pub(crate) fn fragment_bit(f: FragmentId) -> u64 {
    1u64 << f.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BoundEdge {
    from: usize,
    to: usize,
    label: Option<PredicateId>,
}

/// Labels required between one ordered pair of query vertices.
#[derive(Debug, Clone, PartialEq, Eq)]
struct PairRequirement {
    constants: Vec<PredicateId>,
    variables: usize,
}

impl PairRequirement {
    /// The data labels can host the constants plus distinct labels for every
    /// variable.
    fn satisfied_by(&self, labels: impl Iterator<Item = PredicateId>) -> bool {
        let labels: Vec<PredicateId> = labels.collect();
        self.constants.iter().all(|c| labels.contains(c))
            && labels.len() >= self.constants.len() + self.variables
    }
}

/// A query graph resolved against the dictionary of a data graph.
#[derive(Debug, Clone)]
pub struct BoundQuery {
    query: QueryGraph,
    constants: Vec<Option<VertexId>>,
    satisfiable: bool,
    edges: Vec<BoundEdge>,
    incident: Vec<Vec<usize>>,
    pair_index: Vec<Option<usize>>,
    pairs: Vec<PairRequirement>,
    adjacency: Vec<u64>,
}

impl BoundQuery {
    pub fn new(query: &QueryGraph, g: &RdfGraph) -> Result<Self, MatchError> {
        let n = query.n();
        if n > MAX_QUERY_VERTICES {
            return Err(MatchError::TooManyVertices(n));
        }
        let mut satisfiable = true;
        let constants: Vec<Option<VertexId>> = query
            .vertices()
            .iter()
            .map(|v| match &v.binding {
                VertexBinding::Constant(t) => {
                    let id = g.vertex_id(t);
                    satisfiable &= id.is_some();
                    id
                }
                VertexBinding::Variable(_) => None,
            })
            .collect();
        let mut edges = Vec::with_capacity(query.edges().len());
        let mut incident = vec![Vec::new(); n];
        let mut pair_index = vec![None; n * n];
        let mut pairs: Vec<PairRequirement> = Vec::new();
        let mut adjacency = vec![0u64; n];
        for e in query.edges() {
            let label = match &e.label {
                EdgeLabel::Constant(iri) => {
                    let p = g.predicate_id(iri);
                    satisfiable &= p.is_some();
                    p
                }
                EdgeLabel::Variable(_) => None,
            };
            let idx = edges.len();
            edges.push(BoundEdge {
                from: e.from,
                to: e.to,
                label,
            });
            incident[e.from].push(idx);
            if e.to != e.from {
                incident[e.to].push(idx);
                adjacency[e.from] |= 1 << e.to;
                adjacency[e.to] |= 1 << e.from;
            }
            let slot = &mut pair_index[e.from * n + e.to];
            let pi = *slot.get_or_insert_with(|| {
                pairs.push(PairRequirement {
                    constants: Vec::new(),
                    variables: 0,
                });
                pairs.len() - 1
            });
            match label {
                Some(p) if !pairs[pi].constants.contains(&p) => pairs[pi].constants.push(p),
                Some(_) => {}
                None if e.label.variable().is_some() => pairs[pi].variables += 1,
                None => {}
            }
        }
        Ok(BoundQuery {
            query: query.clone(),
            constants,
            satisfiable,
            edges,
            incident,
            pair_index,
            pairs,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.constants.len()
    }

    pub fn query(&self) -> &QueryGraph {
        &self.query
    }

    /// False when a constant of the query does not occur in the data.
    pub fn is_satisfiable(&self) -> bool {
        self.satisfiable
    }

    pub fn constant(&self, v: usize) -> Option<VertexId> {
        self.constants[v]
    }

    pub fn is_constant(&self, v: usize) -> bool {
        matches!(self.query.vertices()[v].binding, VertexBinding::Constant(_))
    }

    /// Undirected query neighbours of `v` as a bitset, self excluded.
    pub fn adjacency(&self, v: usize) -> u64 {
        self.adjacency[v]
    }

    /// Query edges as `(from, to)` pairs.
    pub fn edge_endpoints(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|e| (e.from, e.to))
    }

    fn pair(&self, a: usize, b: usize) -> Option<&PairRequirement> {
        self.pair_index[a * self.n() + b].map(|i| &self.pairs[i])
    }

    /// Whether the labels of `u -> v` in `g` satisfy the query pair `a -> b`.
    pub fn pair_satisfied(
        &self,
        a: usize,
        b: usize,
        labels: impl Iterator<Item = PredicateId>,
    ) -> bool {
        self.pair(a, b).is_none_or(|req| req.satisfied_by(labels))
    }

    fn constant_ok(&self, v: usize, u: VertexId) -> bool {
        !self.is_constant(v) || self.constants[v] == Some(u)
    }

    /// Internal vertices of `frag` that could be the image of `v` when `v`
    /// is mapped internally: every incident query edge must be realisable.
    pub fn internal_candidates(&self, frag: &Fragment, v: usize) -> Vec<VertexId> {
        if !self.satisfiable {
            return Vec::new();
        }
        let pool: Vec<VertexId> = match self.constants[v] {
            Some(c) => vec![c],
            None => match self.incident[v]
                .iter()
                .map(|&i| self.edges[i])
                .find(|e| e.label.is_some())
            {
                Some(e) if e.from == v => frag.vertices_with_out_label(e.label.unwrap()).to_vec(),
                Some(e) => frag.vertices_with_in_label(e.label.unwrap()).to_vec(),
                None => frag.internal().to_vec(),
            },
        };
        pool.into_iter()
            .filter(|&u| frag.is_internal(u))
            .filter(|&u| {
                self.incident[v].iter().all(|&i| {
                    let e = self.edges[i];
                    if e.from == e.to {
                        return frag
                            .labels_between(u, u)
                            .any(|p| e.label.is_none_or(|l| l == p));
                    }
                    let list = if e.from == v {
                        frag.out_edges(u)
                    } else {
                        frag.in_edges(u)
                    };
                    match e.label {
                        Some(l) => list.iter().any(|&(_, p)| p == l),
                        None => !list.is_empty(),
                    }
                })
            })
            .filter(|&u| self.pair_satisfied(v, v, frag.labels_between(u, u)))
            .collect()
    }

    /// Search order over query vertices: each next vertex is adjacent to an
    /// earlier one when possible, fewest internal candidates first, lowest
    /// index on ties.
    pub fn match_order(&self, frag: &Fragment) -> Vec<usize> {
        let counts: Vec<usize> = (0..self.n())
            .map(|v| self.internal_candidates(frag, v).len())
            .collect();
        order_by_counts(self, &counts)
    }
}

fn order_by_counts(bq: &BoundQuery, counts: &[usize]) -> Vec<usize> {
    let n = bq.n();
    let mut order = Vec::with_capacity(n);
    let mut placed = 0u64;
    let mut reachable = 0u64;
    while order.len() < n {
        let pool = if reachable & !placed != 0 {
            reachable & !placed
        } else {
            !placed & mask_of(n)
        };
        let next = bits(pool).min_by_key(|&v| (counts[v], v)).unwrap();
        order.push(next);
        placed |= 1 << next;
        reachable |= bq.adjacency[next];
    }
    order
}

fn mask_of(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Fragment vertices (internal or extended) that could host `v`: the
/// constant itself, or vertices with an incident edge whose label and
/// direction fit some query edge at `v`.
pub fn candidates(bq: &BoundQuery, frag: &Fragment, v: usize) -> Vec<VertexId> {
    if !bq.satisfiable {
        return Vec::new();
    }
    if let Some(c) = bq.constants[v] {
        return if frag.contains(c) {
            vec![c]
        } else {
            Vec::new()
        };
    }
    if bq.incident[v].is_empty() {
        return frag.vertices().collect();
    }
    let mut out = BTreeSet::new();
    for &i in &bq.incident[v] {
        let e = bq.edges[i];
        if e.from == v {
            match e.label {
                Some(p) => out.extend(frag.vertices_with_out_label(p)),
                None => out.extend(frag.vertices_with_any_out()),
            }
        }
        if e.to == v {
            match e.label {
                Some(p) => out.extend(frag.vertices_with_in_label(p)),
                None => out.extend(frag.vertices_with_any_in()),
            }
        }
    }
    out.into_iter().collect()
}

/// Checks the local-partial-match conditions for `func` in `frag` directly,
/// without searching.
pub fn is_local_partial_match(bq: &BoundQuery, frag: &Fragment, func: &[Option<VertexId>]) -> bool {
    let n = bq.n();
    if func.len() != n || !bq.satisfiable {
        return false;
    }
    let mut internal = 0u64;
    let mut extended = 0u64;
    for (v, image) in func.iter().enumerate() {
        let Some(u) = *image else { continue };
        if !bq.constant_ok(v, u) {
            return false;
        }
        match frag.role(u) {
            Some(Role::Internal) => internal |= 1 << v,
            Some(Role::Extended) => extended |= 1 << v,
            None => return false,
        }
    }
    if internal == 0 || extended == 0 {
        return false;
    }
    for a in 0..n {
        for b in 0..n {
            let (Some(u), Some(w)) = (func[a], func[b]) else {
                continue;
            };
            if (internal >> a | internal >> b) & 1 == 1
                && !bq.pair_satisfied(a, b, frag.labels_between(u, w))
            {
                return false;
            }
        }
    }
    for v in bits(internal) {
        if bq.adjacency[v] & !(internal | extended) != 0 {
            return false;
        }
    }
    if bits(extended).any(|x| bq.adjacency[x] & internal == 0) {
        return false;
    }
    let first = internal.trailing_zeros() as usize;
    let mut reached = 1u64 << first;
    loop {
        let next = bits(reached).fold(reached, |acc, v| acc | (bq.adjacency[v] & internal));
        if next == reached {
            break;
        }
        reached = next;
    }
    reached == internal
}

/// LPMs and inner matches of one fragment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LocalMatches {
    pub lpms: Vec<PartialMatch>,
    pub inner: Vec<CompleteMatch>,
}

/// Runs the local search once and returns both result kinds, sorted.
pub fn evaluate_fragment(bq: &BoundQuery, frag: &Fragment) -> LocalMatches {
    let n = bq.n();
    if n == 0 || !bq.satisfiable {
        return LocalMatches::default();
    }
    let order = bq.match_order(frag);
    let mut order_pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        order_pos[v] = i;
    }
    let mut search = Search {
        bq,
        frag,
        order: &order,
        order_pos,
        start_pos: 0,
        func: vec![None; n],
        internal: 0,
        extended: 0,
        lpms: BTreeSet::new(),
        inner: BTreeSet::new(),
    };
    for (pos, &s) in order.iter().enumerate() {
        search.start_pos = pos;
        for u in bq.internal_candidates(frag, s) {
            search.func[s] = Some(u);
            search.internal = 1 << s;
            search.extend();
            search.func[s] = None;
        }
    }
    LocalMatches {
        lpms: search.lpms.into_iter().collect(),
        inner: search.inner.into_iter().collect(),
    }
}

pub fn compute_local_partial_matches(bq: &BoundQuery, frag: &Fragment) -> Vec<PartialMatch> {
    evaluate_fragment(bq, frag).lpms
}

pub fn compute_inner_matches(bq: &BoundQuery, frag: &Fragment) -> Vec<CompleteMatch> {
    evaluate_fragment(bq, frag).inner
}

struct Search<'a> {
    bq: &'a BoundQuery,
    frag: &'a Fragment,
    order: &'a [usize],
    order_pos: Vec<usize>,
    start_pos: usize,
    func: Vec<Option<VertexId>>,
    internal: u64,
    extended: u64,
    lpms: BTreeSet<PartialMatch>,
    inner: BTreeSet<CompleteMatch>,
}

impl Search<'_> {
    fn extend(&mut self) {
        let matched = self.internal | self.extended;
        let frontier =
            bits(self.internal).fold(0u64, |acc, v| acc | self.bq.adjacency[v]) & !matched;
        if frontier == 0 {
            self.emit();
            return;
        }
        let w = *self
            .order
            .iter()
            .find(|&&v| frontier >> v & 1 == 1)
            .unwrap();
        for c in self.candidates(w) {
            let role = self
                .frag
                .role(c)
                .expect("neighbour of an internal vertex lies in the fragment");
            if role == Role::Internal && self.order_pos[w] < self.start_pos {
                continue;
            }
            if !self.bq.constant_ok(w, c) || !self.pairs_ok(w, c, role) {
                continue;
            }
            self.func[w] = Some(c);
            let bit = 1u64 << w;
            match role {
                Role::Internal => self.internal |= bit,
                Role::Extended => self.extended |= bit,
            }
            self.extend();
            self.internal &= !bit;
            self.extended &= !bit;
            self.func[w] = None;
        }
    }

    /// Data neighbours of the image of an internal query neighbour of `w`,
    /// reached through one query edge between them.
    fn candidates(&self, w: usize) -> Vec<VertexId> {
        let edges = self.bq.incident[w]
            .iter()
            .map(|&i| self.bq.edges[i])
            .filter(|e| e.from != e.to && self.internal >> (e.from ^ e.to ^ w) & 1 == 1);
        let edge = edges
            .min_by_key(|e| e.label.is_none())
            .expect("frontier vertex has an internal neighbour");
        let (anchor, outgoing) = if edge.to == w {
            (edge.from, true)
        } else {
            (edge.to, false)
        };
        let image = self.func[anchor].unwrap();
        let list = if outgoing {
            self.frag.out_edges(image)
        } else {
            self.frag.in_edges(image)
        };
        let mut out: Vec<VertexId> = list
            .iter()
            .filter(|&&(_, p)| edge.label.is_none_or(|l| l == p))
            .map(|&(x, _)| x)
            .collect();
        out.dedup();
        out
    }

    fn pairs_ok(&self, w: usize, c: VertexId, role: Role) -> bool {
        let w_internal = role == Role::Internal;
        if w_internal && !self.bq.pair_satisfied(w, w, self.frag.labels_between(c, c)) {
            return false;
        }
        for t in bits(self.internal | self.extended) {
            if !w_internal && self.internal >> t & 1 == 0 {
                continue;
            }
            let d = self.func[t].unwrap();
            if !self.bq.pair_satisfied(w, t, self.frag.labels_between(c, d))
                || !self.bq.pair_satisfied(t, w, self.frag.labels_between(d, c))
            {
                return false;
            }
        }
        true
    }

    fn emit(&mut self) {
        if self.extended == 0 {
            if let Some(m) = self.func.iter().copied().collect::<Option<CompleteMatch>>() {
                self.inner.insert(m);
            }
            return;
        }
        let me = fragment_bit(self.frag.id());
        let touched = self.func.iter().flatten().fold(0u64, |acc, &u| {
            acc | fragment_bit(self.frag.owner(u).expect("image lies in the fragment"))
        });
        self.lpms.insert(PartialMatch {
            func: self.func.clone(),
            internal: self.internal,
            provenance: me,
            touched,
        });
    }
}

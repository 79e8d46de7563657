#![allow(dead_code)]

pub mod ast;

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::sync::Arc;

use parteval::fragment::{
    build_fragments, parse_partition_map, DistributedGraph, Fragment, FragmentId, PartitionMap,
};
use parteval::matcher::{BoundQuery, PartialMatch};
use parteval::query::{EdgeLabel, QueryGraph, VertexBinding};
use parteval::rdf::{parse_ntriples, RdfGraph, Term, Triple, VertexId};
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn movies_graph() -> Arc<RdfGraph> {
    let bytes = std::fs::read(fixture_path("movies.nt")).unwrap();
    Arc::new(parse_ntriples(&bytes).unwrap())
}

pub fn movies_dg() -> DistributedGraph {
    let g = movies_graph();
    let text = std::fs::read_to_string(fixture_path("movies.partition")).unwrap();
    let pm = parse_partition_map(&g, &text, None).unwrap();
    build_fragments(g, pm).unwrap()
}

pub fn movies_sparql() -> String {
    std::fs::read_to_string(fixture_path("married_directors.rq")).unwrap()
}

/// The running-example query with vertices numbered v1..v6 as
/// ?a, ?d, ?f1, ?f2, ?n1, ?n2 (indices 0..5).
pub fn movies_query() -> QueryGraph {
    let mut q = QueryGraph::new();
    let [a, d, f1, f2, n1, n2] = ["a", "d", "f1", "f2", "n1", "n2"].map(|v| q.var(v));
    let c = |s: &str| EdgeLabel::Constant(s.to_owned());
    q.add_edge(a, d, c("isMarriedTo"));
    q.add_edge(a, f1, c("actedIn"));
    q.add_edge(f1, n1, c("rdfs:label"));
    q.add_edge(d, f2, c("directed"));
    q.add_edge(f2, n2, c("rdfs:label"));
    q
}

/// Vertex id of an IRI (`s1:dir1`) or, when quoted, a plain literal (`"Film One"`).
pub fn vid(g: &RdfGraph, key: &str) -> VertexId {
    let term = match key.strip_prefix('"').and_then(|k| k.strip_suffix('"')) {
        Some(lit) => Term::literal(lit),
        None => Term::iri(key),
    };
    g.vertex_id(&term)
        .unwrap_or_else(|| panic!("{key} not in graph"))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random graph on `n_vertices` IRIs (a few literals mixed in) with
/// predicates drawn from `p0..p{labels-1}`.
pub fn random_graph(
    rng: &mut impl Rng,
    n_vertices: usize,
    n_edges: usize,
    labels: usize,
) -> RdfGraph {
    let term = |i: usize| {
        if i % 7 == 6 {
            Term::literal(format!("lit{i}"))
        } else {
            Term::iri(format!("v{i}"))
        }
    };
    let mut triples = Vec::new();
    for _ in 0..n_edges {
        let s = loop {
            let s = rng.random_range(0..n_vertices);
            if s % 7 != 6 {
                break s;
            }
        };
        let o = rng.random_range(0..n_vertices);
        triples.push(Triple::new(
            term(s),
            format!("p{}", rng.random_range(0..labels)),
            term(o),
        ));
    }
    RdfGraph::from_triples(triples)
}

pub fn random_partition(rng: &mut impl Rng, g: &RdfGraph, k: usize) -> PartitionMap {
    let assignment = g
        .vertices()
        .map(|_| FragmentId(rng.random_range(0..k) as u32))
        .collect();
    PartitionMap::new(assignment, k).unwrap()
}

pub fn random_dg(rng: &mut impl Rng, g: Arc<RdfGraph>, k: usize) -> DistributedGraph {
    let pm = random_partition(rng, &g, k);
    build_fragments(g, pm).unwrap()
}

/// A connected query grown from a random walk over the data, so it usually
/// has matches. Some vertices become constants, some labels variables, and
/// occasionally a label is replaced with an arbitrary one.
pub fn random_query(
    rng: &mut impl Rng,
    g: &RdfGraph,
    max_n: usize,
    labels: usize,
    label_vars: bool,
) -> QueryGraph {
    let edges = g.edges();
    let target = rng.random_range(1..=max_n.max(2) - 1) + 1;
    let start = edges[rng.random_range(0..edges.len())];
    let mut chosen: Vec<VertexId> = vec![start.s];
    let mut q_edges: BTreeSet<(VertexId, String, VertexId)> = BTreeSet::new();
    q_edges.insert((start.s, g.predicate(start.p).to_owned(), start.o));
    if start.o != start.s {
        chosen.push(start.o);
    }
    for _ in 0..4 * max_n {
        let incident: Vec<_> = edges
            .iter()
            .filter(|e| chosen.contains(&e.s) || chosen.contains(&e.o))
            .collect();
        let e = incident[rng.random_range(0..incident.len())];
        let new: Vec<VertexId> = [e.s, e.o]
            .into_iter()
            .filter(|v| !chosen.contains(v))
            .collect();
        if chosen.len() + new.len() > target || (new.is_empty() && !rng.random_bool(0.3)) {
            continue;
        }
        chosen.extend(new);
        q_edges.insert((e.s, g.predicate(e.p).to_owned(), e.o));
    }
    let constant: Vec<bool> = chosen.iter().map(|_| rng.random_bool(0.15)).collect();
    let binding = |v: VertexId| {
        let i = chosen.iter().position(|&c| c == v).unwrap();
        if constant[i] {
            VertexBinding::Constant(g.term(v).clone())
        } else {
            VertexBinding::Variable(format!("x{i}"))
        }
    };
    let mut q = QueryGraph::new();
    for (li, (s, p, o)) in q_edges.into_iter().enumerate() {
        let label = if label_vars && rng.random_bool(0.12) {
            EdgeLabel::Variable(format!("p{li}"))
        } else if rng.random_bool(0.05) {
            EdgeLabel::Constant(format!("p{}", rng.random_range(0..labels)))
        } else {
            EdgeLabel::Constant(p)
        };
        q.add_pattern(binding(s), label, binding(o));
    }
    q
}

/// One random distributed instance: graph, fragmentation and query.
pub struct Instance {
    pub g: Arc<RdfGraph>,
    pub dg: DistributedGraph,
    pub q: QueryGraph,
    pub seed: u64,
}

pub fn random_instance(
    seed: u64,
    max_vertices: usize,
    max_k: usize,
    max_n: usize,
    labels: usize,
) -> Instance {
    let mut r = rng(seed);
    let n_vertices = r.random_range(6..=max_vertices);
    let n_edges = r.random_range(n_vertices..=2 * n_vertices);
    let g = Arc::new(random_graph(&mut r, n_vertices, n_edges, labels));
    let k = r.random_range(1..=max_k);
    let dg = random_dg(&mut r, g.clone(), k);
    let q = random_query(&mut r, &g, max_n, labels, seed.is_multiple_of(3));
    Instance { g, dg, q, seed }
}

/// All LPMs of all fragments, in fragment order, and the union of inner matches.
pub fn local_results(
    bq: &parteval::matcher::BoundQuery,
    dg: &DistributedGraph,
) -> (
    Vec<parteval::matcher::PartialMatch>,
    BTreeSet<Vec<VertexId>>,
) {
    let mut omega = Vec::new();
    let mut inner = BTreeSet::new();
    for f in dg.fragments() {
        let local = parteval::matcher::evaluate_fragment(bq, f);
        omega.extend(local.lpms);
        inner.extend(local.inner);
    }
    (omega, inner)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Path,
    Star,
    Clique,
}

pub fn shape_adjacent(shape: Shape, a: usize, b: usize) -> bool {
    match shape {
        Shape::Path => a.abs_diff(b) == 1,
        Shape::Star => a != b && (a == 0 || b == 0),
        Shape::Clique => a != b,
    }
}

/// A random instance whose fragmentation topology is exactly `shape` on `k`
/// fragments: crossing triples only join fragments adjacent in the shape, and
/// every adjacent pair gets at least one.
pub fn shaped_instance(seed: u64, shape: Shape, k: usize, max_n: usize) -> Instance {
    let mut r = rng(seed);
    let labels = 3;
    let n_vertices = r.random_range(3 * k..=6 * k).max(6);
    let home: Vec<usize> = (0..n_vertices)
        .map(|i| if i < k { i } else { r.random_range(0..k) })
        .collect();
    let term = |i: usize| {
        if i % 7 == 6 {
            Term::literal(format!("lit{i}"))
        } else {
            Term::iri(format!("v{i}"))
        }
    };
    let subject = |r: &mut ChaCha8Rng, pool: &[usize]| -> Option<usize> {
        let subjects: Vec<usize> = pool.iter().copied().filter(|i| i % 7 != 6).collect();
        (!subjects.is_empty()).then(|| subjects[r.random_range(0..subjects.len())])
    };
    let all: Vec<usize> = (0..n_vertices).collect();
    let mut triples = Vec::new();
    let n_edges = r.random_range(n_vertices..=2 * n_vertices);
    while triples.len() < n_edges {
        let s = subject(&mut r, &all).unwrap();
        let o = r.random_range(0..n_vertices);
        if home[s] == home[o] || shape_adjacent(shape, home[s], home[o]) {
            triples.push(Triple::new(
                term(s),
                format!("p{}", r.random_range(0..labels)),
                term(o),
            ));
        }
    }
    for a in 0..k {
        for b in 0..k {
            if a < b && shape_adjacent(shape, a, b) {
                let in_a: Vec<usize> = all.iter().copied().filter(|&i| home[i] == a).collect();
                let in_b: Vec<usize> = all.iter().copied().filter(|&i| home[i] == b).collect();
                let (s, o) = match subject(&mut r, &in_a) {
                    Some(s) => (s, in_b[r.random_range(0..in_b.len())]),
                    None => (subject(&mut r, &in_b).unwrap(), in_a[0]),
                };
                triples.push(Triple::new(
                    term(s),
                    format!("p{}", r.random_range(0..labels)),
                    term(o),
                ));
            }
        }
    }
    // Keep every vertex so each fragment is nonempty.
    for i in 0..k {
        triples.push(Triple::new(term(i), "p0", term(i)));
    }
    let g = Arc::new(RdfGraph::from_triples(triples));
    let assignment = g
        .vertices()
        .map(|v| {
            let idx: usize = match g.term(v) {
                Term::Iri(s) => s[1..].parse().unwrap(),
                Term::Literal(l) => l.value()[3..].parse().unwrap(),
                Term::Blank(_) => unreachable!("generator emits no blank nodes"),
            };
            FragmentId(home[idx] as u32)
        })
        .collect();
    let dg = build_fragments(g.clone(), PartitionMap::new(assignment, k).unwrap()).unwrap();
    let q = random_query(&mut r, &g, max_n, labels, seed.is_multiple_of(3));
    Instance { g, dg, q, seed }
}

/// Restriction of a crossing match to one weakly connected component of its
/// internal part in `f`, plus the component's neighbours.
pub fn lpm_slices(bq: &BoundQuery, f: &Fragment, m: &[VertexId]) -> Vec<Vec<Option<VertexId>>> {
    let n = bq.n();
    let internal: u64 = (0..n)
        .filter(|&v| f.is_internal(m[v]))
        .fold(0, |acc, v| acc | 1 << v);
    let mut remaining = internal;
    let mut out = Vec::new();
    while remaining != 0 {
        let mut comp = 1u64 << remaining.trailing_zeros();
        loop {
            let grown = (0..n)
                .filter(|&v| comp >> v & 1 == 1)
                .fold(comp, |acc, v| acc | (bq.adjacency(v) & internal));
            if grown == comp {
                break;
            }
            comp = grown;
        }
        remaining &= !comp;
        let hood = (0..n)
            .filter(|&v| comp >> v & 1 == 1)
            .fold(comp, |acc, v| acc | bq.adjacency(v));
        out.push(
            (0..n)
                .map(|v| (hood >> v & 1 == 1).then_some(m[v]))
                .collect(),
        );
    }
    out
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn random_omega(rng: &mut impl Rng, n: usize, size: usize) -> Vec<PartialMatch> {
    (0..size)
        .map(|i| PartialMatch {
            func: vec![Some(VertexId(i as u32)); n],
            internal: rng.random_range(1..1u64 << n),
            provenance: 1,
            touched: 1,
        })
        .collect()
}

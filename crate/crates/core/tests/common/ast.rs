//! Random graphs and general query ASTs for the SPARQL layer.

use parteval::query::{
    CompareOp, EdgeLabel, FilterExpr, Operand, Pattern, QueryGraph, VertexBinding,
};
use parteval::rdf::{RdfGraph, Term, Triple};
use rand::RngExt;
use rand_chacha::ChaCha8Rng;

pub const VARS: [&str; 4] = ["x0", "x1", "x2", "x3"];
pub const LABEL_VARS: [&str; 2] = ["l0", "l1"];

pub fn small_graph(r: &mut ChaCha8Rng) -> RdfGraph {
    let node = |r: &mut ChaCha8Rng| -> Term {
        match r.random_range(0..10) {
            0 => Term::integer(r.random_range(0..4)),
            1 => Term::literal(["a", "b", "c"][r.random_range(0..3)]),
            _ => Term::iri(format!("v{}", r.random_range(0..7))),
        }
    };
    let n = r.random_range(12..=30);
    let triples: Vec<Triple> = (0..n)
        .map(|_| {
            let s = Term::iri(format!("v{}", r.random_range(0..7)));
            Triple::new(s, format!("p{}", r.random_range(0..3)), node(r))
        })
        .collect();
    RdfGraph::from_triples(triples)
}

pub fn random_bgp(r: &mut ChaCha8Rng) -> QueryGraph {
    let mut q = QueryGraph::new();
    for _ in 0..r.random_range(1..=3) {
        let s = if r.random_bool(0.1) {
            VertexBinding::Constant(Term::iri(format!("v{}", r.random_range(0..7))))
        } else {
            VertexBinding::Variable(VARS[r.random_range(0..VARS.len())].into())
        };
        let p = if r.random_bool(0.15) {
            EdgeLabel::Variable(LABEL_VARS[r.random_range(0..2)].into())
        } else {
            EdgeLabel::Constant(format!("p{}", r.random_range(0..3)))
        };
        let o = match r.random_range(0..10) {
            0 => VertexBinding::Constant(Term::iri(format!("v{}", r.random_range(0..7)))),
            1 => VertexBinding::Constant(Term::literal("a")),
            _ => VertexBinding::Variable(VARS[r.random_range(0..VARS.len())].into()),
        };
        q.add_pattern(s, p, o);
    }
    q
}

pub fn random_operand(r: &mut ChaCha8Rng) -> Operand {
    match r.random_range(0..6) {
        0 => Operand::Term(Term::integer(r.random_range(0..4))),
        1 => Operand::Term(Term::literal("b")),
        2 => Operand::Term(Term::iri(format!("v{}", r.random_range(0..7)))),
        _ => Operand::Var(VARS[r.random_range(0..VARS.len())].into()),
    }
}

pub fn random_filter(r: &mut ChaCha8Rng, depth: usize) -> FilterExpr {
    let leaf = depth == 0 || r.random_bool(0.5);
    if leaf {
        return match r.random_range(0..5) {
            0 => FilterExpr::Bound(VARS[r.random_range(0..VARS.len())].into()),
            _ => {
                let ops = [
                    CompareOp::Eq,
                    CompareOp::Ne,
                    CompareOp::Lt,
                    CompareOp::Le,
                    CompareOp::Gt,
                    CompareOp::Ge,
                ];
                FilterExpr::compare(
                    ops[r.random_range(0..ops.len())],
                    random_operand(r),
                    random_operand(r),
                )
            }
        };
    }
    match r.random_range(0..3) {
        0 => FilterExpr::negate(random_filter(r, depth - 1)),
        1 => FilterExpr::and(random_filter(r, depth - 1), random_filter(r, depth - 1)),
        _ => FilterExpr::or(random_filter(r, depth - 1), random_filter(r, depth - 1)),
    }
}

pub fn random_pattern(r: &mut ChaCha8Rng, depth: usize) -> Pattern {
    if depth == 0 || r.random_bool(0.25) {
        return Pattern::Bgp(random_bgp(r));
    }
    match r.random_range(0..4) {
        0 => Pattern::and(random_pattern(r, depth - 1), random_pattern(r, depth - 1)),
        1 => Pattern::union(random_pattern(r, depth - 1), random_pattern(r, depth - 1)),
        2 => Pattern::opt(random_pattern(r, depth - 1), random_pattern(r, depth - 1)),
        _ => Pattern::filter(random_pattern(r, depth - 1), random_filter(r, 2)),
    }
}

//! SPARQL rendering of query trees in the shape produced by the parser.
//!
//! A group is evaluated as BGP, then OPTIONALs, then nested groups and UNION
//! chains, then FILTERs. Trees of that shape print to text that parses back
//! to an isomorphic tree.

use std::fmt::Write;

use super::{EdgeLabel, FilterExpr, GeneralQuery, Operand, Pattern, QueryGraph, VertexBinding};

pub(crate) fn print_query(q: &GeneralQuery) -> String {
    let mut out = String::from("SELECT");
    if q.projection.is_empty() {
        out.push_str(" *");
    }
    for v in &q.projection {
        write!(out, " ?{v}").unwrap();
    }
    out.push_str(" WHERE ");
    out.push_str(&group(&q.pattern));
    out
}

fn group(p: &Pattern) -> String {
    let body = inline(p);
    if body.is_empty() {
        "{ }".into()
    } else {
        format!("{{ {body} }}")
    }
}

/// Group body that parses back to `p`.
fn inline(p: &Pattern) -> String {
    match p {
        Pattern::Bgp(g) => bgp(g),
        Pattern::Opt(a, b) => format!("{} OPTIONAL {}", inline(a), group(b))
            .trim_start()
            .to_owned(),
        Pattern::And(a, b) => {
            let left = if and_prefix_safe(a) {
                inline(a)
            } else {
                group(a)
            };
            format!("{left} {}", element(b))
        }
        Pattern::Union(..) => element(p),
        Pattern::Filter(a, f) => format!("{} FILTER({})", inline(a), filter(f))
            .trim_start()
            .to_owned(),
    }
}

/// Whether `inline(p)` may be followed by further group elements without
/// the parser reordering anything.
fn and_prefix_safe(p: &Pattern) -> bool {
    match p {
        Pattern::Bgp(g) => !g.is_empty(),
        Pattern::Opt(a, _) => matches!(a.as_ref(), Pattern::Bgp(_) | Pattern::Opt(..)),
        Pattern::And(a, _) => and_prefix_safe(a),
        Pattern::Union(..) => true,
        Pattern::Filter(..) => false,
    }
}

fn element(p: &Pattern) -> String {
    match p {
        Pattern::Union(a, b) => {
            let left = if matches!(a.as_ref(), Pattern::Union(..)) {
                element(a)
            } else {
                group(a)
            };
            format!("{left} UNION {}", group(b))
        }
        _ => group(p),
    }
}

fn bgp(g: &QueryGraph) -> String {
    let vertex = |i: usize| match &g.vertices()[i].binding {
        VertexBinding::Variable(name) => format!("?{name}"),
        VertexBinding::Constant(term) => term.to_string(),
    };
    g.edges()
        .iter()
        .map(|e| {
            let label = match &e.label {
                EdgeLabel::Variable(name) => format!("?{name}"),
                EdgeLabel::Constant(iri) => crate::rdf::Term::iri(iri.clone()).to_string(),
            };
            format!("{} {label} {} .", vertex(e.from), vertex(e.to))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn operand(o: &Operand) -> String {
    match o {
        Operand::Var(name) => format!("?{name}"),
        Operand::Term(t) => t.to_string(),
    }
}

fn filter(f: &FilterExpr) -> String {
    match f {
        FilterExpr::Const(b) => b.to_string(),
        FilterExpr::Bound(v) => format!("bound(?{v})"),
        FilterExpr::Compare(op, a, b) => format!("({} {} {})", operand(a), op.symbol(), operand(b)),
        FilterExpr::Not(a) => format!("!({})", filter(a)),
        FilterExpr::And(a, b) => format!("({} && {})", filter(a), filter(b)),
        FilterExpr::Or(a, b) => format!("({} || {})", filter(a), filter(b)),
    }
}

//! Brute-force reference evaluation on the whole graph.
//!
//! Nothing here uses fragments, local partial matches or the binding-table
//! algebra; the code is a direct transcription of the match and query
//! definitions so it can serve as an independent witness in tests.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::fragment::DistributedGraph;
use crate::query::{
    CompareOp, EdgeLabel, FilterExpr, GeneralQuery, Operand, Pattern, QueryGraph, VertexBinding,
};
use crate::rdf::{RdfGraph, Term, VertexId};

pub const MAX_ORACLE_QUERY_VERTICES: usize = 8;
pub const MAX_ORACLE_GRAPH_VERTICES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("oracle limited to {MAX_ORACLE_QUERY_VERTICES} query vertices and {MAX_ORACLE_GRAPH_VERTICES} data vertices (got {query} and {graph})")]
    SizeLimit { query: usize, graph: usize },
}

/// All matches of `q` in `g`, as vectors indexed by query vertex.
pub fn enumerate_matches(
    g: &RdfGraph,
    q: &QueryGraph,
) -> Result<BTreeSet<Vec<VertexId>>, OracleError> {
    if q.n() > MAX_ORACLE_QUERY_VERTICES || g.vertex_count() > MAX_ORACLE_GRAPH_VERTICES {
        return Err(OracleError::SizeLimit {
            query: q.n(),
            graph: g.vertex_count(),
        });
    }
    let mut out = BTreeSet::new();
    if q.n() == 0 {
        return Ok(out);
    }
    let order = bfs_order(q);
    let mut assignment: Vec<Option<VertexId>> = vec![None; q.n()];
    backtrack(g, q, &order, 0, &mut assignment, &mut out);
    Ok(out)
}

fn bfs_order(q: &QueryGraph) -> Vec<usize> {
    let mut seen = vec![false; q.n()];
    let mut order = Vec::new();
    for root in 0..q.n() {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for e in q.edges() {
                for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                    if a == v && !seen[b] {
                        seen[b] = true;
                        queue.push_back(b);
                    }
                }
            }
        }
    }
    order
}

fn backtrack(
    g: &RdfGraph,
    q: &QueryGraph,
    order: &[usize],
    depth: usize,
    assignment: &mut Vec<Option<VertexId>>,
    out: &mut BTreeSet<Vec<VertexId>>,
) {
    if depth == order.len() {
        out.insert(assignment.iter().map(|x| x.unwrap()).collect());
        return;
    }
    let v = order[depth];
    for u in g.vertices() {
        if let VertexBinding::Constant(t) = &q.vertices()[v].binding {
            if g.term(u) != t {
                continue;
            }
        }
        assignment[v] = Some(u);
        let consistent = order[..=depth]
            .iter()
            .all(|&w| pair_holds(g, q, assignment, v, w) && pair_holds(g, q, assignment, w, v));
        if consistent {
            backtrack(g, q, order, depth + 1, assignment, out);
        }
        assignment[v] = None;
    }
}

/// The query edges from `a` to `b` can be mapped injectively onto data edges
/// between their images, with constants mapping to themselves.
fn pair_holds(g: &RdfGraph, q: &QueryGraph, f: &[Option<VertexId>], a: usize, b: usize) -> bool {
    let labels: Vec<&EdgeLabel> = q
        .edges()
        .iter()
        .filter(|e| e.from == a && e.to == b)
        .map(|e| &e.label)
        .collect();
    if labels.is_empty() {
        return true;
    }
    let (Some(u), Some(w)) = (f[a], f[b]) else {
        return true;
    };
    let data: Vec<&str> = g.labels_between(u, w).map(|p| g.predicate(p)).collect();
    injective_label_assignment(&labels, &data, &mut vec![false; data.len()])
}

fn injective_label_assignment(query: &[&EdgeLabel], data: &[&str], used: &mut Vec<bool>) -> bool {
    let Some((first, rest)) = query.split_first() else {
        return true;
    };
    for (i, d) in data.iter().enumerate() {
        if used[i] {
            continue;
        }
        if let EdgeLabel::Constant(c) = first {
            if c != d {
                continue;
            }
        }
        used[i] = true;
        let ok = injective_label_assignment(rest, data, used);
        used[i] = false;
        if ok {
            return true;
        }
    }
    false
}

/// Whether a total assignment is a match of `q` in `g`.
pub fn is_match(g: &RdfGraph, q: &QueryGraph, f: &[VertexId]) -> bool {
    if f.len() != q.n() {
        return false;
    }
    let f: Vec<Option<VertexId>> = f.iter().copied().map(Some).collect();
    let constants_ok = q
        .vertices()
        .iter()
        .enumerate()
        .all(|(v, qv)| match &qv.binding {
            VertexBinding::Constant(t) => g.term(f[v].unwrap()) == t,
            VertexBinding::Variable(_) => true,
        });
    constants_ok && (0..q.n()).all(|a| (0..q.n()).all(|b| pair_holds(g, q, &f, a, b)))
}

/// Matches split into those inside one fragment's internal vertices and the rest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    pub inner: Vec<BTreeSet<Vec<VertexId>>>,
    pub crossing: BTreeSet<Vec<VertexId>>,
}

pub fn classify(matches: &BTreeSet<Vec<VertexId>>, dg: &DistributedGraph) -> Classification {
    let pm = dg.partition();
    let mut out = Classification {
        inner: vec![BTreeSet::new(); dg.k()],
        crossing: BTreeSet::new(),
    };
    for m in matches {
        let homes: BTreeSet<_> = m.iter().map(|&u| pm.fragment_of(u)).collect();
        match (homes.len(), homes.first()) {
            (1, Some(f)) => {
                out.inner[f.index()].insert(m.clone());
            }
            _ => {
                out.crossing.insert(m.clone());
            }
        }
    }
    out
}

/// One solution of the reference evaluator.
pub type OracleRow = BTreeMap<String, Term>;

/// Evaluates a general query straight from its recursive definition and
/// returns the projected rows without duplicates, sorted.
pub fn evaluate_naive(g: &RdfGraph, gq: &GeneralQuery) -> Result<Vec<OracleRow>, OracleError> {
    let rows = eval_pattern(g, &gq.pattern)?;
    let mut projected: Vec<OracleRow> = rows
        .into_iter()
        .map(|r| {
            r.into_iter()
                .filter(|(k, _)| gq.projection.contains(k))
                .collect()
        })
        .collect();
    projected.sort();
    projected.dedup();
    Ok(projected)
}

fn push_unique(rows: &mut Vec<OracleRow>, row: OracleRow) {
    if !rows.contains(&row) {
        rows.push(row);
    }
}

fn compatible(a: &OracleRow, b: &OracleRow) -> bool {
    a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v))
}

fn merge(a: &OracleRow, b: &OracleRow) -> OracleRow {
    let mut m = a.clone();
    m.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
    m
}

fn eval_pattern(g: &RdfGraph, p: &Pattern) -> Result<Vec<OracleRow>, OracleError> {
    Ok(match p {
        Pattern::Bgp(q) => bgp_rows(g, q)?,
        Pattern::And(a, b) => {
            let (ra, rb) = (eval_pattern(g, a)?, eval_pattern(g, b)?);
            let mut out = Vec::new();
            for x in &ra {
                for y in &rb {
                    if compatible(x, y) {
                        push_unique(&mut out, merge(x, y));
                    }
                }
            }
            out
        }
        Pattern::Union(a, b) => {
            let mut out = eval_pattern(g, a)?;
            for r in eval_pattern(g, b)? {
                push_unique(&mut out, r);
            }
            out
        }
        Pattern::Opt(a, b) => {
            let (ra, rb) = (eval_pattern(g, a)?, eval_pattern(g, b)?);
            let mut out = Vec::new();
            for x in &ra {
                let partners: Vec<&OracleRow> = rb.iter().filter(|y| compatible(x, y)).collect();
                if partners.is_empty() {
                    push_unique(&mut out, x.clone());
                }
                for y in partners {
                    push_unique(&mut out, merge(x, y));
                }
            }
            out
        }
        Pattern::Filter(a, f) => eval_pattern(g, a)?
            .into_iter()
            .filter(|r| filter_holds(f, r) == Some(true))
            .collect(),
    })
}

/// Rows of a basic graph pattern: every match, combined with every way of
/// naming the data edges that variable predicates stand for.
fn bgp_rows(g: &RdfGraph, q: &QueryGraph) -> Result<Vec<OracleRow>, OracleError> {
    if q.n() == 0 {
        return Ok(vec![OracleRow::new()]);
    }
    let label_vars: Vec<String> = {
        let mut v: Vec<String> = q
            .edges()
            .iter()
            .filter_map(|e| e.label.variable().map(str::to_owned))
            .collect();
        v.sort();
        v.dedup();
        v
    };
    let predicates: Vec<&str> = (0..g.predicate_count())
        .map(|i| g.predicate(crate::rdf::PredicateId(i as u32)))
        .collect();
    let mut out = Vec::new();
    if !label_vars.is_empty() && predicates.is_empty() {
        return Ok(out);
    }
    for m in enumerate_matches(g, q)? {
        let mut base = OracleRow::new();
        for (v, qv) in q.vertices().iter().enumerate() {
            if let Some(name) = qv.variable() {
                base.insert(name.to_owned(), g.term(m[v]).clone());
            }
        }
        let mut choice = vec![0usize; label_vars.len()];
        loop {
            if label_choice_valid(g, q, &m, &label_vars, &choice, &predicates) {
                let mut row = base.clone();
                for (name, &c) in label_vars.iter().zip(&choice) {
                    row.insert(name.clone(), Term::iri(predicates[c]));
                }
                push_unique(&mut out, row);
            }
            if !advance(&mut choice, predicates.len()) {
                break;
            }
        }
    }
    Ok(out)
}

fn advance(choice: &mut [usize], base: usize) -> bool {
    for c in choice.iter_mut() {
        *c += 1;
        if *c < base {
            return true;
        }
        *c = 0;
    }
    false
}

fn label_choice_valid(
    g: &RdfGraph,
    q: &QueryGraph,
    m: &[VertexId],
    vars: &[String],
    choice: &[usize],
    predicates: &[&str],
) -> bool {
    let resolve = |l: &EdgeLabel| -> String {
        match l {
            EdgeLabel::Constant(c) => c.clone(),
            EdgeLabel::Variable(name) => {
                predicates[choice[vars.iter().position(|v| v == name).unwrap()]].to_owned()
            }
        }
    };
    let mut per_pair: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for e in q.edges() {
        per_pair
            .entry((e.from, e.to))
            .or_default()
            .push(resolve(&e.label));
    }
    per_pair.into_iter().all(|((a, b), labels)| {
        let present = g.labels_between_terms(g.term(m[a]), g.term(m[b]));
        let distinct: BTreeSet<&String> = labels.iter().collect();
        distinct.len() == labels.len() && labels.iter().all(|l| present.contains(&l.as_str()))
    })
}

/// `Some(bool)` for a value, `None` for an evaluation error.
fn filter_holds(f: &FilterExpr, row: &OracleRow) -> Option<bool> {
    match f {
        FilterExpr::Const(b) => Some(*b),
        FilterExpr::Bound(v) => Some(row.contains_key(v)),
        FilterExpr::Not(a) => filter_holds(a, row).map(|b| !b),
        FilterExpr::And(a, b) => match (filter_holds(a, row), filter_holds(b, row)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        FilterExpr::Or(a, b) => match (filter_holds(a, row), filter_holds(b, row)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        FilterExpr::Compare(op, a, b) => {
            let lookup = |o: &Operand| match o {
                Operand::Var(v) => row.get(v).cloned(),
                Operand::Term(t) => Some(t.clone()),
            };
            let (Some(x), Some(y)) = (lookup(a), lookup(b)) else {
                return Some(false);
            };
            compare_terms(*op, &x, &y)
        }
    }
}

fn numeric(t: &Term) -> Option<f64> {
    match t {
        Term::Literal(l) => l.numeric_value(),
        _ => None,
    }
}

fn compare_terms(op: CompareOp, x: &Term, y: &Term) -> Option<bool> {
    let ord = match (numeric(x), numeric(y)) {
        (Some(a), Some(b)) => a.partial_cmp(&b)?,
        _ if matches!(op, CompareOp::Eq) => return Some(x == y),
        _ if matches!(op, CompareOp::Ne) => return Some(x != y),
        (Some(_), None) | (None, Some(_)) => return None,
        (None, None) => match (x, y) {
            (Term::Literal(a), Term::Literal(b)) => a.value().chars().cmp(b.value().chars()),
            (Term::Iri(a), Term::Iri(b)) => a.chars().cmp(b.chars()),
            _ => return None,
        },
    };
    Some(match op {
        CompareOp::Eq => ord == Ordering::Equal,
        CompareOp::Ne => ord != Ordering::Equal,
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    })
}

//! Solution tables and the relational operators that combine BGP results
//! into answers for AND, UNION, OPTIONAL and FILTER patterns.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::matcher::CompleteMatch;
use crate::query::{CompareOp, EdgeLabel, FilterExpr, Operand, Pattern, QueryGraph};
use crate::rdf::{RdfGraph, Term};

/// One solution. Variables that are absent are unbound.
pub type Row = BTreeMap<String, Term>;

/// A set of solutions together with every variable they may bind.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BindingTable {
    pub schema: BTreeSet<String>,
    pub rows: BTreeSet<Row>,
}

impl BindingTable {
    pub fn empty(schema: impl IntoIterator<Item = String>) -> Self {
        BindingTable {
            schema: schema.into_iter().collect(),
            rows: BTreeSet::new(),
        }
    }

    /// The table with a single solution that binds nothing: the identity of [`nat_join`].
    pub fn unit() -> Self {
        BindingTable {
            schema: BTreeSet::new(),
            rows: [Row::new()].into(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn project(&self, vars: &[String]) -> BindingTable {
        let keep = |r: &Row| {
            r.iter()
                .filter(|(k, _)| vars.contains(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect()
        };
        BindingTable {
            schema: self
                .schema
                .iter()
                .filter(|v| vars.contains(v))
                .cloned()
                .collect(),
            rows: self.rows.iter().map(keep).collect(),
        }
    }
}

fn compatible(a: &Row, b: &Row) -> bool {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .all(|(k, v)| large.get(k).is_none_or(|w| w == v))
}

fn merged(a: &Row, b: &Row) -> Row {
    let mut m = a.clone();
    m.extend(b.iter().map(|(k, v)| (k.clone(), v.clone())));
    m
}

/// Groups `b`'s rows by their values on `shared` when every row of both
/// sides binds all of them. Returns `None` when some row leaves one unbound,
/// in which case callers fall back to pairwise compatibility checks.
fn index_on<'a>(
    shared: &[String],
    a: &BindingTable,
    b: &'a BindingTable,
) -> Option<HashMap<Vec<&'a Term>, Vec<&'a Row>>> {
    let binds_all = |r: &Row| shared.iter().all(|v| r.contains_key(v));
    if shared.is_empty() || !a.rows.iter().all(binds_all) || !b.rows.iter().all(binds_all) {
        return None;
    }
    let mut index: HashMap<Vec<&Term>, Vec<&Row>> = HashMap::new();
    for r in &b.rows {
        index
            .entry(shared.iter().map(|v| &r[v]).collect())
            .or_default()
            .push(r);
    }
    Some(index)
}

fn partners<'a>(
    row: &Row,
    shared: &[String],
    index: &'a Option<HashMap<Vec<&Term>, Vec<&'a Row>>>,
    b: &'a BindingTable,
) -> Vec<&'a Row> {
    match index {
        Some(index) => {
            let probe: Vec<&Term> = shared.iter().map(|v| &row[v]).collect();
            index.get(&probe).cloned().unwrap_or_default()
        }
        None => b.rows.iter().filter(|r| compatible(row, r)).collect(),
    }
}

fn shared_vars(a: &BindingTable, b: &BindingTable) -> Vec<String> {
    a.schema.intersection(&b.schema).cloned().collect()
}

/// Natural join: merges every pair of compatible rows.
pub fn nat_join(a: &BindingTable, b: &BindingTable) -> BindingTable {
    let shared = shared_vars(a, b);
    let index = index_on(&shared, a, b);
    let mut rows = BTreeSet::new();
    for x in &a.rows {
        for y in partners(x, &shared, &index, b) {
            rows.insert(merged(x, y));
        }
    }
    BindingTable {
        schema: a.schema.union(&b.schema).cloned().collect(),
        rows,
    }
}

/// Left outer join: rows of `a` extended by compatible rows of `b`, or kept
/// as they are when nothing in `b` is compatible.
pub fn left_outer_join(a: &BindingTable, b: &BindingTable) -> BindingTable {
    let shared = shared_vars(a, b);
    let index = index_on(&shared, a, b);
    let mut rows = BTreeSet::new();
    for x in &a.rows {
        let found = partners(x, &shared, &index, b);
        if found.is_empty() {
            rows.insert(x.clone());
        }
        for y in found {
            rows.insert(merged(x, y));
        }
    }
    BindingTable {
        schema: a.schema.union(&b.schema).cloned().collect(),
        rows,
    }
}

pub fn union(a: &BindingTable, b: &BindingTable) -> BindingTable {
    BindingTable {
        schema: a.schema.union(&b.schema).cloned().collect(),
        rows: a.rows.union(&b.rows).cloned().collect(),
    }
}

/// Three-valued result of a filter expression: SPARQL's effective boolean
/// value or a type error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Error,
}

impl From<bool> for Truth {
    fn from(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }
}

fn number(t: &Term) -> Option<f64> {
    t.as_literal().and_then(|l| l.numeric_value())
}

/// Compares two bound terms. Numbers compare by value; IRIs and literals
/// compare lexically against their own kind; equality otherwise falls back
/// to term identity.
pub fn compare(op: CompareOp, x: &Term, y: &Term) -> Truth {
    let ordering = match (number(x), number(y)) {
        (Some(a), Some(b)) => a.partial_cmp(&b),
        (None, None) => match (x, y) {
            (Term::Iri(a), Term::Iri(b)) => Some(a.chars().cmp(b.chars())),
            (Term::Literal(a), Term::Literal(b))
                if !matches!(op, CompareOp::Eq | CompareOp::Ne) =>
            {
                Some(a.value().chars().cmp(b.value().chars()))
            }
            _ => None,
        },
        _ => None,
    };
    let Some(ord) = ordering else {
        let numeric_pair = number(x).is_some() && number(y).is_some();
        return match op {
            CompareOp::Eq if !numeric_pair => (x == y).into(),
            CompareOp::Ne if !numeric_pair => (x != y).into(),
            _ => Truth::Error,
        };
    };
    match op {
        CompareOp::Eq => ord.is_eq(),
        CompareOp::Ne => ord.is_ne(),
        CompareOp::Lt => ord == Ordering::Less,
        CompareOp::Le => ord != Ordering::Greater,
        CompareOp::Gt => ord == Ordering::Greater,
        CompareOp::Ge => ord != Ordering::Less,
    }
    .into()
}

pub fn eval_filter(f: &FilterExpr, row: &Row) -> Truth {
    match f {
        FilterExpr::Const(b) => (*b).into(),
        FilterExpr::Bound(v) => row.contains_key(v).into(),
        FilterExpr::Not(a) => match eval_filter(a, row) {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Error => Truth::Error,
        },
        FilterExpr::And(a, b) => match (eval_filter(a, row), eval_filter(b, row)) {
            (Truth::False, _) | (_, Truth::False) => Truth::False,
            (Truth::True, Truth::True) => Truth::True,
            _ => Truth::Error,
        },
        FilterExpr::Or(a, b) => match (eval_filter(a, row), eval_filter(b, row)) {
            (Truth::True, _) | (_, Truth::True) => Truth::True,
            (Truth::False, Truth::False) => Truth::False,
            _ => Truth::Error,
        },
        FilterExpr::Compare(op, a, b) => {
            fn value<'a>(o: &'a Operand, row: &'a Row) -> Option<&'a Term> {
                match o {
                    Operand::Var(v) => row.get(v),
                    Operand::Term(t) => Some(t),
                }
            }
            match (value(a, row), value(b, row)) {
                (Some(x), Some(y)) => compare(*op, x, y),
                _ => Truth::False,
            }
        }
    }
}

/// Keeps the rows on which the expression is true. Errors drop the row.
pub fn filter(t: &BindingTable, f: &FilterExpr) -> BindingTable {
    BindingTable {
        schema: t.schema.clone(),
        rows: t
            .rows
            .iter()
            .filter(|r| eval_filter(f, r) == Truth::True)
            .cloned()
            .collect(),
    }
}

/// Constant labels and label-variable indices on one query vertex pair.
type PairLabels<'a> = (BTreeSet<&'a str>, Vec<usize>);

/// Converts BGP matches to rows. Each match yields one row per consistent
/// way of naming variable edge labels: within a vertex pair the labels must
/// be distinct data edges, and a label variable names the same predicate
/// wherever it occurs.
pub fn bgp_results_to_table(
    g: &RdfGraph,
    q: &QueryGraph,
    matches: &[CompleteMatch],
) -> BindingTable {
    let mut table = BindingTable::empty(q.variables());
    let label_vars: Vec<&str> = {
        let set: BTreeSet<&str> = q
            .edges()
            .iter()
            .filter_map(|e| e.label.variable())
            .collect();
        set.into_iter().collect()
    };
    // Per vertex pair: constant labels and the indices of label variables on it.
    let mut pairs: BTreeMap<(usize, usize), PairLabels> = BTreeMap::new();
    for e in q.edges() {
        let entry = pairs.entry((e.from, e.to)).or_default();
        match &e.label {
            EdgeLabel::Constant(c) => {
                entry.0.insert(c);
            }
            EdgeLabel::Variable(v) => entry.1.push(label_vars.binary_search(&v.as_str()).unwrap()),
        }
    }
    let pairs: Vec<_> = pairs
        .into_iter()
        .filter(|(_, (_, vars))| !vars.is_empty())
        .collect();

    for m in matches {
        let mut base = Row::new();
        for (i, v) in q.vertices().iter().enumerate() {
            if let Some(name) = v.variable() {
                base.insert(name.to_owned(), g.term(m[i]).clone());
            }
        }
        if label_vars.is_empty() {
            table.rows.insert(base);
            continue;
        }
        // Candidate predicates per label variable: free labels on every pair it sits on.
        let mut candidates: Vec<Option<BTreeSet<&str>>> = vec![None; label_vars.len()];
        for ((a, b), (consts, vars)) in &pairs {
            let free: BTreeSet<&str> = g
                .labels_between(m[*a], m[*b])
                .map(|p| g.predicate(p))
                .filter(|p| !consts.contains(p))
                .collect();
            for &v in vars {
                let c = candidates[v].get_or_insert_with(|| free.clone());
                c.retain(|p| free.contains(p));
            }
        }
        let candidates: Vec<Vec<&str>> = candidates
            .into_iter()
            .map(|c| c.unwrap_or_default().into_iter().collect())
            .collect();
        let mut choice: Vec<&str> = Vec::with_capacity(label_vars.len());
        assign_labels(&pairs, &candidates, &mut choice, &mut |choice| {
            let mut row = base.clone();
            for (name, p) in label_vars.iter().zip(choice) {
                row.insert((*name).to_owned(), Term::iri(*p));
            }
            table.rows.insert(row);
        });
    }
    table
}

type PairConstraints<'a> = [((usize, usize), (BTreeSet<&'a str>, Vec<usize>))];

fn assign_labels<'a>(
    pairs: &PairConstraints<'_>,
    candidates: &[Vec<&'a str>],
    choice: &mut Vec<&'a str>,
    emit: &mut dyn FnMut(&[&'a str]),
) {
    let next = choice.len();
    if next == candidates.len() {
        emit(choice);
        return;
    }
    for &p in &candidates[next] {
        let clash = pairs
            .iter()
            .filter(|(_, (_, vars))| vars.contains(&next))
            .any(|(_, (_, vars))| vars.iter().any(|&w| w < next && choice[w] == p));
        if clash {
            continue;
        }
        choice.push(p);
        assign_labels(pairs, candidates, choice, emit);
        choice.pop();
    }
}

/// Evaluates a pattern tree bottom-up, asking `bgp` for the table of each leaf.
pub fn evaluate_pattern<E>(
    p: &Pattern,
    bgp: &mut dyn FnMut(&QueryGraph) -> Result<BindingTable, E>,
) -> Result<BindingTable, E> {
    Ok(match p {
        Pattern::Bgp(q) => bgp(q)?,
        Pattern::And(a, b) => nat_join(&evaluate_pattern(a, bgp)?, &evaluate_pattern(b, bgp)?),
        Pattern::Union(a, b) => union(&evaluate_pattern(a, bgp)?, &evaluate_pattern(b, bgp)?),
        Pattern::Opt(a, b) => {
            left_outer_join(&evaluate_pattern(a, bgp)?, &evaluate_pattern(b, bgp)?)
        }
        Pattern::Filter(a, f) => filter(&evaluate_pattern(a, bgp)?, f),
    })
}

/// Tab-separated answer: a `?var` header in projection order, then one line
/// per row in N-Triples syntax with empty cells for unbound variables. Rows
/// are sorted lexicographically by the lexical forms of their cells.
pub fn to_tsv(projection: &[String], table: &BindingTable) -> String {
    let mut rows: Vec<(Vec<String>, Vec<String>)> = table
        .rows
        .iter()
        .map(|r| {
            let cells: Vec<Option<&Term>> = projection.iter().map(|v| r.get(v)).collect();
            let lexical = cells
                .iter()
                .map(|c| c.map(Term::lexical).unwrap_or_default())
                .collect();
            let rendered = cells
                .iter()
                .map(|c| c.map(Term::to_string).unwrap_or_default())
                .collect();
            (lexical, rendered)
        })
        .collect();
    rows.sort();
    rows.dedup();
    let mut out = projection
        .iter()
        .map(|v| format!("?{v}"))
        .collect::<Vec<_>>()
        .join("\t");
    out.push('\n');
    for (_, cells) in rows {
        out.push_str(&cells.join("\t"));
        out.push('\n');
    }
    out
}

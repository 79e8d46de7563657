mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use common::ast::*;
use common::*;
use parteval::engine::{execute, fragment_graph, AssemblyMode, EngineConfig, PartitionStrategy};
use parteval::oracle::evaluate_naive;
use parteval::query::{parse_sparql, CompareOp, FilterExpr, GeneralQuery, Operand, Pattern};
use parteval::rdf::{RdfGraph, Term, Triple};
use parteval::sparql::{
    compare, eval_filter, left_outer_join, nat_join, to_tsv, union, BindingTable, Row, Truth,
};
use rand::RngExt;

fn row(pairs: &[(&str, Term)]) -> Row {
    pairs
        .iter()
        .map(|(k, v)| ((*k).to_owned(), v.clone()))
        .collect()
}

fn table(schema: &[&str], rows: Vec<Row>) -> BindingTable {
    BindingTable {
        schema: schema.iter().map(|s| (*s).to_owned()).collect(),
        rows: rows.into_iter().collect(),
    }
}

#[test]
fn natural_join_merges_compatible_rows() {
    let a = table(
        &["x", "y"],
        vec![
            row(&[("x", Term::iri("a")), ("y", Term::iri("b"))]),
            row(&[("x", Term::iri("c"))]),
        ],
    );
    let b = table(
        &["y", "z"],
        vec![row(&[("y", Term::iri("b")), ("z", Term::iri("d"))])],
    );
    let j = nat_join(&a, &b);
    let expected: BTreeSet<Row> = [
        row(&[
            ("x", Term::iri("a")),
            ("y", Term::iri("b")),
            ("z", Term::iri("d")),
        ]),
        // ?y is unbound in the second row, so it is compatible with everything.
        row(&[
            ("x", Term::iri("c")),
            ("y", Term::iri("b")),
            ("z", Term::iri("d")),
        ]),
    ]
    .into();
    assert_eq!(j.rows, expected);
    assert_eq!(nat_join(&BindingTable::unit(), &a), a);
}

#[test]
fn left_outer_join_keeps_unmatched_rows() {
    let a = table(
        &["x"],
        vec![row(&[("x", Term::iri("a"))]), row(&[("x", Term::iri("b"))])],
    );
    let b = table(
        &["x", "n"],
        vec![row(&[("x", Term::iri("a")), ("n", Term::literal("A"))])],
    );
    let j = left_outer_join(&a, &b);
    let expected: BTreeSet<Row> = [
        row(&[("x", Term::iri("a")), ("n", Term::literal("A"))]),
        row(&[("x", Term::iri("b"))]),
    ]
    .into();
    assert_eq!(j.rows, expected);
    let u = union(&a, &b);
    assert_eq!(u.len(), 3);
    assert_eq!(u.schema.len(), 2);
}

#[test]
fn filter_semantics_follow_three_valued_logic() {
    let r = row(&[
        ("n", Term::integer(3)),
        ("s", Term::literal("abc")),
        ("i", Term::iri("http://x")),
    ]);
    let var = |v: &str| Operand::Var(v.into());
    let lit = |t: Term| Operand::Term(t);
    let cmp = |op, a, b| FilterExpr::compare(op, a, b);
    assert_eq!(
        eval_filter(&cmp(CompareOp::Lt, var("n"), lit(Term::integer(5))), &r),
        Truth::True
    );
    assert_eq!(
        eval_filter(
            &cmp(
                CompareOp::Eq,
                var("n"),
                lit(Term::typed_literal(
                    "3.0",
                    "http://www.w3.org/2001/XMLSchema#decimal"
                ))
            ),
            &r
        ),
        Truth::True
    );
    // Ordering a number against a string is a type error; equality is not.
    assert_eq!(
        eval_filter(&cmp(CompareOp::Lt, var("n"), var("s")), &r),
        Truth::Error
    );
    assert_eq!(
        eval_filter(&cmp(CompareOp::Eq, var("n"), var("s")), &r),
        Truth::False
    );
    assert_eq!(
        eval_filter(&cmp(CompareOp::Lt, var("s"), lit(Term::literal("abd"))), &r),
        Truth::True
    );
    assert_eq!(
        eval_filter(&cmp(CompareOp::Lt, var("s"), var("i")), &r),
        Truth::Error
    );
    // Unbound operands make the comparison false.
    assert_eq!(
        eval_filter(&cmp(CompareOp::Eq, var("missing"), var("n")), &r),
        Truth::False
    );
    let err = cmp(CompareOp::Lt, var("n"), var("s"));
    assert_eq!(
        eval_filter(&FilterExpr::or(err.clone(), FilterExpr::Const(true)), &r),
        Truth::True
    );
    assert_eq!(
        eval_filter(&FilterExpr::and(err.clone(), FilterExpr::Const(false)), &r),
        Truth::False
    );
    assert_eq!(
        eval_filter(&FilterExpr::and(err.clone(), FilterExpr::Const(true)), &r),
        Truth::Error
    );
    assert_eq!(eval_filter(&FilterExpr::negate(err), &r), Truth::Error);
    assert_eq!(eval_filter(&FilterExpr::Bound("s".into()), &r), Truth::True);
    assert_eq!(
        compare(CompareOp::Ge, &Term::iri("b"), &Term::iri("a")),
        Truth::True
    );
}

#[test]
fn tsv_has_header_sorted_rows_and_empty_unbound_cells() {
    let t = table(
        &["a", "d"],
        vec![
            row(&[("a", Term::iri("s2:act1")), ("d", Term::iri("s1:dir1"))]),
            row(&[("a", Term::iri("s1:act0"))]),
            row(&[("a", Term::literal("x y")), ("d", Term::integer(4))]),
        ],
    );
    let tsv = to_tsv(&["a".into(), "d".into()], &t);
    assert_eq!(
        tsv,
        "?a\t?d\n\"x y\"\t\"4\"^^<http://www.w3.org/2001/XMLSchema#integer>\n<s1:act0>\t\n<s2:act1>\t<s1:dir1>\n"
    );
    assert_eq!(
        to_tsv(&["a".into()], &BindingTable::empty(["a".to_owned()])),
        "?a\n"
    );
}

#[test]
fn label_variables_expand_injectively_per_vertex_pair() {
    let g = Arc::new(RdfGraph::from_triples([
        Triple::new(Term::iri("a"), "p", Term::iri("b")),
        Triple::new(Term::iri("a"), "q", Term::iri("b")),
        Triple::new(Term::iri("a"), "r", Term::iri("b")),
    ]));
    let dg = fragment_graph(
        g.clone(),
        &EngineConfig {
            k: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let gq = parse_sparql("SELECT ?l ?m WHERE { ?x ?l ?y . ?x ?m ?y . ?x <p> ?y }").unwrap();
    let (t, _) = execute(&gq, &dg, &EngineConfig::default()).unwrap();
    let pairs: BTreeSet<(String, String)> = t
        .rows
        .iter()
        .map(|r| (r["l"].lexical(), r["m"].lexical()))
        .collect();
    let expected: BTreeSet<(String, String)> = [("q", "r"), ("r", "q")]
        .iter()
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .collect();
    assert_eq!(pairs, expected);
    assert_eq!(evaluate_naive(&g, &gq).unwrap().len(), t.len(),);
}

// Random general queries against the reference evaluator.

fn as_rows(t: &BindingTable) -> Vec<Row> {
    t.rows.iter().cloned().collect()
}

#[test]
fn random_general_queries_match_the_reference_evaluator() {
    let mut nonempty = 0;
    let mut shapes = [0usize; 4];
    for seed in 0..150u64 {
        let mut r = rng(100_000 + seed);
        let g = Arc::new(small_graph(&mut r));
        let pattern = random_pattern(&mut r, 3);
        assert!(pattern.depth() <= 3);
        let mut gq = GeneralQuery::select_all(pattern);
        if r.random_bool(0.3) && gq.projection.len() > 1 {
            gq.projection.truncate(gq.projection.len() - 1);
        }
        count_shapes(&gq.pattern, &mut shapes);
        let expected = evaluate_naive(&g, &gq).unwrap();
        if !expected.is_empty() {
            nonempty += 1;
        }
        let k = r.random_range(1..=4);
        for assembly in [AssemblyMode::Centralized, AssemblyMode::Distributed] {
            let cfg = EngineConfig {
                k,
                seed,
                assembly,
                strategy: PartitionStrategy::Uniform,
                ..Default::default()
            };
            let dg = fragment_graph(g.clone(), &cfg).unwrap();
            let (t, _) = execute(&gq, &dg, &cfg).unwrap();
            assert_eq!(
                as_rows(&t),
                expected,
                "seed {seed} {assembly:?}\n{}",
                gq.to_sparql()
            );
        }
        // The printed form parses back to a query with the same answers.
        let reparsed = parse_sparql(&gq.to_sparql()).unwrap();
        let dg = fragment_graph(g.clone(), &EngineConfig::default()).unwrap();
        let (t, _) = execute(&reparsed, &dg, &EngineConfig::default()).unwrap();
        assert_eq!(as_rows(&t), expected, "reparsed, seed {seed}");
    }
    assert!(nonempty >= 50, "only {nonempty} queries had answers");
    assert!(
        shapes.iter().all(|&c| c >= 10),
        "operator mix too thin: {shapes:?}"
    );
}

fn count_shapes(p: &Pattern, counts: &mut [usize; 4]) {
    match p {
        Pattern::Bgp(_) => {}
        Pattern::And(a, b) => {
            counts[0] += 1;
            count_shapes(a, counts);
            count_shapes(b, counts);
        }
        Pattern::Union(a, b) => {
            counts[1] += 1;
            count_shapes(a, counts);
            count_shapes(b, counts);
        }
        Pattern::Opt(a, b) => {
            counts[2] += 1;
            count_shapes(a, counts);
            count_shapes(b, counts);
        }
        Pattern::Filter(a, _) => {
            counts[3] += 1;
            count_shapes(a, counts);
        }
    }
}

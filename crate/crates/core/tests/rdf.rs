mod graph {
    use parteval::rdf::*;

    fn t(s: &str, p: &str, o: &str) -> Triple {
        Triple::new(Term::iri(s), p, Term::iri(o))
    }

    #[test]
    fn duplicate_triples_collapse() {
        let g = RdfGraph::from_triples([t("a", "p", "b"), t("a", "p", "b")]);
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn labels_between_is_directional() {
        let g = RdfGraph::from_triples([t("u", "p", "v"), t("u", "q", "v"), t("v", "r", "u")]);
        let mut fwd = g.labels_between_terms(&Term::iri("u"), &Term::iri("v"));
        fwd.sort();
        assert_eq!(fwd, vec!["p", "q"]);
        assert_eq!(
            g.labels_between_terms(&Term::iri("v"), &Term::iri("u")),
            vec!["r"]
        );
        assert!(g
            .labels_between_terms(&Term::iri("u"), &Term::iri("u"))
            .is_empty());
        assert!(g
            .labels_between_terms(&Term::iri("u"), &Term::iri("zz"))
            .is_empty());
    }

    #[test]
    fn self_loops_and_parallel_predicates_are_kept() {
        let g = RdfGraph::from_triples([t("a", "p", "a"), t("a", "q", "a"), t("a", "p", "b")]);
        assert_eq!(g.edge_count(), 3);
        let a = g.vertex_id(&Term::iri("a")).unwrap();
        assert_eq!(g.labels_between(a, a).count(), 2);
    }

    #[test]
    fn literal_equality_is_syntactic() {
        let a = Term::typed_literal("1", format!("{XSD}integer"));
        let b = Term::typed_literal("01", format!("{XSD}integer"));
        let c = Term::literal("1");
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_eq!(
            a.as_literal().unwrap().numeric_value(),
            b.as_literal().unwrap().numeric_value()
        );
        assert_eq!(c.as_literal().unwrap().numeric_value(), None);
    }

    #[test]
    fn lexical_forms() {
        assert_eq!(Term::iri("s1:dir1").lexical(), "s1:dir1");
        assert_eq!(Term::blank("b0").lexical(), "_:b0");
        assert_eq!(Term::lang_literal("x\"y", "en").lexical(), "\"x\\\"y\"@en");
        assert_eq!(Term::iri("s1:dir1").to_string(), "<s1:dir1>");
    }
}

mod ntriples {
    use parteval::rdf::*;
    use proptest::prelude::*;

    #[test]
    fn parses_all_term_kinds() {
        let doc = br#"# a comment
<s1:dir1> <isMarriedTo> <s2:act1> .
_:b0 <p> "plain" .
_:b0 <p> "hello"@en-GB .
_:b0 <p> "5"^^<http://www.w3.org/2001/XMLSchema#integer> . # trailing comment
<a> <p> "tab\there \"q\" \u00e9" .
"#;
        let triples = parse_triples(doc).unwrap();
        assert_eq!(triples.len(), 5);
        assert_eq!(triples[0].s, Term::iri("s1:dir1"));
        assert_eq!(triples[1].s, Term::blank("b0"));
        assert_eq!(triples[2].o, Term::lang_literal("hello", "en-GB"));
        assert_eq!(
            triples[3].o,
            Term::typed_literal("5", "http://www.w3.org/2001/XMLSchema#integer")
        );
        assert_eq!(triples[4].o, Term::literal("tab\there \"q\" é"));
    }

    #[test]
    fn empty_input_gives_empty_graph() {
        let g = parse_ntriples(b"").unwrap();
        assert_eq!(g.vertex_count(), 0);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn crossing_link_of_the_running_example() {
        let g = parse_ntriples(
            b"<s2:act1> <isMarriedTo> <s1:dir1> .\n<s1:dir1> <directed> <s1:film1> .\n",
        )
        .unwrap();
        assert_eq!(
            g.labels_between_terms(&Term::iri("s2:act1"), &Term::iri("s1:dir1")),
            vec!["isMarriedTo"]
        );
    }

    #[test]
    fn blank_label_followed_by_terminator() {
        let t = parse_triples(b"<a> <p> _:x.\n<a> <p> _:x.y .").unwrap();
        assert_eq!(t[0].o, Term::blank("x"));
        assert_eq!(t[1].o, Term::blank("x.y"));
    }

    #[test]
    fn syntax_errors_report_line_and_column() {
        let err = parse_triples(b"<a> <p> <b> .\n<a> <p> <b>\n").unwrap_err();
        assert_eq!(
            err,
            NtError::Syntax {
                line: 2,
                column: 12,
                message: "expected '.' terminating the triple".into()
            }
        );
        assert!(matches!(
            parse_triples(b"\"lit\" <p> <b> ."),
            Err(NtError::Syntax {
                line: 1,
                column: 1,
                ..
            })
        ));
        assert!(matches!(
            parse_triples(b"<a> _:p <b> ."),
            Err(NtError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_triples(b"<a> <p> \"open ."),
            Err(NtError::Syntax { .. })
        ));
        assert!(matches!(
            parse_triples(b"<a> <p> <b> . <c>"),
            Err(NtError::Syntax { .. })
        ));
    }

    #[test]
    fn invalid_utf8_is_an_encoding_error() {
        let err = parse_triples(b"<a> <p> <b> .\n<a> <p> \"\xff\" .\n").unwrap_err();
        assert_eq!(err, NtError::Encoding { line: 2 });
    }

    #[test]
    fn single_term_parsing() {
        assert_eq!(parse_term("<x>").unwrap(), Term::iri("x"));
        assert_eq!(
            parse_term("\"v\"@en").unwrap(),
            Term::lang_literal("v", "en")
        );
        assert!(parse_term("<x> <y>").is_err());
    }

    fn arb_term(subject: bool) -> BoxedStrategy<Term> {
        let iri = "[a-z:/#]{1,8}".prop_map(Term::iri);
        let blank = "[a-z][a-z0-9.]{0,4}[a-z0-9]".prop_map(Term::blank);
        if subject {
            prop_oneof![iri, blank].boxed()
        } else {
            let value = "\\PC{0,6}";
            let lit = prop_oneof![
                value.prop_map(Term::literal),
                (value, "[a-z]{2}(-[A-Z]{2})?").prop_map(|(v, l)| Term::lang_literal(v, l)),
                (value, "[a-z:#]{1,6}").prop_map(|(v, d)| Term::typed_literal(v, d)),
                "[\\t\\n\\r\"\\\\a]{0,4}".prop_map(Term::literal),
            ];
            prop_oneof![iri, blank, lit].boxed()
        }
    }

    proptest! {
        #[test]
        fn parse_serialize_parse_is_a_fixpoint(
            triples in prop::collection::vec((arb_term(true), "[a-z:]{1,5}", arb_term(false)), 0..12)
        ) {
            let g = RdfGraph::from_triples(triples.into_iter().map(|(s, p, o)| Triple::new(s, p, o)));
            let text = write_ntriples(&g);
            let g2 = parse_ntriples(text.as_bytes()).unwrap();
            let text2 = write_ntriples(&g2);
            prop_assert_eq!(&text, &text2);
            let mut a: Vec<Triple> = g.triples().collect();
            let mut b: Vec<Triple> = g2.triples().collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
            for e in g2.edges() {
                prop_assert!(e.s.index() < g2.vertex_count() && e.o.index() < g2.vertex_count());
            }
            for u in g2.vertices() {
                for v in g2.vertices() {
                    let n = g2.edges().iter().filter(|e| e.s == u && e.o == v).count();
                    prop_assert_eq!(g2.labels_between(u, v).count(), n);
                }
            }
        }
    }
}

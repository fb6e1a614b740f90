//! Query language: lexer, parser, AST and query graph.

pub mod ast;
mod graph;
pub mod lexer;
mod parser;

use std::fmt;

pub use ast::*;
pub use graph::{filter_id, to_query_graph, NamedPath, PredRole, Predicate, QEdge, QNode, QueryGraph};
pub use lexer::{tokenize, Pos, Tok, Token};
pub use parser::{parse, parse_expr};

#[derive(Debug, Clone, PartialEq)]
pub enum QueryError {
    Lex { pos: Pos, msg: String },
    Parse { pos: Pos, expected: Vec<String>, found: String },
    UnboundVariable(String),
    Semantic { pos: Option<Pos>, msg: String },
}

impl fmt::Display for QueryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryError::Lex { pos, msg } => write!(f, "lex error at {}:{}: {msg}", pos.line, pos.col),
            QueryError::Parse { pos, expected, found } => {
                write!(f, "parse error at {}:{}: expected ", pos.line, pos.col)?;
                if expected.len() == 1 {
                    write!(f, "{}", expected[0])?;
                } else {
                    write!(f, "one of {}", expected.join(", "))?;
                }
                write!(f, ", found {found}")
            }
            QueryError::UnboundVariable(v) => write!(f, "unbound variable `{v}`"),
            QueryError::Semantic { pos: Some(p), msg } => write!(f, "error at {}:{}: {msg}", p.line, p.col),
            QueryError::Semantic { pos: None, msg } => f.write_str(msg),
        }
    }
}

impl std::error::Error for QueryError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatementKind {
    Read,
    Write,
}

/// Routes a statement: anything with CREATE, SET or DELETE is a write.
pub fn classify(text: &str) -> Result<StatementKind, QueryError> {
    Ok(if parse(text)?.is_write() { StatementKind::Write } else { StatementKind::Read })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::extraction::CompareSymbol;
    use crate::graph::Direction;

    fn counts(text: &str) -> (usize, usize, usize, usize) {
        let q = parse(text).unwrap_or_else(|e| panic!("{text}: {e}"));
        let g = to_query_graph(&q).unwrap_or_else(|e| panic!("{text}: {e}"));
        (g.nodes.len(), g.edges.len(), g.attached().count(), g.detached().count())
    }

    #[test]
    fn create_statement() {
        let q = parse(
            "CREATE (jordan:Person{name: 'Michael Jordan'}) CREATE (scott:Person{name: 'Scott Pippen'}) \
             CREATE (jordan)-[:teamMate]->(scott);",
        )
        .unwrap();
        assert_eq!(q.creates.len(), 3);
        assert!(q.is_write());
        assert_eq!(counts(&q.to_string()).0, 0);
    }

    #[test]
    fn fixture_counts() {
        let cases = [
            ("MATCH (jordan)-[:teamMate]->(n) WHERE jordan.name='Michael Jordan' RETURN n.name;", (2, 1, 1, 0)),
            ("MATCH (n:Person)-[:teamMate]->(m:Person) WHERE n.name='Michael Jordan' RETURN m.name", (2, 1, 1, 0)),
            (
                "MATCH (n:Person)-[:teamMate]->(m:Person) WHERE n.name = 'Michael Jordan' RETURN m.photo->jerseyNumber",
                (2, 1, 1, 0),
            ),
            (
                "MATCH (n:Person)-[:hasPet]->(m:Pet) WHERE m.photo->animal = 'cat' RETURN n.name",
                (2, 1, 1, 0),
            ),
            (
                "MATCH (n1:Person)-[:teamMate]->(n4:Person), (n7:Person)-[:coachOf]->(n6:Team) \
                 WHERE n1.name = 'Michael Jordan' AND n4.name = 'Kerr' AND n6.name = 'Gold State Warriors' \
                 AND n7.name = 'Steven Kerr' RETURN n4.photo->face ~: n7.photo->face;",
                (4, 2, 4, 1),
            ),
            (
                "Match (n:person) WHERE n.photo ~: Blob.fromURL('$url') AND n.firstName = '$name' RETURN n;",
                (1, 0, 2, 0),
            ),
            (
                "MATCH (n:person),(m:person) WHERE m.photo ~: Blob.fromURL('$url') AND n.firstName = '$name' \
                 RETURN shortestPath((n)-[*1..3]-(m));",
                (2, 0, 2, 0),
            ),
            (
                "MATCH (n:person),(m:person) WHERE n.firstName='$name1' AND m.firstName='$name2' RETURN n.photo ~: m.photo;",
                (2, 0, 2, 1),
            ),
            ("MATCH p = (n:Person)-[:friendOf]->(m:Person) WHERE n.photo ~: m.photo RETURN p;", (2, 1, 0, 1)),
            (
                "MATCH (n1)-[:hasPet]->(n3) WHERE n1.name = 'Michael Jordan' RETURN n3.photo->animal",
                (2, 1, 1, 0),
            ),
            ("MATCH (a) RETURN a", (1, 0, 0, 0)),
        ];
        for (text, want) in cases {
            assert_eq!(counts(text), want, "{text}");
        }
    }

    #[test]
    fn shortest_path_return() {
        let q = parse("MATCH (n),(m) RETURN shortestPath((n)-[*1..3]-(m))").unwrap();
        match &q.returns[0].expr {
            Expr::ShortestPath(sp) => assert_eq!((sp.min_hops, sp.max_hops), (1, 3)),
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn return_without_match() {
        let q = parse("RETURN 1").unwrap();
        assert!(q.matches.is_empty());
        assert_eq!(q.returns.len(), 1);
    }

    #[test]
    fn precedence() {
        let e = parse_expr("a.p->f ~: b.p->f AND c").unwrap();
        assert_eq!(e.to_string(), "((a.p->f ~: b.p->f) AND c)");
        assert_eq!(parse_expr("a OR b AND c").unwrap().to_string(), "(a OR (b AND c))");
        assert_eq!(parse_expr("NOT a = b").unwrap().to_string(), "((NOT a) = b)");
        assert_eq!(parse_expr("x<-1").unwrap().to_string(), "(x < -1)");
    }

    #[test]
    fn incoming_edges_are_normalized() {
        let g = to_query_graph(&parse("MATCH (a)<-[:T]-(b) RETURN a").unwrap()).unwrap();
        assert_eq!((g.edges[0].from.as_str(), g.edges[0].to.as_str()), ("b", "a"));
        assert_eq!(g.edges[0].direction, Direction::Out);
    }

    #[test]
    fn inline_props_become_predicates() {
        let g = to_query_graph(&parse("MATCH (a:P {x: 1})-[r:T {w: 2}]->(b) RETURN b").unwrap()).unwrap();
        assert_eq!(g.predicates.len(), 2);
        assert!(g.predicates.iter().all(|p| p.is_attached() && !p.unstructured));
    }

    #[test]
    fn filter_ids() {
        let g = to_query_graph(&parse("MATCH (n),(m) WHERE n.photo ~: m.photo AND n.photo->animal = 'cat' RETURN n").unwrap())
            .unwrap();
        let ids: Vec<_> = g.predicates.iter().map(|p| p.filter_id.clone().unwrap()).collect();
        assert_eq!(ids, vec!["face~:".to_string(), "animal=".to_string()]);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            to_query_graph(&parse("MATCH (n) RETURN m.name").unwrap()),
            Err(QueryError::UnboundVariable(v)) if v == "m"
        ));
        // a WHERE clause naming a variable no pattern binds
        assert!(matches!(
            to_query_graph(&parse("MATCH (n)-[:hasPet]->(m) WHERE n3.photo->animal = 'cat' RETURN n").unwrap()),
            Err(QueryError::UnboundVariable(_))
        ));
        match parse("MATCH (n RETURN n") {
            Err(QueryError::Parse { pos, expected, .. }) => {
                assert_eq!(pos, Pos { line: 1, col: 10 });
                assert!(expected.iter().any(|e| e.contains(')')));
            }
            r => panic!("{r:?}"),
        }
        assert!(matches!(parse("MATCH (a)-[*1..3]->(b) RETURN a"), Err(QueryError::Semantic { .. })));
        assert!(parse("").is_err());
        assert!(parse("MATCH (a) RETURN a a").is_err());
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify("MATCH (n) RETURN n").unwrap(), StatementKind::Read);
        assert_eq!(classify("CREATE (a:P {name: 'x'})").unwrap(), StatementKind::Write);
        assert_eq!(classify("MATCH (n) SET n.x = 1 RETURN n").unwrap(), StatementKind::Write);
        assert_eq!(classify("MATCH (n) DETACH DELETE n").unwrap(), StatementKind::Write);
    }

    #[test]
    fn components_of_disconnected_graph() {
        let g = to_query_graph(&parse("MATCH (a)-[:T]->(b), (c) RETURN a").unwrap()).unwrap();
        assert_eq!(g.components(), vec![vec![0, 1], vec![2]]);
    }

    fn ident() -> impl Strategy<Value = String> {
        "[a-z][a-z0-9]{0,3}".prop_filter("keyword", |s| {
            !matches!(
                s.to_ascii_uppercase().as_str(),
                "MATCH" | "WHERE" | "RETURN" | "CREATE" | "SET" | "DELETE" | "DETACH" | "AND" | "OR" | "NOT" | "AS"
                    | "LIMIT" | "TRUE" | "FALSE" | "BLOB"
            ) && !s.eq_ignore_ascii_case("shortestpath")
        })
    }

    fn literal() -> impl Strategy<Value = Literal> {
        prop_oneof![
            (0i64..1000).prop_map(Literal::Int),
            (0u32..1000).prop_map(|x| Literal::Float(x as f64 / 8.0)),
            "[a-zA-Z '\\\\]{0,6}".prop_map(Literal::Str),
            any::<bool>().prop_map(Literal::Bool),
        ]
    }

    fn sem_symbol() -> impl Strategy<Value = CmpOp> {
        prop_oneof![
            Just(CmpOp::Eq),
            Just(CmpOp::Neq),
            Just(CmpOp::Lt),
            Just(CmpOp::Ge),
            Just(CmpOp::Sem(CompareSymbol::Similarity)),
            Just(CmpOp::Sem(CompareSymbol::Similar)),
            Just(CmpOp::Sem(CompareSymbol::NotSimilar)),
            Just(CmpOp::Sem(CompareSymbol::In)),
            Just(CmpOp::Sem(CompareSymbol::Contains)),
        ]
    }

    fn operand() -> impl Strategy<Value = Expr> {
        prop_oneof![
            literal().prop_map(Expr::Lit),
            ident().prop_map(Expr::Param),
            (ident(), ident()).prop_map(|(v, k)| Expr::prop(&v, &k)),
            (ident(), ident(), ident()).prop_map(|(v, k, s)| Expr::SubProp(Box::new(Expr::prop(&v, &k)), s)),
            "[a-z]{1,5}".prop_map(|s| Expr::BlobFn(BlobSource::Url, Box::new(Expr::Lit(Literal::Str(s))))),
            (ident(), ident()).prop_map(|(v, l)| Expr::HasLabel(v, l)),
        ]
    }

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = (sem_symbol(), operand(), operand()).prop_map(|(op, a, b)| Expr::cmp(op, a, b));
        leaf.prop_recursive(3, 12, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::And(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Or(Box::new(a), Box::new(b))),
                inner.prop_map(|e| Expr::Not(Box::new(e))),
            ]
        })
    }

    fn node_pat() -> impl Strategy<Value = NodePat> {
        (
            prop::option::of(ident()),
            prop::collection::vec(ident(), 0..2),
            prop::collection::vec((ident(), literal().prop_map(Expr::Lit)), 0..2),
        )
            .prop_map(|(var, labels, props)| NodePat { var, labels, props })
    }

    fn rel_pat() -> impl Strategy<Value = RelPat> {
        (
            prop::option::of(ident()),
            prop::option::of(ident()),
            prop_oneof![Just(Direction::Out), Just(Direction::In), Just(Direction::Both)],
        )
            .prop_map(|(var, rel_type, direction)| RelPat { var, rel_type, direction, props: Vec::new() })
    }

    fn path() -> impl Strategy<Value = PathPattern> {
        (prop::option::of(ident()), node_pat(), prop::collection::vec((rel_pat(), node_pat()), 0..3)).prop_map(
            |(var, first, rest)| {
                let mut nodes = vec![first];
                let mut rels = Vec::new();
                for (r, n) in rest {
                    rels.push(r);
                    nodes.push(n);
                }
                PathPattern { var, nodes, rels }
            },
        )
    }

    fn query() -> impl Strategy<Value = Query> {
        (
            prop::collection::vec(path(), 1..3),
            prop::option::of(expr()),
            prop::collection::vec((operand(), prop::option::of(ident())), 1..3),
            prop::option::of(0u64..50),
        )
            .prop_map(|(matches, where_clause, rets, limit)| Query {
                matches,
                where_clause,
                returns: rets.into_iter().map(|(expr, alias)| ReturnItem { expr, alias }).collect(),
                limit,
                ..Default::default()
            })
    }

    proptest! {
        #[test]
        fn unparse_parse_fixpoint(q in query()) {
            let text = q.to_string();
            let back = parse(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
            prop_assert_eq!(back, q);
        }

        #[test]
        fn expr_fixpoint(e in expr()) {
            let text = e.to_string();
            prop_assert_eq!(parse_expr(&text).unwrap(), e);
        }

        #[test]
        fn parse_never_panics(s in "[ -~]{0,40}") {
            let _ = parse(&s);
        }
    }
}

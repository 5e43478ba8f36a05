mod common;

use proptest::prelude::*;

use common::{random_database, random_fds, random_query, random_schema, rng, SMALL};
use repcount_core::model::{Atom, ConjunctiveQuery, Constant, Database, Fact, Term};
use repcount_core::syntax::{parse_answer, parse_facts, parse_query, parse_schema_fds, print_facts, print_schema_fds};

fn odd_value() -> impl Strategy<Value = String> {
    prop_oneof![
        "[A-Za-z0-9_]{1,6}",
        "[ -~]{0,8}",
        Just("it's".to_string()),
        Just("''".to_string()),
        Just("#not a comment".to_string()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn schema_round_trip(seed in any::<u64>()) {
        let mut r = rng(seed);
        let schema = random_schema(&mut r, SMALL);
        let sigma = random_fds(&mut r, &schema);
        let text = print_schema_fds(&schema, &sigma);
        let (schema2, sigma2) = parse_schema_fds(&text).unwrap();
        prop_assert_eq!(&*schema2, &*schema);
        prop_assert_eq!(sigma2, sigma);
    }

    #[test]
    fn facts_round_trip(seed in any::<u64>(), values in prop::collection::vec(odd_value(), 0..12)) {
        let mut r = rng(seed);
        let schema = random_schema(&mut r, SMALL);
        let mut db = random_database(&mut r, &schema, SMALL.max_facts, SMALL.domain);
        let decl = schema.relations().next().unwrap();
        for chunk in values.chunks(decl.arity()) {
            if chunk.len() == decl.arity() {
                db.insert(Fact::new(decl.name().clone(), chunk.iter().map(Constant::new).collect())).unwrap();
            }
        }
        let back: Database = parse_facts(&print_facts(&db), &schema).unwrap();
        prop_assert_eq!(back, db);
    }

    #[test]
    fn query_round_trip(seed in any::<u64>(), value in odd_value()) {
        let mut r = rng(seed);
        let schema = random_schema(&mut r, SMALL);
        let q = random_query(&mut r, &schema, SMALL.domain);
        let mut atoms = q.atoms().to_vec();
        let first = &atoms[0];
        let mut terms = first.terms().to_vec();
        terms[0] = Term::constant(&value);
        atoms[0] = Atom::new(first.relation().clone(), terms);
        let q = ConjunctiveQuery::new(&schema, atoms).unwrap();
        let parsed = parse_query(&q.to_string(), &schema).unwrap();
        prop_assert!(parsed.is_boolean());
        prop_assert_eq!(&parsed.body, &q);
        let reprinted = parse_query(&parsed.to_string(), &schema).unwrap();
        prop_assert_eq!(reprinted, parsed);
    }

    #[test]
    fn answer_round_trip(values in prop::collection::vec(odd_value(), 1..5)) {
        let consts: Vec<Constant> = values.iter().map(Constant::new).collect();
        let text = consts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ");
        prop_assert_eq!(parse_answer(&text).unwrap(), consts);
    }
}

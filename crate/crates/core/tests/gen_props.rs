mod common;

use num_bigint::BigUint;
use num_traits::{One, Pow};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::{oracle_rfreq, random_database, random_fds, random_query, random_schema, rng, Scale, SMALL};
use repcount_core::error::Error;
use repcount_core::eval::rel_freq;
use repcount_core::fd::canonical_cover;
use repcount_core::gen::{
    cook_reduce, expected_gap_count, gen_gap3sat, gen_rfreq_family, Cnf3, Literal, STAR,
};
use repcount_core::model::Constant;
use repcount_core::repair::{count_entailing_oracle, count_repairs, enumerate_repairs};

const GADGET_CAP: usize = 64;

fn random_cnf(r: &mut impl Rng, vars: u32, clauses: usize) -> Cnf3 {
    let pool: Vec<u32> = (1..=vars).collect();
    let cs = (0..clauses)
        .map(|_| {
            let picked: Vec<u32> = pool.choose_multiple(r, 3).copied().collect();
            [0, 1, 2].map(|i| Literal::new(picked[i], r.gen_bool(0.5)))
        })
        .collect();
    Cnf3::new(vars, cs).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(120))]

    #[test]
    fn gadget_counts_and_bounds(seed in any::<u64>(), k in 1usize..=2, m in 1usize..=2, vars in 3u32..=4) {
        let mut r = rng(seed);
        let phi = random_cnf(&mut r, vars, m);
        let (db, sigma) = gen_gap3sat(&phi, k).unwrap();
        prop_assert_eq!(db.facts().filter(|f| f.value(0) == &Constant::new(STAR)).count(), k * m);
        prop_assert!(!canonical_cover(db.schema(), &sigma).unwrap().has_lhs_chain());

        let count = BigUint::from(enumerate_repairs(&db, &sigma, GADGET_CAP).unwrap().len());
        prop_assert_eq!(&count, &expected_gap_count(&phi, k).unwrap());

        let n = phi.variables().len() as u32;
        let km = (k * m) as u32;
        let satisfiable = phi.assignments().unwrap().iter().any(|a| phi.satisfied(a) == m);
        if satisfiable {
            prop_assert!(count >= BigUint::from(2u8).pow(km));
        }
        prop_assert!(count <= BigUint::from(2u8).pow(n + km));
    }

    #[test]
    fn cook_reduction_preserves_the_repair_count(seed in any::<u64>()) {
        let mut r = rng(seed);
        let scale = Scale { max_facts: 15, ..SMALL };
        let schema = random_schema(&mut r, scale);
        let sigma = random_fds(&mut r, &schema);
        let q = random_query(&mut r, &schema, scale.domain);
        let db = random_database(&mut r, &schema, scale.max_facts, scale.domain);
        let answer: Vec<_> = q.variables().into_iter().filter(|_| r.gen_bool(0.5)).collect();
        match cook_reduce(&db, &sigma, &q, &answer) {
            Ok(red) => {
                prop_assert_eq!(red.tuple.len(), answer.len());
                let mut free = q.variables();
                free.retain(|x| !answer.contains(x));
                prop_assert_eq!(red.grounded.variables(), free);
                prop_assert!(db.len() <= red.database.len());
                let before = enumerate_repairs(&db, &sigma, 32).unwrap().len();
                let after = count_entailing_oracle(&red.database, &sigma, &red.grounded, 40).unwrap();
                prop_assert_eq!(BigUint::from(before), after);
            }
            Err(Error::Precondition(_)) => {
                prop_assert!(sigma.fds().iter().any(|fd| fd.lhs().is_empty() && q.atom_for(fd.relation()).is_some()));
            }
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }
}

#[test]
fn rfreq_family_shape() {
    for n in 1..=12 {
        let (db, sigma, q) = gen_rfreq_family(n);
        assert_eq!(db.len(), 2 * n + 1);
        let total = count_repairs(&db, &sigma).unwrap();
        assert_eq!(total, BigUint::from(2u32).pow(n as u32) + BigUint::one());
        let f = rel_freq(&db, &sigma, &q).unwrap();
        assert_eq!(f, common::ratio_of(1, &total));
        if n <= 6 {
            assert_eq!(oracle_rfreq(&db, &sigma, &q), f);
        }
    }
}

//! Seeded generators of small random instances shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use repcount_core::fd::ChainCover;
use repcount_core::model::{Atom, ConjunctiveQuery, Database, Fact, Fd, FdSet, RelationDecl, Schema, Term, AttrSet};
use repcount_core::repair::{oracle_counts, DEFAULT_ORACLE_CAP};
use repcount_core::safety::is_safe;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug)]
pub struct Scale {
    pub max_relations: usize,
    pub max_arity: usize,
    pub max_facts: usize,
    pub domain: usize,
}

pub const SMALL: Scale = Scale {
    max_relations: 4,
    max_arity: 4,
    max_facts: 18,
    domain: 3,
};

pub fn random_schema(rng: &mut impl Rng, scale: Scale) -> Arc<Schema> {
    let n = rng.gen_range(1..=scale.max_relations);
    let decls = (0..n).map(|i| {
        let arity = rng.gen_range(1..=scale.max_arity);
        let attrs: Vec<String> = (0..arity).map(|j| format!("A{j}")).collect();
        RelationDecl::new(&format!("R{i}"), &attrs).unwrap()
    });
    Arc::new(Schema::with_relations(decls.collect::<Vec<_>>()).unwrap())
}

/// FDs whose canonical cover has an LHS chain in every relation, sometimes
/// padded with implied FDs so that canonicalization has work to do.
pub fn random_chain_fds(rng: &mut impl Rng, schema: &Schema) -> FdSet {
    let mut fds = Vec::new();
    for decl in schema.relations() {
        let mut attrs: Vec<usize> = (0..decl.arity()).collect();
        attrs.shuffle(rng);
        let mut lhs = AttrSet::empty();
        let levels = rng.gen_range(0..=2);
        for _ in 0..levels {
            let grow = rng.gen_range(0..=1).min(attrs.len());
            for _ in 0..grow {
                lhs = lhs.with(attrs.pop().unwrap());
            }
            if attrs.is_empty() {
                break;
            }
            let take = rng.gen_range(1..=2).min(attrs.len());
            let mut rhs = AttrSet::empty();
            for _ in 0..take {
                rhs = rhs.with(attrs.pop().unwrap());
            }
            fds.push(Fd::new(decl.name().clone(), lhs, rhs));
            if rng.gen_bool(0.3) {
                // augmentation of the FD just added
                let extra = rhs.iter().next().map(AttrSet::singleton).unwrap_or_default();
                fds.push(Fd::new(decl.name().clone(), lhs, rhs.union(lhs)));
                fds.push(Fd::new(decl.name().clone(), lhs.union(extra), rhs));
            }
        }
    }
    FdSet::new(schema, fds).unwrap()
}

/// Arbitrary FDs, chain or not.
pub fn random_fds(rng: &mut impl Rng, schema: &Schema) -> FdSet {
    let mut fds = Vec::new();
    for decl in schema.relations() {
        for _ in 0..rng.gen_range(0..=2) {
            let lhs = AttrSet::from_indices((0..decl.arity()).filter(|_| rng.gen_bool(0.4)));
            let rhs = AttrSet::from_indices((0..decl.arity()).filter(|_| rng.gen_bool(0.4)));
            fds.push(Fd::new(decl.name().clone(), lhs, rhs));
        }
    }
    FdSet::new(schema, fds).unwrap()
}

pub fn value(i: usize) -> String {
    format!("v{i}")
}

pub fn random_database(rng: &mut impl Rng, schema: &Arc<Schema>, max_facts: usize, domain: usize) -> Database {
    let decls: Vec<&RelationDecl> = schema.relations().collect();
    let mut db = Database::new(schema.clone());
    let target = rng.gen_range(0..=max_facts);
    for _ in 0..target * 3 {
        if db.len() >= target {
            break;
        }
        let decl = decls[rng.gen_range(0..decls.len())];
        let values: Vec<String> = (0..decl.arity()).map(|_| value(rng.gen_range(0..domain))).collect();
        let refs: Vec<&str> = values.iter().map(String::as_str).collect();
        db.insert(Fact::parse_values(decl.name(), &refs)).unwrap();
    }
    db
}

/// A self-join-free query over a random nonempty subset of the relations.
pub fn random_query(rng: &mut impl Rng, schema: &Schema, domain: usize) -> ConjunctiveQuery {
    let mut decls: Vec<&RelationDecl> = schema.relations().collect();
    decls.shuffle(rng);
    let k = rng.gen_range(1..=decls.len().min(3));
    let vars = rng.gen_range(1..=4);
    let atoms = decls[..k]
        .iter()
        .map(|d| {
            let terms = (0..d.arity())
                .map(|_| {
                    if rng.gen_bool(0.2) {
                        Term::constant(&value(rng.gen_range(0..domain)))
                    } else {
                        Term::var(&format!("x{}", rng.gen_range(0..vars)))
                    }
                })
                .collect();
            Atom::new(d.name().clone(), terms)
        })
        .collect();
    ConjunctiveQuery::new(schema, atoms).unwrap()
}

pub struct Instance {
    pub db: Database,
    pub sigma: FdSet,
    pub cover: ChainCover,
    pub query: ConjunctiveQuery,
}

/// A random chain instance with a query that is safe for it.
pub fn random_safe_instance(rng: &mut impl Rng, scale: Scale) -> Instance {
    loop {
        let schema = random_schema(rng, scale);
        let sigma = random_chain_fds(rng, &schema);
        let cover = ChainCover::new(schema.clone(), &sigma).expect("generated FDs have a chain");
        let query = random_query(rng, &schema, scale.domain);
        if !is_safe(&cover, &query).unwrap().safe {
            continue;
        }
        let db = random_database(rng, &schema, scale.max_facts, scale.domain);
        return Instance { db, sigma, cover, query };
    }
}

pub fn oracle_rfreq(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery) -> BigRational {
    let (total, hits) = oracle_counts(db, sigma, query, DEFAULT_ORACLE_CAP).unwrap();
    BigRational::new(BigInt::from(hits), BigInt::from(total))
}

pub fn big(n: u64) -> BigUint {
    BigUint::from(n)
}

/// Like [`random_query`] but relations may repeat, so self-joins occur.
pub fn random_query_with_self_joins(rng: &mut impl Rng, schema: &Schema, domain: usize) -> ConjunctiveQuery {
    let decls: Vec<&RelationDecl> = schema.relations().collect();
    let k = rng.gen_range(1..=3);
    let vars = rng.gen_range(1..=4);
    let atoms = (0..k)
        .map(|_| {
            let d = decls[rng.gen_range(0..decls.len())];
            let terms = (0..d.arity())
                .map(|_| {
                    if rng.gen_bool(0.15) {
                        Term::constant(&value(rng.gen_range(0..domain)))
                    } else {
                        Term::var(&format!("x{}", rng.gen_range(0..vars)))
                    }
                })
                .collect();
            Atom::new(d.name().clone(), terms)
        })
        .collect();
    ConjunctiveQuery::new(schema, atoms).unwrap()
}

/// A chain instance whose repair count lies in `range`, with its repairs.
pub fn instance_with_repairs(
    rng: &mut impl Rng,
    range: std::ops::RangeInclusive<usize>,
) -> (Database, FdSet, ChainCover, Vec<Database>) {
    loop {
        let schema = random_schema(rng, SMALL);
        let sigma = random_chain_fds(rng, &schema);
        let cover = ChainCover::new(schema.clone(), &sigma).unwrap();
        let db = random_database(rng, &schema, SMALL.max_facts, SMALL.domain);
        let reps = repcount_core::repair::enumerate_repairs(&db, &sigma, DEFAULT_ORACLE_CAP).unwrap();
        if range.contains(&reps.len()) {
            return (db, sigma, cover, reps);
        }
    }
}

/// Upper-tail probability of Pearson's statistic for `counts` under the
/// uniform distribution over `counts.len()` outcomes.
pub fn uniformity_p_value(counts: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    ChiSquared::new((counts.len() - 1) as f64).unwrap().sf(stat)
}

/// A chain instance and a query, self-joins allowed, with at least two
/// consistent homomorphic images and at least one entailing repair. Returns
/// the oracle count of entailing repairs.
pub fn approx_instance(rng: &mut impl Rng) -> (Database, FdSet, ConjunctiveQuery, BigUint) {
    loop {
        let schema = random_schema(rng, SMALL);
        let sigma = random_chain_fds(rng, &schema);
        let q = random_query_with_self_joins(rng, &schema, SMALL.domain);
        let db = random_database(rng, &schema, SMALL.max_facts, SMALL.domain);
        if repcount_core::fpras::hom_images(&q, &db, &sigma).len() < 2 {
            continue;
        }
        let (_, hits) = oracle_counts(&db, &sigma, &q, DEFAULT_ORACLE_CAP).unwrap();
        if hits > BigUint::from(0u8) {
            return (db, sigma, q, hits);
        }
    }
}

pub fn ratio_of(num: u64, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den.clone()))
}

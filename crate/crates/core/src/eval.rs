//! Exact relative frequency and entailing-repair counts for safe queries.

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fd::{analyze_query, complex_part_with, trim_with, ChainCover};
use crate::model::{entails, ConjunctiveQuery, Database, FdSet};
use crate::repair::count_repairs_with;
use crate::safety::{is_safe, select_rule, Rule};

/// `num / den` as an exact rational.
pub fn ratio(num: &BigUint, den: &BigUint) -> BigRational {
    BigRational::new(BigInt::from(num.clone()), BigInt::from(den.clone()))
}

/// Relative frequency of a query whose complex part is empty.
pub fn rel_freq_base(db: &Database, cover: &ChainCover, query: &ConjunctiveQuery) -> Result<BigRational> {
    let analyses = analyze_query(cover, query)?;
    if !complex_part_with(query, &analyses).is_empty() {
        return Err(Error::Precondition("the complex part of the query is not empty".into()));
    }
    if !entails(db, query) {
        return Ok(BigRational::zero());
    }
    let trim = trim_with(db, query, &analyses);
    Ok(ratio(
        &count_repairs_with(&db.difference(&trim.d_conf), cover),
        &count_repairs_with(db, cover),
    ))
}

/// Memoizing evaluator over a fixed chain cover.
pub struct Evaluator<'a> {
    cover: &'a ChainCover,
    memo: HashMap<(Database, ConjunctiveQuery), BigRational>,
    counts: HashMap<Database, BigUint>,
    calls: u64,
}

impl<'a> Evaluator<'a> {
    pub fn new(cover: &'a ChainCover) -> Self {
        Evaluator {
            cover,
            memo: HashMap::new(),
            counts: HashMap::new(),
            calls: 0,
        }
    }

    /// Recursive invocations so far, memo hits included.
    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// Exact relative frequency of a safe self-join-free query.
    pub fn rel_freq(&mut self, db: &Database, query: &ConjunctiveQuery) -> Result<BigRational> {
        if !is_safe(self.cover, query)?.safe {
            return Err(Error::UnsafeQuery);
        }
        self.eval(db, query)
    }

    fn count(&mut self, db: &Database) -> BigUint {
        if let Some(c) = self.counts.get(db) {
            return c.clone();
        }
        let c = count_repairs_with(db, self.cover);
        self.counts.insert(db.clone(), c.clone());
        c
    }

    fn eval(&mut self, db: &Database, query: &ConjunctiveQuery) -> Result<BigRational> {
        self.calls += 1;
        let key = (db.clone(), query.clone());
        if let Some(r) = self.memo.get(&key) {
            return Ok(r.clone());
        }
        let r = self.eval_uncached(db, query)?;
        self.memo.insert(key, r.clone());
        Ok(r)
    }

    fn eval_uncached(&mut self, db: &Database, query: &ConjunctiveQuery) -> Result<BigRational> {
        if !entails(db, query) {
            return Ok(BigRational::zero());
        }
        let analyses = analyze_query(self.cover, query)?;
        match select_rule(query, &analyses) {
            Rule::EmptyComplexPart => {
                let trim = trim_with(db, query, &analyses);
                let num = self.count(&db.difference(&trim.d_conf));
                Ok(ratio(&num, &self.count(db)))
            }
            Rule::Split(a, b) => {
                let left = self.eval(db, &query.sub_query(&a))?;
                if left.is_zero() {
                    return Ok(left);
                }
                Ok(left * self.eval(db, &query.sub_query(&b))?)
            }
            Rule::PrimaryLhsVariable(x) => {
                let trim = trim_with(db, query, &analyses);
                let num = self.count(&db.difference(&trim.d_conf));
                let r = ratio(&num, &self.count(db));
                let mut miss = BigRational::one();
                for c in db.adom() {
                    let f = self.eval(&trim.d_core, &query.substitute(&x, &c))?;
                    miss *= BigRational::one() - f;
                }
                Ok((BigRational::one() - miss) * r)
            }
            Rule::RhsVariable(x) => {
                let mut sum = BigRational::zero();
                for c in db.adom() {
                    sum += self.eval(db, &query.substitute(&x, &c))?;
                }
                Ok(sum)
            }
            Rule::Unsafe => Err(Error::UnsafeQuery),
        }
    }
}

/// Exact relative frequency of `query` over the repairs of `db`.
pub fn rel_freq(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery) -> Result<BigRational> {
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    Evaluator::new(&cover).rel_freq(db, query)
}

/// Exact number of repairs of `db` that entail `query`.
pub fn count_entailing(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery) -> Result<BigUint> {
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    count_entailing_with(db, &cover, query)
}

pub fn count_entailing_with(db: &Database, cover: &ChainCover, query: &ConjunctiveQuery) -> Result<BigUint> {
    let freq = Evaluator::new(cover).rel_freq(db, query)?;
    let total = BigRational::from_integer(BigInt::from(count_repairs_with(db, cover)));
    let n = freq * total;
    assert!(n.is_integer(), "entailing-repair count is not an integer: {n}");
    Ok(n.to_integer().to_biguint().expect("counts are non-negative"))
}

/// Upper bound on the number of Eval invocations: `(2|Q|-1) * sum_{i<=m} N^i`
/// with `m` variables and `N` active-domain constants.
pub fn call_bound(atoms: usize, variables: usize, adom: usize) -> BigUint {
    let n = BigUint::from(adom);
    let mut geo = BigUint::zero();
    let mut p = BigUint::one();
    for _ in 0..=variables {
        geo += &p;
        p *= &n;
    }
    BigUint::from(2 * atoms - 1) * geo
}

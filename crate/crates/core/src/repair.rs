//! Conflicts, blocks and blocktrees, exact repair counting for FDs with an LHS
//! chain, and the brute-force repair enumerator every other counter is checked
//! against.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::fd::{ChainCover, LhsChain};
use crate::model::{entails, AttrSet, ConjunctiveQuery, Constant, Database, Fact, Fd, FdSet};

/// Default fact cap for the brute-force enumerator.
pub const DEFAULT_ORACLE_CAP: usize = 25;
/// Hard upper bound on the cap; the conflict graph uses 128-bit rows.
pub const MAX_ORACLE_CAP: usize = 128;

/// `{f, g}` violates some FD of `sigma`. Facts of different relations never
/// conflict.
pub fn in_conflict(f: &Fact, g: &Fact, sigma: &FdSet) -> bool {
    !sigma.consistent_pair(f, g)
}

fn group_by<'a>(facts: impl IntoIterator<Item = &'a Fact>, set: AttrSet) -> Vec<Vec<&'a Fact>> {
    let mut groups: BTreeMap<Vec<Constant>, Vec<&Fact>> = BTreeMap::new();
    for f in facts {
        groups.entry(f.project(set)).or_default().push(f);
    }
    groups.into_values().collect()
}

/// Maximal groups of facts agreeing on the left-hand side of `fd`, sorted by
/// that projection.
pub fn blocks<'a>(facts: impl IntoIterator<Item = &'a Fact>, fd: &Fd) -> Vec<Vec<&'a Fact>> {
    group_by(facts, fd.lhs())
}

/// Maximal groups agreeing on both sides of `fd`.
pub fn subblocks<'a>(facts: impl IntoIterator<Item = &'a Fact>, fd: &Fd) -> Vec<Vec<&'a Fact>> {
    group_by(facts, fd.attributes())
}

#[derive(Clone, Debug)]
pub struct BlockNode {
    pub level: usize,
    /// Indices into [`Blocktree::facts`].
    pub label: Vec<usize>,
    pub children: Vec<usize>,
    /// Number of repairs of the label.
    pub count: BigUint,
}

/// Alternating block/subblock tree of `D_R` along an LHS chain. Node 0 is the
/// root; children appear in sorted order of their grouping key.
#[derive(Clone, Debug)]
pub struct Blocktree {
    relation: Arc<str>,
    chain: LhsChain,
    facts: Vec<Fact>,
    nodes: Vec<BlockNode>,
}

impl Blocktree {
    pub fn relation(&self) -> &Arc<str> {
        &self.relation
    }

    pub fn chain(&self) -> &LhsChain {
        &self.chain
    }

    /// The facts of `D_R`, sorted.
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn nodes(&self) -> &[BlockNode] {
        &self.nodes
    }

    pub fn root(&self) -> &BlockNode {
        &self.nodes[0]
    }

    pub fn label(&self, node: usize) -> impl Iterator<Item = &Fact> + '_ {
        self.nodes[node].label.iter().map(move |&i| &self.facts[i])
    }

    /// Number of repairs of `D_R` under the chain.
    pub fn count(&self) -> &BigUint {
        &self.root().count
    }

    pub fn height(&self) -> usize {
        2 * self.chain.len()
    }
}

/// Builds the blocktree of `D_R` for the LHS chain of `relation` in `cover`.
pub fn build_blocktree(db: &Database, cover: &ChainCover, relation: &str) -> Blocktree {
    let facts: Vec<Fact> = db.facts_of(relation).cloned().collect();
    let chain = cover.chain(relation).clone();
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..facts.len()).collect();
    grow(&facts, &chain, all, 0, &mut nodes);
    Blocktree {
        relation: Arc::from(relation),
        chain,
        facts,
        nodes,
    }
}

fn grow(facts: &[Fact], chain: &LhsChain, label: Vec<usize>, level: usize, nodes: &mut Vec<BlockNode>) -> usize {
    let id = nodes.len();
    nodes.push(BlockNode {
        level,
        label: Vec::new(),
        children: Vec::new(),
        count: BigUint::zero(),
    });
    let fd_index = level / 2;
    let groups: Vec<Vec<usize>> = if label.is_empty() || fd_index >= chain.len() {
        Vec::new()
    } else {
        let fd = &chain.fds()[fd_index];
        let set = if level.is_multiple_of(2) { fd.lhs() } else { fd.attributes() };
        let mut groups: BTreeMap<Vec<Constant>, Vec<usize>> = BTreeMap::new();
        for &i in &label {
            groups.entry(facts[i].project(set)).or_default().push(i);
        }
        groups.into_values().collect()
    };
    let children: Vec<usize> = groups
        .into_iter()
        .map(|g| grow(facts, chain, g, level + 1, nodes))
        .collect();
    let count = if level.is_multiple_of(2) {
        children.iter().fold(BigUint::one(), |acc, &c| acc * &nodes[c].count)
    } else {
        children.iter().fold(BigUint::zero(), |acc, &c| acc + &nodes[c].count)
    };
    let node = &mut nodes[id];
    node.label = label;
    node.children = children;
    node.count = count;
    id
}

/// Exact number of repairs when every relation has an LHS chain (up to
/// equivalence). Fails with [`Error::NoLhsChain`] otherwise.
pub fn count_repairs(db: &Database, sigma: &FdSet) -> Result<BigUint> {
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    Ok(count_repairs_with(db, &cover))
}

/// Product over relations of the blocktree counts.
pub fn count_repairs_with(db: &Database, cover: &ChainCover) -> BigUint {
    cover
        .schema()
        .relations()
        .map(|decl| build_blocktree(db, cover, decl.name()).count().clone())
        .fold(BigUint::one(), |acc, c| acc * c)
}

/// Facts of a database together with their pairwise conflicts.
#[derive(Clone, Debug)]
pub struct ConflictGraph {
    facts: Vec<Fact>,
    conflicts: Vec<u128>,
}

impl ConflictGraph {
    pub fn new(db: &Database, sigma: &FdSet, cap: usize) -> Result<Self> {
        let cap = cap.min(MAX_ORACLE_CAP);
        if db.len() > cap {
            return Err(Error::OracleCapExceeded { facts: db.len(), cap });
        }
        let facts: Vec<Fact> = db.facts().cloned().collect();
        let mut conflicts = vec![0u128; facts.len()];
        for i in 0..facts.len() {
            for j in i + 1..facts.len() {
                if in_conflict(&facts[i], &facts[j], sigma) {
                    conflicts[i] |= 1 << j;
                    conflicts[j] |= 1 << i;
                }
            }
        }
        Ok(ConflictGraph { facts, conflicts })
    }

    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn conflicts(&self, i: usize) -> u128 {
        self.conflicts[i]
    }

    fn all(&self) -> u128 {
        if self.facts.len() == 128 {
            u128::MAX
        } else {
            (1u128 << self.facts.len()) - 1
        }
    }

    /// Maximal independent sets as bit masks over [`Self::facts`], sorted.
    pub fn maximal_independent_sets(&self) -> Vec<u128> {
        let all = self.all();
        let compat: Vec<u128> = (0..self.facts.len())
            .map(|i| all & !self.conflicts[i] & !(1u128 << i))
            .collect();
        let mut out = Vec::new();
        bron_kerbosch(0, all, 0, &compat, &mut out);
        out.sort_unstable();
        out
    }

    pub fn database(&self, template: &Database, mask: u128) -> Database {
        template.with_facts(
            (0..self.facts.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| self.facts[i].clone())
                .collect(),
        )
    }
}

// Maximal cliques of the compatibility graph = maximal consistent subsets.
fn bron_kerbosch(r: u128, mut p: u128, mut x: u128, compat: &[u128], out: &mut Vec<u128>) {
    if p == 0 {
        if x == 0 {
            out.push(r);
        }
        return;
    }
    let pivot = bits(p | x)
        .max_by_key(|&u| (p & compat[u]).count_ones())
        .expect("p is nonempty");
    for v in bits(p & !compat[pivot]) {
        let bit = 1u128 << v;
        bron_kerbosch(r | bit, p & compat[v], x & compat[v], compat, out);
        p &= !bit;
        x |= bit;
    }
}

fn bits(mut m: u128) -> impl Iterator<Item = usize> {
    std::iter::from_fn(move || {
        if m == 0 {
            None
        } else {
            let i = m.trailing_zeros() as usize;
            m &= m - 1;
            Some(i)
        }
    })
}

/// All repairs (maximal consistent subsets) by brute force. Works for any FD
/// set; refuses databases larger than `cap` facts.
pub fn enumerate_repairs(db: &Database, sigma: &FdSet, cap: usize) -> Result<Vec<Database>> {
    let graph = ConflictGraph::new(db, sigma, cap)?;
    Ok(graph
        .maximal_independent_sets()
        .into_iter()
        .map(|m| graph.database(db, m))
        .collect())
}

/// `candidate` is a consistent, maximal subset of `db`.
pub fn is_repair(candidate: &Database, db: &Database, sigma: &FdSet) -> bool {
    candidate.is_subset(db)
        && sigma.is_consistent(candidate)
        && db
            .facts()
            .filter(|f| !candidate.contains(f))
            .all(|f| candidate.facts().any(|g| in_conflict(f, g, sigma)))
}

/// Brute-force number of repairs and of repairs entailing `query`.
pub fn oracle_counts(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery, cap: usize) -> Result<(BigUint, BigUint)> {
    let repairs = enumerate_repairs(db, sigma, cap)?;
    let entailing = repairs.iter().filter(|r| entails(r, query)).count();
    Ok((BigUint::from(repairs.len()), BigUint::from(entailing)))
}

/// Brute-force number of repairs entailing `query`.
pub fn count_entailing_oracle(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery, cap: usize) -> Result<BigUint> {
    Ok(oracle_counts(db, sigma, query, cap)?.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, RelationDecl, Schema, Term};

    fn employee() -> (Database, FdSet) {
        let schema = Arc::new(Schema::with_relations([RelationDecl::new("Employee", &["id", "name", "dept"]).unwrap()]).unwrap());
        let sigma = FdSet::new(&schema, [Fd::named(&schema, "Employee", &["id"], &["name", "dept"]).unwrap()]).unwrap();
        let db = Database::from_facts(
            schema,
            [
                Fact::parse_values("Employee", &["1", "Bob", "HR"]),
                Fact::parse_values("Employee", &["1", "Bob", "IT"]),
                Fact::parse_values("Employee", &["2", "Alice", "IT"]),
                Fact::parse_values("Employee", &["2", "Tim", "IT"]),
            ],
        )
        .unwrap();
        (db, sigma)
    }

    fn keyed(facts: &[(&str, &str)]) -> (Database, FdSet) {
        let schema = Arc::new(Schema::with_relations([RelationDecl::new("R", &["A", "B"]).unwrap()]).unwrap());
        let sigma = FdSet::new(&schema, [Fd::named(&schema, "R", &["A"], &["B"]).unwrap()]).unwrap();
        let db = Database::from_facts(schema, facts.iter().map(|(a, b)| Fact::parse_values("R", &[a, b]))).unwrap();
        (db, sigma)
    }

    #[test]
    fn conflict_examples() {
        let (db, sigma) = employee();
        let f = Fact::parse_values("Employee", &["1", "Bob", "HR"]);
        let g = Fact::parse_values("Employee", &["1", "Bob", "IT"]);
        assert!(in_conflict(&f, &g, &sigma));
        assert!(!in_conflict(&f, &f, &sigma));
        let other = Fact::parse_values("Other", &["1", "Bob", "IT"]);
        assert!(!in_conflict(&f, &other, &sigma));
        assert_eq!(db.len(), 4);
    }

    #[test]
    fn block_and_subblock_partitions() {
        let (db, sigma) = keyed(&[("a", "1"), ("a", "2"), ("b", "1")]);
        let fd = &sigma.fds()[0];
        let b = blocks(db.facts(), fd);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].len(), 2);
        assert_eq!(b[1], vec![&Fact::parse_values("R", &["b", "1"])]);
        let sb = subblocks(db.facts(), fd);
        assert_eq!(sb.len(), 3);
        assert!(sb.iter().all(|g| g.len() == 1));
        let (single, _) = keyed(&[("a", "1")]);
        assert_eq!(blocks(single.facts(), fd).len(), 1);
    }

    #[test]
    fn key_blocktree_shape() {
        let (db, sigma) = keyed(&[("a", "1"), ("a", "2"), ("b", "1")]);
        let cover = ChainCover::new(db.schema().clone(), &sigma).unwrap();
        let t = build_blocktree(&db, &cover, "R");
        assert_eq!(t.height(), 2);
        assert_eq!(t.root().children.len(), 2);
        for n in t.nodes() {
            if n.children.is_empty() {
                assert_eq!(n.level, 2);
                assert_eq!(n.label.len(), 1);
            }
        }
        assert_eq!(t.count(), &BigUint::from(2u32));
    }

    #[test]
    fn empty_relation_blocktree() {
        let (db, sigma) = keyed(&[]);
        let cover = ChainCover::new(db.schema().clone(), &sigma).unwrap();
        let t = build_blocktree(&db, &cover, "R");
        assert_eq!(t.nodes().len(), 1);
        assert!(t.root().label.is_empty() && t.root().children.is_empty());
        assert_eq!(t.count(), &BigUint::one());
    }

    #[test]
    fn blocktree_sibling_property() {
        // nested chain A -> B, {A, C} -> D over a dense instance
        let schema = Arc::new(Schema::with_relations([RelationDecl::new("R", &["A", "B", "C", "D"]).unwrap()]).unwrap());
        let sigma = FdSet::new(
            &schema,
            [
                Fd::named(&schema, "R", &["A"], &["B"]).unwrap(),
                Fd::named(&schema, "R", &["A", "C"], &["D"]).unwrap(),
            ],
        )
        .unwrap();
        let mut facts = Vec::new();
        for a in ["0", "1"] {
            for b in ["0", "1"] {
                for c in ["0", "1"] {
                    for d in ["0", "1"] {
                        if (a, c) != ("1", "1") {
                            facts.push(Fact::parse_values("R", &[a, b, c, d]));
                        }
                    }
                }
            }
        }
        let db = Database::from_facts(schema, facts).unwrap();
        let cover = ChainCover::new(db.schema().clone(), &sigma).unwrap();
        let t = build_blocktree(&db, &cover, "R");
        for n in t.nodes() {
            for (i, &u) in n.children.iter().enumerate() {
                for &w in &n.children[i + 1..] {
                    for f in t.label(u) {
                        for g in t.label(w) {
                            assert_eq!(in_conflict(f, g, &sigma), n.level % 2 == 1);
                        }
                    }
                }
            }
        }
        let n = enumerate_repairs(&db, &sigma, 32).unwrap().len();
        assert_eq!(t.count(), &BigUint::from(n));
    }

    #[test]
    fn employee_counts() {
        let (db, sigma) = employee();
        assert_eq!(count_repairs(&db, &sigma).unwrap(), BigUint::from(4u32));
        let repairs = enumerate_repairs(&db, &sigma, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(repairs.len(), 4);
        for r in &repairs {
            assert!(is_repair(r, &db, &sigma));
            assert_eq!(r.len(), 2);
        }
        // same department for employees 1 and 2
        let q = ConjunctiveQuery::new(
            db.schema(),
            vec![
                Atom::new("Employee", vec![Term::constant("1"), Term::var("n1"), Term::var("d")]),
                Atom::new("Employee", vec![Term::constant("2"), Term::var("n2"), Term::var("d")]),
            ],
        )
        .unwrap();
        assert_eq!(count_entailing_oracle(&db, &sigma, &q, DEFAULT_ORACLE_CAP).unwrap(), BigUint::from(2u32));
    }

    #[test]
    fn consistent_database_has_one_repair() {
        let (db, sigma) = keyed(&[("a", "1"), ("b", "1")]);
        assert_eq!(count_repairs(&db, &sigma).unwrap(), BigUint::one());
        assert_eq!(enumerate_repairs(&db, &sigma, 10).unwrap(), vec![db.clone()]);
        assert!(is_repair(&db, &db, &sigma));
    }

    #[test]
    fn two_way_conflict() {
        let (db, sigma) = keyed(&[("a", "1"), ("a", "2")]);
        let reps = enumerate_repairs(&db, &sigma, 10).unwrap();
        assert_eq!(reps.len(), 2);
        assert!(reps.iter().all(|r| r.len() == 1));
    }

    #[test]
    fn maximality_is_checked() {
        let (db, sigma) = keyed(&[("a", "1"), ("a", "2"), ("b", "1")]);
        let partial = db.filter(|f| f.value(0).as_str() == Some("a") && f.value(1).as_str() == Some("1"));
        assert!(!is_repair(&partial, &db, &sigma));
        assert!(!is_repair(&db, &db, &sigma));
    }

    #[test]
    fn cap_is_enforced() {
        let facts: Vec<(String, String)> = (0..30).map(|i| (format!("k{i}"), "v".to_string())).collect();
        let refs: Vec<(&str, &str)> = facts.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
        let (db, sigma) = keyed(&refs);
        assert!(matches!(
            enumerate_repairs(&db, &sigma, DEFAULT_ORACLE_CAP),
            Err(Error::OracleCapExceeded { facts: 30, cap: 25 })
        ));
        assert_eq!(enumerate_repairs(&db, &sigma, 40).unwrap().len(), 1);
    }

    #[test]
    fn no_chain_is_reported() {
        let schema = Arc::new(Schema::with_relations([RelationDecl::new("R", &["A", "B"]).unwrap()]).unwrap());
        let sigma = FdSet::new(
            &schema,
            [
                Fd::named(&schema, "R", &["A"], &["B"]).unwrap(),
                Fd::named(&schema, "R", &["B"], &["A"]).unwrap(),
            ],
        )
        .unwrap();
        let db = Database::new(schema);
        assert!(matches!(count_repairs(&db, &sigma), Err(Error::NoLhsChain(_))));
    }
}

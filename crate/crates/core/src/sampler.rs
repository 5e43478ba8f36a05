//! Uniform sampling of repairs under FDs with an LHS chain.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::fd::ChainCover;
use crate::model::{Database, Fact, FdSet};
use crate::repair::{build_blocktree, in_conflict, Blocktree};

/// Uniform draw from `[0, bound)` by rejection on `bits(bound)`-bit strings.
pub fn random_below<R: Rng + ?Sized>(rng: &mut R, bound: &BigUint) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    let nbytes = bits.div_ceil(8) as usize;
    let top_mask = 0xFFu8 >> (8 * nbytes as u64 - bits);
    let mut buf = vec![0u8; nbytes];
    loop {
        rng.fill_bytes(&mut buf);
        buf[nbytes - 1] &= top_mask;
        let r = BigUint::from_bytes_le(&buf);
        if &r < bound {
            return r;
        }
    }
}

#[derive(Clone, Debug)]
enum Weights {
    Small(Vec<u64>),
    Big(Vec<BigUint>),
}

impl Weights {
    /// Cumulative weights of the children of a node.
    fn new(counts: &[&BigUint]) -> Self {
        let mut acc = BigUint::zero();
        let cumulative: Vec<BigUint> = counts
            .iter()
            .map(|c| {
                acc += *c;
                acc.clone()
            })
            .collect();
        match cumulative.iter().map(|c| c.to_u64()).collect::<Option<Vec<u64>>>() {
            Some(small) => Weights::Small(small),
            None => Weights::Big(cumulative),
        }
    }

    fn choose<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Weights::Small(w) => {
                let r = rng.gen_range(0..*w.last().expect("odd nodes have children"));
                w.partition_point(|&c| c <= r)
            }
            Weights::Big(w) => {
                let r = random_below(rng, w.last().expect("odd nodes have children"));
                w.partition_point(|c| c <= &r)
            }
        }
    }
}

#[derive(Clone, Debug)]
struct Node {
    children: Vec<usize>,
    /// Present at odd levels only.
    weights: Option<Weights>,
    /// Fact ids taken when this node is a leaf.
    leaf: Vec<usize>,
}

/// Precomputed blocktrees of a database, ready for repeated uniform draws.
#[derive(Clone, Debug)]
pub struct RepairSampler {
    template: Database,
    facts: Vec<Option<Fact>>,
    trees: Vec<Vec<Node>>,
    count: BigUint,
}

impl RepairSampler {
    /// Fact ids are positions in `db.facts()`.
    pub fn new(db: &Database, cover: &ChainCover) -> Self {
        let facts: Vec<Fact> = db.facts().cloned().collect();
        let index: Vec<&Fact> = facts.iter().collect();
        Self::with_ids(db, cover, |f| index.binary_search(&f).expect("fact of db"))
    }

    /// Fact ids are assigned by `id_of`, e.g. positions in a larger database.
    pub fn with_ids(db: &Database, cover: &ChainCover, id_of: impl Fn(&Fact) -> usize) -> Self {
        let mut trees = Vec::new();
        let mut count = BigUint::from(1u32);
        let mut max_id = 0;
        for decl in cover.schema().relations() {
            let tree = build_blocktree(db, cover, decl.name());
            count *= tree.count();
            let ids: Vec<usize> = tree.facts().iter().map(&id_of).collect();
            max_id = ids.iter().copied().fold(max_id, usize::max);
            trees.push(flatten(&tree, &ids));
        }
        let mut facts = vec![None; if db.is_empty() { 0 } else { max_id + 1 }];
        for f in db.facts() {
            facts[id_of(f)] = Some(f.clone());
        }
        RepairSampler {
            template: db.clone(),
            facts,
            trees,
            count,
        }
    }

    /// Number of repairs the sampler draws from.
    pub fn count(&self) -> &BigUint {
        &self.count
    }

    /// Appends the ids of a uniformly random repair to `out`.
    pub fn sample_ids<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<usize>) {
        for tree in &self.trees {
            let mut stack = vec![0usize];
            while let Some(v) = stack.pop() {
                let node = &tree[v];
                match &node.weights {
                    Some(w) => stack.push(node.children[w.choose(rng)]),
                    None if node.children.is_empty() => out.extend_from_slice(&node.leaf),
                    None => stack.extend(node.children.iter().copied()),
                }
            }
        }
    }

    /// A uniformly random repair.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Database {
        let mut ids = Vec::new();
        self.sample_ids(rng, &mut ids);
        self.template
            .with_facts(ids.into_iter().filter_map(|i| self.facts[i].clone()).collect())
    }
}

fn flatten(tree: &Blocktree, ids: &[usize]) -> Vec<Node> {
    tree.nodes()
        .iter()
        .map(|n| Node {
            children: n.children.clone(),
            weights: (n.level % 2 == 1).then(|| {
                Weights::new(&n.children.iter().map(|&c| &tree.nodes()[c].count).collect::<Vec<_>>())
            }),
            leaf: if n.children.is_empty() {
                n.label.iter().map(|&i| ids[i]).collect()
            } else {
                Vec::new()
            },
        })
        .collect()
}

/// A uniformly random repair of `D_R` for a single relation.
pub fn r_sample<R: Rng + ?Sized>(db: &Database, sigma: &FdSet, relation: &str, rng: &mut R) -> Result<Database> {
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    cover.schema().relation(relation)?;
    let restricted = db.filter(|f| &**f.relation() == relation);
    Ok(RepairSampler::new(&restricted, &cover).sample(rng))
}

/// A uniformly random repair of `db`.
pub fn sample_repair<R: Rng + ?Sized>(db: &Database, sigma: &FdSet, rng: &mut R) -> Result<Database> {
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    Ok(RepairSampler::new(db, &cover).sample(rng))
}

/// `db` without the facts that conflict with some fact of `h`; its repairs
/// are exactly the repairs of `db` containing `h`.
pub fn conditional_database(db: &Database, sigma: &FdSet, h: &BTreeSet<Fact>) -> Result<Database> {
    if let Some(f) = h.iter().find(|f| !db.contains(f)) {
        return Err(Error::Precondition(format!("{f} is not a fact of the database")));
    }
    let facts: Vec<&Fact> = h.iter().collect();
    for (i, f) in facts.iter().enumerate() {
        if facts[i + 1..].iter().any(|g| in_conflict(f, g, sigma)) {
            return Err(Error::Precondition("the fixed facts are inconsistent".into()));
        }
    }
    Ok(db.filter(|f| !h.iter().any(|g| in_conflict(f, g, sigma))))
}

/// A uniformly random repair of `db` among those containing `h`.
pub fn sample_conditional<R: Rng + ?Sized>(db: &Database, sigma: &FdSet, h: &BTreeSet<Fact>, rng: &mut R) -> Result<Database> {
    let cover = ChainCover::new(db.schema().clone(), sigma)?;
    let rest = conditional_database(db, sigma, h)?;
    Ok(RepairSampler::new(&rest, &cover).sample(rng))
}

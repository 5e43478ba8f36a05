//! Reasoning about functional dependencies: closures, canonical covers, LHS
//! chains, and the query-relative notions built on top of the chain (primary
//! FD, primary-lhs positions, complex part, and the conflict/independent
//! trimming of a database).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{Atom, AttrSet, ConjunctiveQuery, Database, Fd, FdSet, RelationDecl, Schema, Term, Variable};

/// Closure of `x` under `fds` (all of one relation).
pub fn closure(x: AttrSet, fds: &[Fd]) -> AttrSet {
    let mut acc = x;
    loop {
        let next = fds
            .iter()
            .filter(|fd| fd.lhs().is_subset(acc))
            .fold(acc, |a, fd| a.union(fd.rhs()));
        if next == acc {
            return acc;
        }
        acc = next;
    }
}

/// Checked variant of [`closure`]: `x` and every FD must belong to `decl`.
pub fn attribute_closure(decl: &RelationDecl, x: AttrSet, fds: &[Fd]) -> Result<AttrSet> {
    let all = decl.all_attributes();
    if let Some(i) = x.difference(all).iter().next() {
        return Err(Error::UnknownAttribute {
            relation: decl.name().to_string(),
            attribute: format!("#{i}"),
        });
    }
    if let Some(fd) = fds.iter().find(|fd| **fd.relation() != **decl.name()) {
        return Err(Error::Precondition(format!(
            "FD over `{}` passed for relation `{}`",
            fd.relation(),
            decl.name()
        )));
    }
    Ok(closure(x, fds))
}

fn fd_order_key(fd: &Fd) -> (Vec<usize>, Vec<usize>) {
    (fd.lhs().to_vec(), fd.rhs().to_vec())
}

/// Minimal, merged, redundancy-free FDs equivalent to the input, per relation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalCover {
    by_relation: BTreeMap<Arc<str>, Vec<Fd>>,
}

impl CanonicalCover {
    /// FDs of `relation`, sorted by (lhs, rhs).
    pub fn fds_of(&self, relation: &str) -> &[Fd] {
        self.by_relation.get(relation).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn relations(&self) -> impl Iterator<Item = &Arc<str>> {
        self.by_relation.keys()
    }

    pub fn to_fd_set(&self) -> FdSet {
        FdSet::from_vec_unchecked(self.by_relation.values().flatten().cloned().collect())
    }

    /// Every relation's left-hand sides are pairwise comparable under inclusion.
    pub fn has_lhs_chain(&self) -> bool {
        self.by_relation.keys().all(|r| self.relation_has_lhs_chain(r))
    }

    pub fn relation_has_lhs_chain(&self, relation: &str) -> bool {
        let fds = self.fds_of(relation);
        fds.iter().enumerate().all(|(i, f)| {
            fds[i + 1..]
                .iter()
                .all(|g| f.lhs().is_subset(g.lhs()) || g.lhs().is_subset(f.lhs()))
        })
    }

    /// The LHS chain of `relation`.
    pub fn lhs_chain(&self, relation: &str) -> Result<LhsChain> {
        if !self.relation_has_lhs_chain(relation) {
            return Err(Error::NoLhsChain(relation.to_string()));
        }
        let mut fds = self.fds_of(relation).to_vec();
        fds.sort_by_key(|fd| fd.lhs().len());
        let chain = LhsChain {
            relation: Arc::from(relation),
            fds,
        };
        chain.check_invariants()?;
        Ok(chain)
    }
}

/// Computes the canonical cover with a fixed pass order: relations by name,
/// FDs by (lhs, rhs) in declared attribute order.
pub fn canonical_cover(schema: &Schema, sigma: &FdSet) -> Result<CanonicalCover> {
    let mut by_relation = BTreeMap::new();
    for decl in schema.relations() {
        let name = decl.name();
        let input: Vec<Fd> = sigma.for_relation(name).cloned().collect();
        for fd in &input {
            if !fd.attributes().is_subset(decl.all_attributes()) {
                return Err(Error::UnknownAttribute {
                    relation: name.to_string(),
                    attribute: format!("#{:?}", fd.attributes().difference(decl.all_attributes())),
                });
            }
        }
        by_relation.insert(name.clone(), canonicalize_relation(name, &input));
    }
    if let Some(fd) = sigma.fds().iter().find(|fd| !schema.contains(fd.relation())) {
        return Err(Error::UnknownRelation(fd.relation().to_string()));
    }
    Ok(CanonicalCover { by_relation })
}

fn canonicalize_relation(relation: &Arc<str>, input: &[Fd]) -> Vec<Fd> {
    // Singleton right-hand sides, trivial parts dropped.
    let mut fds: Vec<Fd> = input
        .iter()
        .flat_map(|fd| {
            fd.rhs()
                .difference(fd.lhs())
                .iter()
                .map(move |a| Fd::new(relation.clone(), fd.lhs(), AttrSet::singleton(a)))
        })
        .collect();
    fds.sort_by_key(fd_order_key);
    fds.dedup();

    // Extraneous left-hand-side attributes.
    for i in 0..fds.len() {
        for b in fds[i].lhs().to_vec() {
            let reduced = fds[i].lhs().without(b);
            if fds[i].rhs().is_subset(closure(reduced, &fds)) {
                fds[i] = Fd::new(relation.clone(), reduced, fds[i].rhs());
            }
        }
    }
    fds.sort_by_key(fd_order_key);
    fds.dedup();

    // Redundant FDs.
    let mut i = 0;
    while i < fds.len() {
        let fd = fds.remove(i);
        if fd.rhs().is_subset(closure(fd.lhs(), &fds)) {
            continue;
        }
        fds.insert(i, fd);
        i += 1;
    }

    // Merge equal left-hand sides.
    let mut merged: BTreeMap<Vec<usize>, (AttrSet, AttrSet)> = BTreeMap::new();
    for fd in fds {
        let entry = merged
            .entry(fd.lhs().to_vec())
            .or_insert((fd.lhs(), AttrSet::empty()));
        entry.1 = entry.1.union(fd.rhs());
    }
    let mut out: Vec<Fd> = merged
        .into_values()
        .map(|(l, r)| Fd::new(relation.clone(), l, r))
        .collect();
    out.sort_by_key(fd_order_key);
    out
}

/// The FDs of one relation ordered so that left-hand sides strictly grow.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LhsChain {
    relation: Arc<str>,
    fds: Vec<Fd>,
}

impl LhsChain {
    pub fn empty(relation: Arc<str>) -> Self {
        LhsChain {
            relation,
            fds: Vec::new(),
        }
    }

    pub fn relation(&self) -> &Arc<str> {
        &self.relation
    }

    pub fn fds(&self) -> &[Fd] {
        &self.fds
    }

    pub fn len(&self) -> usize {
        self.fds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fds.is_empty()
    }

    /// X_i strictly grows; no X meets any Y; the Ys are pairwise disjoint.
    pub fn check_invariants(&self) -> Result<()> {
        let broken = |what: &str| {
            Err(Error::Precondition(format!(
                "LHS chain of `{}` violates {what}",
                self.relation
            )))
        };
        for w in self.fds.windows(2) {
            if !(w[0].lhs().is_subset(w[1].lhs()) && w[0].lhs() != w[1].lhs()) {
                return broken("strict inclusion of left-hand sides");
            }
        }
        for (i, f) in self.fds.iter().enumerate() {
            for (j, g) in self.fds.iter().enumerate() {
                if !f.lhs().intersection(g.rhs()).is_empty() {
                    return broken("disjointness of left- and right-hand sides");
                }
                if i != j && !f.rhs().intersection(g.rhs()).is_empty() {
                    return broken("disjointness of right-hand sides");
                }
            }
        }
        Ok(())
    }
}

/// A canonical FD set with an LHS chain for every relation of the schema.
///
/// Relations without FDs get an empty chain.
#[derive(Clone, Debug)]
pub struct ChainCover {
    schema: Arc<Schema>,
    cover: CanonicalCover,
    chains: BTreeMap<Arc<str>, LhsChain>,
}

impl ChainCover {
    /// Canonicalizes `sigma`; fails with [`Error::NoLhsChain`] when some
    /// relation has no LHS chain even up to equivalence.
    pub fn new(schema: Arc<Schema>, sigma: &FdSet) -> Result<Self> {
        let cover = canonical_cover(&schema, sigma)?;
        let chains = schema
            .relations()
            .map(|decl| Ok((decl.name().clone(), cover.lhs_chain(decl.name())?)))
            .collect::<Result<_>>()?;
        Ok(ChainCover {
            schema,
            cover,
            chains,
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn cover(&self) -> &CanonicalCover {
        &self.cover
    }

    pub fn fd_set(&self) -> FdSet {
        self.cover.to_fd_set()
    }

    pub fn chain(&self, relation: &str) -> &LhsChain {
        &self.chains[relation]
    }

    pub fn chains(&self) -> impl Iterator<Item = &LhsChain> {
        self.chains.values()
    }
}

/// Where the primary FD of an atom sits in its relation's chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimaryAnalysis {
    pub relation: Arc<str>,
    /// Index of the primary FD in the chain, if it exists.
    pub primary: Option<usize>,
    pub primary_lhs: AttrSet,
    pub non_primary_lhs: AttrSet,
    /// The FDs strictly before the primary FD (the whole chain when absent).
    pub prefix: Vec<Fd>,
    pub primary_fd: Option<Fd>,
}

impl PrimaryAnalysis {
    /// Variables of `atom` at primary-lhs positions.
    pub fn pvar<'a>(&self, atom: &'a Atom) -> Vec<&'a Variable> {
        let mut vars: Vec<&Variable> = self
            .primary_lhs
            .iter()
            .filter_map(|i| atom.term(i).as_var())
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }

    /// Attributes mentioned by some FD of the primary prefix.
    pub fn prefix_attributes(&self) -> AttrSet {
        self.prefix
            .iter()
            .fold(AttrSet::empty(), |acc, fd| acc.union(fd.attributes()))
    }
}

/// The primary FD of `chain` with respect to `atom`: the first FD whose
/// attributes hold a variable, all earlier FDs being fully constant.
pub fn primary_analysis(chain: &LhsChain, decl: &RelationDecl, atom: &Atom) -> PrimaryAnalysis {
    let vars = atom.variable_positions();
    let primary = chain
        .fds()
        .iter()
        .position(|fd| !fd.attributes().intersection(vars).is_empty());
    match primary {
        Some(i) => {
            let fd = chain.fds()[i].clone();
            PrimaryAnalysis {
                relation: chain.relation().clone(),
                primary: Some(i),
                primary_lhs: fd.lhs(),
                non_primary_lhs: decl.all_attributes().difference(fd.lhs()),
                prefix: chain.fds()[..i].to_vec(),
                primary_fd: Some(fd),
            }
        }
        None => PrimaryAnalysis {
            relation: chain.relation().clone(),
            primary: None,
            primary_lhs: decl.all_attributes(),
            non_primary_lhs: AttrSet::empty(),
            prefix: chain.fds().to_vec(),
            primary_fd: None,
        },
    }
}

/// Primary analyses of every atom of a self-join-free query, in atom order.
pub fn analyze_query(cover: &ChainCover, query: &ConjunctiveQuery) -> Result<Vec<PrimaryAnalysis>> {
    if let Some(r) = query.self_join() {
        return Err(Error::SelfJoin(r.to_string()));
    }
    query
        .atoms()
        .iter()
        .map(|a| {
            let decl = cover.schema().relation(a.relation())?;
            Ok(primary_analysis(cover.chain(a.relation()), decl, a))
        })
        .collect()
}

/// Indices of the atoms in the complex part: atoms with a constant or a
/// liaison variable at a non-primary-lhs position that no primary-prefix FD
/// mentions.
pub fn complex_part(cover: &ChainCover, query: &ConjunctiveQuery) -> Result<Vec<usize>> {
    let analyses = analyze_query(cover, query)?;
    Ok(complex_part_with(query, &analyses))
}

pub(crate) fn complex_part_with(query: &ConjunctiveQuery, analyses: &[PrimaryAnalysis]) -> Vec<usize> {
    query
        .atoms()
        .iter()
        .zip(analyses)
        .enumerate()
        .filter(|(_, (atom, pa))| {
            let free = pa.non_primary_lhs.difference(pa.prefix_attributes());
            free.iter().any(|i| match atom.term(i) {
                Term::Const(_) => true,
                Term::Var(x) => query.is_liaison(x),
            })
        })
        .map(|(i, _)| i)
        .collect()
}

/// `D` split into the facts conflicting with the query's primary prefixes,
/// the facts independent of them, and the rest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trim {
    pub d_conf: Database,
    pub d_ind: Database,
    pub d_core: Database,
}

pub fn trim(db: &Database, cover: &ChainCover, query: &ConjunctiveQuery) -> Result<Trim> {
    let analyses = analyze_query(cover, query)?;
    Ok(trim_with(db, query, &analyses))
}

pub(crate) fn trim_with(db: &Database, query: &ConjunctiveQuery, analyses: &[PrimaryAnalysis]) -> Trim {
    let mut conf = Vec::new();
    let mut ind = Vec::new();
    let mut core = Vec::new();
    for f in db.facts() {
        let hit = query
            .atoms()
            .iter()
            .zip(analyses)
            .find(|(a, _)| a.relation() == f.relation());
        let Some((atom, pa)) = hit else {
            core.push(f.clone());
            continue;
        };
        let matches = |i: usize| match atom.term(i) {
            Term::Const(c) => f.value(i) == c,
            // Prefix positions only hold constants; a variable never disagrees.
            Term::Var(_) => true,
        };
        let conflicting = pa
            .prefix
            .iter()
            .any(|fd| fd.lhs().iter().all(matches) && !fd.rhs().iter().all(matches));
        if conflicting {
            conf.push(f.clone());
        } else if pa.prefix.iter().any(|fd| !fd.lhs().iter().all(matches)) {
            ind.push(f.clone());
        } else {
            core.push(f.clone());
        }
    }
    Trim {
        d_conf: db.with_facts(conf.into_iter().collect()),
        d_ind: db.with_facts(ind.into_iter().collect()),
        d_core: db.with_facts(core.into_iter().collect()),
    }
}

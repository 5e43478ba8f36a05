//! Schemas, facts, databases, functional dependencies and conjunctive queries.
//!
//! Everything here is immutable once built. Relation names, attribute names
//! and constants are reference counted strings so that the subset-heavy
//! algorithms (trimming, repairs, samples) clone cheaply.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Largest supported arity; attribute sets are 64-bit masks.
pub const MAX_ARITY: usize = 64;

/// A set of attribute positions of one relation, as a bit mask over the
/// declared attribute order.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AttrSet(u64);

impl AttrSet {
    pub const fn empty() -> Self {
        AttrSet(0)
    }

    pub fn full(arity: usize) -> Self {
        if arity >= 64 {
            AttrSet(u64::MAX)
        } else {
            AttrSet((1u64 << arity) - 1)
        }
    }

    pub fn singleton(index: usize) -> Self {
        AttrSet(1u64 << index)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        indices
            .into_iter()
            .fold(AttrSet::empty(), |acc, i| acc.with(i))
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn with(self, index: usize) -> Self {
        AttrSet(self.0 | (1u64 << index))
    }

    pub fn without(self, index: usize) -> Self {
        AttrSet(self.0 & !(1u64 << index))
    }

    pub fn contains(self, index: usize) -> bool {
        index < 64 && self.0 & (1u64 << index) != 0
    }

    pub fn union(self, other: Self) -> Self {
        AttrSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        AttrSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        AttrSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Positions in ascending (declared) order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl fmt::Debug for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A database constant.
///
/// `Fresh` constants are never produced by the parsers; the safety check uses
/// them when it needs a constant guaranteed not to occur anywhere else.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Constant {
    Named(Arc<str>),
    Fresh(u32),
}

impl Constant {
    pub fn new(value: impl AsRef<str>) -> Self {
        Constant::Named(Arc::from(value.as_ref()))
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Constant::Named(s) => Some(s),
            Constant::Fresh(_) => None,
        }
    }
}

impl fmt::Debug for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Facts print constants bare when they are plain tokens, quoted otherwise.
impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Named(s) if is_bare_token(s) => f.write_str(s),
            Constant::Named(s) => write_quoted(f, s),
            Constant::Fresh(n) => write!(f, "${n}"),
        }
    }
}

pub(crate) fn is_bare_token(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn is_numeral(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit())
}

pub(crate) fn write_quoted(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("'")?;
    f.write_str(&s.replace('\'', "''"))?;
    f.write_str("'")
}

/// A relation name with its ordered attribute names.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RelationDecl {
    name: Arc<str>,
    attributes: Vec<Arc<str>>,
}

impl RelationDecl {
    pub fn new<S: AsRef<str>>(name: &str, attributes: &[S]) -> Result<Self> {
        if attributes.is_empty() {
            return Err(Error::NoAttributes(name.to_string()));
        }
        if attributes.len() > MAX_ARITY {
            return Err(Error::ArityTooLarge {
                relation: name.to_string(),
                arity: attributes.len(),
                max: MAX_ARITY,
            });
        }
        let mut seen = BTreeSet::new();
        for a in attributes {
            if !seen.insert(a.as_ref()) {
                return Err(Error::DuplicateAttribute {
                    relation: name.to_string(),
                    attribute: a.as_ref().to_string(),
                });
            }
        }
        Ok(RelationDecl {
            name: Arc::from(name),
            attributes: attributes.iter().map(|a| Arc::from(a.as_ref())).collect(),
        })
    }

    pub fn name(&self) -> &Arc<str> {
        &self.name
    }

    pub fn attributes(&self) -> &[Arc<str>] {
        &self.attributes
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn all_attributes(&self) -> AttrSet {
        AttrSet::full(self.arity())
    }

    pub fn attribute_index(&self, attribute: &str) -> Result<usize> {
        self.attributes
            .iter()
            .position(|a| &**a == attribute)
            .ok_or_else(|| Error::UnknownAttribute {
                relation: self.name.to_string(),
                attribute: attribute.to_string(),
            })
    }

    pub fn attribute_set<S: AsRef<str>>(&self, attributes: &[S]) -> Result<AttrSet> {
        attributes.iter().try_fold(AttrSet::empty(), |acc, a| {
            Ok(acc.with(self.attribute_index(a.as_ref())?))
        })
    }

    /// Attribute names of `set`, in declared order.
    pub fn names(&self, set: AttrSet) -> Vec<&str> {
        set.iter().map(|i| &*self.attributes[i]).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Schema {
    relations: BTreeMap<Arc<str>, RelationDecl>,
}

impl Schema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_relations(decls: impl IntoIterator<Item = RelationDecl>) -> Result<Self> {
        let mut schema = Schema::new();
        for d in decls {
            schema.add(d)?;
        }
        Ok(schema)
    }

    pub fn add(&mut self, decl: RelationDecl) -> Result<()> {
        if self.relations.contains_key(decl.name()) {
            return Err(Error::DuplicateRelation(decl.name().to_string()));
        }
        self.relations.insert(decl.name().clone(), decl);
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Result<&RelationDecl> {
        self.relations
            .get(name)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.relations.contains_key(name)
    }

    /// Relations sorted by name.
    pub fn relations(&self) -> impl Iterator<Item = &RelationDecl> {
        self.relations.values()
    }
}

/// A ground fact `R(c1, ..., cn)`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fact {
    relation: Arc<str>,
    values: Vec<Constant>,
}

impl Fact {
    pub fn new(relation: impl Into<Arc<str>>, values: Vec<Constant>) -> Self {
        Fact {
            relation: relation.into(),
            values,
        }
    }

    /// Convenience constructor from plain strings.
    pub fn parse_values(relation: &str, values: &[&str]) -> Self {
        Fact::new(relation, values.iter().map(Constant::new).collect())
    }

    pub fn relation(&self) -> &Arc<str> {
        &self.relation
    }

    pub fn values(&self) -> &[Constant] {
        &self.values
    }

    pub fn value(&self, index: usize) -> &Constant {
        &self.values[index]
    }

    /// True when both facts carry the same values on every position of `set`.
    pub fn agrees_on(&self, other: &Fact, set: AttrSet) -> bool {
        set.iter().all(|i| self.values[i] == other.values[i])
    }

    pub fn project(&self, set: AttrSet) -> Vec<Constant> {
        set.iter().map(|i| self.values[i].clone()).collect()
    }
}

impl fmt::Debug for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Fact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str(")")
    }
}

/// A finite set of facts over a schema.
#[derive(Clone)]
pub struct Database {
    schema: Arc<Schema>,
    facts: BTreeSet<Fact>,
}

impl Database {
    pub fn new(schema: Arc<Schema>) -> Self {
        Database {
            schema,
            facts: BTreeSet::new(),
        }
    }

    pub fn from_facts(schema: Arc<Schema>, facts: impl IntoIterator<Item = Fact>) -> Result<Self> {
        let mut db = Database::new(schema);
        for f in facts {
            db.insert(f)?;
        }
        Ok(db)
    }

    /// Inserts a fact after checking it against the schema. Returns whether it
    /// was new.
    pub fn insert(&mut self, fact: Fact) -> Result<bool> {
        let decl = self.schema.relation(fact.relation())?;
        if decl.arity() != fact.values.len() {
            return Err(Error::ArityMismatch {
                relation: fact.relation.to_string(),
                expected: decl.arity(),
                found: fact.values.len(),
            });
        }
        Ok(self.facts.insert(fact))
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> + '_ {
        self.facts.iter()
    }

    pub fn fact_set(&self) -> &BTreeSet<Fact> {
        &self.facts
    }

    /// The facts of relation `relation`, in sorted order.
    pub fn facts_of<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a Fact> + 'a {
        let start = Fact::new(relation, Vec::new());
        self.facts
            .range(start..)
            .take_while(move |f| &*f.relation == relation)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    /// Active domain: every constant occurring in some fact, sorted.
    pub fn adom(&self) -> BTreeSet<Constant> {
        self.facts
            .iter()
            .flat_map(|f| f.values.iter().cloned())
            .collect()
    }

    /// Same schema, the facts satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Fact) -> bool) -> Database {
        Database {
            schema: self.schema.clone(),
            facts: self.facts.iter().filter(|f| keep(f)).cloned().collect(),
        }
    }

    /// Same schema, an arbitrary subset of facts. The caller guarantees the
    /// facts are valid for the schema (typically they come from `self`).
    pub fn with_facts(&self, facts: BTreeSet<Fact>) -> Database {
        Database {
            schema: self.schema.clone(),
            facts,
        }
    }

    pub fn difference(&self, other: &Database) -> Database {
        self.filter(|f| !other.contains(f))
    }

    pub fn union(&self, other: &Database) -> Database {
        let mut facts = self.facts.clone();
        facts.extend(other.facts.iter().cloned());
        self.with_facts(facts)
    }

    pub fn is_subset(&self, other: &Database) -> bool {
        self.facts.is_subset(&other.facts)
    }
}

impl PartialEq for Database {
    fn eq(&self, other: &Self) -> bool {
        self.facts == other.facts
            && (Arc::ptr_eq(&self.schema, &other.schema) || self.schema == other.schema)
    }
}

impl Eq for Database {}

// Hashing covers only the facts; equal databases always share a schema in
// practice and hashing the schema on every memo lookup is wasted work.
impl Hash for Database {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.facts.hash(state);
    }
}

impl fmt::Debug for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.facts.iter()).finish()
    }
}

/// One fact per line, in sorted order.
impl fmt::Display for Database {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for fact in &self.facts {
            writeln!(f, "{fact}")?;
        }
        Ok(())
    }
}

/// A functional dependency `R : X -> Y`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fd {
    relation: Arc<str>,
    lhs: AttrSet,
    rhs: AttrSet,
}

impl Fd {
    pub fn new(relation: impl Into<Arc<str>>, lhs: AttrSet, rhs: AttrSet) -> Self {
        Fd {
            relation: relation.into(),
            lhs,
            rhs,
        }
    }

    /// Builds an FD from attribute names, resolving them against `schema`.
    pub fn named<S: AsRef<str>>(schema: &Schema, relation: &str, lhs: &[S], rhs: &[S]) -> Result<Self> {
        let decl = schema.relation(relation)?;
        Ok(Fd::new(
            decl.name().clone(),
            decl.attribute_set(lhs)?,
            decl.attribute_set(rhs)?,
        ))
    }

    pub fn relation(&self) -> &Arc<str> {
        &self.relation
    }

    pub fn lhs(&self) -> AttrSet {
        self.lhs
    }

    pub fn rhs(&self) -> AttrSet {
        self.rhs
    }

    pub fn attributes(&self) -> AttrSet {
        self.lhs.union(self.rhs)
    }

    /// `{f, g}` violates this FD.
    pub fn violated_by(&self, f: &Fact, g: &Fact) -> bool {
        f.relation == self.relation
            && g.relation == self.relation
            && f.agrees_on(g, self.lhs)
            && !f.agrees_on(g, self.rhs)
    }

    /// Renders as `R: A B -> C` using the schema's attribute names.
    pub fn display(&self, schema: &Schema) -> String {
        match schema.relation(&self.relation) {
            Ok(decl) => format!(
                "{}: {} -> {}",
                self.relation,
                decl.names(self.lhs).join(" "),
                decl.names(self.rhs).join(" ")
            ),
            Err(_) => format!("{}: {:?} -> {:?}", self.relation, self.lhs, self.rhs),
        }
    }
}

/// A set of FDs over a schema.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FdSet {
    fds: Vec<Fd>,
}

impl FdSet {
    pub fn new(schema: &Schema, fds: impl IntoIterator<Item = Fd>) -> Result<Self> {
        let mut set = FdSet::default();
        for fd in fds {
            let decl = schema.relation(fd.relation())?;
            let all = decl.all_attributes();
            if !fd.lhs.union(fd.rhs).is_subset(all) {
                return Err(Error::UnknownAttribute {
                    relation: fd.relation.to_string(),
                    attribute: format!("#{}", fd.lhs.union(fd.rhs).difference(all).to_vec()[0]),
                });
            }
            if !set.fds.contains(&fd) {
                set.fds.push(fd);
            }
        }
        Ok(set)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub(crate) fn from_vec_unchecked(fds: Vec<Fd>) -> Self {
        FdSet { fds }
    }

    pub fn fds(&self) -> &[Fd] {
        &self.fds
    }

    pub fn for_relation<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a Fd> + 'a {
        self.fds.iter().filter(move |fd| &*fd.relation == relation)
    }

    pub fn len(&self) -> usize {
        self.fds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fds.is_empty()
    }

    /// `{f, g}` satisfies every FD of the set.
    pub fn consistent_pair(&self, f: &Fact, g: &Fact) -> bool {
        f.relation != g.relation || self.for_relation(&f.relation).all(|fd| !fd.violated_by(f, g))
    }

    pub fn is_consistent(&self, db: &Database) -> bool {
        let facts: Vec<&Fact> = db.facts().collect();
        facts
            .iter()
            .enumerate()
            .all(|(i, f)| facts[i + 1..].iter().all(|g| self.consistent_pair(f, g)))
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Variable(Arc<str>);

impl Variable {
    pub fn new(name: impl AsRef<str>) -> Self {
        Variable(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Term {
    Const(Constant),
    Var(Variable),
}

impl Term {
    pub fn var(name: &str) -> Self {
        Term::Var(Variable::new(name))
    }

    pub fn constant(value: &str) -> Self {
        Term::Const(Constant::new(value))
    }

    pub fn as_var(&self) -> Option<&Variable> {
        match self {
            Term::Var(v) => Some(v),
            Term::Const(_) => None,
        }
    }

    pub fn is_const(&self) -> bool {
        matches!(self, Term::Const(_))
    }
}

/// Query syntax: numerals bare, any other constant quoted, variables bare.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(Constant::Named(s)) if is_numeral(s) => f.write_str(s),
            Term::Const(Constant::Named(s)) => write_quoted(f, s),
            Term::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Atom {
    relation: Arc<str>,
    terms: Vec<Term>,
}

impl Atom {
    pub fn new(relation: impl Into<Arc<str>>, terms: Vec<Term>) -> Self {
        Atom {
            relation: relation.into(),
            terms,
        }
    }

    pub fn relation(&self) -> &Arc<str> {
        &self.relation
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn term(&self, index: usize) -> &Term {
        &self.terms[index]
    }

    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        self.terms.iter().filter_map(Term::as_var)
    }

    /// Positions holding a variable.
    pub fn variable_positions(&self) -> AttrSet {
        AttrSet::from_indices(
            self.terms
                .iter()
                .enumerate()
                .filter(|(_, t)| !t.is_const())
                .map(|(i, _)| i),
        )
    }

    fn substitute(&self, x: &Variable, c: &Constant) -> Atom {
        Atom {
            relation: self.relation.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| match t {
                    Term::Var(v) if v == x => Term::Const(c.clone()),
                    other => other.clone(),
                })
                .collect(),
        }
    }

    /// The fact obtained by applying `h`; `None` if some variable is unbound.
    pub fn ground(&self, h: &Substitution) -> Option<Fact> {
        let values = self
            .terms
            .iter()
            .map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(v) => h.get(v).cloned(),
            })
            .collect::<Option<Vec<_>>>()?;
        Some(Fact::new(self.relation.clone(), values))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.relation)?;
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str(")")
    }
}

/// A variable assignment.
pub type Substitution = BTreeMap<Variable, Constant>;

/// A Boolean conjunctive query: a nonempty list of atoms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct ConjunctiveQuery {
    atoms: Vec<Atom>,
}

impl ConjunctiveQuery {
    pub fn new(schema: &Schema, atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyQuery);
        }
        for a in &atoms {
            let decl = schema.relation(&a.relation)?;
            if decl.arity() != a.terms.len() {
                return Err(Error::ArityMismatch {
                    relation: a.relation.to_string(),
                    expected: decl.arity(),
                    found: a.terms.len(),
                });
            }
        }
        Ok(ConjunctiveQuery { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn variables(&self) -> BTreeSet<Variable> {
        self.atoms.iter().flat_map(|a| a.variables().cloned()).collect()
    }

    pub fn constants(&self) -> BTreeSet<Constant> {
        self.atoms
            .iter()
            .flat_map(|a| a.terms.iter())
            .filter_map(|t| match t {
                Term::Const(c) => Some(c.clone()),
                Term::Var(_) => None,
            })
            .collect()
    }

    /// Number of occurrences of `x` across all atoms and positions.
    pub fn occurrences(&self, x: &Variable) -> usize {
        self.atoms.iter().flat_map(|a| a.variables()).filter(|v| *v == x).count()
    }

    /// A liaison variable occurs more than once in the query.
    pub fn is_liaison(&self, x: &Variable) -> bool {
        self.occurrences(x) > 1
    }

    pub fn is_self_join_free(&self) -> bool {
        self.self_join().is_none()
    }

    /// The first relation used by two atoms, if any.
    pub fn self_join(&self) -> Option<&Arc<str>> {
        let mut seen = BTreeSet::new();
        self.atoms
            .iter()
            .map(|a| &a.relation)
            .find(|r| !seen.insert(Arc::clone(r)))
    }

    pub fn atom_for(&self, relation: &str) -> Option<&Atom> {
        self.atoms.iter().find(|a| &*a.relation == relation)
    }

    /// `Q_{x -> c}`: every occurrence of `x` replaced by `c`, atom order kept.
    pub fn substitute(&self, x: &Variable, c: &Constant) -> ConjunctiveQuery {
        ConjunctiveQuery {
            atoms: self.atoms.iter().map(|a| a.substitute(x, c)).collect(),
        }
    }

    /// The sub-query made of the atoms at `indices` (in the given order).
    pub fn sub_query(&self, indices: &[usize]) -> ConjunctiveQuery {
        ConjunctiveQuery {
            atoms: indices.iter().map(|&i| self.atoms[i].clone()).collect(),
        }
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Ans() :- ")?;
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(".")
    }
}

/// Every homomorphism from `query` into `db`, sorted lexicographically by
/// variable bindings.
pub fn enumerate_homomorphisms(query: &ConjunctiveQuery, db: &Database) -> Vec<Substitution> {
    let mut out = Vec::new();
    let mut binding = Substitution::new();
    search(query.atoms(), db, &mut binding, &mut |h| {
        out.push(h.clone());
        true
    });
    out.sort();
    out.dedup();
    out
}

/// `db |= query`.
pub fn entails(db: &Database, query: &ConjunctiveQuery) -> bool {
    let mut found = false;
    let mut binding = Substitution::new();
    search(query.atoms(), db, &mut binding, &mut |_| {
        found = true;
        false
    });
    found
}

/// Backtracking join. `visit` returns false to stop the search; the return
/// value reports whether the search ran to completion.
fn search(
    atoms: &[Atom],
    db: &Database,
    binding: &mut Substitution,
    visit: &mut dyn FnMut(&Substitution) -> bool,
) -> bool {
    let Some((atom, rest)) = atoms.split_first() else {
        return visit(binding);
    };
    for fact in db.facts_of(&atom.relation) {
        if fact.values.len() != atom.terms.len() {
            continue;
        }
        let mut bound_here = Vec::new();
        let mut ok = true;
        for (t, v) in atom.terms.iter().zip(fact.values.iter()) {
            match t {
                Term::Const(c) => {
                    if c != v {
                        ok = false;
                        break;
                    }
                }
                Term::Var(x) => match binding.get(x) {
                    Some(b) if b != v => {
                        ok = false;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        binding.insert(x.clone(), v.clone());
                        bound_here.push(x.clone());
                    }
                },
            }
        }
        let keep_going = !ok || search(rest, db, binding, visit);
        for x in bound_here {
            binding.remove(&x);
        }
        if !keep_going {
            return false;
        }
    }
    true
}

//! Instance generators: the 3CNF gap gadget, the low-frequency family, the
//! query-to-count reduction and the gap-threshold arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::{Atom, ConjunctiveQuery, Constant, Database, Fact, Fd, FdSet, RelationDecl, Schema, Term, Variable};

/// A literal over variable `var` (numbered from 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub var: u32,
    pub positive: bool,
}

impl Literal {
    pub fn new(var: u32, positive: bool) -> Self {
        Literal { var, positive }
    }

    /// From a DIMACS integer: `3` is x3, `-3` is its negation.
    pub fn from_dimacs(n: i64) -> Option<Self> {
        let var = u32::try_from(n.unsigned_abs()).ok().filter(|&v| v > 0)?;
        Some(Literal { var, positive: n > 0 })
    }

    /// Truth value of the literal when its variable is set to `v`.
    pub fn lval(self, v: u8) -> u8 {
        if self.positive {
            v
        } else {
            1 - v
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.var)
        } else {
            write!(f, "-{}", self.var)
        }
    }
}

/// A formula in conjunctive normal form with exactly three literals over
/// distinct variables per clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cnf3 {
    declared_vars: u32,
    clauses: Vec<[Literal; 3]>,
}

impl Cnf3 {
    pub fn new(declared_vars: u32, clauses: Vec<[Literal; 3]>) -> Result<Self> {
        for (i, c) in clauses.iter().enumerate() {
            if c.iter().any(|l| l.var == 0 || l.var > declared_vars) {
                return Err(Error::Precondition(format!("clause {} mentions an undeclared variable", i + 1)));
            }
            if c[0].var == c[1].var || c[0].var == c[2].var || c[1].var == c[2].var {
                return Err(Error::Precondition(format!("clause {} repeats a variable", i + 1)));
            }
        }
        Ok(Cnf3 { declared_vars, clauses })
    }

    /// Parses DIMACS CNF restricted to three-literal clauses.
    pub fn parse_dimacs(text: &str) -> Result<Self> {
        let mut declared: Option<(u32, usize)> = None;
        let mut clauses = Vec::new();
        let mut current: Vec<Literal> = Vec::new();
        let mut last_line = 0;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            last_line = lineno;
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if line.starts_with('%') {
                break;
            }
            let err = |message: String| Error::Parse { line: lineno, message };
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                if declared.is_some() || parts.len() != 4 || parts[1] != "cnf" {
                    return Err(err("expected a single `p cnf VARS CLAUSES` header".into()));
                }
                let vars = parts[2].parse().map_err(|_| err(format!("bad variable count `{}`", parts[2])))?;
                let cls = parts[3].parse().map_err(|_| err(format!("bad clause count `{}`", parts[3])))?;
                declared = Some((vars, cls));
                continue;
            }
            let Some((vars, _)) = declared else {
                return Err(err("clause before the `p cnf` header".into()));
            };
            for tok in line.split_whitespace() {
                let n: i64 = tok.parse().map_err(|_| err(format!("bad literal `{tok}`")))?;
                if n == 0 {
                    let [a, b, c] = <[Literal; 3]>::try_from(std::mem::take(&mut current))
                        .map_err(|v: Vec<Literal>| err(format!("clause has {} literals, expected 3", v.len())))?;
                    clauses.push([a, b, c]);
                    continue;
                }
                let lit = Literal::from_dimacs(n).filter(|l| l.var <= vars);
                current.push(lit.ok_or_else(|| err(format!("literal {n} is out of range")))?);
            }
        }
        let err = |message: String| Error::Parse { line: last_line, message };
        let Some((vars, count)) = declared else {
            return Err(err("missing `p cnf` header".into()));
        };
        if !current.is_empty() {
            return Err(err("last clause is not terminated by 0".into()));
        }
        if clauses.len() != count {
            return Err(err(format!("header announces {count} clauses, found {}", clauses.len())));
        }
        Cnf3::new(vars, clauses).map_err(|e| err(e.to_string()))
    }

    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.declared_vars, self.clauses.len());
        for c in &self.clauses {
            out.push_str(&format!("{} {} {} 0\n", c[0], c[1], c[2]));
        }
        out
    }

    pub fn declared_vars(&self) -> u32 {
        self.declared_vars
    }

    pub fn clauses(&self) -> &[[Literal; 3]] {
        &self.clauses
    }

    /// Variables that occur in some clause, sorted.
    pub fn variables(&self) -> Vec<u32> {
        self.clauses
            .iter()
            .flatten()
            .map(|l| l.var)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    /// Number of clauses satisfied by `assignment`.
    pub fn satisfied(&self, assignment: &BTreeMap<u32, u8>) -> usize {
        self.clauses
            .iter()
            .filter(|c| c.iter().any(|l| l.lval(assignment[&l.var]) == 1))
            .count()
    }

    /// All assignments to the occurring variables.
    pub fn assignments(&self) -> Result<Vec<BTreeMap<u32, u8>>> {
        let vars = self.variables();
        if vars.len() > 24 {
            return Err(Error::Precondition(format!(
                "{} variables are too many to enumerate assignments",
                vars.len()
            )));
        }
        Ok((0u32..1 << vars.len())
            .map(|bits| vars.iter().enumerate().map(|(i, &v)| (v, (bits >> i & 1) as u8)).collect())
            .collect())
    }
}

/// Name of the constant standing for variable `v`.
pub fn var_constant(v: u32) -> String {
    format!("x{v}")
}

/// Name of the pair constant for copy `j` of clause `i` with value `b`.
pub fn clause_constant(i: usize, j: usize, b: u8) -> String {
    format!("C{i}_{j}|{b}")
}

pub const STAR: &str = "star";

/// Schema `R(Var, VValue, Clause, LValue)` with `Var -> VValue` and
/// `Clause -> LValue`.
pub fn gap_schema() -> (Arc<Schema>, FdSet) {
    let schema = Arc::new(
        Schema::with_relations([RelationDecl::new("R", &["Var", "VValue", "Clause", "LValue"]).unwrap()]).unwrap(),
    );
    let sigma = FdSet::new(
        &schema,
        [
            Fd::named(&schema, "R", &["Var"], &["VValue"]).unwrap(),
            Fd::named(&schema, "R", &["Clause"], &["LValue"]).unwrap(),
        ],
    )
    .unwrap();
    (schema, sigma)
}

/// Name of the clause constant of the anchor facts of variable `v`.
pub fn anchor_constant(v: u32) -> String {
    format!("V{v}")
}

/// The gadget database with `k` copies of every clause: six facts per copy,
/// one conflict fact per copy, and two anchor facts `(x, 0)`, `(x, 1)` per
/// occurring variable. The anchors pin a single truth assignment in every
/// repair, which makes the repair count exactly [`expected_gap_count`].
pub fn gen_gap3sat(phi: &Cnf3, k: usize) -> Result<(Database, FdSet)> {
    let (mut db, sigma) = gen_gap3sat_tabulated(phi, k)?;
    for v in phi.variables() {
        for b in ["0", "1"] {
            db.insert(Fact::parse_values("R", &[&var_constant(v), b, &anchor_constant(v), "0"]))?;
        }
    }
    Ok((db, sigma))
}

/// The gadget without anchor facts: `7km` facts. Repairs whose true-literal
/// facts were all displaced by conflict facts can flip a variable, so its
/// repair count is in general below [`expected_gap_count`].
pub fn gen_gap3sat_tabulated(phi: &Cnf3, k: usize) -> Result<(Database, FdSet)> {
    if k == 0 {
        return Err(Error::Precondition("the growing factor k must be positive".into()));
    }
    let (schema, sigma) = gap_schema();
    let mut db = Database::new(schema);
    for (ci, clause) in phi.clauses().iter().enumerate() {
        let i = ci + 1;
        for j in 1..=k {
            for lit in clause {
                for v in 0..=1u8 {
                    let b = lit.lval(v);
                    db.insert(Fact::parse_values(
                        "R",
                        &[&var_constant(lit.var), &v.to_string(), &clause_constant(i, j, b), &b.to_string()],
                    ))?;
                }
            }
            db.insert(Fact::parse_values("R", &[STAR, STAR, &clause_constant(i, j, 1), "0"]))?;
        }
    }
    Ok((db, sigma))
}

/// `sum over assignments tau of 2^(k * c_tau)`, with `c_tau` the number of
/// satisfied clauses.
pub fn expected_gap_count(phi: &Cnf3, k: usize) -> Result<BigUint> {
    Ok(phi
        .assignments()?
        .iter()
        .map(|tau| BigUint::one() << (k * phi.satisfied(tau)))
        .sum())
}

/// The family `{R(a,a,a,a)} ∪ {R(a,b,c_i,d1), R(a,b,c_i,d2) : i <= n}` with
/// `A1 -> A2`, `A1 A3 -> A4` and the query `R(x,x,y,z)`.
pub fn gen_rfreq_family(n: usize) -> (Database, FdSet, ConjunctiveQuery) {
    let schema = Arc::new(Schema::with_relations([RelationDecl::new("R", &["A1", "A2", "A3", "A4"]).unwrap()]).unwrap());
    let sigma = FdSet::new(
        &schema,
        [
            Fd::named(&schema, "R", &["A1"], &["A2"]).unwrap(),
            Fd::named(&schema, "R", &["A1", "A3"], &["A4"]).unwrap(),
        ],
    )
    .unwrap();
    let mut facts = vec![Fact::parse_values("R", &["a", "a", "a", "a"])];
    for i in 1..=n {
        let c = format!("c{i}");
        facts.push(Fact::parse_values("R", &["a", "b", &c, "d1"]));
        facts.push(Fact::parse_values("R", &["a", "b", &c, "d2"]));
    }
    let db = Database::from_facts(schema.clone(), facts).unwrap();
    let query = ConjunctiveQuery::new(
        &schema,
        vec![Atom::new("R", vec![Term::var("x"), Term::var("x"), Term::var("y"), Term::var("z")])],
    )
    .unwrap();
    (db, sigma, query)
}

/// Output of [`cook_reduce`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CookReduction {
    /// `D` (constants renamed away from the query) together with the frozen
    /// query body.
    pub database: Database,
    /// Images of the answer variables.
    pub tuple: Vec<Constant>,
    /// The query with the answer variables replaced by `tuple`.
    pub grounded: ConjunctiveQuery,
    /// Constants of `D` that were renamed.
    pub renamed: BTreeMap<Constant, Constant>,
}

fn fresh_name(base: &str, taken: &BTreeSet<Constant>) -> Constant {
    (0..)
        .map(|i| Constant::new(if i == 0 { base.to_string() } else { format!("{base}_{i}") }))
        .find(|c| !taken.contains(c))
        .expect("unbounded supply of names")
}

/// Builds `D' = D ∪ c(Q)` and `t = c(answer)` so that the repairs of `D'`
/// entailing `Q(t)` are as many as the repairs of `D`.
pub fn cook_reduce(db: &Database, sigma: &FdSet, query: &ConjunctiveQuery, answer: &[Variable]) -> Result<CookReduction> {
    if let Some(r) = query.self_join() {
        return Err(Error::SelfJoin(r.to_string()));
    }
    let vars = query.variables();
    if let Some(x) = answer.iter().find(|x| !vars.contains(x)) {
        return Err(Error::Precondition(format!("answer variable {x} does not occur in the query")));
    }
    if let Some(fd) = sigma
        .fds()
        .iter()
        .find(|fd| fd.lhs().is_empty() && query.atom_for(fd.relation()).is_some())
    {
        return Err(Error::Precondition(format!(
            "FDs with an empty left-hand side on `{}` defeat the reduction",
            fd.relation()
        )));
    }
    let qconsts = query.constants();
    let mut taken: BTreeSet<Constant> = db.adom().union(&qconsts).cloned().collect();
    let mut renamed = BTreeMap::new();
    for c in db.adom().intersection(&qconsts) {
        let fresh = fresh_name(&format!("d_{}", c.as_str().unwrap_or("c")), &taken);
        taken.insert(fresh.clone());
        renamed.insert(c.clone(), fresh);
    }
    let mut database = db.with_facts(
        db.facts()
            .map(|f| {
                Fact::new(
                    f.relation().clone(),
                    f.values().iter().map(|v| renamed.get(v).unwrap_or(v).clone()).collect(),
                )
            })
            .collect(),
    );
    let mut frozen = BTreeMap::new();
    for x in &vars {
        let c = fresh_name(&format!("q_{}", x.name()), &taken);
        taken.insert(c.clone());
        frozen.insert(x.clone(), c);
    }
    for atom in query.atoms() {
        database.insert(atom.ground(&frozen).expect("every variable is frozen"))?;
    }
    let tuple: Vec<Constant> = answer.iter().map(|x| frozen[x].clone()).collect();
    let grounded = answer
        .iter()
        .zip(&tuple)
        .fold(query.clone(), |q, (x, c)| q.substitute(x, c));
    Ok(CookReduction {
        database,
        tuple,
        grounded,
        renamed,
    })
}

/// `gamma`, `epsilon` and the growing factor `k` of the gap construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapParams {
    pub gamma: BigRational,
    pub epsilon: BigRational,
    pub k: u32,
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

impl GapParams {
    pub fn new(gamma: BigRational, epsilon: BigRational, k: u32) -> Result<Self> {
        if !(gamma > BigRational::zero() && gamma < rat(1, 8)) {
            return Err(Error::Precondition(format!("gamma must lie in (0, 1/8), got {gamma}")));
        }
        if !(epsilon > BigRational::zero() && epsilon < BigRational::one()) {
            return Err(Error::Precondition(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if k == 0 {
            return Err(Error::Precondition("k must be positive".into()));
        }
        Ok(GapParams { gamma, epsilon, k })
    }

    /// `gamma = 1/16`, `epsilon = 1/3`, `k = 112`.
    pub fn standard() -> Self {
        GapParams::new(rat(1, 16), rat(1, 3), 112).unwrap()
    }

    /// `(7/8 + gamma) * k`.
    pub fn scaled_exponent(&self) -> BigRational {
        (rat(7, 8) + &self.gamma) * BigRational::from_integer(BigInt::from(self.k))
    }
}

fn check_sizes(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 || n > 3 * m {
        return Err(Error::Precondition(format!("need 0 < n <= 3m, got n = {n}, m = {m}")));
    }
    Ok(())
}

/// `2^e > r` for a rational exponent `e` and a positive rational `r`.
fn pow2_exceeds(e: &BigRational, r: &BigRational) -> bool {
    // 2^(p/q) > a/b  iff  2^p * b^q > a^q  (q > 0)
    let (p, q) = (e.numer(), e.denom());
    let q = u32::try_from(q).expect("small denominator");
    let a = r.numer().pow(q);
    let b = r.denom().pow(q);
    let shift = usize::try_from(p.abs()).expect("small exponent");
    if p.is_negative() {
        b > (a << shift)
    } else {
        (b << shift) > a
    }
}

/// Exact test of `2^(km) / (2^n * 2^((7/8 + gamma) k m)) > (1 + eps) / (1 - eps)`.
pub fn gap_ratio_holds(params: &GapParams, m: usize, n: usize) -> Result<bool> {
    check_sizes(m, n)?;
    let km = BigRational::from_integer(BigInt::from(params.k as u64 * m as u64));
    let e = &km - BigRational::from_integer(BigInt::from(n)) - params.scaled_exponent() * BigRational::from_integer(BigInt::from(m));
    let ratio = (BigRational::one() + &params.epsilon) / (BigRational::one() - &params.epsilon);
    Ok(pow2_exceeds(&e, &ratio))
}

/// `(1 + eps) * 2^n * 2^((7/8 + gamma) k m)`; requires `(7/8 + gamma) k` to be
/// an integer.
pub fn gap_threshold(params: &GapParams, m: usize, n: usize) -> Result<BigRational> {
    let s = params.scaled_exponent();
    if !s.is_integer() {
        return Err(Error::Precondition(format!("(7/8 + gamma) * k = {s} is not an integer")));
    }
    let shift = n + usize::try_from(s.to_integer()).expect("small exponent") * m;
    Ok((BigRational::one() + &params.epsilon) * BigRational::from_integer(BigInt::one() << shift))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GapDecision {
    Accept,
    Reject,
}

/// Outcome of [`gap_decide`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapOutcome {
    pub decision: GapDecision,
    pub count: BigUint,
    pub threshold: BigRational,
}

/// Accepts when `counter(db_k(phi))` exceeds the gap threshold. `n` is the
/// number of variables occurring in `phi`.
pub fn gap_decide(
    phi: &Cnf3,
    params: &GapParams,
    counter: impl FnOnce(&Cnf3, &Database, &FdSet) -> Result<BigUint>,
) -> Result<GapOutcome> {
    let (m, n) = (phi.clauses().len(), phi.variables().len());
    check_sizes(m, n)?;
    let threshold = gap_threshold(params, m, n)?;
    let (db, sigma) = gen_gap3sat(phi, params.k as usize)?;
    let count = counter(phi, &db, &sigma)?;
    let decision = if BigRational::from_integer(BigInt::from(count.clone())) > threshold {
        GapDecision::Accept
    } else {
        GapDecision::Reject
    };
    Ok(GapOutcome {
        decision,
        count,
        threshold,
    })
}

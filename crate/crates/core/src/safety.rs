//! Safety of self-join-free queries and the resulting complexity verdict.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fd::{analyze_query, complex_part_with, ChainCover, PrimaryAnalysis};
use crate::model::{ConjunctiveQuery, Constant, FdSet, Schema, Variable};

/// The simplification step that applies to a query, in rule order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    /// The complex part is empty.
    EmptyComplexPart,
    /// The query splits into two variable-disjoint parts (atom indices).
    Split(Vec<usize>, Vec<usize>),
    /// A variable at a primary-lhs position of every complex atom.
    PrimaryLhsVariable(Variable),
    /// A complex atom without primary-lhs variables has this variable on the
    /// right-hand side of its primary FD.
    RhsVariable(Variable),
    /// No rule applies.
    Unsafe,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::EmptyComplexPart => f.write_str("complex part is empty"),
            Rule::Split(a, b) => write!(f, "split into atoms {a:?} and {b:?}"),
            Rule::PrimaryLhsVariable(x) => write!(f, "substitute {x}, a primary-lhs variable of every complex atom"),
            Rule::RhsVariable(x) => write!(f, "substitute {x}, a primary right-hand-side variable"),
            Rule::Unsafe => f.write_str("no rule applies"),
        }
    }
}

/// Connected components of the atoms of `query` under shared variables, each
/// sorted, ordered by their smallest atom index.
pub fn components(query: &ConjunctiveQuery) -> Vec<Vec<usize>> {
    let n = query.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    let atoms = query.atoms();
    for i in 0..n {
        let vi: BTreeSet<&Variable> = atoms[i].variables().collect();
        for (j, other) in atoms.iter().enumerate().skip(i + 1) {
            if other.variables().any(|v| vi.contains(v)) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_of: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        match root_of[r] {
            Some(g) => groups[g].push(i),
            None => {
                root_of[r] = Some(groups.len());
                groups.push(vec![i]);
            }
        }
    }
    groups
}

/// The first rule that applies to `query`, given its primary analyses.
pub(crate) fn select_rule(query: &ConjunctiveQuery, analyses: &[PrimaryAnalysis]) -> Rule {
    let comp = complex_part_with(query, analyses);
    if comp.is_empty() {
        return Rule::EmptyComplexPart;
    }
    let comps = components(query);
    if comps.len() > 1 {
        let rest: Vec<usize> = comps[1..].iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
        return Rule::Split(comps[0].clone(), rest);
    }
    let atoms = query.atoms();
    let mut shared: Option<BTreeSet<&Variable>> = None;
    for &i in &comp {
        let pv: BTreeSet<&Variable> = analyses[i].pvar(&atoms[i]).into_iter().collect();
        shared = Some(match shared {
            None => pv,
            Some(s) => s.intersection(&pv).copied().collect(),
        });
    }
    if let Some(x) = shared.and_then(|s| s.into_iter().next()) {
        return Rule::PrimaryLhsVariable(x.clone());
    }
    for &i in &comp {
        let pa = &analyses[i];
        if !pa.pvar(&atoms[i]).is_empty() {
            continue;
        }
        let Some(fd) = &pa.primary_fd else { continue };
        if let Some(x) = fd.rhs().iter().find_map(|p| atoms[i].term(p).as_var()) {
            return Rule::RhsVariable(x.clone());
        }
    }
    Rule::Unsafe
}

/// The rule that applies to `query` under `cover`.
pub fn next_rule(cover: &ChainCover, query: &ConjunctiveQuery) -> Result<Rule> {
    let analyses = analyze_query(cover, query)?;
    Ok(select_rule(query, &analyses))
}

/// One step of a safety derivation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub depth: usize,
    pub query: String,
    pub rule: Rule,
}

impl fmt::Display for TraceStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:indent$}{}  [{}]", "", self.query, self.rule, indent = 2 * self.depth)
    }
}

/// Outcome of the safety test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyReport {
    pub safe: bool,
    pub trace: Vec<TraceStep>,
    /// Number of recursive invocations.
    pub calls: usize,
}

/// Decides whether `query` is safe for the chain FDs of `cover`.
pub fn is_safe(cover: &ChainCover, query: &ConjunctiveQuery) -> Result<SafetyReport> {
    is_safe_with_pool(cover, query, 0)
}

/// As [`is_safe`], substituting `Constant::Fresh(pool + depth)` at each step.
pub fn is_safe_with_pool(cover: &ChainCover, query: &ConjunctiveQuery, pool: u32) -> Result<SafetyReport> {
    if let Some(r) = query.self_join() {
        return Err(Error::SelfJoin(r.to_string()));
    }
    let mut report = SafetyReport {
        safe: false,
        trace: Vec::new(),
        calls: 0,
    };
    report.safe = recurse(cover, query, 0, pool, &mut report)?;
    Ok(report)
}

fn recurse(cover: &ChainCover, query: &ConjunctiveQuery, depth: usize, pool: u32, report: &mut SafetyReport) -> Result<bool> {
    report.calls += 1;
    let rule = next_rule(cover, query)?;
    report.trace.push(TraceStep {
        depth,
        query: query.to_string(),
        rule: rule.clone(),
    });
    let fresh = || Constant::Fresh(pool + depth as u32);
    match rule {
        Rule::EmptyComplexPart => Ok(true),
        Rule::Split(a, b) => {
            Ok(recurse(cover, &query.sub_query(&a), depth + 1, pool, report)?
                && recurse(cover, &query.sub_query(&b), depth + 1, pool, report)?)
        }
        Rule::PrimaryLhsVariable(x) | Rule::RhsVariable(x) => {
            recurse(cover, &query.substitute(&x, &fresh()), depth + 1, pool, report)
        }
        Rule::Unsafe => Ok(false),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Complexity {
    InFP,
    SharpPComplete,
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Complexity::InFP => "FP",
            Complexity::SharpPComplete => "#P-complete",
        })
    }
}

/// Complexity of computing the relative frequency of a query.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SafetyVerdict {
    pub chain_ok: bool,
    pub safe: bool,
    pub complexity: Complexity,
    pub trace: Vec<TraceStep>,
}

/// Canonicalizes `sigma` and classifies `query`: FP exactly when the FDs have
/// an LHS chain and the query is safe.
pub fn classify(schema: &Arc<Schema>, sigma: &FdSet, query: &ConjunctiveQuery) -> Result<SafetyVerdict> {
    if let Some(r) = query.self_join() {
        return Err(Error::SelfJoin(r.to_string()));
    }
    let cover = match ChainCover::new(schema.clone(), sigma) {
        Ok(c) => c,
        Err(Error::NoLhsChain(_)) => {
            return Ok(SafetyVerdict {
                chain_ok: false,
                safe: false,
                complexity: Complexity::SharpPComplete,
                trace: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };
    let report = is_safe(&cover, query)?;
    Ok(SafetyVerdict {
        chain_ok: true,
        safe: report.safe,
        complexity: if report.safe { Complexity::InFP } else { Complexity::SharpPComplete },
        trace: report.trace,
    })
}

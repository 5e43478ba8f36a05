use thiserror::Error;

/// Errors raised by the engine.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("relation `{relation}` has no attribute `{attribute}`")]
    UnknownAttribute { relation: String, attribute: String },

    #[error("relation `{relation}` expects {expected} values, got {found}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
    },

    #[error("relation `{0}` is declared more than once")]
    DuplicateRelation(String),

    #[error("attribute `{attribute}` appears twice in relation `{relation}`")]
    DuplicateAttribute { relation: String, attribute: String },

    #[error("relation `{0}` must have at least one attribute")]
    NoAttributes(String),

    #[error("relation `{relation}` has {arity} attributes; at most {max} are supported")]
    ArityTooLarge {
        relation: String,
        arity: usize,
        max: usize,
    },

    #[error("a conjunctive query needs at least one atom")]
    EmptyQuery,

    #[error("the query mentions relation `{0}` more than once (self-join)")]
    SelfJoin(String),

    #[error("the FDs of relation `{0}` have no left-hand-side chain, even up to equivalence; use the oracle or the approximate counter")]
    NoLhsChain(String),

    #[error("the query is not safe for the given FDs; exact counting is #P-hard, use `approx`")]
    UnsafeQuery,

    #[error("{facts} facts exceed the brute-force cap of {cap}")]
    OracleCapExceeded { facts: usize, cap: usize },

    #[error("{0}")]
    Precondition(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

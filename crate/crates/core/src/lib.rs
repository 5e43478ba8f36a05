//! Repairs of inconsistent databases under functional dependencies: exact and
//! approximate counts, uniform sampling, and the relative frequency of
//! conjunctive queries across repairs.

pub mod error;
pub mod eval;
pub mod fd;
pub mod fpras;
pub mod gen;
pub mod model;
pub mod repair;
pub mod safety;
pub mod sampler;
pub mod syntax;

pub use error::{Error, Result};

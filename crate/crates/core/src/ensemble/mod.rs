//! Inhomogeneous ZPL distributions: ingestion, kernel density estimates and
//! seeded sampling.

mod dataset;
mod kde;
mod surrogate;

pub use dataset::*;
pub use kde::*;
pub use surrogate::*;

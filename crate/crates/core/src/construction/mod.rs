//! Interval-trace construction: exact boundaries, refinement, enlargement and queries.

mod boundary;
mod svg;
mod trace;

pub use boundary::{enumerated_rational, rat, rational_serde, Boundary};
pub use svg::trace_svg;
pub use trace::{
    CompletionRule, ConstructionTrace, EngineConfig, IntervalLocation, RefineCase, WitnessRecord,
};

use crate::logic::QfType;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstructionError {
    #[error("theory inconsistent: {0}")]
    Inconsistent(String),
    #[error("duplication failure: nontrivial definable closure; no duplicating type for position {position} (point {point}) over {witness}")]
    DuplicationFailure {
        position: usize,
        point: String,
        /// Smallest subtype found, variable 0 being the duplicated position.
        p: Box<QfType>,
        witness: String,
    },
    #[error("axiom unwitnessable against current type: {axiom} at ({})", tuple.join(", "))]
    Unwitnessable { axiom: String, tuple: Vec<String> },
    #[error("insufficient stage depth: {0}")]
    InsufficientDepth(String),
    #[error("width cap of {cap} positions reached")]
    WidthCapExceeded { cap: usize },
    #[error("axiom {axiom} has {width} premise variables, over the cap of {cap}")]
    PremiseTooWide { axiom: String, width: usize, cap: usize },
    #[error("search budget of {0} nodes exhausted")]
    Budget(u64),
    #[error("invalid refinement: {0}")]
    InvalidRefinement(String),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

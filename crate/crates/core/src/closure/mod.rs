//! Automorphisms, definable and algebraic closure, strong amalgamation and duplication.

mod amalgam;
mod automorphism;
mod duplication;

use std::sync::Arc;

pub use amalgam::{
    age_extensions, check_strong_amalgamation, strong_amalgam, structure_type, Amalgam, AmalgamCase, AmalgamReport,
    SEARCH_BUDGET,
};
pub use automorphism::{
    acl, automorphisms, automorphisms_with_bound, canonical_form, dcl, find_automorphism, orbit_sizes,
    refine_colors, AutomorphismSet, DEFAULT_SIZE_BOUND,
};
pub use duplication::{age_types, check_duplication, duplicate, DuplicationReport, DuplicationVerdict};

use crate::logic::{FiniteStructure, LogicError, RelationSymbol};
use crate::theory::EQUIV;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClosureError {
    #[error(
        "structure has {size} elements, over the exhaustive bound of {bound}; \
         larger structures need a generator-only mode, which is not available"
    )]
    SizeOverBound { size: usize, bound: usize },
    #[error("element {0} out of range")]
    OutOfRange(usize),
    #[error("invalid embedding {0}")]
    InvalidEmbedding(String),
    #[error("{0} is not in the age")]
    NotInAge(String),
    #[error("relation {0} is not in the theory signature")]
    SignatureMismatch(String),
    #[error("invalid blowup: {0}")]
    InvalidBlowup(String),
    #[error("search budget of {0} nodes exhausted")]
    SearchBudget(u64),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// `base x n`: element `(a, i)` is `a * n + i`, `Equiv` relates equal first
/// coordinates and base relations hold iff they hold of the first coordinates.
pub fn blowup(base: &FiniteStructure, n: usize) -> Result<FiniteStructure, ClosureError> {
    if n < 1 {
        return Err(ClosureError::InvalidBlowup("n must be at least 1".into()));
    }
    let sig = base.signature();
    if sig.relation_index(EQUIV).is_some() {
        return Err(ClosureError::InvalidBlowup(format!("base already has a relation named {EQUIV}")));
    }
    let mut lifted = (**sig).clone();
    lifted.relations.push(RelationSymbol { name: EQUIV.into(), arity: 2 });
    let equiv = lifted.relations.len() - 1;
    let size = base.size() * n;
    let mut out = FiniteStructure::empty(Arc::new(lifted), size);
    for a in 0..size {
        for b in 0..size {
            if a / n == b / n {
                out.insert(equiv, vec![a, b])?;
            }
        }
    }
    for (rel, sym) in sig.relations.iter().enumerate() {
        for t in base.relation(rel) {
            crate::logic::for_each_tuple(n, sym.arity, |copies| {
                out.insert(rel, t.iter().zip(copies).map(|(&a, &i)| a * n + i).collect())
                    .expect("lifted tuple within range");
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;

//! Theory DSL, relationalization, pithy expansion, age oracle and the built-in catalog.

mod catalog;
mod functional;
mod oracle;
mod parser;
mod pithy;
mod relationalize;
mod spec;

pub use catalog::{blowup_theory, catalog, CATALOG_NAMES, EQUIV};
pub use functional::{graph_relation_name, relational_signature, star, FoFormula, FunctionalStructure};
pub use oracle::{atoms_with, AgeOracle, BudgetExhausted, Violation};
pub use parser::parse_dsl;
pub use pithy::{pithy_expand, PithyAxiom, PithyTheory, UniversalMatrix};
pub use relationalize::relationalize;
pub use spec::{ExtensionAxiom, TheorySpec, UniversalAxiom};

use crate::logic::LogicError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TheoryError {
    #[error("{line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("unbound variable: {0}")]
    UnboundVariable(String),
    #[error("malformed atom: {0}")]
    MalformedAtom(String),
    #[error(
        "constant symbol `{0}` requires relationalization: constants act as choice functions, \
         or selectors, which no exchangeable structure can support directly"
    )]
    ConstantNeedsRelationalization(String),
    #[error("theory `{0}` is not relational; relationalize it first")]
    NotRelational(String),
    #[error("{0}")]
    UnknownCatalog(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
}

/// Parses DSL source. With `relationalize` set, function and constant symbols are
/// translated to relations; otherwise constants are rejected and functions are kept.
pub fn parse_theory(src: &str, relationalize: bool) -> Result<TheorySpec, TheoryError> {
    let spec = parse_dsl(src)?;
    if relationalize {
        return self::relationalize(&spec);
    }
    if let Some(c) = spec.signature.functions.iter().find(|f| f.arity == 0) {
        return Err(TheoryError::ConstantNeedsRelationalization(c.name.clone()));
    }
    Ok(spec)
}

#[cfg(test)]
mod tests;

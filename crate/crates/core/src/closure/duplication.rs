use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logic::{for_each_tuple, QfType, Truth};
use crate::theory::{atoms_with, AgeOracle};

use super::{canonical_form, SEARCH_BUDGET};

/// Verdict for one type `p(x, z)`: a duplicating `q(x, z, y)` or none.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicationVerdict {
    pub p: QfType,
    pub q: Option<QfType>,
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicationReport {
    pub width_bound: usize,
    pub checked: usize,
    pub passed: bool,
    /// First type without a duplicating extension, in enumeration order.
    pub counterexample: Option<QfType>,
    pub verdicts: Vec<DuplicationVerdict>,
}

/// Complete consistent non-redundant types of width `width`, one per isomorphism
/// class fixing variable 0.
pub fn age_types(oracle: &AgeOracle, width: usize) -> Vec<QfType> {
    let mut t = QfType::new(oracle.signature().clone(), width);
    let atoms = atoms_with(oracle.signature(), width, &[]);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    if width == 0 || !oracle.consistent_with(&t) {
        return out;
    }
    oracle.for_each_completion(&mut t, &atoms, &mut |p| {
        if seen.insert(canonical_form(&p.to_structure(), 1)) {
            out.push(p.clone());
        }
        true
    });
    out
}

/// Searches for `q(x, z, y)`, with `y` the last variable, implying `p(x, z)` and `p(y, z)`.
///
/// The atoms mentioning both `x` and `y` are decided depth first, false before true.
pub fn duplicate(oracle: &AgeOracle, p: &QfType) -> Result<Option<QfType>, u64> {
    let w = p.width();
    let sig = oracle.signature().clone();
    let mut q = QfType::new(sig.clone(), w + 1);
    let mut buf = Vec::new();
    for rel in 0..sig.relations.len() {
        for_each_tuple(w, sig.arity(rel), |tu| {
            let v = p.atom(rel, tu);
            q.set_atom(rel, tu, v);
            buf.clear();
            buf.extend(tu.iter().map(|&a| if a == 0 { w } else { a }));
            q.set_atom(rel, &buf, v);
        });
    }
    if !oracle.consistent_with(&q) {
        return Ok(None);
    }
    let atoms: Vec<(usize, Vec<usize>)> =
        atoms_with(&sig, w + 1, &[]).into_iter().filter(|(rel, tu)| q.atom(*rel, tu) == Truth::Unknown).collect();
    let mut budget = SEARCH_BUDGET;
    match oracle.complete(&mut q, &atoms, &|_| Truth::False, &mut budget) {
        Ok(true) => Ok(Some(q)),
        Ok(false) => Ok(None),
        Err(_) => Err(SEARCH_BUDGET),
    }
}

/// Checks duplication for every type of width `1..=width_bound` in the age.
pub fn check_duplication(oracle: &AgeOracle, width_bound: usize) -> DuplicationReport {
    let types: Vec<QfType> = (1..=width_bound).flat_map(|w| age_types(oracle, w)).collect();
    let verdicts: Vec<DuplicationVerdict> = types
        .into_par_iter()
        .map(|p| match duplicate(oracle, &p) {
            Ok(q) => DuplicationVerdict { p, q, exhausted: false },
            Err(_) => DuplicationVerdict { p, q: None, exhausted: true },
        })
        .collect();
    let counterexample = verdicts.iter().find(|v| v.q.is_none()).map(|v| v.p.clone());
    DuplicationReport {
        width_bound,
        checked: verdicts.len(),
        passed: counterexample.is_none(),
        counterexample,
        verdicts,
    }
}

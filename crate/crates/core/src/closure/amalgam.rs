use std::collections::BTreeSet;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::logic::{for_each_tuple, FiniteStructure, QfType, Signature, Truth};
use crate::theory::{atoms_with, AgeOracle};

use super::{canonical_form, ClosureError};

/// Node budget for a single completion search.
pub const SEARCH_BUDGET: u64 = 5_000_000;

/// A strong amalgam `D` with the embeddings of `B` and `C` into it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Amalgam {
    pub d: FiniteStructure,
    pub from_b: Vec<usize>,
    pub from_c: Vec<usize>,
}

/// The type of `s` over the oracle's signature; relations missing from `s` stay undecided.
pub fn structure_type(s: &FiniteStructure, sig: &Arc<Signature>) -> Result<QfType, ClosureError> {
    let own = s.signature();
    for sym in &own.relations {
        match sig.relation_index(&sym.name) {
            Some(r) if sig.arity(r) == sym.arity => {}
            _ => return Err(ClosureError::SignatureMismatch(sym.name.clone())),
        }
    }
    let mut t = QfType::new(sig.clone(), s.size());
    for (rel, sym) in own.relations.iter().enumerate() {
        let target = sig.relation_index(&sym.name).expect("checked");
        for_each_tuple(s.size(), sym.arity, |tu| t.set_atom(target, tu, Truth::from_bool(s.holds(rel, tu))));
    }
    Ok(t)
}

fn check_embedding(a: &FiniteStructure, b: &FiniteStructure, emb: &[usize], name: &str) -> Result<(), ClosureError> {
    let bad = |msg: String| Err(ClosureError::InvalidEmbedding(format!("{name}: {msg}")));
    if **a.signature() != **b.signature() {
        return bad("signatures differ".into());
    }
    if emb.len() != a.size() {
        return bad(format!("expected {} images, got {}", a.size(), emb.len()));
    }
    if let Some(&x) = emb.iter().find(|&&x| x >= b.size()) {
        return bad(format!("image {x} out of range"));
    }
    if emb.iter().collect::<BTreeSet<_>>().len() != emb.len() {
        return bad("not injective".into());
    }
    let sig = a.signature();
    for rel in 0..sig.relations.len() {
        let mut ok = true;
        for_each_tuple(a.size(), sig.arity(rel), |t| {
            let img: Vec<usize> = t.iter().map(|&x| emb[x]).collect();
            ok &= a.holds(rel, t) == b.holds(rel, &img);
        });
        if !ok {
            return bad(format!("relation {} not preserved", sig.relations[rel].name));
        }
    }
    Ok(())
}

/// Glues `b` and `c` over `a` without identifying points outside `a`.
///
/// Cross atoms are decided depth first in canonical order, all-false first, so the
/// free amalgam is returned whenever it lies in the age.
pub fn strong_amalgam(
    a: &FiniteStructure,
    b: &FiniteStructure,
    c: &FiniteStructure,
    emb_b: &[usize],
    emb_c: &[usize],
    oracle: &AgeOracle,
) -> Result<Option<Amalgam>, ClosureError> {
    check_embedding(a, b, emb_b, "A -> B")?;
    check_embedding(a, c, emb_c, "A -> C")?;
    let sig = oracle.signature().clone();
    let nb = b.size();
    let mut from_c = vec![usize::MAX; c.size()];
    for (x, &y) in emb_c.iter().enumerate() {
        from_c[y] = emb_b[x];
    }
    let mut next = nb;
    for slot in from_c.iter_mut().filter(|s| **s == usize::MAX) {
        *slot = next;
        next += 1;
    }
    let nd = next;
    let tb = structure_type(b, &sig)?;
    let tc = structure_type(c, &sig)?;
    if !oracle.consistent_with(&tb) {
        return Err(ClosureError::NotInAge("B".into()));
    }
    if !oracle.consistent_with(&tc) {
        return Err(ClosureError::NotInAge("C".into()));
    }
    let mut t = QfType::new(sig.clone(), nd);
    let mut buf = Vec::new();
    for rel in 0..sig.relations.len() {
        for_each_tuple(nb, sig.arity(rel), |tu| t.set_atom(rel, tu, tb.atom(rel, tu)));
        for_each_tuple(c.size(), sig.arity(rel), |tu| {
            buf.clear();
            buf.extend(tu.iter().map(|&y| from_c[y]));
            let v = tc.atom(rel, tu);
            if v.is_known() {
                t.set_atom(rel, &buf, v);
            }
        });
    }
    // Undecided atoms are the cross atoms and those of relations missing from B and C.
    let atoms: Vec<(usize, Vec<usize>)> =
        atoms_with(&sig, nd, &[]).into_iter().filter(|(rel, tu)| !t.atom(*rel, tu).is_known()).collect();
    if !oracle.consistent_with(&t) {
        return Ok(None);
    }
    let mut budget = SEARCH_BUDGET;
    match oracle.complete(&mut t, &atoms, &|_| Truth::False, &mut budget) {
        Ok(true) => {}
        Ok(false) => return Ok(None),
        Err(_) => return Err(ClosureError::SearchBudget(SEARCH_BUDGET)),
    }
    let full = t.to_structure();
    let mut d = FiniteStructure::empty(b.signature().clone(), nd);
    for (rel, sym) in b.signature().relations.iter().enumerate() {
        let r = sig.relation_index(&sym.name).expect("checked");
        for tu in full.relation(r) {
            d.insert(rel, tu.clone())?;
        }
    }
    Ok(Some(Amalgam { d, from_b: (0..nb).collect(), from_c }))
}

/// One amalgamation problem: `b` and `c` share the substructure on `0..shared`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmalgamCase {
    pub shared: usize,
    pub b: FiniteStructure,
    pub c: FiniteStructure,
    pub witness: Option<Amalgam>,
    pub exhausted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmalgamReport {
    pub bound: usize,
    pub tested: usize,
    pub passed: bool,
    pub cases: Vec<AmalgamCase>,
}

impl AmalgamReport {
    pub fn failures(&self) -> impl Iterator<Item = &AmalgamCase> {
        self.cases.iter().filter(|c| c.witness.is_none())
    }
}

/// Complete consistent types of width `width` extending `base` on its prefix, one per
/// isomorphism class over the prefix.
pub fn age_extensions(oracle: &AgeOracle, base: &QfType, width: usize) -> Vec<QfType> {
    let k = base.width();
    let mut t = base.clone();
    while t.width() < width {
        t.push_var();
    }
    let atoms: Vec<(usize, Vec<usize>)> = atoms_with(oracle.signature(), width, &[])
        .into_iter()
        .filter(|(_, tu)| tu.iter().any(|&x| x >= k))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    if !oracle.consistent_with(&t) {
        return out;
    }
    oracle.for_each_completion(&mut t, &atoms, &mut |q| {
        if seen.insert(canonical_form(&q.to_structure(), k)) {
            out.push(q.clone());
        }
        true
    });
    out
}

/// Tests every strong amalgamation problem with `|B|, |C| <= bound` over the age,
/// up to isomorphism of `B` and `C` over `A`.
pub fn check_strong_amalgamation(oracle: &AgeOracle, bound: usize) -> AmalgamReport {
    let sig = oracle.signature().clone();
    let mut problems = Vec::new();
    for a_size in 0..bound {
        for a in age_extensions(oracle, &QfType::new(sig.clone(), 0), a_size) {
            let mut exts = Vec::new();
            for k in a_size + 1..=bound {
                exts.extend(age_extensions(oracle, &a, k));
            }
            for i in 0..exts.len() {
                for j in i..exts.len() {
                    problems.push((a_size, exts[i].to_structure(), exts[j].to_structure()));
                }
            }
        }
    }
    let cases: Vec<AmalgamCase> = problems
        .into_par_iter()
        .map(|(shared, b, c)| {
            let a = b.restrict(&(0..shared).collect::<Vec<_>>());
            let emb: Vec<usize> = (0..shared).collect();
            let (witness, exhausted) = match strong_amalgam(&a, &b, &c, &emb, &emb, oracle) {
                Ok(w) => (w, false),
                Err(_) => (None, true),
            };
            AmalgamCase { shared, b, c, witness, exhausted }
        })
        .collect();
    AmalgamReport { bound, tested: cases.len(), passed: cases.iter().all(|c| c.witness.is_some()), cases }
}

//! Finite relational structures, quantifier-free types and DNF formulas.

mod formula;
mod qftype;
mod signature;
mod structure;

use std::collections::BTreeMap;

pub use formula::{BoolExpr, Literal, QfFormula, Term};
pub use qftype::{for_each_tuple, QfType, Truth};
pub use signature::{FunctionSymbol, RelationSymbol, Signature};
pub use structure::FiniteStructure;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LogicError {
    #[error("unbound variable: {0}")]
    UnboundVariable(String),
    #[error("malformed atom: {0}")]
    MalformedAtom(String),
    #[error("invalid signature: {0}")]
    InvalidSignature(String),
    #[error("function term in relational formula: {0}")]
    FunctionTerm(String),
    #[error("element {0} out of range")]
    OutOfRange(usize),
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
}

/// Evaluates `formula` in `s` under a named assignment.
pub fn eval_qf(
    formula: &QfFormula,
    s: &FiniteStructure,
    assignment: &BTreeMap<String, usize>,
) -> Result<bool, LogicError> {
    let assign = formula
        .vars
        .iter()
        .map(|v| assignment.get(v).copied().ok_or_else(|| LogicError::UnboundVariable(v.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    formula.eval(s, &assign)
}

/// The complete type of `tuple` in `s`; repeated entries become equalities.
pub fn diagram_of(s: &FiniteStructure, tuple: &[usize]) -> Result<QfType, LogicError> {
    if let Some(&bad) = tuple.iter().find(|&&a| a >= s.size()) {
        return Err(LogicError::OutOfRange(bad));
    }
    let sig = s.signature().clone();
    let mut t = QfType::new(sig.clone(), tuple.len());
    for i in 0..tuple.len() {
        for j in 0..i {
            if tuple[i] == tuple[j] {
                t.set_equal(i, j);
            }
        }
    }
    let mut buf = Vec::new();
    for rel in 0..sig.relations.len() {
        for_each_tuple(tuple.len(), sig.arity(rel), |idx| {
            buf.clear();
            buf.extend(idx.iter().map(|&i| tuple[i]));
            t.set_atom(rel, idx, Truth::from_bool(s.holds(rel, &buf)));
        });
    }
    Ok(t)
}

/// The substructure on the distinct entries of `tuple`, in order of first occurrence.
pub fn induced_substructure(s: &FiniteStructure, tuple: &[usize]) -> Result<FiniteStructure, LogicError> {
    if let Some(&bad) = tuple.iter().find(|&&a| a >= s.size()) {
        return Err(LogicError::OutOfRange(bad));
    }
    let mut elems = Vec::new();
    for &a in tuple {
        if !elems.contains(&a) {
            elems.push(a);
        }
    }
    Ok(s.restrict(&elems))
}

/// Whether `q` implies `p` when `p`'s variable `i` is read as `q`'s variable `positions[i]`.
///
/// Facts decided in `p` must be decided identically in `q`.
pub fn type_extends(q: &QfType, p: &QfType, positions: &[usize]) -> Result<bool, LogicError> {
    if positions.len() != p.width() {
        return Err(LogicError::WidthMismatch(format!(
            "{} positions for a type of width {}",
            positions.len(),
            p.width()
        )));
    }
    if let Some(&bad) = positions.iter().find(|&&a| a >= q.width()) {
        return Err(LogicError::OutOfRange(bad));
    }
    if q.signature() != p.signature() {
        return Err(LogicError::WidthMismatch("signatures differ".into()));
    }
    for i in 0..p.width() {
        for j in 0..i {
            if p.same_class(i, j) != q.same_class(positions[i], positions[j]) {
                return Ok(false);
            }
        }
    }
    let sig = p.signature().clone();
    let mut ok = true;
    let mut buf = Vec::new();
    for rel in 0..sig.relations.len() {
        for_each_tuple(p.width(), sig.arity(rel), |t| {
            let v = p.atom(rel, t);
            if v.is_known() {
                buf.clear();
                buf.extend(t.iter().map(|&i| positions[i]));
                ok &= q.atom(rel, &buf) == v;
            }
        });
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn graph(n: usize, edges: &[(usize, usize)]) -> FiniteStructure {
        let sig = Arc::new(Signature::relational(&[("E", 2)]).unwrap());
        let mut s = FiniteStructure::empty(sig, n);
        for &(a, b) in edges {
            s.insert(0, vec![a, b]).unwrap();
            s.insert(0, vec![b, a]).unwrap();
        }
        s
    }

    fn vars(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn dnf_sorts_and_dedups() {
        let sig = Signature::relational(&[("E", 2)]).unwrap();
        let e = BoolExpr::Or(vec![
            BoolExpr::And(vec![BoolExpr::atom("E", &["y", "x"]), BoolExpr::atom("E", &["x", "y"])]),
            BoolExpr::And(vec![BoolExpr::atom("E", &["x", "y"]), BoolExpr::atom("E", &["y", "x"])]),
            BoolExpr::And(vec![BoolExpr::atom("E", &["x", "y"]), BoolExpr::not(BoolExpr::atom("E", &["x", "y"]))]),
        ]);
        let f = QfFormula::from_expr(&e, &vars(&["x", "y"]), &sig).unwrap();
        assert_eq!(f.disjuncts.len(), 1);
        assert_eq!(f.to_string(), "E(x, y) & E(y, x)");
    }

    #[test]
    fn implication_and_iff_normalize() {
        let sig = Signature::relational(&[("E", 2)]).unwrap();
        let e = BoolExpr::implies(BoolExpr::atom("E", &["x", "y"]), BoolExpr::atom("E", &["y", "x"]));
        let f = QfFormula::from_expr(&e, &vars(&["x", "y"]), &sig).unwrap();
        assert_eq!(f.to_string(), "!E(x, y) | E(y, x)");
        assert_eq!(f.to_clauses().len(), 1);
        let g = BoolExpr::Iff(Box::new(BoolExpr::True), Box::new(BoolExpr::eq("x", "x")));
        assert!(QfFormula::from_expr(&g, &vars(&["x"]), &sig).unwrap().is_true());
    }

    #[test]
    fn unbound_and_malformed_are_reported() {
        let sig = Signature::relational(&[("E", 2)]).unwrap();
        let e = BoolExpr::atom("E", &["x", "z"]);
        assert_eq!(
            QfFormula::from_expr(&e, &vars(&["x"]), &sig),
            Err(LogicError::UnboundVariable("z".into()))
        );
        let e = BoolExpr::atom("E", &["x"]);
        assert!(matches!(QfFormula::from_expr(&e, &vars(&["x"]), &sig), Err(LogicError::MalformedAtom(_))));
        let f = QfFormula::from_expr(&BoolExpr::atom("E", &["x", "x"]), &vars(&["x"]), &sig).unwrap();
        let s = graph(2, &[]);
        assert!(matches!(eval_qf(&f, &s, &BTreeMap::new()), Err(LogicError::UnboundVariable(_))));
    }

    #[test]
    fn path_diagram() {
        let s = graph(3, &[(0, 1), (1, 2)]);
        let d = diagram_of(&s, &[0, 2, 0]).unwrap();
        assert!(d.same_class(0, 2));
        assert!(!d.same_class(0, 1));
        assert_eq!(d.atom(0, &[0, 1]), Truth::False);
        assert!(d.is_complete() && d.respects_equalities());
        let sub = induced_substructure(&s, &[2, 1, 2]).unwrap();
        assert_eq!(sub.size(), 2);
        assert!(sub.holds(0, &[0, 1]));
        let d2 = diagram_of(&s, &[1, 2]).unwrap();
        let full = diagram_of(&s, &[0, 1, 2]).unwrap();
        assert!(type_extends(&full, &d2, &[1, 2]).unwrap());
        assert!(!type_extends(&full, &d2, &[0, 2]).unwrap());
    }

    #[test]
    fn qftype_json_roundtrip_and_growth() {
        let s = graph(4, &[(0, 1), (2, 3), (1, 3)]);
        let mut d = diagram_of(&s, &[0, 1, 2, 3]).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: QfType = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        for _ in 0..5 {
            d.push_var();
        }
        assert_eq!(d.width(), 9);
        assert_eq!(d.atom(0, &[1, 3]), Truth::True);
        assert_eq!(d.atom(0, &[7, 3]), Truth::Unknown);
        let s_json = s.to_json();
        assert_eq!(
            s_json,
            r#"{"signature":{"relations":[{"name":"E","arity":2}]},"size":4,"relations":{"E":[[0,1],[1,0],[1,3],[2,3],[3,1],[3,2]]}}"#
        );
        let s2: FiniteStructure = serde_json::from_str(&s_json).unwrap();
        assert_eq!(s2, s);
    }
}

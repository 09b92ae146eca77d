use serde::{Deserialize, Serialize};

use crate::logic::{BoolExpr, FiniteStructure, Signature};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniversalAxiom {
    pub label: String,
    pub vars: Vec<String>,
    pub body: BoolExpr,
}

/// `forall forall_vars exists exists_vars . body`
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionAxiom {
    pub label: String,
    pub forall: Vec<String>,
    pub exists: Vec<String>,
    pub body: BoolExpr,
}

/// A universal-existential theory as written by the user.
///
/// Forbidden patterns are already compiled into `universal`; `forbidden` keeps
/// the patterns themselves for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheorySpec {
    pub name: String,
    pub signature: Signature,
    pub universal: Vec<UniversalAxiom>,
    pub extension: Vec<ExtensionAxiom>,
    pub forbidden: Vec<FiniteStructure>,
}

impl TheorySpec {
    pub fn is_relational(&self) -> bool {
        self.signature.is_relational()
    }

    /// Universal sentence forbidding an induced copy of `pattern`.
    pub fn forbid_axiom(label: String, pattern: &FiniteStructure) -> UniversalAxiom {
        let n = pattern.size();
        let vars: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
        let mut conj = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                conj.push(BoolExpr::not(BoolExpr::eq(&vars[i], &vars[j])));
            }
        }
        let sig = pattern.signature();
        for (rel, sym) in sig.relations.iter().enumerate() {
            crate::logic::for_each_tuple(n, sym.arity, |t| {
                let names: Vec<&str> = t.iter().map(|&a| vars[a].as_str()).collect();
                let atom = BoolExpr::atom(&sym.name, &names);
                conj.push(if pattern.holds(rel, t) { atom } else { BoolExpr::not(atom) });
            });
        }
        UniversalAxiom { label, vars, body: BoolExpr::not(BoolExpr::And(conj)) }
    }
}

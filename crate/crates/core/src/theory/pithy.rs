use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::logic::{BoolExpr, QfFormula, RelationSymbol, Signature};

use super::{TheoryError, TheorySpec};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniversalMatrix {
    pub label: String,
    pub matrix: QfFormula,
}

/// `forall x_0..x_{k-1} exists y . matrix`, where `matrix.vars` lists the premise
/// variables followed by the witness variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PithyAxiom {
    pub label: String,
    pub premise_width: usize,
    pub matrix: QfFormula,
    /// Mirrors a universal axiom; always internally witnessed and skipped when enlarging.
    pub dummy: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PithyTheory {
    pub name: String,
    pub signature: Arc<Signature>,
    pub auxiliary: Vec<String>,
    pub universal: Vec<UniversalMatrix>,
    pub axioms: Vec<PithyAxiom>,
}

impl PithyTheory {
    pub fn genuine_axioms(&self) -> impl Iterator<Item = &PithyAxiom> {
        self.axioms.iter().filter(|a| !a.dummy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("theory serialization is infallible")
    }

    /// Checks the structural invariants of an expanded theory.
    pub fn check_invariants(&self) -> Result<(), String> {
        for u in &self.universal {
            if !self.axioms.iter().any(|a| a.dummy && a.label == format!("{}#mirror", u.label)) {
                return Err(format!("universal axiom {} has no mirror", u.label));
            }
        }
        for a in &self.axioms {
            if a.matrix.vars.len() != a.premise_width + 1 {
                return Err(format!("axiom {} binds {} variables", a.label, a.matrix.vars.len()));
            }
            for lit in a.matrix.disjuncts.iter().flatten() {
                if lit.vars().iter().any(|&v| v > a.premise_width) {
                    return Err(format!("axiom {} refers to an unbound variable", a.label));
                }
            }
        }
        Ok(())
    }
}

fn atom(name: &str, vars: &[String]) -> BoolExpr {
    let v: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    BoolExpr::atom(name, &v)
}

struct Builder {
    sig: Signature,
    universal: Vec<UniversalMatrix>,
    axioms: Vec<PithyAxiom>,
}

impl Builder {
    fn universal(&mut self, label: String, vars: &[String], body: &BoolExpr) -> Result<(), TheoryError> {
        let matrix = QfFormula::from_expr(body, vars, &self.sig)?;
        let mut mirror_vars = vars.to_vec();
        let mut w = "w".to_string();
        while mirror_vars.contains(&w) {
            w.push('_');
        }
        mirror_vars.push(w);
        let mirror = QfFormula::from_disjuncts(mirror_vars, matrix.disjuncts.clone());
        self.axioms.push(PithyAxiom {
            label: format!("{label}#mirror"),
            premise_width: vars.len(),
            matrix: mirror,
            dummy: true,
        });
        self.universal.push(UniversalMatrix { label, matrix });
        Ok(())
    }

    fn pithy(&mut self, label: String, premise: &[String], y: &str, body: &BoolExpr) -> Result<(), TheoryError> {
        let mut vars = premise.to_vec();
        vars.push(y.to_string());
        let matrix = QfFormula::from_expr(body, &vars, &self.sig)?;
        self.axioms.push(PithyAxiom { label, premise_width: premise.len(), matrix, dummy: false });
        Ok(())
    }
}

/// Expands a relational theory into pithy form.
///
/// An axiom with witnesses `y_1..y_n`, `n >= 2`, gets auxiliary relations `E^k` of
/// arity `|x| + k`. The chain `E^0 -> E^1 -> ... -> E^{n-1} -> psi` is split into
/// single-witness axioms, the converse implications and the trigger `forall x E^0(x)`
/// are universal. When `x` is empty `E^0` is omitted and the chain starts at `E^1`.
pub fn pithy_expand(spec: &TheorySpec) -> Result<PithyTheory, TheoryError> {
    if !spec.is_relational() {
        return Err(TheoryError::NotRelational(spec.name.clone()));
    }
    let mut b = Builder { sig: spec.signature.clone(), universal: Vec::new(), axioms: Vec::new() };
    let mut auxiliary = Vec::new();
    for ax in &spec.extension {
        if ax.exists.len() >= 2 {
            let base = ax.forall.len();
            let first = if base == 0 { 1 } else { 0 };
            for k in first..ax.exists.len() {
                let name = format!("_{}_E{k}", ax.label);
                b.sig.relations.push(RelationSymbol { name: name.clone(), arity: base + k });
                auxiliary.push(name);
            }
        }
    }
    b.sig.validate()?;
    for ax in &spec.universal {
        b.universal(ax.label.clone(), &ax.vars, &ax.body)?;
    }
    for ax in &spec.extension {
        let n = ax.exists.len();
        if n == 1 {
            b.pithy(ax.label.clone(), &ax.forall, &ax.exists[0], &ax.body)?;
            continue;
        }
        let base = ax.forall.len();
        let aux = |k: usize| format!("_{}_E{k}", ax.label);
        let prefix = |k: usize| -> Vec<String> {
            ax.forall.iter().chain(ax.exists.iter().take(k)).cloned().collect()
        };
        let level = |k: usize| -> BoolExpr {
            if k == 0 && base == 0 {
                BoolExpr::True
            } else {
                atom(&aux(k), &prefix(k))
            }
        };
        for k in 0..n - 1 {
            let body = BoolExpr::implies(level(k), level(k + 1));
            b.pithy(format!("{}#step{k}", ax.label), &prefix(k), &ax.exists[k], &body)?;
            if k > 0 || base > 0 {
                b.universal(format!("{}#back{k}", ax.label), &prefix(k + 1), &BoolExpr::implies(level(k + 1), level(k)))?;
            }
        }
        let last = BoolExpr::implies(level(n - 1), ax.body.clone());
        b.pithy(format!("{}#last", ax.label), &prefix(n - 1), &ax.exists[n - 1], &last)?;
        b.universal(format!("{}#close", ax.label), &prefix(n), &BoolExpr::implies(ax.body.clone(), level(n - 1)))?;
        if base > 0 {
            b.universal(format!("{}#trigger", ax.label), &ax.forall, &level(0))?;
        }
    }
    Ok(PithyTheory {
        name: spec.name.clone(),
        signature: Arc::new(b.sig),
        auxiliary,
        universal: b.universal,
        axioms: b.axioms,
    })
}

use crate::logic::{BoolExpr, Literal, QfFormula, Term};

use super::functional::{graph_relation_name, relational_signature};
use super::{ExtensionAxiom, TheoryError, TheorySpec, UniversalAxiom};

/// Distinct compound subterms of `e`, innermost first.
fn compound_subterms(e: &BoolExpr) -> Vec<Term> {
    fn collect(t: &Term, out: &mut Vec<Term>) {
        if let Term::App(_, args) = t {
            args.iter().for_each(|a| collect(a, out));
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
    }
    let mut out = Vec::new();
    e.visit_terms(&mut |t| collect(t, &mut out));
    out
}

struct Flattening {
    names: Vec<String>,
    graphs: Vec<BoolExpr>,
    body: BoolExpr,
}

fn flatten(e: &BoolExpr) -> Flattening {
    let subterms = compound_subterms(e);
    let names: Vec<String> = (0..subterms.len()).map(|i| format!("_t{i}")).collect();
    let name_of = |t: &Term| -> Term {
        match t {
            Term::Var(_) => t.clone(),
            _ => Term::Var(names[subterms.iter().position(|s| s == t).expect("collected")].clone()),
        }
    };
    let graphs = subterms
        .iter()
        .zip(&names)
        .map(|(t, z)| match t {
            Term::App(f, args) => {
                let mut g: Vec<Term> = args.iter().map(name_of).collect();
                g.push(Term::Var(z.clone()));
                BoolExpr::Atom(graph_relation_name(f), g)
            }
            Term::Var(_) => unreachable!("only compound terms are collected"),
        })
        .collect();
    let body = e.map_atoms(&mut |a| match a {
        BoolExpr::Atom(r, args) => BoolExpr::Atom(r.clone(), args.iter().map(name_of).collect()),
        BoolExpr::Eq(x, y) => BoolExpr::Eq(name_of(x), name_of(y)),
        other => other.clone(),
    });
    Flattening { names, graphs, body }
}

/// Eliminates the graph variables of `flat` when each disjunct pins them by equations
/// to variables of `vars` or uses them only as outputs. The result is equivalent to
/// the flattened formula in every model of the totality and functionality axioms.
fn pinned_matrix(
    vars: &[String],
    flat: &Flattening,
    sig: &crate::logic::Signature,
) -> Result<Option<BoolExpr>, TheoryError> {
    let all: Vec<String> = vars.iter().chain(&flat.names).cloned().collect();
    let mut conj = flat.graphs.clone();
    conj.push(flat.body.clone());
    let dnf = QfFormula::from_expr(&BoolExpr::And(conj), &all, sig)?;
    let k = vars.len();
    let graphs: std::collections::BTreeSet<&str> = flat
        .graphs
        .iter()
        .filter_map(|g| match g {
            BoolExpr::Atom(name, _) => Some(name.as_str()),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for d in &dnf.disjuncts {
        let mut d = d.clone();
        loop {
            let mut used: Vec<usize> = d.iter().flat_map(|l| l.vars()).filter(|&v| v >= k).collect();
            used.sort_unstable();
            used.dedup();
            if used.is_empty() {
                break;
            }
            let pinned = used.iter().find_map(|&z| {
                d.iter().find_map(|l| match l {
                    Literal::Eq { left, right, positive: true } if *right == z && left != right => Some((z, *left)),
                    Literal::Eq { left, right, positive: true } if *left == z && left != right => Some((z, *right)),
                    _ => None,
                })
            });
            if let Some((z, v)) = pinned {
                let map: Vec<usize> = (0..all.len()).map(|i| if i == z { v } else { i }).collect();
                d = d.iter().map(|l| l.rename(&map)).collect();
                continue;
            }
            // A graph variable occurring once, as the output of a graph atom, is implied
            // by totality.
            let free = used.iter().copied().find(|&z| {
                let mut occurrences = d.iter().filter(|l| l.vars().contains(&z));
                let only = occurrences.next();
                occurrences.next().is_none()
                    && matches!(only, Some(Literal::Rel { name, args, positive: true })
                        if graphs.contains(name.as_str())
                            && args.last() == Some(&z)
                            && !args[..args.len() - 1].contains(&z))
            });
            let Some(z) = free else { return Ok(None) };
            d.retain(|l| !l.vars().contains(&z));
        }
        d.sort();
        d.dedup();
        out.push(d);
    }
    let f = QfFormula::from_disjuncts(vars.to_vec(), out);
    Ok(Some(BoolExpr::Or(
        f.disjuncts
            .iter()
            .map(|d| BoolExpr::And(d.iter().map(|l| literal_expr(l, vars)).collect()))
            .collect(),
    )))
}

fn literal_expr(l: &Literal, vars: &[String]) -> BoolExpr {
    let (e, positive) = match l {
        Literal::Rel { name, args, positive } => {
            (BoolExpr::Atom(name.clone(), args.iter().map(|&a| Term::Var(vars[a].clone())).collect()), *positive)
        }
        Literal::Eq { left, right, positive } => {
            (BoolExpr::Eq(Term::Var(vars[*left].clone()), Term::Var(vars[*right].clone())), *positive)
        }
    };
    if positive {
        e
    } else {
        BoolExpr::not(e)
    }
}

/// Replaces every function and constant symbol by its graph relation.
///
/// Adds totality (extension) and functionality (universal) axioms per symbol.
/// A universal axiom with terms becomes a quantifier-free form over its own variables
/// when every disjunct pins the graph variables by equations; otherwise it is
/// flattened universally.
/// Extension axioms are flattened existentially, with the graph variables eliminated
/// the same way whenever possible.
pub fn relationalize(spec: &TheorySpec) -> Result<TheorySpec, TheoryError> {
    let sig = relational_signature(&spec.signature);
    let mut universal = Vec::new();
    let mut extension = Vec::new();
    for f in &spec.signature.functions {
        let xs: Vec<String> = (0..f.arity).map(|i| format!("x{i}")).collect();
        let xs_ref: Vec<&str> = xs.iter().map(|s| s.as_str()).collect();
        let g = graph_relation_name(&f.name);
        let with = |y: &str| {
            let mut a = xs_ref.clone();
            a.push(y);
            BoolExpr::atom(&g, &a)
        };
        extension.push(ExtensionAxiom {
            label: format!("total_{}", f.name),
            forall: xs.clone(),
            exists: vec!["y".into()],
            body: with("y"),
        });
        let mut vars = xs.clone();
        vars.extend(["y".to_string(), "y2".to_string()]);
        universal.push(UniversalAxiom {
            label: format!("functional_{}", f.name),
            vars,
            body: BoolExpr::implies(BoolExpr::And(vec![with("y"), with("y2")]), BoolExpr::eq("y", "y2")),
        });
    }
    for ax in &spec.universal {
        if !ax.body.has_function_terms() {
            universal.push(ax.clone());
            continue;
        }
        let flat = flatten(&ax.body);
        if let Some(pinned) = pinned_matrix(&ax.vars, &flat, &sig)? {
            // With functionality the pinned form implies the flattened one.
            universal.push(UniversalAxiom {
                label: format!("{}_pinned", ax.label),
                vars: ax.vars.clone(),
                body: pinned,
            });
            continue;
        }
        let mut vars = ax.vars.clone();
        vars.extend(flat.names.iter().cloned());
        let mut disj: Vec<BoolExpr> = flat.graphs.iter().map(|g| BoolExpr::not(g.clone())).collect();
        disj.push(flat.body);
        universal.push(UniversalAxiom { label: ax.label.clone(), vars, body: BoolExpr::Or(disj) });
    }
    for ax in &spec.extension {
        if !ax.body.has_function_terms() {
            extension.push(ax.clone());
            continue;
        }
        let flat = flatten(&ax.body);
        let mut bound = ax.forall.clone();
        bound.extend(ax.exists.iter().cloned());
        if let Some(body) = pinned_matrix(&bound, &flat, &sig)? {
            extension.push(ExtensionAxiom { body, ..ax.clone() });
            continue;
        }
        let mut exists = ax.exists.clone();
        exists.extend(flat.names.iter().cloned());
        let mut conj = flat.graphs.clone();
        conj.push(flat.body);
        extension.push(ExtensionAxiom {
            label: ax.label.clone(),
            forall: ax.forall.clone(),
            exists,
            body: BoolExpr::And(conj),
        });
    }
    Ok(TheorySpec {
        name: spec.name.clone(),
        signature: sig,
        universal,
        extension,
        forbidden: spec.forbidden.clone(),
    })
}

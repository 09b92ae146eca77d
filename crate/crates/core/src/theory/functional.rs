//! First-order formulas over arbitrary signatures, structures with function
//! symbols, and the graph translation into a purely relational signature.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::logic::{FiniteStructure, RelationSymbol, Signature, Term};

use super::TheoryError;

/// Suffix marking the graph relation of a function symbol.
pub const GRAPH_SUFFIX: &str = "*";

pub fn graph_relation_name(function: &str) -> String {
    format!("{function}{GRAPH_SUFFIX}")
}

/// The relational signature with each function symbol replaced by its graph relation.
pub fn relational_signature(sig: &Signature) -> Signature {
    let mut relations = sig.relations.clone();
    for f in &sig.functions {
        relations.push(RelationSymbol { name: graph_relation_name(&f.name), arity: f.arity + 1 });
    }
    Signature { relations, functions: Vec::new() }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FoFormula {
    True,
    False,
    Atom(String, Vec<Term>),
    Eq(Term, Term),
    Not(Box<FoFormula>),
    And(Vec<FoFormula>),
    Or(Vec<FoFormula>),
    Exists(String, Box<FoFormula>),
    Forall(String, Box<FoFormula>),
}

impl FoFormula {
    pub fn not(f: FoFormula) -> FoFormula {
        FoFormula::Not(Box::new(f))
    }

    pub fn exists(v: &str, f: FoFormula) -> FoFormula {
        FoFormula::Exists(v.to_string(), Box::new(f))
    }

    pub fn forall(v: &str, f: FoFormula) -> FoFormula {
        FoFormula::Forall(v.to_string(), Box::new(f))
    }

    pub fn free_vars(&self) -> BTreeSet<String> {
        fn term_vars(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Var(v) => {
                    out.insert(v.clone());
                }
                Term::App(_, args) => args.iter().for_each(|a| term_vars(a, out)),
            }
        }
        let mut out = BTreeSet::new();
        match self {
            FoFormula::True | FoFormula::False => {}
            FoFormula::Atom(_, args) => args.iter().for_each(|a| term_vars(a, &mut out)),
            FoFormula::Eq(a, b) => {
                term_vars(a, &mut out);
                term_vars(b, &mut out);
            }
            FoFormula::Not(f) => out = f.free_vars(),
            FoFormula::And(fs) | FoFormula::Or(fs) => fs.iter().for_each(|f| out.extend(f.free_vars())),
            FoFormula::Exists(v, f) | FoFormula::Forall(v, f) => {
                out = f.free_vars();
                out.remove(v);
            }
        }
        out
    }
}

/// A finite structure that may interpret function and constant symbols.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionalStructure {
    signature: Arc<Signature>,
    size: usize,
    relations: Vec<BTreeSet<Vec<usize>>>,
    functions: Vec<Vec<usize>>,
}

fn table_index(size: usize, args: &[usize]) -> usize {
    args.iter().fold(0, |acc, &a| acc * size + a)
}

impl FunctionalStructure {
    /// Every function is initialised to the constant `0`; `size` must be positive.
    pub fn new(signature: Arc<Signature>, size: usize) -> Self {
        assert!(size > 0, "functional structures are nonempty");
        let functions = signature.functions.iter().map(|f| vec![0; size.pow(f.arity as u32)]).collect();
        let relations = vec![BTreeSet::new(); signature.relations.len()];
        FunctionalStructure { signature, size, relations, functions }
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.signature
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn set_relation(&mut self, rel: usize, args: Vec<usize>, holds: bool) {
        if holds {
            self.relations[rel].insert(args);
        } else {
            self.relations[rel].remove(&args);
        }
    }

    pub fn set_function(&mut self, f: usize, args: &[usize], value: usize) {
        assert!(value < self.size);
        let i = table_index(self.size, args);
        self.functions[f][i] = value;
    }

    pub fn apply(&self, f: usize, args: &[usize]) -> usize {
        self.functions[f][table_index(self.size, args)]
    }

    fn function_index(&self, name: &str) -> Option<usize> {
        self.signature.functions.iter().position(|f| f.name == name)
    }

    pub fn eval_term(&self, t: &Term, env: &BTreeMap<String, usize>) -> Result<usize, TheoryError> {
        match t {
            Term::Var(v) => env.get(v).copied().ok_or_else(|| TheoryError::UnboundVariable(v.clone())),
            Term::App(name, args) => {
                let f = self
                    .function_index(name)
                    .ok_or_else(|| TheoryError::MalformedAtom(format!("unknown function {name}")))?;
                if args.len() != self.signature.functions[f].arity {
                    return Err(TheoryError::MalformedAtom(format!("{name}/{}", args.len())));
                }
                let vals = args.iter().map(|a| self.eval_term(a, env)).collect::<Result<Vec<_>, _>>()?;
                Ok(self.apply(f, &vals))
            }
        }
    }

    pub fn eval(&self, phi: &FoFormula, env: &mut BTreeMap<String, usize>) -> Result<bool, TheoryError> {
        Ok(match phi {
            FoFormula::True => true,
            FoFormula::False => false,
            FoFormula::Atom(name, args) => {
                let rel = self
                    .signature
                    .relation_index(name)
                    .ok_or_else(|| TheoryError::MalformedAtom(format!("unknown relation {name}")))?;
                if args.len() != self.signature.arity(rel) {
                    return Err(TheoryError::MalformedAtom(format!("{name}/{}", args.len())));
                }
                let vals = args.iter().map(|a| self.eval_term(a, env)).collect::<Result<Vec<_>, _>>()?;
                self.relations[rel].contains(&vals)
            }
            FoFormula::Eq(a, b) => self.eval_term(a, env)? == self.eval_term(b, env)?,
            FoFormula::Not(f) => !self.eval(f, env)?,
            FoFormula::And(fs) => {
                for f in fs {
                    if !self.eval(f, env)? {
                        return Ok(false);
                    }
                }
                true
            }
            FoFormula::Or(fs) => {
                for f in fs {
                    if self.eval(f, env)? {
                        return Ok(true);
                    }
                }
                false
            }
            FoFormula::Exists(v, f) | FoFormula::Forall(v, f) => {
                let want = matches!(phi, FoFormula::Exists(..));
                let saved = env.get(v).copied();
                let mut result = !want;
                for a in 0..self.size {
                    env.insert(v.clone(), a);
                    if self.eval(f, env)? == want {
                        result = want;
                        break;
                    }
                }
                match saved {
                    Some(s) => env.insert(v.clone(), s),
                    None => env.remove(v),
                };
                result
            }
        })
    }

    /// A purely relational structure viewed as a functional one.
    pub fn from_relational(s: &FiniteStructure) -> Self {
        let mut out = FunctionalStructure::new(s.signature().clone(), s.size().max(1));
        out.size = s.size();
        for rel in 0..s.signature().relations.len() {
            out.relations[rel] = s.relation(rel).clone();
        }
        out
    }

    /// The relational structure in which each function is replaced by its graph.
    pub fn to_relational(&self) -> FiniteStructure {
        let sig = Arc::new(relational_signature(&self.signature));
        let mut out = FiniteStructure::empty(sig, self.size);
        for (rel, tuples) in self.relations.iter().enumerate() {
            for t in tuples {
                out.insert(rel, t.clone()).expect("tuple fits");
            }
        }
        let base = self.signature.relations.len();
        for (f, sym) in self.signature.functions.iter().enumerate() {
            crate::logic::for_each_tuple(self.size, sym.arity, |args| {
                let mut t = args.to_vec();
                t.push(self.apply(f, args));
                out.insert(base + f, t).expect("tuple fits");
            });
        }
        out
    }
}

/// Fresh variable names for the translation; user variables never start with `_`.
struct Fresh(usize);

impl Fresh {
    fn next(&mut self) -> String {
        self.0 += 1;
        format!("_z{}", self.0)
    }
}

/// `t*(y)`: the relational formula stating that `y` is the value of `t`.
fn term_star(t: &Term, y: &str, fresh: &mut Fresh) -> FoFormula {
    match t {
        Term::Var(x) => FoFormula::Eq(Term::Var(y.to_string()), Term::Var(x.clone())),
        Term::App(u, args) => {
            let zs: Vec<String> = args.iter().map(|_| fresh.next()).collect();
            let mut graph_args: Vec<Term> = zs.iter().map(|z| Term::Var(z.clone())).collect();
            graph_args.push(Term::Var(y.to_string()));
            let mut conj = vec![FoFormula::Atom(graph_relation_name(u), graph_args)];
            for (s, z) in args.iter().zip(&zs) {
                conj.push(term_star(s, z, fresh));
            }
            zs.iter().rev().fold(FoFormula::And(conj), |acc, z| FoFormula::exists(z, acc))
        }
    }
}

/// The relational translation, with the same free variables as `phi`.
pub fn star(phi: &FoFormula) -> FoFormula {
    star_with(phi, &mut Fresh(0))
}

fn star_with(phi: &FoFormula, fresh: &mut Fresh) -> FoFormula {
    match phi {
        FoFormula::True | FoFormula::False => phi.clone(),
        FoFormula::Atom(r, args) => {
            let zs: Vec<String> = args.iter().map(|_| fresh.next()).collect();
            let mut conj = vec![FoFormula::Atom(r.clone(), zs.iter().map(|z| Term::Var(z.clone())).collect())];
            for (t, z) in args.iter().zip(&zs) {
                conj.push(term_star(t, z, fresh));
            }
            zs.iter().rev().fold(FoFormula::And(conj), |acc, z| FoFormula::exists(z, acc))
        }
        FoFormula::Eq(a, b) => {
            let z = fresh.next();
            let body = FoFormula::And(vec![term_star(a, &z, fresh), term_star(b, &z, fresh)]);
            FoFormula::exists(&z, body)
        }
        FoFormula::Not(f) => FoFormula::not(star_with(f, fresh)),
        FoFormula::And(fs) => FoFormula::And(fs.iter().map(|f| star_with(f, fresh)).collect()),
        FoFormula::Or(fs) => FoFormula::Or(fs.iter().map(|f| star_with(f, fresh)).collect()),
        FoFormula::Exists(v, f) => FoFormula::exists(v, star_with(f, fresh)),
        FoFormula::Forall(v, f) => FoFormula::forall(v, star_with(f, fresh)),
    }
}

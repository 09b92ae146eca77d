use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{FiniteStructure, LogicError, QfType, Signature, Truth};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    App(String, Vec<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(v) => {
                out.insert(v.clone());
            }
            Term::App(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::App(name, args) if args.is_empty() => write!(f, "{name}"),
            Term::App(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// Quantifier-free boolean combination of atoms over terms, as produced by the parser.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoolExpr {
    True,
    False,
    Atom(String, Vec<Term>),
    Eq(Term, Term),
    Not(Box<BoolExpr>),
    And(Vec<BoolExpr>),
    Or(Vec<BoolExpr>),
    Implies(Box<BoolExpr>, Box<BoolExpr>),
    Iff(Box<BoolExpr>, Box<BoolExpr>),
}

impl BoolExpr {
    pub fn atom(name: &str, vars: &[&str]) -> BoolExpr {
        BoolExpr::Atom(name.to_string(), vars.iter().map(|v| Term::var(v)).collect())
    }

    pub fn eq(a: &str, b: &str) -> BoolExpr {
        BoolExpr::Eq(Term::var(a), Term::var(b))
    }

    pub fn not(e: BoolExpr) -> BoolExpr {
        BoolExpr::Not(Box::new(e))
    }

    pub fn implies(a: BoolExpr, b: BoolExpr) -> BoolExpr {
        BoolExpr::Implies(Box::new(a), Box::new(b))
    }

    pub fn vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Atom(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
            BoolExpr::Eq(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            BoolExpr::Not(e) => e.collect_vars(out),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.collect_vars(out)),
            BoolExpr::Implies(a, b) | BoolExpr::Iff(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn has_function_terms(&self) -> bool {
        let mut found = false;
        self.visit_terms(&mut |t| found |= !t.is_var());
        found
    }

    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        match self {
            BoolExpr::True | BoolExpr::False => {}
            BoolExpr::Atom(_, args) => args.iter().for_each(|a| f(a)),
            BoolExpr::Eq(a, b) => {
                f(a);
                f(b);
            }
            BoolExpr::Not(e) => e.visit_terms(f),
            BoolExpr::And(es) | BoolExpr::Or(es) => es.iter().for_each(|e| e.visit_terms(f)),
            BoolExpr::Implies(a, b) | BoolExpr::Iff(a, b) => {
                a.visit_terms(f);
                b.visit_terms(f);
            }
        }
    }

    /// Rebuilds the tree with every atom and equation replaced by `f`.
    pub fn map_atoms(&self, f: &mut impl FnMut(&BoolExpr) -> BoolExpr) -> BoolExpr {
        match self {
            BoolExpr::True | BoolExpr::False => self.clone(),
            BoolExpr::Atom(..) | BoolExpr::Eq(..) => f(self),
            BoolExpr::Not(e) => BoolExpr::Not(Box::new(e.map_atoms(f))),
            BoolExpr::And(es) => BoolExpr::And(es.iter().map(|e| e.map_atoms(f)).collect()),
            BoolExpr::Or(es) => BoolExpr::Or(es.iter().map(|e| e.map_atoms(f)).collect()),
            BoolExpr::Implies(a, b) => {
                BoolExpr::Implies(Box::new(a.map_atoms(f)), Box::new(b.map_atoms(f)))
            }
            BoolExpr::Iff(a, b) => BoolExpr::Iff(Box::new(a.map_atoms(f)), Box::new(b.map_atoms(f))),
        }
    }
}

impl fmt::Display for BoolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(f: &mut fmt::Formatter<'_>, es: &[BoolExpr], op: &str, empty: &str) -> fmt::Result {
            if es.is_empty() {
                return write!(f, "{empty}");
            }
            write!(f, "(")?;
            for (i, e) in es.iter().enumerate() {
                if i > 0 {
                    write!(f, " {op} ")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, ")")
        }
        match self {
            BoolExpr::True => write!(f, "true"),
            BoolExpr::False => write!(f, "false"),
            BoolExpr::Atom(name, args) => write!(f, "{}", Term::App(name.clone(), args.clone())),
            BoolExpr::Eq(a, b) => write!(f, "{a} = {b}"),
            BoolExpr::Not(e) => write!(f, "!{e}"),
            BoolExpr::And(es) => join(f, es, "&", "true"),
            BoolExpr::Or(es) => join(f, es, "|", "false"),
            BoolExpr::Implies(a, b) => write!(f, "({a} -> {b})"),
            BoolExpr::Iff(a, b) => write!(f, "({a} <-> {b})"),
        }
    }
}

/// A relational or equality literal over variable indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Literal {
    Rel { name: String, args: Vec<usize>, positive: bool },
    Eq { left: usize, right: usize, positive: bool },
}

impl Literal {
    fn key(&self) -> (&str, Vec<usize>, bool) {
        match self {
            Literal::Rel { name, args, positive } => (name.as_str(), args.clone(), *positive),
            Literal::Eq { left, right, positive } => ("=", vec![*left, *right], *positive),
        }
    }

    pub fn positive(&self) -> bool {
        match self {
            Literal::Rel { positive, .. } | Literal::Eq { positive, .. } => *positive,
        }
    }

    pub fn negated(&self) -> Literal {
        match self.clone() {
            Literal::Rel { name, args, positive } => Literal::Rel { name, args, positive: !positive },
            Literal::Eq { left, right, positive } => Literal::Eq { left, right, positive: !positive },
        }
    }

    pub fn vars(&self) -> Vec<usize> {
        match self {
            Literal::Rel { args, .. } => args.clone(),
            Literal::Eq { left, right, .. } => vec![*left, *right],
        }
    }

    /// Equality literals are stored with `left <= right`.
    pub fn eq(a: usize, b: usize, positive: bool) -> Literal {
        Literal::Eq { left: a.min(b), right: a.max(b), positive }
    }

    pub fn rename(&self, map: &[usize]) -> Literal {
        match self {
            Literal::Rel { name, args, positive } => Literal::Rel {
                name: name.clone(),
                args: args.iter().map(|&a| map[a]).collect(),
                positive: *positive,
            },
            Literal::Eq { left, right, positive } => Literal::eq(map[*left], map[*right], *positive),
        }
    }
}

impl PartialOrd for Literal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Literal {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

/// Disjunctive normal form over the variables `vars` (referenced by index).
///
/// Literals within a disjunct are sorted and deduplicated; disjuncts are sorted and
/// deduplicated; contradictory disjuncts are dropped; any empty disjunct collapses
/// the whole formula to the single empty disjunct (true). No disjuncts means false.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QfFormula {
    pub vars: Vec<String>,
    pub disjuncts: Vec<Vec<Literal>>,
}

fn normalize_conjunct(mut lits: Vec<Literal>) -> Option<Vec<Literal>> {
    lits.retain(|l| !matches!(l, Literal::Eq { left, right, positive: true } if left == right));
    if lits.iter().any(|l| matches!(l, Literal::Eq { left, right, positive: false } if left == right)) {
        return None;
    }
    lits.sort();
    lits.dedup();
    for w in lits.windows(2) {
        let (a, b) = (w[0].key(), w[1].key());
        if a.0 == b.0 && a.1 == b.1 {
            return None;
        }
    }
    Some(lits)
}

fn normalize_disjuncts(ds: Vec<Vec<Literal>>) -> Vec<Vec<Literal>> {
    let mut out: Vec<Vec<Literal>> = ds.into_iter().filter_map(normalize_conjunct).collect();
    if out.iter().any(|d| d.is_empty()) {
        return vec![Vec::new()];
    }
    out.sort();
    out.dedup();
    out
}

enum Nnf {
    Lit(Literal),
    And(Vec<Nnf>),
    Or(Vec<Nnf>),
}

struct Normalizer<'a> {
    vars: &'a [String],
    sig: &'a Signature,
}

impl Normalizer<'_> {
    fn var(&self, t: &Term) -> Result<usize, LogicError> {
        match t {
            Term::Var(v) => self
                .vars
                .iter()
                .position(|x| x == v)
                .ok_or_else(|| LogicError::UnboundVariable(v.clone())),
            Term::App(..) => Err(LogicError::FunctionTerm(t.to_string())),
        }
    }

    fn nnf(&self, e: &BoolExpr, neg: bool) -> Result<Nnf, LogicError> {
        Ok(match e {
            BoolExpr::True => {
                if neg {
                    Nnf::Or(vec![])
                } else {
                    Nnf::And(vec![])
                }
            }
            BoolExpr::False => {
                if neg {
                    Nnf::And(vec![])
                } else {
                    Nnf::Or(vec![])
                }
            }
            BoolExpr::Atom(name, args) => {
                let rel = self
                    .sig
                    .relation_index(name)
                    .ok_or_else(|| LogicError::MalformedAtom(format!("unknown relation {name}")))?;
                if self.sig.arity(rel) != args.len() {
                    return Err(LogicError::MalformedAtom(format!(
                        "{name} expects {} arguments, got {}",
                        self.sig.arity(rel),
                        args.len()
                    )));
                }
                let args = args.iter().map(|a| self.var(a)).collect::<Result<Vec<_>, _>>()?;
                Nnf::Lit(Literal::Rel { name: name.clone(), args, positive: !neg })
            }
            BoolExpr::Eq(a, b) => Nnf::Lit(Literal::eq(self.var(a)?, self.var(b)?, !neg)),
            BoolExpr::Not(x) => self.nnf(x, !neg)?,
            BoolExpr::And(es) | BoolExpr::Or(es) => {
                let parts = es.iter().map(|x| self.nnf(x, neg)).collect::<Result<Vec<_>, _>>()?;
                if matches!(e, BoolExpr::And(_)) != neg {
                    Nnf::And(parts)
                } else {
                    Nnf::Or(parts)
                }
            }
            BoolExpr::Implies(a, b) => {
                let d = BoolExpr::Or(vec![BoolExpr::Not(a.clone()), (**b).clone()]);
                self.nnf(&d, neg)?
            }
            BoolExpr::Iff(a, b) => {
                let d = BoolExpr::Or(vec![
                    BoolExpr::And(vec![(**a).clone(), (**b).clone()]),
                    BoolExpr::And(vec![BoolExpr::Not(a.clone()), BoolExpr::Not(b.clone())]),
                ]);
                self.nnf(&d, neg)?
            }
        })
    }
}

fn dnf(n: Nnf) -> Vec<Vec<Literal>> {
    match n {
        Nnf::Lit(l) => vec![vec![l]],
        Nnf::Or(parts) => normalize_disjuncts(parts.into_iter().flat_map(dnf).collect()),
        Nnf::And(parts) => {
            let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
            for p in parts {
                let d = dnf(p);
                let mut next = Vec::with_capacity(acc.len() * d.len());
                for a in &acc {
                    for b in &d {
                        let mut c = a.clone();
                        c.extend(b.iter().cloned());
                        next.push(c);
                    }
                }
                acc = normalize_disjuncts(next);
                if acc.is_empty() {
                    break;
                }
            }
            acc
        }
    }
}

impl QfFormula {
    /// Normalizes a boolean tree whose terms are variables from `vars`.
    pub fn from_expr(expr: &BoolExpr, vars: &[String], sig: &Signature) -> Result<Self, LogicError> {
        let n = Normalizer { vars, sig }.nnf(expr, false)?;
        Ok(QfFormula { vars: vars.to_vec(), disjuncts: dnf(n) })
    }

    pub fn from_disjuncts(vars: Vec<String>, disjuncts: Vec<Vec<Literal>>) -> Self {
        QfFormula { vars, disjuncts: normalize_disjuncts(disjuncts) }
    }

    pub fn conjunction(vars: Vec<String>, lits: Vec<Literal>) -> Self {
        Self::from_disjuncts(vars, vec![lits])
    }

    pub fn is_true(&self) -> bool {
        self.disjuncts.len() == 1 && self.disjuncts[0].is_empty()
    }

    pub fn is_false(&self) -> bool {
        self.disjuncts.is_empty()
    }

    pub fn width(&self) -> usize {
        self.vars.len()
    }

    pub fn relations(&self) -> BTreeSet<&str> {
        self.disjuncts
            .iter()
            .flatten()
            .filter_map(|l| match l {
                Literal::Rel { name, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Conjunctive clauses equivalent to this formula, tautologies removed.
    pub fn to_clauses(&self) -> Vec<Vec<Literal>> {
        let negated: Vec<Vec<Literal>> = self.negate().disjuncts;
        let mut clauses: Vec<Vec<Literal>> =
            negated.into_iter().map(|d| d.into_iter().map(|l| l.negated()).collect()).collect();
        for c in clauses.iter_mut() {
            c.sort();
        }
        clauses.sort();
        clauses
    }

    /// DNF of the negation.
    pub fn negate(&self) -> QfFormula {
        let mut acc: Vec<Vec<Literal>> = vec![Vec::new()];
        for d in &self.disjuncts {
            let mut next = Vec::new();
            for a in &acc {
                for l in d {
                    let mut c = a.clone();
                    c.push(l.negated());
                    next.push(c);
                }
            }
            acc = normalize_disjuncts(next);
        }
        QfFormula { vars: self.vars.clone(), disjuncts: normalize_disjuncts(acc) }
    }

    pub fn eval(&self, s: &FiniteStructure, assign: &[usize]) -> Result<bool, LogicError> {
        if assign.len() < self.vars.len() {
            return Err(LogicError::UnboundVariable(self.vars[assign.len()].clone()));
        }
        if let Some(&bad) = assign.iter().find(|&&a| a >= s.size()) {
            return Err(LogicError::OutOfRange(bad));
        }
        'disjunct: for d in &self.disjuncts {
            for l in d {
                let v = match l {
                    Literal::Rel { name, args, positive } => {
                        let rel = s.signature().relation_index(name).ok_or_else(|| {
                            LogicError::MalformedAtom(format!("unknown relation {name}"))
                        })?;
                        if s.signature().arity(rel) != args.len() {
                            return Err(LogicError::MalformedAtom(format!("{name}/{}", args.len())));
                        }
                        let t: Vec<usize> = args.iter().map(|&a| assign[a]).collect();
                        s.holds(rel, &t) == *positive
                    }
                    Literal::Eq { left, right, positive } => (assign[*left] == assign[*right]) == *positive,
                };
                if !v {
                    continue 'disjunct;
                }
            }
            return Ok(true);
        }
        Ok(false)
    }

    /// Kleene evaluation against a (possibly partial) type.
    pub fn eval_on_type(&self, t: &QfType, assign: &[usize]) -> Result<Truth, LogicError> {
        let mut result = Truth::False;
        for d in &self.disjuncts {
            let mut conj = Truth::True;
            for l in d {
                match t.literal_value(l, assign)? {
                    Truth::False => {
                        conj = Truth::False;
                        break;
                    }
                    Truth::Unknown => conj = Truth::Unknown,
                    Truth::True => {}
                }
            }
            match conj {
                Truth::True => return Ok(Truth::True),
                Truth::Unknown => result = Truth::Unknown,
                Truth::False => {}
            }
        }
        Ok(result)
    }
}

impl fmt::Display for QfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_false() {
            return write!(f, "false");
        }
        for (i, d) in self.disjuncts.iter().enumerate() {
            if i > 0 {
                write!(f, " | ")?;
            }
            if d.is_empty() {
                write!(f, "true")?;
                continue;
            }
            if self.disjuncts.len() > 1 && d.len() > 1 {
                write!(f, "(")?;
            }
            for (j, l) in d.iter().enumerate() {
                if j > 0 {
                    write!(f, " & ")?;
                }
                match l {
                    Literal::Rel { name, args, positive } => {
                        let names: Vec<&str> = args.iter().map(|&a| self.vars[a].as_str()).collect();
                        write!(f, "{}{}({})", if *positive { "" } else { "!" }, name, names.join(", "))?;
                    }
                    Literal::Eq { left, right, positive } => write!(
                        f,
                        "{} {} {}",
                        self.vars[*left],
                        if *positive { "=" } else { "!=" },
                        self.vars[*right]
                    )?,
                }
            }
            if self.disjuncts.len() > 1 && d.len() > 1 {
                write!(f, ")")?;
            }
        }
        Ok(())
    }
}

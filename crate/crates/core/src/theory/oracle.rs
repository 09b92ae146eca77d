use std::collections::HashMap;
use std::sync::Arc;

use crate::logic::{for_each_tuple, Literal, QfType, Signature, Truth};

use super::PithyTheory;

const UNSET: usize = usize::MAX;

#[derive(Clone, Debug)]
enum CLit {
    Rel { rel: usize, args: Vec<usize>, positive: bool },
    Eq { a: usize, b: usize, positive: bool },
}

impl CLit {
    fn vars_mask(&self) -> u64 {
        match self {
            CLit::Rel { args, .. } => args.iter().fold(0, |m, &a| m | 1 << a),
            CLit::Eq { a, b, .. } => 1 << a | 1 << b,
        }
    }
}

/// Bindings are made in `order`; after binding `order[s]` the literals in
/// `checks[s]` are fully bound and must all be false for the search to continue.
#[derive(Clone, Debug)]
struct Plan {
    initial: Vec<usize>,
    order: Vec<usize>,
    checks: Vec<Vec<usize>>,
    pin: Vec<Option<usize>>,
}

#[derive(Clone, Debug)]
struct Clause {
    label: String,
    nvars: usize,
    lits: Vec<CLit>,
    plans: HashMap<u64, Plan>,
}

impl Clause {
    fn plan(&self, bound: u64) -> Plan {
        let mut done: Vec<bool> = self.lits.iter().map(|l| l.vars_mask() & !bound == 0).collect();
        let initial = (0..self.lits.len()).filter(|&i| done[i]).collect();
        let mut mask = bound;
        let (mut order, mut checks, mut pin) = (Vec::new(), Vec::new(), Vec::new());
        while mask.count_ones() < self.nvars as u32 {
            let mut best: Option<(usize, (bool, usize), Option<usize>)> = None;
            for v in 0..self.nvars {
                if mask & 1 << v != 0 {
                    continue;
                }
                let m2 = mask | 1 << v;
                let completes =
                    (0..self.lits.len()).filter(|&i| !done[i] && self.lits[i].vars_mask() & !m2 == 0).count();
                let p = self.lits.iter().find_map(|l| match *l {
                    CLit::Eq { a, b, positive: false } if a == v && b != v && mask & 1 << b != 0 => Some(b),
                    CLit::Eq { a, b, positive: false } if b == v && a != v && mask & 1 << a != 0 => Some(a),
                    _ => None,
                });
                let score = (p.is_some(), completes);
                if best.as_ref().map_or(true, |b| score > b.1) {
                    best = Some((v, score, p));
                }
            }
            let (v, _, p) = best.expect("an unbound variable remains");
            mask |= 1 << v;
            let now: Vec<usize> =
                (0..self.lits.len()).filter(|&i| !done[i] && self.lits[i].vars_mask() & !mask == 0).collect();
            for &i in &now {
                done[i] = true;
            }
            order.push(v);
            checks.push(now);
            pin.push(p);
        }
        Plan { initial, order, checks, pin }
    }

    fn get_plan(&self, bound: u64) -> std::borrow::Cow<'_, Plan> {
        match self.plans.get(&bound) {
            Some(p) => std::borrow::Cow::Borrowed(p),
            None => std::borrow::Cow::Owned(self.plan(bound)),
        }
    }
}

#[inline]
fn lit_false(lit: &CLit, t: &QfType, sigma: &[usize]) -> bool {
    match lit {
        CLit::Rel { rel, args, positive } => {
            let mut buf = [0usize; 8];
            let v = if args.len() <= 8 {
                for (k, &a) in args.iter().enumerate() {
                    buf[k] = sigma[a];
                }
                t.atom(*rel, &buf[..args.len()])
            } else {
                let b: Vec<usize> = args.iter().map(|&a| sigma[a]).collect();
                t.atom(*rel, &b)
            };
            v == if *positive { Truth::False } else { Truth::True }
        }
        CLit::Eq { a, b, positive } => t.same_class(sigma[*a], sigma[*b]) != *positive,
    }
}

/// A universal matrix instance is violated when every literal of one of its
/// clauses is definitely false. Undecided atoms are never false, so partial
/// types are rejected only when no completion could satisfy the universal part.
#[derive(Clone, Debug)]
pub struct AgeOracle {
    theory: Arc<PithyTheory>,
    clauses: Vec<Clause>,
    by_rel: Vec<Vec<(usize, usize)>>,
}

/// A violated universal instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub label: String,
    pub assignment: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("search budget of {0} nodes exhausted")]
pub struct BudgetExhausted(pub u64);

impl AgeOracle {
    pub fn new(theory: Arc<PithyTheory>) -> Self {
        let sig = theory.signature.clone();
        let mut clauses = Vec::new();
        for u in &theory.universal {
            for c in u.matrix.to_clauses() {
                let lits: Vec<CLit> = c
                    .iter()
                    .map(|l| match l {
                        Literal::Rel { name, args, positive } => CLit::Rel {
                            rel: sig.relation_index(name).expect("matrix uses the theory signature"),
                            args: args.clone(),
                            positive: *positive,
                        },
                        Literal::Eq { left, right, positive } => {
                            CLit::Eq { a: *left, b: *right, positive: *positive }
                        }
                    })
                    .collect();
                let nvars = u.matrix.vars.len();
                assert!(nvars <= 64, "universal axioms bind at most 64 variables");
                let mut clause = Clause { label: u.label.clone(), nvars, lits, plans: HashMap::new() };
                let mut masks = vec![0u64];
                masks.extend(clause.lits.iter().map(|l| l.vars_mask()));
                for a in 0..nvars {
                    masks.push(1 << a);
                    for b in 0..nvars {
                        if a != b {
                            masks.push(1 << a | 1 << b);
                        }
                    }
                }
                for m in masks {
                    if !clause.plans.contains_key(&m) {
                        let p = clause.plan(m);
                        clause.plans.insert(m, p);
                    }
                }
                clauses.push(clause);
            }
        }
        let mut by_rel = vec![Vec::new(); sig.relations.len()];
        for (ci, c) in clauses.iter().enumerate() {
            for (li, l) in c.lits.iter().enumerate() {
                if let CLit::Rel { rel, .. } = l {
                    by_rel[*rel].push((ci, li));
                }
            }
        }
        AgeOracle { theory, clauses, by_rel }
    }

    pub fn theory(&self) -> &Arc<PithyTheory> {
        &self.theory
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.theory.signature
    }

    fn search(&self, c: &Clause, plan: &Plan, t: &QfType, sigma: &mut [usize], step: usize) -> bool {
        if step == plan.order.len() {
            return true;
        }
        let v = plan.order[step];
        let checks = &plan.checks[step];
        let try_value = |u: usize, sigma: &mut [usize]| -> bool {
            sigma[v] = u;
            checks.iter().all(|&i| lit_false(&c.lits[i], t, sigma)) && self.search(c, plan, t, sigma, step + 1)
        };
        if let Some(p) = plan.pin[step] {
            let target = sigma[p];
            if t.is_non_redundant() {
                if try_value(target, sigma) {
                    return true;
                }
            } else {
                for u in 0..t.width() {
                    if t.same_class(u, target) && try_value(u, sigma) {
                        return true;
                    }
                }
            }
        } else {
            for u in 0..t.width() {
                if try_value(u, sigma) {
                    return true;
                }
            }
        }
        sigma[v] = UNSET;
        false
    }

    fn run(&self, c: &Clause, bound: u64, t: &QfType, sigma: &mut [usize]) -> bool {
        let plan = c.get_plan(bound);
        plan.initial.iter().all(|&i| lit_false(&c.lits[i], t, sigma)) && self.search(c, &plan, t, sigma, 0)
    }

    /// Some violated instance, if any.
    pub fn first_violation(&self, t: &QfType) -> Option<Violation> {
        for c in &self.clauses {
            let mut sigma = vec![UNSET; c.nvars];
            if self.run(c, 0, t, &mut sigma) {
                return Some(Violation { label: c.label.clone(), assignment: sigma });
            }
        }
        None
    }

    /// Every violated instance, one per clause and assignment.
    pub fn violations(&self, t: &QfType) -> Vec<Violation> {
        fn all(c: &Clause, plan: &Plan, t: &QfType, sigma: &mut [usize], step: usize, out: &mut Vec<Violation>) {
            if step == plan.order.len() {
                out.push(Violation { label: c.label.clone(), assignment: sigma.to_vec() });
                return;
            }
            let v = plan.order[step];
            for u in 0..t.width() {
                if let Some(p) = plan.pin[step] {
                    if !t.same_class(u, sigma[p]) {
                        continue;
                    }
                }
                sigma[v] = u;
                if plan.checks[step].iter().all(|&i| lit_false(&c.lits[i], t, sigma)) {
                    all(c, plan, t, sigma, step + 1, out);
                }
            }
            sigma[v] = UNSET;
        }
        let mut out = Vec::new();
        for c in &self.clauses {
            let plan = c.get_plan(0);
            let mut sigma = vec![UNSET; c.nvars];
            if plan.initial.iter().all(|&i| lit_false(&c.lits[i], t, &sigma)) {
                all(c, &plan, t, &mut sigma, 0, &mut out);
            }
        }
        out
    }

    pub fn consistent_with(&self, t: &QfType) -> bool {
        self.first_violation(t).is_none()
    }

    /// Whether `t`, consistent before `rel(args)` was set to `value`, now has a violation.
    pub fn atom_violation(&self, t: &QfType, rel: usize, args: &[usize], value: Truth) -> bool {
        if !value.is_known() {
            return false;
        }
        let want_positive = value == Truth::False;
        let mut sigma = Vec::new();
        'lits: for &(ci, li) in &self.by_rel[rel] {
            let c = &self.clauses[ci];
            let CLit::Rel { args: largs, positive, .. } = &c.lits[li] else { unreachable!() };
            if *positive != want_positive {
                continue;
            }
            sigma.clear();
            sigma.resize(c.nvars, UNSET);
            let mut mask = 0u64;
            for (k, &cv) in largs.iter().enumerate() {
                if sigma[cv] == UNSET {
                    sigma[cv] = args[k];
                    mask |= 1 << cv;
                } else if sigma[cv] != args[k] {
                    continue 'lits;
                }
            }
            if self.run(c, mask, t, &mut sigma) {
                return true;
            }
        }
        false
    }

    /// Whether some violated instance uses every variable in `required`.
    pub fn vars_violation(&self, t: &QfType, required: &[usize]) -> bool {
        fn assign(
            o: &AgeOracle,
            c: &Clause,
            t: &QfType,
            required: &[usize],
            sigma: &mut Vec<usize>,
            mask: u64,
        ) -> bool {
            let Some((&first, rest)) = required.split_first() else {
                return o.run(c, mask, t, sigma);
            };
            for cv in 0..c.nvars {
                if sigma[cv] == UNSET {
                    sigma[cv] = first;
                    if assign(o, c, t, rest, sigma, mask | 1 << cv) {
                        return true;
                    }
                    reset(sigma, mask);
                }
            }
            false
        }
        fn reset(sigma: &mut [usize], keep: u64) {
            for (i, s) in sigma.iter_mut().enumerate() {
                if keep & 1 << i == 0 {
                    *s = UNSET;
                }
            }
        }
        for c in &self.clauses {
            let mut sigma = vec![UNSET; c.nvars];
            if assign(self, c, t, required, &mut sigma, 0) {
                return true;
            }
        }
        false
    }

    /// Decides the listed atoms depth first, trying `prefer(i)` before its negation.
    ///
    /// `t` must be consistent and non-redundant with the listed atoms undecided.
    /// On success the atoms stay set; on failure they are reset to undecided.
    pub fn complete(
        &self,
        t: &mut QfType,
        atoms: &[(usize, Vec<usize>)],
        prefer: &dyn Fn(usize) -> Truth,
        budget: &mut u64,
    ) -> Result<bool, BudgetExhausted> {
        let n = atoms.len();
        let mut state = vec![0u8; n];
        let mut i = 0;
        let start = *budget;
        loop {
            if i == n {
                return Ok(true);
            }
            let (rel, args) = &atoms[i];
            if state[i] == 2 {
                state[i] = 0;
                t.set_atom(*rel, args, Truth::Unknown);
                if i == 0 {
                    return Ok(false);
                }
                i -= 1;
                continue;
            }
            if *budget == 0 {
                for (rel, args) in atoms {
                    t.set_atom(*rel, args, Truth::Unknown);
                }
                return Err(BudgetExhausted(start));
            }
            *budget -= 1;
            let first = prefer(i);
            let value = if state[i] == 0 { first } else { first.negate() };
            state[i] += 1;
            t.set_atom(*rel, args, value);
            if !self.atom_violation(t, *rel, args, value) {
                i += 1;
            }
        }
    }

    /// Calls `f` on every consistent completion of the listed atoms, in the order
    /// false-before-true per atom; stops early when `f` returns false.
    pub fn for_each_completion(
        &self,
        t: &mut QfType,
        atoms: &[(usize, Vec<usize>)],
        f: &mut dyn FnMut(&QfType) -> bool,
    ) -> bool {
        fn rec(
            o: &AgeOracle,
            t: &mut QfType,
            atoms: &[(usize, Vec<usize>)],
            i: usize,
            f: &mut dyn FnMut(&QfType) -> bool,
        ) -> bool {
            if i == atoms.len() {
                return f(t);
            }
            let (rel, args) = &atoms[i];
            for v in [Truth::False, Truth::True] {
                t.set_atom(*rel, args, v);
                if !o.atom_violation(t, *rel, args, v) && !rec(o, t, atoms, i + 1, f) {
                    t.set_atom(*rel, args, Truth::Unknown);
                    return false;
                }
            }
            t.set_atom(*rel, args, Truth::Unknown);
            true
        }
        rec(self, t, atoms, 0, f)
    }
}

/// Atoms over variables `0..width` whose tuple mentions every variable in `required`,
/// by relation and then lexicographically.
pub fn atoms_with(sig: &Signature, width: usize, required: &[usize]) -> Vec<(usize, Vec<usize>)> {
    let mut out = Vec::new();
    for (rel, sym) in sig.relations.iter().enumerate() {
        if sym.arity < required.len() {
            continue;
        }
        for_each_tuple(width, sym.arity, |t| {
            if required.iter().all(|r| t.contains(r)) {
                out.push((rel, t.to_vec()));
            }
        });
    }
    out
}

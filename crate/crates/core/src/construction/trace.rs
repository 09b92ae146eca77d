use std::sync::Arc;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::closure::duplicate;
use crate::logic::{for_each_tuple, Literal, QfType, Truth};
use crate::theory::{atoms_with, AgeOracle, PithyTheory};

use super::boundary::{enumerated_rational, rat, rational_serde, Boundary};
use super::ConstructionError;

/// How undecided atoms are chosen when the construction may pick any consistent type.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionRule {
    /// Depth first, false before true: the lexicographically least consistent completion.
    #[default]
    LexMin,
    /// Depth first with a per-atom preference drawn from the seed.
    Seeded(u64),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub rule: CompletionRule,
    pub max_width: usize,
    pub max_premise: usize,
    pub budget: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { rule: CompletionRule::LexMin, max_width: 256, max_premise: 3, budget: 5_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalLocation {
    /// The point lies in `(v_j, v_{j+1}]`.
    Interval(usize),
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RefineCase {
    Present,
    Outside,
    Split,
}

/// A fresh witness created by an enlargement; positions are variables of `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessRecord {
    pub stage: usize,
    pub axiom: String,
    pub tuple: Vec<usize>,
    pub witness: usize,
}

/// A finite stage of the construction.
///
/// Variables of `p` are numbered in creation order; `order` lists them by increasing
/// point, and interval `j` is `(v[j], v[j+1]]`, holding the point of `order[j]`.
#[derive(Clone, Debug)]
pub struct ConstructionTrace {
    theory: Arc<PithyTheory>,
    oracle: Arc<AgeOracle>,
    config: EngineConfig,
    stage: usize,
    points: Vec<BigRational>,
    order: Vec<usize>,
    v: Vec<Boundary>,
    p: QfType,
    rational_cursor: usize,
    axiom_cursor: usize,
    witness_log: Vec<WitnessRecord>,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl ConstructionTrace {
    pub fn init(theory: Arc<PithyTheory>, config: EngineConfig) -> Result<Self, ConstructionError> {
        let oracle = Arc::new(AgeOracle::new(theory.clone()));
        Self::with_oracle(oracle, config)
    }

    pub fn with_oracle(oracle: Arc<AgeOracle>, config: EngineConfig) -> Result<Self, ConstructionError> {
        let theory = oracle.theory().clone();
        let p = QfType::with_capacity(theory.signature.clone(), 1, 16);
        let sqrt2 = Boundary::sqrt2_times(1);
        let mut trace = ConstructionTrace {
            theory,
            oracle,
            config,
            stage: 0,
            points: vec![rat(0)],
            order: vec![0],
            v: vec![Boundary::sqrt2_times(-1), sqrt2],
            p,
            rational_cursor: 0,
            axiom_cursor: 0,
            witness_log: Vec::new(),
        };
        if !trace.complete_var(0, &[0])? {
            return Err(ConstructionError::Inconsistent("no consistent one-element type".into()));
        }
        Ok(trace)
    }

    /// `init` followed by `stages` scheduled steps.
    pub fn run(theory: Arc<PithyTheory>, stages: usize, config: EngineConfig) -> Result<Self, ConstructionError> {
        let mut t = Self::init(theory, config)?;
        for _ in 0..stages {
            t.step()?;
        }
        Ok(t)
    }

    /// Like `run`, but stops early without error when the width cap is reached.
    ///
    /// Returns the trace and whether it stopped at the cap.
    pub fn run_until_cap(
        theory: Arc<PithyTheory>,
        stages: usize,
        config: EngineConfig,
    ) -> Result<(Self, bool), ConstructionError> {
        let mut t = Self::init(theory, config)?;
        for _ in 0..stages {
            match t.step() {
                Ok(()) => {}
                Err(ConstructionError::WidthCapExceeded { .. }) => return Ok((t, true)),
                Err(e) => return Err(e),
            }
        }
        Ok((t, false))
    }

    pub fn theory(&self) -> &Arc<PithyTheory> {
        &self.theory
    }

    pub fn oracle(&self) -> &Arc<AgeOracle> {
        &self.oracle
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn set_max_width(&mut self, cap: usize) {
        self.config.max_width = cap;
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn width(&self) -> usize {
        self.points.len()
    }

    /// The type over variables in creation order.
    pub fn p(&self) -> &QfType {
        &self.p
    }

    /// The type over positions in increasing order of their points.
    pub fn sorted_type(&self) -> QfType {
        self.p.restrict(&self.order)
    }

    /// Points in increasing order.
    pub fn r(&self) -> Vec<&BigRational> {
        self.order.iter().map(|&x| &self.points[x]).collect()
    }

    /// Point of each variable, in creation order.
    pub fn points(&self) -> &[BigRational] {
        &self.points
    }

    /// Variables by increasing point.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn boundaries(&self) -> &[Boundary] {
        &self.v
    }

    pub fn witness_log(&self) -> &[WitnessRecord] {
        &self.witness_log
    }

    pub fn rational_cursor(&self) -> usize {
        self.rational_cursor
    }

    pub fn axiom_cursor(&self) -> usize {
        self.axiom_cursor
    }

    pub fn locate(&self, q: &BigRational) -> IntervalLocation {
        let below = self.v.partition_point(|b| b.lt_rational(q));
        if below == 0 || below == self.v.len() {
            IntervalLocation::Outside
        } else {
            IntervalLocation::Interval(below - 1)
        }
    }

    /// Variable whose interval contains `q`.
    pub fn var_at(&self, q: &BigRational) -> Option<usize> {
        match self.locate(q) {
            IntervalLocation::Interval(j) => Some(self.order[j]),
            IntervalLocation::Outside => None,
        }
    }

    /// Type of a tuple of points in pairwise distinct intervals; repeated points become equalities.
    pub fn type_of_tuple(&self, points: &[BigRational]) -> Result<QfType, ConstructionError> {
        let mut vars = Vec::with_capacity(points.len());
        for (i, q) in points.iter().enumerate() {
            let Some(x) = self.var_at(q) else {
                return Err(ConstructionError::InsufficientDepth(format!("point {q} lies outside every interval")));
            };
            if let Some(k) = (0..i).find(|&k| vars[k] == x && points[k] != *q) {
                return Err(ConstructionError::InsufficientDepth(format!(
                    "points {} and {q} share an interval",
                    points[k]
                )));
            }
            vars.push(x);
        }
        Ok(self.p.restrict(&vars))
    }

    fn prefer(&self) -> impl Fn(usize) -> Truth {
        let rule = self.config.rule;
        let salt = splitmix(self.stage as u64 ^ (self.width() as u64) << 32);
        move |i| match rule {
            CompletionRule::LexMin => Truth::False,
            CompletionRule::Seeded(seed) => {
                Truth::from_bool(splitmix(seed ^ salt ^ splitmix(i as u64)) & 1 == 1)
            }
        }
    }

    fn push_var(&mut self) -> Result<usize, ConstructionError> {
        if self.width() >= self.config.max_width {
            return Err(ConstructionError::WidthCapExceeded { cap: self.config.max_width });
        }
        let x = self.p.push_var();
        self.points.push(rat(0));
        Ok(x)
    }

    fn drop_last_var(&mut self) {
        let keep: Vec<usize> = (0..self.width() - 1).collect();
        self.p = self.p.restrict(&keep);
        self.points.pop();
    }

    fn reset_atoms(&mut self, required: &[usize]) {
        for (rel, args) in atoms_with(&self.theory.signature, self.p.width(), required) {
            self.p.set_atom(rel, &args, Truth::Unknown);
        }
    }

    /// Decides every undecided atom mentioning all of `required`, checking first that
    /// the decided part has no violation through them. On failure those atoms are reset.
    fn complete_var(&mut self, _var: usize, required: &[usize]) -> Result<bool, ConstructionError> {
        if self.oracle.vars_violation(&self.p, required) {
            return Ok(false);
        }
        let (mut atoms, decided): (Vec<_>, Vec<_>) = atoms_with(&self.theory.signature, self.p.width(), required)
            .into_iter()
            .partition(|(rel, args)| self.p.atom(*rel, args) == Truth::Unknown);
        let mut anchored = vec![false; self.p.width()];
        for (_, args) in &decided {
            for &a in args {
                anchored[a] = true;
            }
        }
        // Atoms over the same other positions are decided together, positions already
        // tied to `required` first, so conflicts surface before later positions.
        atoms.sort_by_cached_key(|(rel, args)| {
            let mut others: Vec<usize> = args.iter().copied().filter(|a| !required.contains(a)).collect();
            others.sort_unstable();
            others.dedup();
            let loose = others.iter().any(|&a| !anchored[a]);
            (loose, others.last().copied(), others, *rel, args.clone())
        });
        let prefer = self.prefer();
        let mut budget = self.config.budget;
        match self.oracle.complete(&mut self.p, &atoms, &prefer, &mut budget) {
            Ok(found) => Ok(found),
            Err(_) => Err(ConstructionError::Budget(self.config.budget)),
        }
    }

    /// Refinement at `q` with the boundaries chosen by the engine.
    pub fn refine(&mut self, q: &BigRational) -> Result<RefineCase, ConstructionError> {
        match self.locate(q) {
            IntervalLocation::Interval(j) => {
                let rj = self.points[self.order[j]].clone();
                if rj == *q {
                    self.stage += 1;
                    return Ok(RefineCase::Present);
                }
                self.split(q, Boundary::between(q, &rj))?;
                Ok(RefineCase::Split)
            }
            IntervalLocation::Outside => {
                let beta = if self.v[0].cmp_rational(q).is_gt() {
                    self.v[0].mirror(q)
                } else {
                    self.v[self.v.len() - 1].mirror(q)
                };
                self.extend_outside(q, beta)?;
                Ok(RefineCase::Outside)
            }
        }
    }

    /// Adds `q`, outside all intervals, in a new outermost interval ending at `beta`.
    pub fn extend_outside(&mut self, q: &BigRational, beta: Boundary) -> Result<(), ConstructionError> {
        let left = self.v[0].cmp_rational(q).is_gt();
        let right = self.v[self.v.len() - 1].lt_rational(q);
        let ok = (left && beta.lt_rational(q)) || (right && beta.cmp_rational(q).is_gt());
        if !ok {
            return Err(ConstructionError::InvalidRefinement(format!("{q} is not outside with boundary {beta}")));
        }
        let y = self.push_var()?;
        if !self.complete_var(y, &[y])? {
            self.drop_last_var();
            return Err(ConstructionError::Inconsistent(format!("no consistent extension at {q}")));
        }
        self.points[y] = q.clone();
        if left {
            self.order.insert(0, y);
            self.v.insert(0, beta);
        } else {
            self.order.push(y);
            self.v.push(beta);
        }
        self.stage += 1;
        Ok(())
    }

    /// Splits the interval containing `q` at `beta`, which lies strictly between `q` and
    /// the interval's point; `q` gets a duplicate of that point's position.
    pub fn split(&mut self, q: &BigRational, beta: Boundary) -> Result<(), ConstructionError> {
        let IntervalLocation::Interval(j) = self.locate(q) else {
            return Err(ConstructionError::InvalidRefinement(format!("{q} lies outside every interval")));
        };
        let x = self.order[j];
        let rj = self.points[x].clone();
        let below = *q < rj;
        let between = if below {
            beta.cmp_rational(q).is_gt() && beta.lt_rational(&rj)
        } else {
            beta.cmp_rational(&rj).is_gt() && beta.lt_rational(q)
        };
        if *q == rj || !between {
            return Err(ConstructionError::InvalidRefinement(format!("boundary {beta} does not separate {q} from {rj}")));
        }
        let y = self.push_var()?;
        let sig = self.theory.signature.clone();
        let w = self.p.width();
        let mut src = Vec::new();
        for rel in 0..sig.relations.len() {
            for_each_tuple(w, sig.arity(rel), |t| {
                if t.contains(&y) && !t.contains(&x) {
                    src.clear();
                    src.extend(t.iter().map(|&a| if a == y { x } else { a }));
                    let v = self.p.atom(rel, &src);
                    self.p.set_atom(rel, t, v);
                }
            });
        }
        if !self.complete_var(y, &[x, y])? {
            self.drop_last_var();
            let (p, witness) = self.minimal_counterexample(x);
            return Err(ConstructionError::DuplicationFailure {
                position: j,
                point: rj.to_string(),
                p: Box::new(p),
                witness,
            });
        }
        self.points[y] = q.clone();
        self.order.insert(if below { j } else { j + 1 }, y);
        self.v.insert(j + 1, beta);
        self.stage += 1;
        Ok(())
    }

    /// A small subtype around `x` that still has no duplicating extension.
    fn minimal_counterexample(&self, x: usize) -> (QfType, String) {
        let mut keep: Vec<usize> = (0..self.width()).filter(|&z| z != x).collect();
        let fails = |rest: &[usize]| {
            let mut vars = vec![x];
            vars.extend_from_slice(rest);
            matches!(duplicate(&self.oracle, &self.p.restrict(&vars)), Ok(None))
        };
        let mut i = 0;
        while i < keep.len() {
            let mut trial = keep.clone();
            trial.remove(i);
            if fails(&trial) {
                keep = trial;
            } else {
                i += 1;
            }
        }
        let mut vars = vec![x];
        vars.extend(keep);
        let p = self.p.restrict(&vars);
        let text = p.to_formula().to_string();
        (p, if text.is_empty() { "true".into() } else { text })
    }

    /// Witnesses the pithy axiom `index` for every tuple of current positions.
    ///
    /// Returns the number of new positions.
    pub fn enlarge(&mut self, index: usize) -> Result<usize, ConstructionError> {
        let snapshot = self.clone();
        let result = self.enlarge_inner(index);
        if result.is_err() {
            *self = snapshot;
        }
        result
    }

    fn enlarge_inner(&mut self, index: usize) -> Result<usize, ConstructionError> {
        let theory = self.theory.clone();
        let ax = &theory.axioms[index];
        let k = ax.premise_width;
        if ax.dummy {
            self.stage += 1;
            return Ok(0);
        }
        if k > self.config.max_premise {
            return Err(ConstructionError::PremiseTooWide {
                axiom: ax.label.clone(),
                width: k,
                cap: self.config.max_premise,
            });
        }
        let old_order = self.order.clone();
        let n = old_order.len();
        let mut new_vars = Vec::new();
        let mut idx = vec![0usize; k];
        let mut assign = vec![0usize; k + 1];
        let total = n.pow(k as u32);
        for _ in 0..total {
            for (a, &i) in assign.iter_mut().zip(&idx) {
                *a = old_order[i];
            }
            let internal = (0..self.p.width()).any(|t| {
                assign[k] = t;
                ax.matrix.eval_on_type(&self.p, &assign) == Ok(Truth::True)
            });
            if !internal {
                let z = assign[..k].to_vec();
                let t = self.push_var()?;
                if !self.witness(&ax.matrix.disjuncts, &z, t)? {
                    return Err(ConstructionError::Unwitnessable {
                        axiom: ax.label.clone(),
                        tuple: z.iter().map(|&a| self.points[a].to_string()).collect(),
                    });
                }
                self.witness_log.push(WitnessRecord { stage: self.stage + 1, axiom: ax.label.clone(), tuple: z, witness: t });
                new_vars.push(t);
            }
            for d in (0..k).rev() {
                idx[d] += 1;
                if idx[d] < n {
                    break;
                }
                idx[d] = 0;
            }
        }
        let base = BigRational::from_integer(self.v[self.v.len() - 1].integer_above());
        let nudge = Boundary::new(BigRational::new(1.into(), 2.into()), BigRational::new(1.into(), 16.into()))
            .expect("nonzero");
        for (i, &t) in new_vars.iter().enumerate() {
            let s = &base + rat(i as i64);
            let beta = Boundary::new(&s + nudge.rational_part(), nudge.sqrt2_part().clone()).expect("nonzero");
            self.points[t] = s;
            self.order.push(t);
            self.v.push(beta);
        }
        self.stage += 1;
        Ok(new_vars.len())
    }

    /// Gives the fresh variable `t` a consistent type satisfying some disjunct at `(z, t)`.
    fn witness(&mut self, disjuncts: &[Vec<Literal>], z: &[usize], t: usize) -> Result<bool, ConstructionError> {
        let k = z.len();
        let map = |a: usize| if a == k { t } else { z[a] };
        'disjuncts: for d in disjuncts {
            for lit in d {
                match lit {
                    Literal::Eq { left, right, positive } => {
                        let (a, b) = (map(*left), map(*right));
                        if self.p.same_class(a, b) != *positive {
                            self.reset_atoms(&[t]);
                            continue 'disjuncts;
                        }
                    }
                    Literal::Rel { name, args, positive } => {
                        let rel = self.theory.signature.relation_index(name).expect("theory relation");
                        let tuple: Vec<usize> = args.iter().map(|&a| map(a)).collect();
                        let want = Truth::from_bool(*positive);
                        match self.p.atom(rel, &tuple) {
                            Truth::Unknown if tuple.contains(&t) => self.p.set_atom(rel, &tuple, want),
                            v if v == want => {}
                            _ => {
                                self.reset_atoms(&[t]);
                                continue 'disjuncts;
                            }
                        }
                    }
                }
            }
            if self.complete_var(t, &[t])? {
                return Ok(true);
            }
            self.reset_atoms(&[t]);
        }
        Ok(false)
    }

    /// One scheduled stage: odd stages refine at the next enumerated rational, even
    /// stages enlarge with the next genuine axiom in round-robin order.
    pub fn step(&mut self) -> Result<(), ConstructionError> {
        if self.stage % 2 == 0 {
            let q = enumerated_rational(self.rational_cursor);
            self.refine(&q)?;
            self.rational_cursor += 1;
        } else {
            let genuine: Vec<usize> = (0..self.theory.axioms.len()).filter(|&i| !self.theory.axioms[i].dummy).collect();
            if genuine.is_empty() {
                self.stage += 1;
            } else {
                let i = genuine[self.axiom_cursor % genuine.len()];
                self.enlarge(i)?;
                self.axiom_cursor += 1;
            }
        }
        Ok(())
    }

    /// Checks the separation invariant and oracle consistency.
    pub fn check_invariants(&self) -> Result<(), String> {
        if self.v.len() != self.width() + 1 || self.order.len() != self.width() {
            return Err("length mismatch".into());
        }
        for w in self.v.windows(2) {
            if w[0] >= w[1] {
                return Err("boundaries not increasing".into());
            }
        }
        for (j, &x) in self.order.iter().enumerate() {
            let r = &self.points[x];
            if !(self.v[j].lt_rational(r) && !self.v[j + 1].lt_rational(r)) {
                return Err(format!("point {r} not in interval {j}"));
            }
        }
        if !self.p.is_complete() || !self.p.is_non_redundant() {
            return Err("type not complete and non-redundant".into());
        }
        if let Some(v) = self.oracle.first_violation(&self.p) {
            return Err(format!("axiom {} violated at {:?}", v.label, v.assignment));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TraceRepr::from(self)).expect("trace serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self, ConstructionError> {
        let repr: TraceRepr = serde_json::from_str(s).map_err(|e| ConstructionError::Malformed(e.to_string()))?;
        repr.into_trace(None)
    }

    /// Like `from_json`, reusing an oracle for the same theory.
    pub fn from_json_with_oracle(s: &str, oracle: Arc<AgeOracle>) -> Result<Self, ConstructionError> {
        let repr: TraceRepr = serde_json::from_str(s).map_err(|e| ConstructionError::Malformed(e.to_string()))?;
        repr.into_trace(Some(oracle))
    }
}

#[derive(Serialize, Deserialize)]
struct TraceRepr {
    theory: PithyTheory,
    config: EngineConfig,
    stage: usize,
    #[serde(with = "rational_serde::vec")]
    r: Vec<BigRational>,
    v: Vec<Boundary>,
    #[serde(with = "rational_serde::vec")]
    points: Vec<BigRational>,
    order: Vec<usize>,
    p: QfType,
    rational_cursor: usize,
    axiom_cursor: usize,
    witness_log: Vec<WitnessRecord>,
}

impl From<&ConstructionTrace> for TraceRepr {
    fn from(t: &ConstructionTrace) -> Self {
        TraceRepr {
            theory: (*t.theory).clone(),
            config: t.config.clone(),
            stage: t.stage,
            r: t.r().into_iter().cloned().collect(),
            v: t.v.clone(),
            points: t.points.clone(),
            order: t.order.clone(),
            p: t.p.clone(),
            rational_cursor: t.rational_cursor,
            axiom_cursor: t.axiom_cursor,
            witness_log: t.witness_log.clone(),
        }
    }
}

impl TraceRepr {
    fn into_trace(self, oracle: Option<Arc<AgeOracle>>) -> Result<ConstructionTrace, ConstructionError> {
        let oracle = match oracle {
            Some(o) if **o.theory() == self.theory => o,
            Some(_) => return Err(ConstructionError::Malformed("oracle is for a different theory".into())),
            None => Arc::new(AgeOracle::new(Arc::new(self.theory))),
        };
        let theory = oracle.theory().clone();
        if *self.p.signature() != theory.signature {
            return Err(ConstructionError::Malformed("type signature differs from theory".into()));
        }
        let trace = ConstructionTrace {
            theory,
            oracle,
            config: self.config,
            stage: self.stage,
            points: self.points,
            order: self.order,
            v: self.v,
            p: self.p,
            rational_cursor: self.rational_cursor,
            axiom_cursor: self.axiom_cursor,
            witness_log: self.witness_log,
        };
        let mut sorted = trace.order.clone();
        sorted.sort_unstable();
        if sorted != (0..trace.width()).collect::<Vec<_>>() || trace.p.width() != trace.width() {
            return Err(ConstructionError::Malformed("order is not a permutation of the positions".into()));
        }
        trace.check_invariants().map_err(ConstructionError::Malformed)?;
        Ok(trace)
    }
}

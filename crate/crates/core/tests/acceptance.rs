//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line and
//! fails when its criterion does.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Arc;

use itertools::Itertools;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use forge_core::closure::{acl, check_duplication, check_strong_amalgamation, dcl, orbit_sizes, strong_amalgam};
use forge_core::construction::{CompletionRule, ConstructionError, ConstructionTrace, EngineConfig};
use forge_core::graphon::{compare_with_graphon, export_step_graphon, graph_signature};
use forge_core::logic::{BoolExpr, FiniteStructure, FunctionSymbol, RelationSymbol, Signature, Term};
use forge_core::pipeline::{embedded_config, execute, Command, RunConfig};
use forge_core::seed::{derive_seed, labeled_rng};
use forge_core::theory::{
    catalog, parse_dsl, parse_theory, pithy_expand, star, AgeOracle, FoFormula, FunctionalStructure, PithyTheory, TheorySpec,
};
use forge_core::verify::{
    axiom_satisfaction, exchangeability_from_samples, forbidden_test, Statistic, Subject, SuiteKind, SuiteSpec,
    Verdict, VerifyConfig, EXCHANGEABILITY_CATALOG, FULL_CATALOG,
};

const SEED: u64 = 20_240_601;

/// Entries with strong amalgamation, hence duplication.
const SAP_ENTRIES: &[&str] =
    &["rado", "henson3", "henson_k(4)", "dlo", "universal_poset", "universal_tournament", "equiv_inf_classes"];

/// Entries with finite classes, hence nontrivial definable closure.
const FINITE_CLASS_ENTRIES: &[&str] = &["equiv_classes_of(2)", "equiv_classes_of(3)", "blowup(henson3,2)", "blowup(dlo,2)"];

fn verdict(criterion: usize, title: &str, ok: bool, detail: &str) {
    // Written past the test harness's output capture so every run shows it.
    let _ = writeln!(std::io::stderr(), "{} criterion {criterion} ({title}): {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {criterion} ({title}) failed: {detail}");
}

fn theory(name: &str) -> Arc<PithyTheory> {
    Arc::new(pithy_expand(&catalog(name).unwrap()).unwrap())
}

fn full_config() -> VerifyConfig {
    SuiteSpec::new(SuiteKind::Full, SEED).config
}

// ---------------------------------------------------------------- criterion 1

/// Index of the order pattern of a strict linear order on three labels.
fn order_pattern(s: &FiniteStructure) -> Option<usize> {
    (0..3usize).permutations(3).position(|p| (0..3).all(|i| (i + 1..3).all(|j| s.holds(0, &[p[i], p[j]]))))
}

#[test]
fn criterion_1_exchangeability() {
    let cfg = full_config();
    assert_eq!(cfg.bonferroni, EXCHANGEABILITY_CATALOG.len());
    let mut ok = true;
    let mut parts = Vec::new();
    for name in EXCHANGEABILITY_CATALOG {
        let subject = Subject::prepare(theory(name), &cfg);
        let seed = derive_seed(SEED, &format!("exchangeability/{name}"));
        let samples = subject.draw(3, 60_000, seed).unwrap().unwrap_or_else(|r| panic!("{name}: {r}"));
        let r = exchangeability_from_samples(name, &samples, cfg.threshold(), vec![seed]).unwrap();
        let Statistic::ChiSquare { p_value, dof, .. } = r.statistic else { unreachable!() };
        ok &= r.verdict == Verdict::Pass && dof > 0;
        parts.push(format!("{name} p={p_value:.3e} dof={dof}"));
        if *name == "dlo" {
            let mut counts = [0usize; 6];
            for s in &samples {
                counts[order_pattern(s).expect("every dlo sample is a strict linear order")] += 1;
            }
            let expect = samples.len() as f64 / 6.0;
            let stat: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / expect).sum();
            let p = ChiSquared::new(5.0).unwrap().sf(stat);
            ok &= p > cfg.threshold();
            parts.push(format!("dlo uniform-1/6 oracle p={p:.3e} counts={counts:?}"));
        }
    }
    verdict(1, "exchangeability", ok, &format!("alpha={:.2e}; {}", cfg.threshold(), parts.join("; ")));
}

// ---------------------------------------------------------------- criterion 2

#[test]
fn criterion_2_no_universal_violations() {
    let cfg = full_config();
    let mut ok = true;
    let mut parts = Vec::new();
    for name in FULL_CATALOG {
        let subject = Subject::prepare(theory(name), &cfg);
        let r = forbidden_test(&subject, 30, 1000, derive_seed(SEED, &format!("forbidden/{name}"))).unwrap();
        match (&r.statistic, r.verdict) {
            (Statistic::Violations { count, samples, .. }, v) => {
                ok &= *count == 0 && *samples == 1000 && v == Verdict::Pass;
                parts.push(format!("{name}: {count} violations in {samples} samples"));
            }
            (_, Verdict::Skipped) => {
                ok &= FINITE_CLASS_ENTRIES.contains(name);
                parts.push(format!("{name}: skipped, {}", r.notes.join("; ")));
            }
            (s, v) => panic!("{name}: unexpected {v:?} {s:?}"),
        }
    }
    verdict(2, "universal-constraint surety", ok, &parts.join("; "));
}

// ---------------------------------------------------------------- criterion 3

/// Probability that `dense` holds at labels (0, 1) among `n` i.i.d. continuous
/// points, by enumerating rank orders.
fn dense_rate_by_enumeration(n: usize) -> f64 {
    let (mut good, mut total) = (0u64, 0u64);
    for ranks in (0..n).permutations(n) {
        let (a, b) = (ranks[0], ranks[1]);
        total += 1;
        if a > b || (2..n).any(|i| a < ranks[i] && ranks[i] < b) {
            good += 1;
        }
    }
    good as f64 / total as f64
}

#[test]
fn criterion_3_extension_axiom_convergence() {
    let cfg = VerifyConfig { stop_at_target: true, ..full_config() };
    let sizes = [5, 10, 20, 50, 100, 200, 500, 1000, 2000];
    let mut ok = true;
    let mut parts = Vec::new();
    for name in ["rado", "dlo"] {
        let subject = Subject::prepare(theory(name), &cfg);
        let labels: Vec<String> =
            subject.theory.genuine_axioms().filter(|a| a.premise_width <= 2).map(|a| a.label.clone()).collect();
        assert!(!labels.is_empty());
        for label in labels {
            let seed = derive_seed(SEED, &format!("axiom/{name}/{label}"));
            let r = axiom_satisfaction(&subject, &label, &sizes, 1000, seed, &cfg).unwrap();
            let Statistic::RateCurve { points, monotone } = &r.statistic else { unreachable!() };
            let last = points.last().unwrap();
            ok &= r.verdict == Verdict::Pass;
            parts.push(format!("{name}/{label}: {:.3} at n={} monotone={monotone}", last.rate, last.n));
        }
    }

    // The order-statistics rate, checked by enumeration where that is feasible.
    let exact = |n: usize| 1.0 - 1.0 / n as f64;
    for n in 3..=8 {
        assert!((dense_rate_by_enumeration(n) - exact(n)).abs() < 1e-12, "n={n}");
    }
    let stated = |n: usize| 1.0 - 2f64.powi(-(n as i32 - 2) + 1);
    let dlo = Subject::prepare(theory("dlo"), &VerifyConfig { stop_at_target: false, ..cfg.clone() });
    let mut oracle_ok = true;
    let mut exact_ok = true;
    for n in [5, 10, 20] {
        let r = axiom_satisfaction(&dlo, "dense", &[n], 4000, derive_seed(SEED, &format!("dense/{n}")), &cfg).unwrap();
        let Statistic::RateCurve { points, .. } = &r.statistic else { unreachable!() };
        let rate = points[0].rate;
        oracle_ok &= (rate - stated(n)).abs() <= 0.02;
        exact_ok &= (rate - exact(n)).abs() <= 0.02;
        parts.push(format!(
            "dense n={n}: empirical {rate:.4}, stated oracle {:.4}, order-statistics 1-1/n {:.4}",
            stated(n),
            exact(n)
        ));
    }
    parts.push(format!("within 0.02 of stated oracle: {oracle_ok}; within 0.02 of 1-1/n: {exact_ok}"));
    ok &= oracle_ok;
    verdict(3, "extension-axiom convergence", ok, &parts.join("; "));
}

// ---------------------------------------------------------------- criterion 4

#[test]
fn criterion_4_dichotomy() {
    let mut ok = true;
    let mut parts = Vec::new();
    let engine = EngineConfig { max_width: 96, ..EngineConfig::default() };
    for name in SAP_ENTRIES.iter().chain(["q_min_semigroup"].iter()).chain(FINITE_CLASS_ENTRIES) {
        let th = theory(name);
        let expect_pass = !FINITE_CLASS_ENTRIES.contains(name);
        let dup = check_duplication(&AgeOracle::new(th.clone()), 3);
        let dup_ok = dup.passed == expect_pass && dup.counterexample.is_some() != expect_pass;
        let built = ConstructionTrace::run_until_cap(th, 200, engine.clone());
        let engine_ok = match &built {
            Ok(_) => expect_pass,
            Err(ConstructionError::DuplicationFailure { .. }) => !expect_pass,
            Err(_) => false,
        };
        ok &= dup_ok && engine_ok;
        let engine_msg = match &built {
            Ok((t, capped)) => format!("built to stage {}{}", t.stage(), if *capped { " (width cap)" } else { "" }),
            Err(e) => format!("{}", e.to_string().split(';').next().unwrap_or("")),
        };
        parts.push(format!(
            "{name}: duplication {} over {} types, engine {engine_msg}",
            if dup.passed { "holds" } else { "fails" },
            dup.checked
        ));
    }
    verdict(4, "dichotomy", ok, &parts.join("; "));
}

// ---------------------------------------------------------------- criterion 5

/// Canonical form of an `n`-vertex graph given as an edge bitmask over pairs `i < j`.
fn canon(bits: u32, perms: &[Vec<usize>], pairs: &[(usize, usize)], index: &[Vec<usize>]) -> u32 {
    perms
        .iter()
        .map(|p| {
            pairs
                .iter()
                .enumerate()
                .filter(|(k, _)| bits >> k & 1 == 1)
                .fold(0u32, |acc, (_, &(i, j))| acc | 1 << index[p[i]][p[j]])
        })
        .min()
        .unwrap_or(bits)
}

fn graphs_up_to_iso(n: usize) -> Vec<FiniteStructure> {
    let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
    let mut index = vec![vec![0; n]; n];
    for (k, &(i, j)) in pairs.iter().enumerate() {
        index[i][j] = k;
        index[j][i] = k;
    }
    let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let reps: BTreeSet<u32> = (0..1u32 << pairs.len()).map(|b| canon(b, &perms, &pairs, &index)).collect();
    reps.into_iter()
        .map(|bits| {
            let mut g = FiniteStructure::empty(graph_signature(), n);
            for (k, &(i, j)) in pairs.iter().enumerate() {
                if bits >> k & 1 == 1 {
                    g.insert(0, vec![i, j]).unwrap();
                    g.insert(0, vec![j, i]).unwrap();
                }
            }
            g
        })
        .collect()
}

/// Orbit sizes under the pointwise stabilizer of `a`, by trying every permutation.
fn brute_orbits(g: &FiniteStructure, a: &[usize]) -> Vec<usize> {
    let n = g.size();
    let stab: Vec<Vec<usize>> = (0..n)
        .permutations(n)
        .filter(|p| a.iter().all(|&x| p[x] == x))
        .filter(|p| g.permute(p) == *g)
        .collect();
    (0..n).map(|b| stab.iter().map(|p| p[b]).collect::<BTreeSet<_>>().len()).collect()
}

#[test]
fn criterion_5_closure_oracle() {
    let mut ok = true;
    let mut counts = Vec::new();
    let mut cases = 0usize;
    for n in 1..=6 {
        let graphs = graphs_up_to_iso(n);
        counts.push(graphs.len());
        for g in &graphs {
            let tuples = std::iter::once(vec![]).chain((0..n).map(|a| vec![a])).chain((0..n).permutations(2));
            for a in tuples {
                let orbits = brute_orbits(g, &a);
                cases += 1;
                ok &= orbit_sizes(g, &a).unwrap() == orbits;
                let brute_dcl: BTreeSet<usize> = (0..n).filter(|&b| orbits[b] == 1).collect();
                ok &= dcl(g, &a).unwrap() == brute_dcl;
                for t in 1..=n {
                    let brute_acl: BTreeSet<usize> = (0..n).filter(|&b| orbits[b] <= t).collect();
                    ok &= acl(g, &a, t).unwrap() == brute_acl;
                }
            }
        }
    }
    ok &= counts == [1, 2, 4, 11, 34, 156];
    verdict(
        5,
        "closure oracle equivalence",
        ok,
        &format!(
            "non-isomorphic graphs per size 1..=6: {counts:?} ({} total); {cases} (graph, tuple) cases agree",
            counts.iter().sum::<usize>()
        ),
    );
}

// ---------------------------------------------------------------- criterion 6

fn graph(n: usize, edges: &[(usize, usize)]) -> FiniteStructure {
    let mut g = FiniteStructure::empty(graph_signature(), n);
    for &(a, b) in edges {
        g.insert(0, vec![a, b]).unwrap();
        g.insert(0, vec![b, a]).unwrap();
    }
    g
}

const DEGREE_AT_MOST_ONE: &str = "
theory matchings
rel E/2
forall x: !E(x, x)
forall x y: E(x, y) -> E(y, x)
forall x y z: E(x, y) & E(x, z) -> y = z
";

#[test]
fn criterion_6_strong_amalgamation() {
    let mut parts = Vec::new();
    let point = graph(1, &[]);
    let edge = graph(2, &[(0, 1)]);

    let henson = AgeOracle::new(theory("henson3"));
    let free = strong_amalgam(&point, &edge, &edge, &[0], &[0], &henson).unwrap();
    let free_ok = free.as_ref().is_some_and(|w| w.d.size() == 3 && !w.d.holds(0, &[1, w.from_c[1]]));
    parts.push(format!("triangle-free: {}", if free_ok { "free amalgam" } else { "wrong" }));

    let matchings = AgeOracle::new(Arc::new(pithy_expand(&parse_theory(DEGREE_AT_MOST_ONE, false).unwrap()).unwrap()));
    let matching_ok = strong_amalgam(&point, &edge, &edge, &[0], &[0], &matchings).unwrap().is_none()
        && !check_strong_amalgamation(&matchings, 3).passed;
    parts.push(format!("degree <= 1: {}", if matching_ok { "fails" } else { "wrong" }));

    let dlo = AgeOracle::new(theory("dlo"));
    let sig = dlo.signature().clone();
    let p1 = FiniteStructure::empty(sig.clone(), 1);
    let mut above = FiniteStructure::empty(sig.clone(), 2);
    above.insert(0, vec![0, 1]).unwrap();
    let mut below = FiniteStructure::empty(sig, 2);
    below.insert(0, vec![1, 0]).unwrap();
    let order_ok = strong_amalgam(&p1, &above, &below, &[0], &[0], &dlo).unwrap().is_some_and(|w| {
        let c = w.from_c[1];
        w.d.size() == 3 && w.d.holds(0, &[c, 0]) && w.d.holds(0, &[0, 1]) && w.d.holds(0, &[c, 1])
    });
    parts.push(format!("linear orders: {}", if order_ok { "amalgam" } else { "wrong" }));

    let mut ok = free_ok && matching_ok && order_ok;
    for name in SAP_ENTRIES {
        let r = check_strong_amalgamation(&AgeOracle::new(theory(name)), 4);
        ok &= r.passed;
        parts.push(format!("{name}: {} of {} cases amalgamate", r.tested - r.failures().count(), r.tested));
    }
    verdict(6, "strong-amalgamation checker", ok, &parts.join("; "));
}

// ---------------------------------------------------------------- criterion 7

#[test]
fn criterion_7_graphon_equivalence() {
    // Twin positions are non-adjacent only under LexMin, so only then is the base
    // step graphon exact on interior draws.
    let cfg = VerifyConfig { rule: CompletionRule::LexMin, ..full_config() };
    let subject = Subject::prepare(theory("rado"), &cfg);
    let sampler = subject.sampler.as_ref().unwrap();
    let r = compare_with_graphon(sampler, 3, 100_000, derive_seed(SEED, "graphon")).unwrap();
    let mut ok = r.tv < 0.02;
    let mut parts = vec![format!("rado n=3 TV={:.4} ({} vs {} interior draws)", r.tv, r.accepted_a, r.accepted_b)];
    for name in ["rado", "henson3", "henson_k(4)"] {
        let s = Subject::prepare(theory(name), &cfg);
        let sampler = s.sampler.as_ref().unwrap();
        let w = export_step_graphon(sampler.base(), sampler.measure()).unwrap();
        w.validate().unwrap();
        ok &= w.random_free;
        parts.push(format!("{name}: {} parts, random_free={}", w.parts(), w.random_free));
    }
    verdict(7, "graphon equivalence", ok, &parts.join("; "));
}

// ---------------------------------------------------------------- criterion 8

fn var(v: &str) -> Term {
    Term::Var(v.to_string())
}

fn app(f: &str, args: Vec<Term>) -> Term {
    Term::App(f.to_string(), args)
}

fn atom(r: &str, args: Vec<Term>) -> FoFormula {
    FoFormula::Atom(r.to_string(), args)
}

fn eq(a: Term, b: Term) -> FoFormula {
    FoFormula::Eq(a, b)
}

fn signature(rels: &[(&str, usize)], funs: &[(&str, usize)]) -> Arc<Signature> {
    let sig = Signature {
        relations: rels.iter().map(|(n, a)| RelationSymbol { name: n.to_string(), arity: *a }).collect(),
        functions: funs.iter().map(|(n, a)| FunctionSymbol { name: n.to_string(), arity: *a }).collect(),
    };
    sig.validate().unwrap();
    Arc::new(sig)
}

/// Every slot of a structure: a relation tuple with 2 values or a function entry with `n`.
fn slots(sig: &Signature, n: usize) -> Vec<(bool, usize, Vec<usize>)> {
    let mut out = Vec::new();
    for (r, sym) in sig.relations.iter().enumerate() {
        forge_core::logic::for_each_tuple(n, sym.arity, |t| out.push((true, r, t.to_vec())));
    }
    for (f, sym) in sig.functions.iter().enumerate() {
        forge_core::logic::for_each_tuple(n, sym.arity, |t| out.push((false, f, t.to_vec())));
    }
    out
}

fn build(sig: &Arc<Signature>, n: usize, slots: &[(bool, usize, Vec<usize>)], values: &[usize]) -> FunctionalStructure {
    let mut m = FunctionalStructure::new(sig.clone(), n);
    for ((is_rel, i, t), &v) in slots.iter().zip(values) {
        if *is_rel {
            m.set_relation(*i, t.clone(), v == 1);
        } else {
            m.set_function(*i, t, v);
        }
    }
    m
}

/// Calls `f` on every structure of size `n`, or on `sampled` random ones when
/// there are more than `limit`.
fn for_each_structure(sig: &Arc<Signature>, n: usize, limit: u64, sampled: usize, mut f: impl FnMut(&FunctionalStructure)) -> bool {
    let slots = slots(sig, n);
    let radix: Vec<usize> = slots.iter().map(|s| if s.0 { 2 } else { n }).collect();
    let total = radix.iter().try_fold(1u64, |acc, &r| acc.checked_mul(r as u64));
    if total.is_some_and(|t| t <= limit) {
        let mut values = vec![0; slots.len()];
        loop {
            f(&build(sig, n, &slots, &values));
            let Some(k) = (0..values.len()).find(|&k| values[k] + 1 < radix[k]) else { return true };
            values[k] += 1;
            values[..k].iter_mut().for_each(|v| *v = 0);
        }
    }
    let mut rng = labeled_rng(SEED, &format!("structures/{n}"));
    for _ in 0..sampled {
        let values: Vec<usize> = radix.iter().map(|&r| rng.gen_range(0..r)).collect();
        f(&build(sig, n, &slots, &values));
    }
    false
}

/// `phi` on `m` and `phi*` on the graph encoding of `m` agree under every assignment.
fn agrees(phi: &FoFormula, phi_star: &FoFormula, m: &FunctionalStructure, rel: &FunctionalStructure) -> bool {
    let free: Vec<String> = phi.free_vars().into_iter().collect();
    (0..free.len()).map(|_| 0..m.size()).multi_cartesian_product().chain(free.is_empty().then(Vec::new)).all(|vals| {
        let mut env: BTreeMap<String, usize> = free.iter().cloned().zip(vals).collect();
        let a = m.eval(phi, &mut env).unwrap();
        let b = rel.eval(phi_star, &mut env).unwrap();
        a == b
    })
}

fn expr_formula(e: &BoolExpr) -> FoFormula {
    match e {
        BoolExpr::True => FoFormula::True,
        BoolExpr::False => FoFormula::False,
        BoolExpr::Atom(r, args) => FoFormula::Atom(r.clone(), args.clone()),
        BoolExpr::Eq(a, b) => FoFormula::Eq(a.clone(), b.clone()),
        BoolExpr::Not(f) => FoFormula::not(expr_formula(f)),
        BoolExpr::And(fs) => FoFormula::And(fs.iter().map(expr_formula).collect()),
        BoolExpr::Or(fs) => FoFormula::Or(fs.iter().map(expr_formula).collect()),
        BoolExpr::Implies(a, b) => FoFormula::Or(vec![FoFormula::not(expr_formula(a)), expr_formula(b)]),
        BoolExpr::Iff(a, b) => FoFormula::Or(vec![
            FoFormula::And(vec![expr_formula(a), expr_formula(b)]),
            FoFormula::And(vec![FoFormula::not(expr_formula(a)), FoFormula::not(expr_formula(b))]),
        ]),
    }
}

/// The sentences of a theory, by label.
fn sentences(spec: &TheorySpec) -> BTreeMap<String, FoFormula> {
    let close = |q: fn(&str, FoFormula) -> FoFormula, vars: &[String], body: FoFormula| {
        vars.iter().rev().fold(body, |acc, v| q(v, acc))
    };
    let mut out = BTreeMap::new();
    for u in &spec.universal {
        out.insert(u.label.clone(), close(FoFormula::forall, &u.vars, expr_formula(&u.body)));
    }
    for x in &spec.extension {
        let inner = close(FoFormula::exists, &x.exists, expr_formula(&x.body));
        out.insert(x.label.clone(), close(FoFormula::forall, &x.forall, inner));
    }
    out
}

const MIN_SEMIGROUP: &str = "
theory q_min_semigroup
fun min/2
@selective forall x y: min(x, y) = x | min(x, y) = y
@commutative forall x y: (min(x, y) = x & min(y, x) = x) | (min(x, y) = y & min(y, x) = y)
@transitive forall x y z: min(x, y) = y | min(y, z) = z | min(x, z) = x
@no_least forall x exists y: min(x, y) = y & y != x
@dense forall x1 x2 exists y: min(x1, x2) = x2 | (min(x1, y) = x1 & min(y, x2) = y & y != x1 & y != x2)
";

const UNARY_CONSTANT: &str = "
theory pointed
rel P/1
fun f/1
const c
@closed forall x: P(x) -> P(f(x))
@fixed forall x: f(f(x)) = x | x = c
@preimage forall x exists y: f(y) = x & (P(y) | y = c)
";

#[test]
fn criterion_8_relationalization_round_trip() {
    let unary = signature(&[("P", 1)], &[("f", 1), ("c", 0)]);
    let unary_corpus = vec![
        atom("P", vec![app("f", vec![var("x")])]),
        eq(app("f", vec![app("f", vec![var("x")])]), var("x")),
        eq(app("f", vec![var("x")]), app("c", vec![])),
        FoFormula::exists("y", FoFormula::And(vec![eq(app("f", vec![var("y")]), var("x")), FoFormula::not(atom("P", vec![var("y")]))])),
        FoFormula::Or(vec![FoFormula::not(eq(app("f", vec![var("x")]), app("f", vec![var("y")]))), eq(var("x"), var("y"))]),
        FoFormula::forall("x", FoFormula::exists("y", eq(app("f", vec![var("y")]), var("x")))),
        FoFormula::And(vec![atom("P", vec![app("c", vec![])]), FoFormula::exists("y", eq(app("f", vec![var("y")]), app("f", vec![app("f", vec![app("c", vec![])])])))]),
        FoFormula::forall("y", FoFormula::Or(vec![FoFormula::not(atom("P", vec![app("f", vec![var("y")])])), eq(app("f", vec![app("f", vec![var("y")])]), var("y"))])),
    ];
    let binary = signature(&[], &[("min", 2)]);
    let m = |a: Term, b: Term| app("min", vec![a, b]);
    let binary_corpus = vec![
        eq(m(var("x"), var("y")), m(var("y"), var("x"))),
        eq(m(m(var("x"), var("y")), var("z")), m(var("x"), m(var("y"), var("z")))),
        FoFormula::Or(vec![eq(m(var("x"), var("y")), var("x")), eq(m(var("x"), var("y")), var("y"))]),
        FoFormula::exists("z", eq(m(var("x"), var("z")), var("z"))),
        FoFormula::forall("x", eq(m(var("x"), var("x")), var("x"))),
        FoFormula::not(eq(m(var("x"), m(var("x"), var("y"))), var("y"))),
    ];
    let relation_and_function = signature(&[("R", 2)], &[("h", 1)]);
    let h = |t: Term| app("h", vec![t]);
    let mixed_corpus = vec![
        atom("R", vec![h(var("x")), h(h(var("y")))]),
        FoFormula::forall("y", FoFormula::Or(vec![FoFormula::not(atom("R", vec![var("x"), var("y")])), atom("R", vec![h(var("y")), h(var("x"))])])),
        FoFormula::exists("z", FoFormula::And(vec![atom("R", vec![var("z"), h(var("z"))]), FoFormula::not(eq(h(var("z")), var("x")))])),
        eq(h(h(h(var("x")))), var("x")),
    ];

    let mut ok = true;
    let mut parts = Vec::new();
    let mut run = |label: &str, sig: &Arc<Signature>, corpus: &[FoFormula], sizes: std::ops::RangeInclusive<usize>| {
        let stars: Vec<FoFormula> = corpus.iter().map(star).collect();
        for n in sizes {
            let (mut checked, mut agree) = (0usize, true);
            let exhaustive = for_each_structure(sig, n, 100_000, 4_000, |s| {
                let rel = FunctionalStructure::from_relational(&s.to_relational());
                checked += 1;
                agree &= corpus.iter().zip(&stars).all(|(phi, ps)| agrees(phi, ps, s, &rel));
            });
            ok &= agree;
            parts.push(format!(
                "{label} n={n}: {checked} {} structures {}",
                if exhaustive { "(all)" } else { "(sampled)" },
                if agree { "agree" } else { "DISAGREE" }
            ));
        }
    };
    run("unary+constant", &unary, &unary_corpus, 1..=4);
    run("binary", &binary, &binary_corpus, 1..=4);
    run("relation+unary", &relation_and_function, &mixed_corpus, 1..=4);

    // Whole theories: each sentence against its relational translation.
    for src in [MIN_SEMIGROUP, UNARY_CONSTANT] {
        let functional = parse_dsl(src).unwrap();
        let relational = parse_theory(src, true).unwrap();
        let sig = Arc::new(functional.signature.clone());
        let (plain, translated) = (sentences(&functional), sentences(&relational));
        let shared: Vec<&String> = plain.keys().filter(|k| translated.contains_key(*k)).collect();
        let mut agree = !shared.is_empty();
        let mut checked = 0usize;
        for n in 1..=3 {
            for_each_structure(&sig, n, 100_000, 4_000, |s| {
                let rel = FunctionalStructure::from_relational(&s.to_relational());
                checked += 1;
                let mut env = BTreeMap::new();
                let all_translated = translated.values().all(|phi| rel.eval(phi, &mut env).unwrap());
                let all_plain = plain.values().all(|phi| s.eval(phi, &mut env).unwrap());
                agree &= all_translated == all_plain;
                for k in &shared {
                    agree &= s.eval(&plain[*k], &mut env).unwrap() == rel.eval(&translated[*k], &mut env).unwrap();
                }
            });
        }
        ok &= agree;
        parts.push(format!("theory {}: {checked} structures {}", functional.name, if agree { "agree" } else { "DISAGREE" }));
    }
    verdict(8, "relationalization round-trip", ok, &parts.join("; "));
}

// ---------------------------------------------------------------- criterion 9

fn scratch() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn criterion_9_determinism() {
    let dir = scratch();
    let path = |f: &str| dir.join(f).to_string_lossy().into_owned();
    std::fs::write(path("pointed.thy"), UNARY_CONSTANT).unwrap();

    let mut runs: Vec<(&str, RunConfig)> = Vec::new();
    let cfg = |command: Command, input: &str| RunConfig { input: Some(input.to_string()), ..RunConfig::new(command) };
    runs.push(("compile", RunConfig { relationalize: true, ..cfg(Command::Compile, &path("pointed.thy")) }));
    runs.push(("check-sap", RunConfig { bound: Some(3), ..cfg(Command::CheckSap, "catalog:henson3") }));
    runs.push(("check-dup", RunConfig { bound: Some(3), ..cfg(Command::CheckDup, "catalog:equiv_classes_of(2)") }));
    runs.push(("build", RunConfig { stages: Some(40), max_width: Some(64), ..cfg(Command::Build, "catalog:rado") }));
    runs.push(("sample", RunConfig { n: Some(6), draws: Some(20), seed: 7, stages: Some(40), ..cfg(Command::Sample, "catalog:dlo") }));
    runs.push(("verify", RunConfig { suite: Some(SuiteKind::Quick), seed: 7, ..RunConfig::new(Command::Verify) }));

    let mut ok = true;
    let mut names = Vec::new();
    let mut check = |name: &str, c: &RunConfig, ok: &mut bool| -> String {
        let first = execute(c).unwrap().main;
        let second = execute(c).unwrap().main;
        let replayed = execute(&embedded_config(&first).unwrap()).unwrap().main;
        *ok &= first == second && first == replayed;
        names.push(name.to_string());
        first
    };
    let mut artifacts = HashMap::new();
    for (name, c) in &runs {
        artifacts.insert(*name, check(name, c, &mut ok));
    }
    std::fs::write(path("trace.json"), &artifacts["build"]).unwrap();
    let row = artifacts["sample"].lines().nth(1).unwrap().to_string();
    std::fs::write(path("structure.json"), row).unwrap();
    let trace = path("trace.json");
    let structure = path("structure.json");
    let more = [
        ("dcl", RunConfig { tuple: Some(vec![0, 2]), ..cfg(Command::Dcl, &structure) }),
        ("acl", RunConfig { tuple: Some(vec![1]), bound: Some(2), ..cfg(Command::Acl, &structure) }),
        ("trace-dump", cfg(Command::TraceDump, &trace)),
        ("trace-dump --svg", RunConfig { svg: true, ..cfg(Command::TraceDump, &trace) }),
        ("graphon export", cfg(Command::GraphonExport, &trace)),
        ("compare", RunConfig { n: Some(3), draws: Some(3000), seed: 3, ..cfg(Command::Compare, &trace) }),
    ];
    for (name, c) in &more {
        let out = check(name, c, &mut ok);
        if *name == "graphon export" {
            std::fs::write(path("graphon.json"), out).unwrap();
        }
    }
    let gs = RunConfig { n: Some(4), draws: Some(50), seed: 5, ..cfg(Command::GraphonSample, &path("graphon.json")) };
    check("graphon sample", &gs, &mut ok);

    // A replay must refuse an input that no longer matches its digest.
    let compiled = execute(&runs[0].1).unwrap().main;
    std::fs::write(path("pointed.thy"), format!("{UNARY_CONSTANT}# edited\n")).unwrap();
    ok &= execute(&embedded_config(&compiled).unwrap()).is_err();

    verdict(9, "determinism", ok, &format!("byte-identical across two runs and a replay: {}", names.join(", ")));
}

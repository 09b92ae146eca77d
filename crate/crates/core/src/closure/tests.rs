use std::collections::BTreeSet;
use std::sync::Arc;

use itertools::Itertools;
use proptest::prelude::*;

use super::*;
use crate::logic::{type_extends, FiniteStructure, Signature};
use crate::theory::{catalog, parse_theory, pithy_expand, AgeOracle};

fn graph_sig() -> Arc<Signature> {
    Arc::new(Signature::relational(&[("E", 2)]).unwrap())
}

fn graph(n: usize, edges: &[(usize, usize)]) -> FiniteStructure {
    let mut s = FiniteStructure::empty(graph_sig(), n);
    for &(a, b) in edges {
        s.insert(0, vec![a, b]).unwrap();
        s.insert(0, vec![b, a]).unwrap();
    }
    s
}

fn brute_automorphisms(s: &FiniteStructure) -> Vec<Vec<usize>> {
    (0..s.size())
        .permutations(s.size())
        .filter(|p| s.permute(p) == *s)
        .sorted()
        .collect()
}

fn brute_orbit_sizes(s: &FiniteStructure, a: &[usize]) -> Vec<usize> {
    let stab: Vec<Vec<usize>> = brute_automorphisms(s).into_iter().filter(|g| a.iter().all(|&x| g[x] == x)).collect();
    (0..s.size()).map(|b| stab.iter().map(|g| g[b]).collect::<BTreeSet<_>>().len()).collect()
}

fn oracle(spec_name: &str) -> AgeOracle {
    AgeOracle::new(Arc::new(pithy_expand(&catalog(spec_name).unwrap()).unwrap()))
}

fn oracle_src(src: &str) -> AgeOracle {
    AgeOracle::new(Arc::new(pithy_expand(&parse_theory(src, false).unwrap()).unwrap()))
}

const MATCHINGS: &str = "
theory matchings
rel E/2
forall x: !E(x, x)
forall x y: E(x, y) -> E(y, x)
forall x y z: E(x, y) & E(x, z) -> y = z
";

#[test]
fn small_automorphism_groups() {
    let path = graph(3, &[(0, 1), (1, 2)]);
    assert_eq!(automorphisms(&path).unwrap().perms, vec![vec![0, 1, 2], vec![2, 1, 0]]);
    assert_eq!(automorphisms(&graph(3, &[])).unwrap().order(), 6);
    let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
    let aut = automorphisms(&c4).unwrap();
    assert_eq!(aut.order(), 8);
    assert_eq!(aut.perms, brute_automorphisms(&c4));
    assert!(aut.contains(&[1, 2, 3, 0]));
}

#[test]
fn size_bound_is_enforced() {
    let big = graph(11, &[]);
    assert!(matches!(automorphisms(&big), Err(ClosureError::SizeOverBound { size: 11, bound: 10 })));
    let path = graph(11, &(0..10).map(|i| (i, i + 1)).collect::<Vec<_>>());
    assert_eq!(automorphisms_with_bound(&path, 11).unwrap().order(), 2);
    assert!(dcl(&big, &[]).is_err());
}

#[test]
fn closures_of_small_graphs() {
    let path = graph(3, &[(0, 1), (1, 2)]);
    assert_eq!(dcl(&path, &[]).unwrap(), BTreeSet::from([1]));
    let c4 = graph(4, &[(0, 1), (1, 2), (2, 3), (3, 0)]);
    assert_eq!(dcl(&c4, &[0]).unwrap(), BTreeSet::from([0, 2]));
    assert_eq!(acl(&c4, &[0], 1).unwrap(), BTreeSet::from([0, 2]));
    assert_eq!(acl(&c4, &[0], 4).unwrap().len(), 4);
    assert_eq!(dcl(&graph(3, &[]), &[0]).unwrap(), BTreeSet::from([0]));
    let k2k2 = graph(4, &[(0, 1), (2, 3)]);
    assert_eq!(acl(&k2k2, &[0], 1).unwrap(), BTreeSet::from([0, 1]));
    assert!(matches!(dcl(&c4, &[7]), Err(ClosureError::OutOfRange(7))));
}

#[test]
fn blowups() {
    let single = blowup(&graph(1, &[]), 3).unwrap();
    assert_eq!(single.size(), 3);
    assert_eq!(single.relation(1).len(), 9);
    assert!(single.relation(0).is_empty());
    let k2 = blowup(&graph(2, &[(0, 1)]), 2).unwrap();
    assert_eq!(k2.size(), 4);
    for a in 0..4 {
        for b in 0..4 {
            assert_eq!(k2.holds(0, &[a, b]), a / 2 != b / 2);
            assert_eq!(k2.holds(1, &[a, b]), a / 2 == b / 2);
        }
    }
    assert!(blowup(&graph(2, &[]), 0).is_err());
    let p3 = blowup(&graph(3, &[(0, 1), (1, 2)]), 2).unwrap();
    // fixing a point fixes its class, so the classmate is definable
    for a in 0..6 {
        let class: BTreeSet<usize> = [a / 2 * 2, a / 2 * 2 + 1].into();
        assert_eq!(dcl(&p3, &[a]).unwrap(), class);
        assert!(acl(&p3, &[a], 2).unwrap().is_superset(&class));
    }
    assert_eq!(orbit_sizes(&p3, &[]).unwrap(), vec![4, 4, 2, 2, 4, 4]);
    assert!(dcl(&p3, &[]).unwrap().is_empty());
}

#[test]
fn worked_amalgamation_triples() {
    let a = graph(1, &[]);
    let edge = graph(2, &[(0, 1)]);
    let henson = oracle("henson3");
    let w = strong_amalgam(&a, &edge, &edge, &[0], &[0], &henson).unwrap().unwrap();
    assert_eq!(w.d.size(), 3);
    assert_eq!(w.from_c, vec![0, 2]);
    assert!(!w.d.holds(0, &[1, 2]));
    let matchings = oracle_src(MATCHINGS);
    assert_eq!(strong_amalgam(&a, &edge, &edge, &[0], &[0], &matchings).unwrap(), None);

    let dlo = oracle("dlo");
    let sig = dlo.signature().clone();
    let point = FiniteStructure::empty(sig.clone(), 1);
    let mut b = FiniteStructure::empty(sig.clone(), 2);
    b.insert(0, vec![0, 1]).unwrap();
    let mut c = FiniteStructure::empty(sig.clone(), 2);
    c.insert(0, vec![1, 0]).unwrap();
    let w = strong_amalgam(&point, &b, &c, &[0], &[0], &dlo).unwrap().unwrap();
    let (a0, b0, c0) = (0, 1, w.from_c[1]);
    assert!(w.d.holds(0, &[c0, a0]) && w.d.holds(0, &[a0, b0]) && w.d.holds(0, &[c0, b0]));

    assert!(matches!(
        strong_amalgam(&a, &edge, &edge, &[0], &[5], &henson),
        Err(ClosureError::InvalidEmbedding(_))
    ));
}

#[test]
fn amalgamation_reports() {
    let report = check_strong_amalgamation(&oracle_src(MATCHINGS), 3);
    assert!(!report.passed);
    let fail = report.failures().next().unwrap();
    assert!(fail.b.size() <= 3 && fail.c.size() <= 3);
    let report = check_strong_amalgamation(&oracle("dlo"), 3);
    assert!(report.passed, "{:?}", report.failures().next());
    for case in &report.cases {
        let w = case.witness.as_ref().unwrap();
        assert_eq!(w.d.size(), case.b.size() + case.c.size() - case.shared);
        assert_eq!(w.d.restrict(&w.from_b), case.b);
        assert_eq!(w.d.restrict(&w.from_c), case.c);
    }
}

#[test]
fn duplication_dichotomy() {
    for name in ["henson3", "dlo", "rado"] {
        let r = check_duplication(&oracle(name), 3);
        assert!(r.passed, "{name}");
        for v in &r.verdicts {
            let q = v.q.as_ref().unwrap();
            let w = v.p.width();
            let mut other: Vec<usize> = vec![w];
            other.extend(1..w);
            assert!(type_extends(q, &v.p, &(0..w).collect::<Vec<_>>()).unwrap());
            assert!(type_extends(q, &v.p, &other).unwrap());
            assert!(q.is_non_redundant());
        }
    }
    let r = check_duplication(&oracle("equiv_classes_of(2)"), 3);
    assert!(!r.passed);
    let p = r.counterexample.unwrap();
    assert_eq!(p.width(), 2);
    assert_eq!(p.atom(0, &[0, 1]), crate::logic::Truth::True);
    assert!(check_duplication(&oracle("equiv_inf_classes"), 3).passed);
}

#[test]
fn canonical_forms_identify_isomorphic_graphs() {
    let a = graph(4, &[(0, 1), (1, 2)]);
    let b = graph(4, &[(3, 2), (2, 0)]);
    assert_eq!(canonical_form(&a, 0), canonical_form(&b, 0));
    assert_ne!(canonical_form(&a, 0), canonical_form(&graph(4, &[(0, 1), (2, 3)]), 0));
}

fn arb_graph() -> impl Strategy<Value = FiniteStructure> {
    (1usize..7).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * (n - 1) / 2).prop_map(move |bits| {
            let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
            let edges: Vec<(usize, usize)> = pairs.into_iter().zip(bits).filter(|(_, b)| *b).map(|(p, _)| p).collect();
            graph(n, &edges)
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orbits_match_brute_force(s in arb_graph(), pick in proptest::collection::vec(0usize..6, 0..3)) {
        let a: Vec<usize> = pick.into_iter().filter(|&x| x < s.size()).collect();
        prop_assert_eq!(orbit_sizes(&s, &a).unwrap(), brute_orbit_sizes(&s, &a));
        prop_assert_eq!(automorphisms(&s).unwrap().perms, brute_automorphisms(&s));
    }

    #[test]
    fn closure_chain_and_idempotence(s in arb_graph(), pick in proptest::collection::vec(0usize..6, 0..3), t in 1usize..4) {
        let a: Vec<usize> = pick.into_iter().filter(|&x| x < s.size()).collect();
        let d = dcl(&s, &a).unwrap();
        prop_assert!(a.iter().all(|x| d.contains(x)));
        prop_assert!(d.is_subset(&acl(&s, &a, t).unwrap()));
        let dd: Vec<usize> = d.iter().copied().collect();
        prop_assert_eq!(dcl(&s, &dd).unwrap(), d);
    }

    #[test]
    fn canonical_form_is_invariant(s in arb_graph(), seed in any::<u64>()) {
        let n = s.size();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut x = seed;
        for i in (1..n).rev() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (x >> 33) as usize % (i + 1));
        }
        prop_assert_eq!(canonical_form(&s, 0), canonical_form(&s.permute(&perm), 0));
    }
}

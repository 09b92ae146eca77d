use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::logic::{diagram_of, FiniteStructure, QfType, Signature, Truth};

fn oracle(name: &str) -> AgeOracle {
    AgeOracle::new(Arc::new(pithy_expand(&catalog(name).unwrap()).unwrap()))
}

fn graph(sig: &Arc<Signature>, n: usize, edges: &[(usize, usize)], symmetric: bool) -> FiniteStructure {
    let mut s = FiniteStructure::empty(sig.clone(), n);
    for &(a, b) in edges {
        s.insert(0, vec![a, b]).unwrap();
        if symmetric {
            s.insert(0, vec![b, a]).unwrap();
        }
    }
    s
}

fn full_type(s: &FiniteStructure) -> QfType {
    let all: Vec<usize> = (0..s.size()).collect();
    diagram_of(s, &all).unwrap()
}

const HENSON_SRC: &str = "
theory triangle_free
rel E/2
forall x: !E(x, x)
forall x y: E(x, y) -> E(y, x)
forbid K3 size 3 { E(0,1) E(1,0) E(0,2) E(2,0) E(1,2) E(2,1) }
forall x exists y: E(x, y)
forall x exists y: x != y & !E(x, y)
";

#[test]
fn parses_triangle_free_graphs() {
    let spec = parse_theory(HENSON_SRC, false).unwrap();
    assert_eq!(spec.forbidden.len(), 1);
    assert_eq!(spec.universal.len(), 3);
    assert_eq!(spec.extension.len(), 2);
    assert_eq!(spec.universal[2].label, "forbid0");
}

#[test]
fn empty_theory_has_no_constraints() {
    let spec = parse_theory("theory empty\nrel E/2\n", false).unwrap();
    assert!(spec.universal.is_empty() && spec.extension.is_empty());
    let t = pithy_expand(&spec).unwrap();
    assert!(t.axioms.is_empty());
}

#[test]
fn constants_need_relationalization() {
    let src = "theory pointed\nrel E/2\nconst c\nforall x: E(c, x)\n";
    let err = parse_theory(src, false).unwrap_err();
    assert!(matches!(err, TheoryError::ConstantNeedsRelationalization(ref c) if c == "c"));
    assert!(err.to_string().contains("selectors"));
    let spec = parse_theory(src, true).unwrap();
    let sym = &spec.signature.relations[spec.signature.relation_index("c*").unwrap()];
    assert_eq!(sym.arity, 1);
    assert!(spec.extension.iter().any(|a| a.label == "total_c" && a.forall.is_empty()));
    assert!(spec.universal.iter().any(|a| a.label == "functional_c"));
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_theory("theory t\nrel E/2\nforall x: E(x, x) &\n", false).unwrap_err();
    assert!(matches!(err, TheoryError::Parse { line: 4, .. } | TheoryError::Parse { line: 3, .. }), "{err}");
    let err = parse_theory("theory t\nrel E/2\nforall x: E(x, z)\n", false).unwrap_err();
    assert!(err.to_string().contains("unbound variable"), "{err}");
    let err = parse_theory("theory t\nrel E/2\nforall x: E(x)\n", false).unwrap_err();
    assert!(err.to_string().contains("malformed atom"), "{err}");
    let err = parse_theory("theory t\nrel E/2\nforall x: F(x, x)\n", false).unwrap_err();
    assert!(matches!(err, TheoryError::Parse { line: 3, .. }), "{err}");
}

#[test]
fn relationalizes_binary_function() {
    let spec = parse_theory("theory m\nfun min/2\nforall x y: min(x, y) = min(y, x)\n", true).unwrap();
    assert!(spec.is_relational());
    let r = spec.signature.relation_index("min*").unwrap();
    assert_eq!(spec.signature.relations[r].arity, 3);
    let total = spec.extension.iter().find(|a| a.label == "total_min").unwrap();
    assert_eq!(total.forall.len(), 2);
    assert_eq!(total.exists.len(), 1);
    let func = spec.universal.iter().find(|a| a.label == "functional_min").unwrap();
    assert_eq!(func.vars.len(), 4);
}

#[test]
fn relationalize_is_identity_on_relational_specs() {
    let spec = catalog("rado").unwrap();
    assert_eq!(relationalize(&spec).unwrap(), spec);
}

#[test]
fn q_min_is_chain_free() {
    let spec = catalog("q_min_semigroup").unwrap();
    assert!(spec.extension.iter().all(|a| a.exists.len() == 1), "{:?}", spec.extension);
    assert!(spec.universal.iter().any(|a| a.label == "selective_pinned"));
    let t = pithy_expand(&spec).unwrap();
    assert!(t.auxiliary.is_empty());
}

#[test]
fn shared_graph_outputs_are_kept() {
    let spec = parse_theory("theory fg\nfun f/1\nfun g/1\n@same forall x y: f(x) = g(y)\n", true).unwrap();
    assert!(spec.universal.iter().all(|a| a.label != "same_pinned"));
    let same = spec.universal.iter().find(|a| a.label == "same").unwrap();
    assert_eq!(same.vars.len(), 4);
}

#[test]
fn multi_witness_axioms_get_an_auxiliary_chain() {
    let spec = parse_theory("theory path\nrel E/2\n@p forall x exists y1 y2: E(x, y1) & E(y1, y2)\n", false).unwrap();
    let t = pithy_expand(&spec).unwrap();
    t.check_invariants().unwrap();
    let e1 = t.signature.relation_index("_p_E1").unwrap();
    assert_eq!(t.signature.relations[e1].arity, 2);
    assert!(t.axioms.iter().all(|a| a.matrix.vars.len() == a.premise_width + 1));
    let step = t.axioms.iter().find(|a| a.label == "p#step0").unwrap();
    assert_eq!(step.premise_width, 1);
    let last = t.axioms.iter().find(|a| a.label == "p#last").unwrap();
    assert_eq!(last.premise_width, 2);
    assert!(last.matrix.to_string().contains("E(x, y1)"));
    for label in ["p#back0", "p#close", "p#trigger"] {
        assert!(t.universal.iter().any(|u| u.label == label), "{label}");
    }
}

#[test]
fn universal_axioms_are_mirrored() {
    let spec = parse_theory("theory s\nrel E/2\n@sym forall x y: E(x, y) -> E(y, x)\n", false).unwrap();
    let t = pithy_expand(&spec).unwrap();
    let m = &t.axioms[0];
    assert!(m.dummy);
    assert_eq!(m.label, "sym#mirror");
    assert_eq!(m.matrix.vars, vec!["x", "y", "w"]);
}

#[test]
fn one_point_axioms_pass_through() {
    let spec = parse_theory("theory s\nrel E/2\n@n forall x exists y: E(x, y)\n", false).unwrap();
    let t = pithy_expand(&spec).unwrap();
    assert_eq!(t.axioms.len(), 1);
    assert_eq!(t.axioms[0].matrix.to_string(), "E(x, y)");
    assert_eq!(t.signature.relations.len(), 1);
}

#[test]
fn triangle_is_outside_the_henson_age() {
    let o = oracle("henson3");
    let sig = o.signature().clone();
    let k3 = graph(&sig, 3, &[(0, 1), (1, 2), (0, 2)], true);
    assert!(!o.consistent_with(&full_type(&k3)));
    let v = o.first_violation(&full_type(&k3)).unwrap();
    assert_eq!(v.label, "no_k3");
    assert!(o.consistent_with(&full_type(&graph(&sig, 1, &[], true))));
    assert!(o.consistent_with(&full_type(&graph(&sig, 4, &[(0, 1), (1, 2), (2, 3), (3, 0)], true))));
}

#[test]
fn class_size_two() {
    let o = oracle("equiv_classes_of(2)");
    let sig = o.signature().clone();
    let mut s = FiniteStructure::empty(sig.clone(), 3);
    for (a, b) in [(0, 0), (1, 1), (2, 2), (0, 1), (1, 0)] {
        s.insert(0, vec![a, b]).unwrap();
    }
    assert!(o.consistent_with(&full_type(&s)));
    for (a, b) in [(0, 2), (2, 0), (1, 2), (2, 1)] {
        s.insert(0, vec![a, b]).unwrap();
    }
    assert!(!o.consistent_with(&full_type(&s)));
}

#[test]
fn undecided_atoms_are_not_violations() {
    let o = oracle("dlo");
    let mut t = QfType::new(o.signature().clone(), 3);
    t.set_atom(0, &[0, 1], Truth::True);
    t.set_atom(0, &[1, 2], Truth::True);
    assert!(o.consistent_with(&t));
    t.set_atom(0, &[2, 0], Truth::True);
    assert!(!o.atom_violation(&t, 0, &[2, 0], Truth::True));
    assert!(o.consistent_with(&t));
    t.set_atom(0, &[0, 2], Truth::False);
    assert!(o.atom_violation(&t, 0, &[0, 2], Truth::False));
    assert!(!o.consistent_with(&t));
}

#[test]
fn completion_and_enumeration() {
    let o = oracle("dlo");
    let mut t = QfType::new(o.signature().clone(), 3);
    let atoms = atoms_with(o.signature(), 3, &[]);
    let mut count = 0;
    o.for_each_completion(&mut t, &atoms, &mut |_| {
        count += 1;
        true
    });
    assert_eq!(count, 6);
    let mut budget = 1000;
    assert!(o.complete(&mut t, &atoms, &|_| Truth::False, &mut budget).unwrap());
    assert!(t.is_complete() && o.consistent_with(&t));
}

#[test]
fn catalog_entries_expand() {
    for name in [
        "rado",
        "henson3",
        "henson_k(4)",
        "dlo",
        "universal_poset",
        "universal_tournament",
        "equiv_inf_classes",
        "equiv_classes_of(1)",
        "equiv_classes_of(3)",
        "blowup(rado,2)",
        "blowup(dlo,inf)",
        "blowup(henson3, 3)",
        "q_min_semigroup",
    ] {
        let spec = catalog(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        let t = pithy_expand(&spec).unwrap();
        t.check_invariants().unwrap();
        assert!(t.auxiliary.is_empty(), "{name}");
    }
    let err = catalog("petersen").unwrap_err().to_string();
    assert!(err.contains("rado") && err.contains("q_min_semigroup"));
    assert!(catalog("henson_k(2)").is_err());
    assert!(catalog("blowup(q_min_semigroup,2)").is_ok());
}

#[test]
fn q_min_age_contains_finite_chains() {
    let spec = parse_theory(Q_MIN_FUNCTIONAL, false).unwrap();
    let o = oracle("q_min_semigroup");
    let sig = Arc::new(spec.signature.clone());
    let mut m = FunctionalStructure::new(sig.clone(), 3);
    for a in 0..3 {
        for b in 0..3 {
            m.set_function(0, &[a, b], a.min(b));
        }
    }
    let rel = m.to_relational();
    let t = full_type(&rel);
    assert!(o.consistent_with(&t), "{:?}", o.first_violation(&t));
    // not commutative
    m.set_function(0, &[0, 1], 1);
    assert!(!o.consistent_with(&full_type(&m.to_relational())));
    // commutative and selective but not associative: a rock-paper-scissors choice
    let mut r = FunctionalStructure::new(sig, 3);
    for a in 0..3 {
        r.set_function(0, &[a, a], a);
        r.set_function(0, &[a, (a + 1) % 3], a);
        r.set_function(0, &[(a + 1) % 3, a], a);
    }
    assert!(!o.consistent_with(&full_type(&r.to_relational())));
}

const Q_MIN_FUNCTIONAL: &str = "theory m\nfun min/2\n";

fn brute_graph_ok(n: usize, adj: &[bool], triangle_free: bool) -> bool {
    for a in 0..n {
        if adj[a * n + a] {
            return false;
        }
        for b in 0..n {
            if adj[a * n + b] != adj[b * n + a] {
                return false;
            }
            for c in 0..n {
                if triangle_free && a != b && b != c && a != c && adj[a * n + b] && adj[b * n + c] && adj[a * n + c] {
                    return false;
                }
            }
        }
    }
    true
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn graph_oracles_match_brute_force(n in 1usize..6, bits in proptest::collection::vec(any::<bool>(), 36)) {
        for (name, tf) in [("rado", false), ("henson3", true)] {
            let o = oracle(name);
            let mut s = FiniteStructure::empty(o.signature().clone(), n);
            for a in 0..n {
                for b in 0..n {
                    if bits[a * n + b] {
                        s.insert(0, vec![a, b]).unwrap();
                    }
                }
            }
            prop_assert_eq!(o.consistent_with(&full_type(&s)), brute_graph_ok(n, &bits[..n * n], tf));
        }
    }

    #[test]
    fn atom_violation_agrees_with_full_check(n in 2usize..5, bits in proptest::collection::vec(0u8..3, 25), pick in 0usize..25, v in any::<bool>()) {
        let o = oracle("universal_poset");
        let mut t = QfType::new(o.signature().clone(), n);
        let atoms = atoms_with(o.signature(), n, &[]);
        for (i, (rel, args)) in atoms.iter().enumerate() {
            let val = [Truth::False, Truth::True, Truth::Unknown][bits[i] as usize];
            t.set_atom(*rel, args, val);
            if !o.consistent_with(&t) {
                t.set_atom(*rel, args, Truth::Unknown);
            }
        }
        prop_assume!(o.consistent_with(&t));
        let (rel, args) = &atoms[pick % atoms.len()];
        prop_assume!(t.atom(*rel, args) == Truth::Unknown);
        let value = Truth::from_bool(v);
        t.set_atom(*rel, args, value);
        let predicted = o.atom_violation(&t, *rel, args, value);
        prop_assert_eq!(predicted, !o.consistent_with(&t));
    }
}


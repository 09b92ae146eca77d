use crate::logic::{BoolExpr, RelationSymbol, Term};

use super::{parse_theory, ExtensionAxiom, TheoryError, TheorySpec, UniversalAxiom};

pub const CATALOG_NAMES: &[&str] = &[
    "rado",
    "henson3",
    "henson_k(n)",
    "dlo",
    "universal_poset",
    "universal_tournament",
    "equiv_inf_classes",
    "equiv_classes_of(n)",
    "blowup(base,n)",
    "q_min_semigroup",
];

/// Name of the equivalence relation used by equivalence-relation entries and blowups.
pub const EQUIV: &str = "Equiv";

const RADO: &str = "
theory rado
rel E/2
@irreflexive forall x: !E(x, x)
@symmetric forall x y: E(x, y) -> E(y, x)
@neighbor forall x exists y: E(x, y)
@non_neighbor forall x exists y: y != x & !E(x, y)
@common_neighbor forall x1 x2 exists y: x1 = x2 | (E(x1, y) & E(x2, y))
@split_neighbor forall x1 x2 exists y: x1 = x2 | (y != x2 & E(x1, y) & !E(x2, y))
@common_non_neighbor forall x1 x2 exists y: x1 = x2 | (y != x1 & y != x2 & !E(x1, y) & !E(x2, y))
";

fn henson(n: usize) -> String {
    let vars: Vec<String> = (0..n).map(|i| i.to_string()).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push(format!("E({}, {})", vars[i], vars[j]));
            }
        }
    }
    let common = if n == 3 {
        "x1 = x2 | E(x1, x2) | (E(x1, y) & E(x2, y))"
    } else {
        "x1 = x2 | (E(x1, y) & E(x2, y))"
    };
    format!(
        "
theory henson_k{n}
rel E/2
@irreflexive forall x: !E(x, x)
@symmetric forall x y: E(x, y) -> E(y, x)
@no_k{n} forbid K{n} size {n} {{ {} }}
@neighbor forall x exists y: E(x, y)
@non_neighbor forall x exists y: y != x & !E(x, y)
@common_neighbor forall x1 x2 exists y: {common}
@split_neighbor forall x1 x2 exists y: x1 = x2 | (y != x2 & E(x1, y) & !E(x2, y))
@common_non_neighbor forall x1 x2 exists y: x1 = x2 | (y != x1 & y != x2 & !E(x1, y) & !E(x2, y))
",
        edges.join(" ")
    )
}

const DLO: &str = "
theory dlo
rel Lt/2
@irreflexive forall x: !Lt(x, x)
@transitive forall x y z: Lt(x, y) & Lt(y, z) -> Lt(x, z)
@total forall x y: x = y | Lt(x, y) | Lt(y, x)
@no_right_endpoint forall x exists y: Lt(x, y)
@no_left_endpoint forall x exists y: Lt(y, x)
@dense forall x1 x2 exists y: !Lt(x1, x2) | (Lt(x1, y) & Lt(y, x2))
";

const POSET: &str = "
theory universal_poset
rel Lt/2
@irreflexive forall x: !Lt(x, x)
@transitive forall x y z: Lt(x, y) & Lt(y, z) -> Lt(x, z)
@above forall x exists y: Lt(x, y)
@below forall x exists y: Lt(y, x)
@incomparable forall x exists y: y != x & !Lt(x, y) & !Lt(y, x)
@between forall x1 x2 exists y: !Lt(x1, x2) | (Lt(x1, y) & Lt(y, x2))
@common_upper forall x1 x2 exists y: x1 = x2 | Lt(x1, x2) | Lt(x2, x1) | (Lt(x1, y) & Lt(x2, y))
@common_lower forall x1 x2 exists y: x1 = x2 | Lt(x1, x2) | Lt(x2, x1) | (Lt(y, x1) & Lt(y, x2))
@above_incomparable forall x1 x2 exists y: x1 = x2 | Lt(x2, x1) | (Lt(x1, y) & y != x2 & !Lt(x2, y) & !Lt(y, x2))
@incomparable_both forall x1 x2 exists y: x1 = x2 | (y != x1 & y != x2 & !Lt(x1, y) & !Lt(y, x1) & !Lt(x2, y) & !Lt(y, x2))
";

const TOURNAMENT: &str = "
theory universal_tournament
rel T/2
@asymmetric forall x y: !(T(x, y) & T(y, x))
@total forall x y: x = y | T(x, y) | T(y, x)
@out forall x exists y: T(x, y)
@in forall x exists y: T(y, x)
@common_out forall x1 x2 exists y: x1 = x2 | (T(x1, y) & T(x2, y))
@common_in forall x1 x2 exists y: x1 = x2 | (T(y, x1) & T(y, x2))
@through forall x1 x2 exists y: x1 = x2 | (T(x1, y) & T(y, x2))
";

const EQUIVALENCE: &str = "
@reflexive forall x: Equiv(x, x)
@symmetric_equiv forall x y: Equiv(x, y) -> Equiv(y, x)
@transitive_equiv forall x y z: Equiv(x, y) & Equiv(y, z) -> Equiv(x, z)
@new_class forall x exists y: !Equiv(x, y)
@new_class2 forall x1 x2 exists y: !Equiv(x1, y) & !Equiv(x2, y)
";

const INFINITE_CLASSES: &str = "
@class_member forall x exists y: y != x & Equiv(x, y)
@class_member2 forall x1 x2 exists y: !Equiv(x1, x2) | x1 = x2 | (y != x1 & y != x2 & Equiv(x1, y))
";

/// Axioms making every class have exactly `n` elements.
fn class_size_axioms(n: usize) -> String {
    let mut out = String::new();
    let xs: Vec<String> = (0..=n).map(|i| format!("x{i}")).collect();
    let mut conj = Vec::new();
    for i in 0..=n {
        for j in i + 1..=n {
            conj.push(format!("{} != {} & Equiv({}, {})", xs[i], xs[j], xs[i], xs[j]));
        }
    }
    if n >= 1 && !conj.is_empty() {
        out += &format!("@at_most_{n} forall {}: !({})\n", xs.join(" "), conj.join(" & "));
    } else if n >= 1 {
        out += "@at_most_1 forall x0 x1: Equiv(x0, x1) -> x0 = x1\n";
    }
    for k in 1..n {
        let prem = &xs[..k];
        let mut guard = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                guard.push(format!("{} != {} & Equiv({}, {})", prem[i], prem[j], prem[i], prem[j]));
            }
        }
        let mut witness = vec![format!("Equiv({}, y)", prem[0])];
        witness.extend(prem.iter().map(|x| format!("y != {x}")));
        let body = if guard.is_empty() {
            format!("({})", witness.join(" & "))
        } else {
            format!("!({}) | ({})", guard.join(" & "), witness.join(" & "))
        };
        out += &format!("@partner{k} forall {} exists y: {body}\n", prem.join(" "));
    }
    out
}

/// Relationalized rationals under `min`.
const Q_MIN: &str = "
theory q_min_semigroup
fun min/2
@selective forall x y: min(x, y) = x | min(x, y) = y
@commutative forall x y: (min(x, y) = x & min(y, x) = x) | (min(x, y) = y & min(y, x) = y)
@transitive forall x y z: min(x, y) = y | min(y, z) = z | min(x, z) = x
@no_least forall x exists y: min(x, y) = y & y != x
@no_greatest forall x exists y: min(x, y) = x & y != x
@dense forall x1 x2 exists y: min(x1, x2) = x2 | (min(x1, y) = x1 & min(y, x2) = y & y != x1 & y != x2)
";

fn parse_arg(name: &str, arg: &str) -> Result<usize, TheoryError> {
    arg.trim().parse().map_err(|_| TheoryError::UnknownCatalog(format!("{name}: bad parameter `{arg}`")))
}

fn call(name: &str) -> Option<(&str, Vec<&str>)> {
    let open = name.find('(')?;
    let inner = name[open + 1..].strip_suffix(')')?;
    let mut args = Vec::new();
    let (mut depth, mut start) = (0, 0);
    for (i, c) in inner.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                args.push(inner[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    args.push(inner[start..].trim());
    Some((&name[..open], args))
}

/// A built-in theory by name, e.g. `rado`, `henson_k(4)`, `blowup(dlo,inf)`.
pub fn catalog(name: &str) -> Result<TheorySpec, TheoryError> {
    let name = name.trim();
    let unknown = || {
        TheoryError::UnknownCatalog(format!("unknown catalog entry `{name}`; available: {}", CATALOG_NAMES.join(", ")))
    };
    let src = match name {
        "rado" => RADO.to_string(),
        "henson3" => henson(3).replace("henson_k3", "henson3"),
        "dlo" => DLO.to_string(),
        "universal_poset" => POSET.to_string(),
        "universal_tournament" => TOURNAMENT.to_string(),
        "equiv_inf_classes" => {
            format!("theory equiv_inf_classes\nrel Equiv/2\n{EQUIVALENCE}{INFINITE_CLASSES}")
        }
        "q_min_semigroup" => return parse_theory(Q_MIN, true),
        _ => {
            let (head, args) = call(name).ok_or_else(unknown)?;
            match (head, args.as_slice()) {
                ("henson_k", [n]) => {
                    let n = parse_arg(name, n)?;
                    if n < 3 {
                        return Err(TheoryError::UnknownCatalog(format!("{name}: henson_k needs n >= 3")));
                    }
                    henson(n)
                }
                ("equiv_classes_of", [n]) => {
                    let n = parse_arg(name, n)?;
                    if n < 1 {
                        return Err(TheoryError::UnknownCatalog(format!("{name}: class size must be positive")));
                    }
                    format!(
                        "theory equiv_classes_of_{n}\nrel Equiv/2\n{EQUIVALENCE}{}",
                        class_size_axioms(n)
                    )
                }
                ("blowup", [base, n]) => {
                    let size = if *n == "inf" { None } else { Some(parse_arg(name, n)?) };
                    if size == Some(0) {
                        return Err(TheoryError::UnknownCatalog(format!("{name}: class size must be positive")));
                    }
                    return blowup_theory(&catalog(base)?, size);
                }
                _ => return Err(unknown()),
            }
        }
    };
    parse_theory(&src, false)
}

fn replace_equality(e: &BoolExpr) -> BoolExpr {
    e.map_atoms(&mut |a| match a {
        BoolExpr::Eq(x, y) => BoolExpr::Atom(EQUIV.to_string(), vec![x.clone(), y.clone()]),
        other => other.clone(),
    })
}

/// Theory of the blowup `M x n` of a model `M` of `base`: equality is read as a new
/// equivalence, base relations respect it, and classes have exactly `n` elements
/// (`None` for infinitely many).
pub fn blowup_theory(base: &TheorySpec, n: Option<usize>) -> Result<TheorySpec, TheoryError> {
    if !base.is_relational() {
        return Err(TheoryError::NotRelational(base.name.clone()));
    }
    if base.signature.relation_index(EQUIV).is_some() {
        return Err(TheoryError::UnknownCatalog(format!("{}: base already uses {EQUIV}", base.name)));
    }
    let mut sig = base.signature.clone();
    sig.relations.push(RelationSymbol { name: EQUIV.into(), arity: 2 });
    let suffix = n.map_or("inf".to_string(), |k| k.to_string());
    let mut src = format!("theory blowup_{}_{suffix}\nrel {EQUIV}/2\n{EQUIVALENCE}", base.name);
    match n {
        None => src += INFINITE_CLASSES,
        Some(k) => src += &class_size_axioms(k),
    }
    let extra = parse_theory(&src, false)?;
    let mut universal: Vec<UniversalAxiom> = base
        .universal
        .iter()
        .map(|a| UniversalAxiom { label: a.label.clone(), vars: a.vars.clone(), body: replace_equality(&a.body) })
        .collect();
    for sym in &base.signature.relations {
        for i in 0..sym.arity {
            let xs: Vec<String> = (0..sym.arity).map(|j| format!("x{j}")).collect();
            let mut ys = xs.clone();
            ys[i] = "y".into();
            let mut vars = xs.clone();
            vars.push("y".into());
            let atom = |v: &[String]| BoolExpr::Atom(sym.name.clone(), v.iter().map(|s| Term::Var(s.clone())).collect());
            universal.push(UniversalAxiom {
                label: format!("respect_{}_{i}", sym.name),
                vars,
                body: BoolExpr::implies(
                    BoolExpr::atom(EQUIV, &[xs[i].as_str(), "y"]),
                    BoolExpr::Iff(Box::new(atom(&xs)), Box::new(atom(&ys))),
                ),
            });
        }
    }
    universal.extend(extra.universal);
    let mut extension: Vec<ExtensionAxiom> = base
        .extension
        .iter()
        .map(|a| ExtensionAxiom {
            label: a.label.clone(),
            forall: a.forall.clone(),
            exists: a.exists.clone(),
            body: replace_equality(&a.body),
        })
        .collect();
    extension.extend(extra.extension);
    let mut labels = std::collections::BTreeSet::new();
    for l in universal.iter().map(|a| &a.label).chain(extension.iter().map(|a| &a.label)) {
        if !labels.insert(l.clone()) {
            return Err(TheoryError::UnknownCatalog(format!("{}: axiom label {l} clashes", base.name)));
        }
    }
    Ok(TheorySpec { name: extra.name, signature: sig, universal, extension, forbidden: base.forbidden.clone() })
}

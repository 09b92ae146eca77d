use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{FiniteStructure, Literal, LogicError, QfFormula, Signature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum Truth {
    False = 0,
    True = 1,
    Unknown = 2,
}

impl Truth {
    pub fn from_bool(b: bool) -> Self {
        if b {
            Truth::True
        } else {
            Truth::False
        }
    }

    pub fn is_known(self) -> bool {
        self != Truth::Unknown
    }

    pub fn negate(self) -> Self {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }

    fn symbol(self) -> char {
        match self {
            Truth::True => 'T',
            Truth::False => 'F',
            Truth::Unknown => '?',
        }
    }
}

/// Calls `f` on every tuple of `arity` entries from `0..width`, in lexicographic order.
pub fn for_each_tuple(width: usize, arity: usize, mut f: impl FnMut(&[usize])) {
    if width == 0 {
        return;
    }
    let mut t = vec![0usize; arity];
    loop {
        f(&t);
        let mut i = arity;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            t[i] += 1;
            if t[i] < width {
                break;
            }
            t[i] = 0;
        }
    }
}

/// A possibly partial quantifier-free type in variables `x_0..x_{width-1}`.
///
/// Atoms are stored densely with stride `cap >= width`, so appending a variable
/// only relayouts when the capacity is exhausted.
#[derive(Clone, Debug)]
pub struct QfType {
    signature: Arc<Signature>,
    width: usize,
    cap: usize,
    classes: Vec<usize>,
    discrete: bool,
    atoms: Vec<Vec<Truth>>,
}

impl PartialEq for QfType {
    fn eq(&self, other: &Self) -> bool {
        if self.signature != other.signature || self.width != other.width {
            return false;
        }
        if self.classes != other.classes {
            return false;
        }
        let mut same = true;
        for rel in 0..self.signature.relations.len() {
            for_each_tuple(self.width, self.signature.arity(rel), |t| {
                same &= self.atom(rel, t) == other.atom(rel, t);
            });
        }
        same
    }
}

impl Eq for QfType {}

impl QfType {
    /// All atoms undecided, all variables distinct.
    pub fn new(signature: Arc<Signature>, width: usize) -> Self {
        Self::with_capacity(signature, width, width)
    }

    pub fn with_capacity(signature: Arc<Signature>, width: usize, cap: usize) -> Self {
        let cap = cap.max(width).max(1);
        let atoms = signature
            .relations
            .iter()
            .map(|r| vec![Truth::Unknown; cap.pow(r.arity as u32)])
            .collect();
        QfType { signature, width, cap, classes: (0..width).collect(), discrete: true, atoms }
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.signature
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    fn index(&self, args: &[usize]) -> usize {
        let mut i = 0;
        for &a in args {
            debug_assert!(a < self.width);
            i = i * self.cap + a;
        }
        i
    }

    #[inline]
    pub fn atom(&self, rel: usize, args: &[usize]) -> Truth {
        self.atoms[rel][self.index(args)]
    }

    #[inline]
    pub fn set_atom(&mut self, rel: usize, args: &[usize], value: Truth) {
        let i = self.index(args);
        self.atoms[rel][i] = value;
    }

    /// Appends a fresh variable, distinct from all others, with undecided atoms.
    pub fn push_var(&mut self) -> usize {
        if self.width == self.cap {
            self.grow((self.cap * 2).max(4));
        }
        let v = self.width;
        self.width += 1;
        self.classes.push(v);
        v
    }

    fn grow(&mut self, new_cap: usize) {
        let fresh = QfType::with_capacity(self.signature.clone(), self.width, new_cap);
        let old = std::mem::replace(self, fresh);
        self.classes = old.classes.clone();
        self.discrete = old.discrete;
        for rel in 0..old.atoms.len() {
            for_each_tuple(old.width, old.signature.arity(rel), |t| {
                let v = old.atom(rel, t);
                self.set_atom(rel, t, v);
            });
        }
    }

    pub fn class_of(&self, v: usize) -> usize {
        self.classes[v]
    }

    pub fn same_class(&self, a: usize, b: usize) -> bool {
        self.classes[a] == self.classes[b]
    }

    /// Merges the equality classes of `a` and `b`.
    pub fn set_equal(&mut self, a: usize, b: usize) {
        let (ca, cb) = (self.classes[a], self.classes[b]);
        if ca == cb {
            return;
        }
        self.discrete = false;
        let (keep, drop) = (ca.min(cb), ca.max(cb));
        for c in self.classes.iter_mut() {
            if *c == drop {
                *c = keep;
            }
        }
    }

    pub fn is_non_redundant(&self) -> bool {
        self.discrete
    }

    pub fn is_complete(&self) -> bool {
        (0..self.atoms.len()).all(|rel| {
            let mut ok = true;
            for_each_tuple(self.width, self.signature.arity(rel), |t| {
                ok &= self.atom(rel, t).is_known();
            });
            ok
        })
    }

    /// Atoms agree on tuples that are equal modulo the equality partition.
    pub fn respects_equalities(&self) -> bool {
        let mut ok = true;
        for rel in 0..self.atoms.len() {
            for_each_tuple(self.width, self.signature.arity(rel), |t| {
                let canon: Vec<usize> = t.iter().map(|&a| self.classes[a]).collect();
                ok &= self.atom(rel, t) == self.atom(rel, &canon);
            });
        }
        ok
    }

    /// The type of the subtuple `(x_{pos[0]}, x_{pos[1]}, ...)`.
    pub fn restrict(&self, pos: &[usize]) -> QfType {
        let mut out = QfType::new(self.signature.clone(), pos.len());
        for i in 0..pos.len() {
            for j in 0..i {
                if self.same_class(pos[i], pos[j]) {
                    out.set_equal(i, j);
                }
            }
        }
        let mut buf = Vec::new();
        for rel in 0..self.atoms.len() {
            for_each_tuple(pos.len(), self.signature.arity(rel), |t| {
                buf.clear();
                buf.extend(t.iter().map(|&a| pos[a]));
                out.set_atom(rel, t, self.atom(rel, &buf));
            });
        }
        out
    }

    /// Three-valued value of a literal under `assign` (formula variable -> type variable).
    pub fn literal_value(&self, lit: &Literal, assign: &[usize]) -> Result<Truth, LogicError> {
        match lit {
            Literal::Rel { name, args, positive } => {
                let rel = self
                    .signature
                    .relation_index(name)
                    .ok_or_else(|| LogicError::MalformedAtom(format!("unknown relation {name}")))?;
                if args.len() != self.signature.arity(rel) {
                    return Err(LogicError::MalformedAtom(format!("{name}/{}", args.len())));
                }
                let t: Vec<usize> = args.iter().map(|&a| assign[a]).collect();
                let v = self.atom(rel, &t);
                Ok(if *positive { v } else { v.negate() })
            }
            Literal::Eq { left, right, positive } => Ok(Truth::from_bool(
                self.same_class(assign[*left], assign[*right]) == *positive,
            )),
        }
    }

    /// The conjunction of all decided facts, over variables `x0..x{width-1}`.
    pub fn to_formula(&self) -> QfFormula {
        let mut lits = Vec::new();
        for i in 0..self.width {
            for j in i + 1..self.width {
                lits.push(Literal::Eq { left: i, right: j, positive: self.same_class(i, j) });
            }
        }
        for (rel, sym) in self.signature.relations.iter().enumerate() {
            for_each_tuple(self.width, sym.arity, |t| {
                let v = self.atom(rel, t);
                if v.is_known() {
                    lits.push(Literal::Rel {
                        name: sym.name.clone(),
                        args: t.to_vec(),
                        positive: v == Truth::True,
                    });
                }
            });
        }
        QfFormula::conjunction((0..self.width).map(|i| format!("x{i}")).collect(), lits)
    }

    fn atoms_string(&self, rel: usize) -> String {
        let mut s = String::new();
        for_each_tuple(self.width, self.signature.arity(rel), |t| s.push(self.atom(rel, t).symbol()));
        s
    }

    /// The structure on `0..width` whose true atoms are those of this type.
    ///
    /// Meaningful for non-redundant types; undecided atoms are left out.
    pub fn to_structure(&self) -> FiniteStructure {
        let mut s = FiniteStructure::empty(self.signature.clone(), self.width);
        for rel in 0..self.atoms.len() {
            for_each_tuple(self.width, self.signature.arity(rel), |t| {
                if self.atom(rel, t) == Truth::True {
                    s.insert(rel, t.to_vec()).expect("tuple within width");
                }
            });
        }
        s
    }

    pub fn equality_classes(&self) -> Vec<Vec<usize>> {
        let mut m: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (v, &c) in self.classes.iter().enumerate() {
            m.entry(c).or_default().push(v);
        }
        m.into_values().collect()
    }
}

#[derive(Serialize, Deserialize)]
struct TypeRepr {
    signature: Signature,
    width: usize,
    equalities: Vec<Vec<usize>>,
    atoms: BTreeMap<String, String>,
}

impl Serialize for QfType {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let atoms = self
            .signature
            .relations
            .iter()
            .enumerate()
            .map(|(rel, sym)| (sym.name.clone(), self.atoms_string(rel)))
            .collect();
        TypeRepr {
            signature: (*self.signature).clone(),
            width: self.width,
            equalities: self.equality_classes(),
            atoms,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for QfType {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = TypeRepr::deserialize(de)?;
        repr.signature.validate().map_err(D::Error::custom)?;
        let sig = Arc::new(repr.signature);
        let mut t = QfType::new(sig.clone(), repr.width);
        for class in &repr.equalities {
            for w in class.windows(2) {
                if w[0] >= repr.width || w[1] >= repr.width {
                    return Err(D::Error::custom("equality class out of range"));
                }
                t.set_equal(w[0], w[1]);
            }
        }
        for (name, s) in &repr.atoms {
            let rel = sig
                .relation_index(name)
                .ok_or_else(|| D::Error::custom(LogicError::MalformedAtom(name.clone())))?;
            let expected = repr.width.pow(sig.arity(rel) as u32);
            if s.chars().count() != expected {
                return Err(D::Error::custom(format!("atom table for {name} has wrong length")));
            }
            let mut chars = s.chars();
            let mut bad = false;
            for_each_tuple(repr.width, sig.arity(rel), |tup| {
                let v = match chars.next() {
                    Some('T') => Truth::True,
                    Some('F') => Truth::False,
                    Some('?') => Truth::Unknown,
                    _ => {
                        bad = true;
                        Truth::Unknown
                    }
                };
                t.set_atom(rel, tup, v);
            });
            if bad {
                return Err(D::Error::custom("atom tables use T, F and ?"));
            }
        }
        Ok(t)
    }
}

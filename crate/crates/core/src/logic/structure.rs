use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{LogicError, Signature};

/// A relational structure on `0..size`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteStructure {
    signature: Arc<Signature>,
    size: usize,
    relations: Vec<BTreeSet<Vec<usize>>>,
}

impl FiniteStructure {
    pub fn empty(signature: Arc<Signature>, size: usize) -> Self {
        let relations = vec![BTreeSet::new(); signature.relations.len()];
        FiniteStructure { signature, size, relations }
    }

    pub fn signature(&self) -> &Arc<Signature> {
        &self.signature
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn relation(&self, rel: usize) -> &BTreeSet<Vec<usize>> {
        &self.relations[rel]
    }

    pub fn holds(&self, rel: usize, args: &[usize]) -> bool {
        self.relations[rel].contains(args)
    }

    pub fn insert(&mut self, rel: usize, args: Vec<usize>) -> Result<(), LogicError> {
        let sym = self
            .signature
            .relations
            .get(rel)
            .ok_or_else(|| LogicError::MalformedAtom(format!("relation index {rel}")))?;
        if args.len() != sym.arity || args.iter().any(|&a| a >= self.size) {
            return Err(LogicError::MalformedAtom(format!("{}{:?}", sym.name, args)));
        }
        self.relations[rel].insert(args);
        Ok(())
    }

    pub fn insert_named(&mut self, name: &str, args: Vec<usize>) -> Result<(), LogicError> {
        let rel = self
            .signature
            .relation_index(name)
            .ok_or_else(|| LogicError::MalformedAtom(format!("unknown relation {name}")))?;
        self.insert(rel, args)
    }

    /// Substructure on `elems`, relabelled `elems[i] -> i`; `elems` must be distinct.
    pub fn restrict(&self, elems: &[usize]) -> FiniteStructure {
        let mut pos = vec![usize::MAX; self.size];
        for (i, &e) in elems.iter().enumerate() {
            pos[e] = i;
        }
        let relations = self
            .relations
            .iter()
            .map(|tuples| {
                tuples
                    .iter()
                    .filter(|t| t.iter().all(|&a| pos[a] != usize::MAX))
                    .map(|t| t.iter().map(|&a| pos[a]).collect())
                    .collect()
            })
            .collect();
        FiniteStructure { signature: self.signature.clone(), size: elems.len(), relations }
    }

    /// Image under `perm` (element `i` becomes `perm[i]`).
    pub fn permute(&self, perm: &[usize]) -> FiniteStructure {
        let relations = self
            .relations
            .iter()
            .map(|tuples| tuples.iter().map(|t| t.iter().map(|&a| perm[a]).collect()).collect())
            .collect();
        FiniteStructure { signature: self.signature.clone(), size: self.size, relations }
    }

    /// Canonical byte encoding, stable across runs; equal iff structures are equal.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&(self.size as u32).to_le_bytes());
        for (r, tuples) in self.relations.iter().enumerate() {
            out.push(r as u8);
            out.extend_from_slice(&(tuples.len() as u32).to_le_bytes());
            for t in tuples {
                for &a in t {
                    out.extend_from_slice(&(a as u32).to_le_bytes());
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("structure serialization is infallible")
    }
}

#[derive(Serialize, Deserialize)]
struct StructureRepr {
    signature: Signature,
    size: usize,
    relations: BTreeMap<String, Vec<Vec<usize>>>,
}

impl Serialize for FiniteStructure {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let relations = self
            .signature
            .relations
            .iter()
            .zip(&self.relations)
            .map(|(sym, tuples)| (sym.name.clone(), tuples.iter().cloned().collect()))
            .collect();
        StructureRepr { signature: (*self.signature).clone(), size: self.size, relations }
            .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for FiniteStructure {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let repr = StructureRepr::deserialize(de)?;
        repr.signature.validate().map_err(D::Error::custom)?;
        let mut s = FiniteStructure::empty(Arc::new(repr.signature), repr.size);
        for (name, tuples) in repr.relations {
            for t in tuples {
                s.insert_named(&name, t).map_err(D::Error::custom)?;
            }
        }
        Ok(s)
    }
}

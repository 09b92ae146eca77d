use serde::{Deserialize, Serialize};

use super::LogicError;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationSymbol {
    pub name: String,
    pub arity: usize,
}

/// Arity 0 denotes a constant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FunctionSymbol {
    pub name: String,
    pub arity: usize,
}

/// Symbol names are unique across relations and functions.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub relations: Vec<RelationSymbol>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub functions: Vec<FunctionSymbol>,
}

impl Signature {
    pub fn relational(rels: &[(&str, usize)]) -> Result<Self, LogicError> {
        let sig = Signature {
            relations: rels
                .iter()
                .map(|(n, a)| RelationSymbol { name: n.to_string(), arity: *a })
                .collect(),
            functions: Vec::new(),
        };
        sig.validate()?;
        Ok(sig)
    }

    pub fn validate(&self) -> Result<(), LogicError> {
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.relations {
            if r.arity == 0 {
                return Err(LogicError::InvalidSignature(format!(
                    "relation {} has arity 0",
                    r.name
                )));
            }
            if !seen.insert(r.name.as_str()) {
                return Err(LogicError::InvalidSignature(format!("duplicate symbol {}", r.name)));
            }
        }
        for f in &self.functions {
            if !seen.insert(f.name.as_str()) {
                return Err(LogicError::InvalidSignature(format!("duplicate symbol {}", f.name)));
            }
        }
        Ok(())
    }

    pub fn is_relational(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionSymbol> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn arity(&self, rel: usize) -> usize {
        self.relations[rel].arity
    }

    pub fn max_arity(&self) -> usize {
        self.relations.iter().map(|r| r.arity).max().unwrap_or(0)
    }
}

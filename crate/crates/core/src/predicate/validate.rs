use std::collections::BTreeMap;
use std::fmt;

use super::ast::{Atom, AttrPath, Entity, PredicateExpr};
use crate::literal::LiteralType;

/// Known attribute paths and their value types.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AttributeCatalog {
    entries: BTreeMap<String, LiteralType>,
}

impl AttributeCatalog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, path: impl Into<String>, ty: LiteralType) {
        self.entries.insert(path.into(), ty);
    }

    pub fn get(&self, path: &AttrPath) -> Option<LiteralType> {
        match (path.entity, path.rest.as_str()) {
            (Entity::Subject, "id") | (Entity::Object, "id" | "class") | (Entity::Op, "name") => {
                Some(LiteralType::Str)
            }
            (Entity::Context, "logical_time") => Some(LiteralType::Number),
            _ => self.entries.get(&path.to_string()).copied(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Warning {
    UnknownPath(AttrPath),
    TypeClash {
        atom: String,
        path_type: LiteralType,
        literal_type: LiteralType,
    },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::UnknownPath(p) => write!(f, "attribute path {p} is not in the catalog"),
            Warning::TypeClash {
                atom,
                path_type,
                literal_type,
            } => {
                write!(
                    f,
                    "{atom} compares a {path_type} path with a {literal_type} literal"
                )
            }
        }
    }
}

/// Static checks that never reject: missing paths and incoherent comparisons.
pub fn validate_predicate(expr: &PredicateExpr, catalog: &AttributeCatalog) -> Vec<Warning> {
    let mut out = Vec::new();
    for atom in expr.atoms() {
        let Some(path) = atom.path() else { continue };
        let Some(ty) = catalog.get(path) else {
            let w = Warning::UnknownPath(path.clone());
            if !out.contains(&w) {
                out.push(w);
            }
            continue;
        };
        let literals = match atom {
            Atom::Cmp { value, .. } => std::slice::from_ref(value),
            Atom::In { set, .. } => set.as_slice(),
            _ => &[],
        };
        for lit in literals {
            if lit.kind() != ty {
                out.push(Warning::TypeClash {
                    atom: atom.to_string(),
                    path_type: ty,
                    literal_type: lit.kind(),
                });
            }
        }
    }
    out
}

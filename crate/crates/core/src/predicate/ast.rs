use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::literal::{is_bare_name, quote, CmpOp, Literal};

/// The four binding namespaces a predicate may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entity {
    Subject,
    Object,
    Op,
    Context,
}

impl Entity {
    pub fn as_str(self) -> &'static str {
        match self {
            Entity::Subject => "subject",
            Entity::Object => "object",
            Entity::Op => "op",
            Entity::Context => "context",
        }
    }

    pub fn parse(s: &str) -> Option<Entity> {
        match s {
            "subject" => Some(Entity::Subject),
            "object" => Some(Entity::Object),
            "op" => Some(Entity::Op),
            "context" => Some(Entity::Context),
            _ => None,
        }
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `entity.segment(.segment)*`, e.g. `object.state.temperature`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AttrPath {
    pub entity: Entity,
    /// Dotted remainder after the entity, never empty.
    pub rest: String,
}

impl AttrPath {
    pub fn new(entity: Entity, rest: impl Into<String>) -> Self {
        AttrPath {
            entity,
            rest: rest.into(),
        }
    }

    pub fn parse(text: &str) -> Option<AttrPath> {
        let (head, rest) = text.split_once('.')?;
        let entity = Entity::parse(head)?;
        let ok = rest.split('.').all(|seg| {
            !seg.is_empty()
                && seg
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-'))
        });
        ok.then(|| AttrPath::new(entity, rest))
    }
}

impl fmt::Display for AttrPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.entity, self.rest)
    }
}

/// Which side of a behavior carries the tag set tested by `has_tag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagHolder {
    Object,
    Context,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Atom {
    Cmp {
        path: AttrPath,
        op: CmpOp,
        value: Literal,
    },
    In {
        path: AttrPath,
        set: Vec<Literal>,
    },
    HasRole(String),
    HasCapability(String),
    HasTag {
        holder: TagHolder,
        tag: String,
    },
    Affords(String),
    Exists(AttrPath),
}

impl Atom {
    /// Namespace this atom reads from.
    pub fn entity(&self) -> Entity {
        match self {
            Atom::Cmp { path, .. } | Atom::In { path, .. } | Atom::Exists(path) => path.entity,
            Atom::HasRole(_) | Atom::HasCapability(_) => Entity::Subject,
            Atom::HasTag {
                holder: TagHolder::Object,
                ..
            }
            | Atom::Affords(_) => Entity::Object,
            Atom::HasTag {
                holder: TagHolder::Context,
                ..
            } => Entity::Context,
        }
    }

    pub fn path(&self) -> Option<&AttrPath> {
        match self {
            Atom::Cmp { path, .. } | Atom::In { path, .. } | Atom::Exists(path) => Some(path),
            _ => None,
        }
    }
}

fn write_name(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    if is_bare_name(name) {
        f.write_str(name)
    } else {
        f.write_str(&quote(name))
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Cmp { path, op, value } => write!(f, "({op} {path} {value})"),
            Atom::In { path, set } => {
                write!(f, "(in {path}")?;
                for v in set {
                    write!(f, " {v}")?;
                }
                f.write_str(")")
            }
            Atom::HasRole(r) => {
                f.write_str("(has_role subject ")?;
                write_name(f, r)?;
                f.write_str(")")
            }
            Atom::HasCapability(c) => {
                f.write_str("(has_capability subject ")?;
                write_name(f, c)?;
                f.write_str(")")
            }
            Atom::HasTag { holder, tag } => {
                let h = match holder {
                    TagHolder::Object => "object",
                    TagHolder::Context => "context",
                };
                write!(f, "(has_tag {h} ")?;
                write_name(f, tag)?;
                f.write_str(")")
            }
            Atom::Affords(op) => {
                f.write_str("(affords object ")?;
                write_name(f, op)?;
                f.write_str(")")
            }
            Atom::Exists(path) => write!(f, "(exists {path})"),
        }
    }
}

/// Abstract syntax of a predicate: atoms under `and` / `or` / `not`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateExpr {
    Atom(Atom),
    And(Vec<PredicateExpr>),
    Or(Vec<PredicateExpr>),
    Not(Box<PredicateExpr>),
}

impl PredicateExpr {
    /// The empty conjunction, `(and)`.
    pub fn truth() -> Self {
        PredicateExpr::And(Vec::new())
    }

    pub fn atom(atom: Atom) -> Self {
        PredicateExpr::Atom(atom)
    }

    /// Every atom in left-to-right order.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            PredicateExpr::Atom(a) => out.push(a),
            PredicateExpr::And(xs) | PredicateExpr::Or(xs) => {
                xs.iter().for_each(|x| x.collect_atoms(out))
            }
            PredicateExpr::Not(x) => x.collect_atoms(out),
        }
    }

    pub fn namespaces(&self) -> BTreeSet<Entity> {
        self.atoms().into_iter().map(Atom::entity).collect()
    }

    /// First atom whose namespace is outside `allowed`.
    pub fn first_foreign_atom(&self, allowed: &[Entity]) -> Option<&Atom> {
        self.atoms()
            .into_iter()
            .find(|a| !allowed.contains(&a.entity()))
    }
}

impl fmt::Display for PredicateExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredicateExpr::Atom(a) => a.fmt(f),
            PredicateExpr::And(xs) | PredicateExpr::Or(xs) => {
                let head = if matches!(self, PredicateExpr::And(_)) {
                    "and"
                } else {
                    "or"
                };
                write!(f, "({head}")?;
                for x in xs {
                    write!(f, " {x}")?;
                }
                f.write_str(")")
            }
            PredicateExpr::Not(x) => write!(f, "(not {x})"),
        }
    }
}

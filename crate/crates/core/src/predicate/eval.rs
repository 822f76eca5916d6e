use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::{Atom, AttrPath, Entity, PredicateExpr, TagHolder};
use crate::bib::{Context, ObjectRecord, SubjectRecord};
use crate::literal::Literal;

/// The operation being attempted and its arguments.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct OpBinding {
    pub name: String,
    pub args: BTreeMap<String, Literal>,
}

impl OpBinding {
    pub fn new(name: impl Into<String>) -> Self {
        OpBinding {
            name: name.into(),
            args: BTreeMap::new(),
        }
    }
}

/// Everything a predicate can observe.
#[derive(Debug, Clone, Copy)]
pub struct BindingEnv<'a> {
    pub subject: &'a SubjectRecord,
    pub object: &'a ObjectRecord,
    pub op: &'a OpBinding,
    pub context: &'a Context,
}

impl<'a> BindingEnv<'a> {
    /// Resolves an attribute path; `None` means the path is missing.
    pub fn resolve(&self, path: &AttrPath) -> Option<Literal> {
        let rest = path.rest.as_str();
        match path.entity {
            Entity::Subject => match rest {
                "id" => Some(Literal::Str(self.subject.id.clone())),
                _ => self
                    .subject
                    .attributes
                    .get(rest.strip_prefix("attributes.")?)
                    .cloned(),
            },
            Entity::Object => match rest {
                "id" => Some(Literal::Str(self.object.id.clone())),
                "class" => Some(Literal::Str(self.object.class.clone())),
                _ => {
                    if let Some(k) = rest.strip_prefix("attributes.") {
                        self.object.attributes.get(k).cloned()
                    } else {
                        self.object.state.get(rest.strip_prefix("state.")?).cloned()
                    }
                }
            },
            Entity::Op => match rest {
                "name" => Some(Literal::Str(self.op.name.clone())),
                _ => self.op.args.get(rest.strip_prefix("args.")?).cloned(),
            },
            Entity::Context => self.context.lookup(rest),
        }
    }

    pub fn atom_value(&self, atom: &Atom) -> bool {
        match atom {
            Atom::Cmp { path, op, value } => {
                self.resolve(path).is_some_and(|v| v.compare(*op, value))
            }
            Atom::In { path, set } => self
                .resolve(path)
                .is_some_and(|v| set.iter().any(|m| v.compare(crate::literal::CmpOp::Eq, m))),
            Atom::HasRole(r) => self.subject.roles.contains(r),
            Atom::HasCapability(c) => self.subject.capabilities.contains(c),
            Atom::HasTag {
                holder: TagHolder::Object,
                tag,
            } => self.object.tags.contains(tag),
            Atom::HasTag {
                holder: TagHolder::Context,
                tag,
            } => self.context.tags.contains(tag),
            Atom::Affords(op) => self.object.affordances.contains(op),
            Atom::Exists(path) => self.resolve(path).is_some(),
        }
    }
}

/// Result of evaluating a predicate, with every visited atom in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub value: bool,
    pub trace: Vec<(Atom, bool)>,
}

/// Evaluates without short-circuiting so the trace covers every atom.
pub fn evaluate(expr: &PredicateExpr, env: &BindingEnv<'_>) -> Evaluation {
    let mut trace = Vec::new();
    let value = eval_into(expr, env, &mut trace);
    Evaluation { value, trace }
}

/// Boolean value only, short-circuiting.
pub fn holds(expr: &PredicateExpr, env: &BindingEnv<'_>) -> bool {
    match expr {
        PredicateExpr::Atom(a) => env.atom_value(a),
        PredicateExpr::And(xs) => xs.iter().all(|x| holds(x, env)),
        PredicateExpr::Or(xs) => xs.iter().any(|x| holds(x, env)),
        PredicateExpr::Not(x) => !holds(x, env),
    }
}

fn eval_into(expr: &PredicateExpr, env: &BindingEnv<'_>, trace: &mut Vec<(Atom, bool)>) -> bool {
    match expr {
        PredicateExpr::Atom(a) => {
            let v = env.atom_value(a);
            trace.push((a.clone(), v));
            v
        }
        // fold, not all/any: every atom must reach the trace.
        #[allow(clippy::unnecessary_fold)]
        PredicateExpr::And(xs) => xs
            .iter()
            .fold(true, |acc, x| eval_into(x, env, trace) && acc),
        #[allow(clippy::unnecessary_fold)]
        PredicateExpr::Or(xs) => xs
            .iter()
            .fold(false, |acc, x| eval_into(x, env, trace) || acc),
        PredicateExpr::Not(x) => !eval_into(x, env, trace),
    }
}

/// An atom, possibly negated, that evaluates to false on its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailingAtom {
    pub atom: Atom,
    pub negated: bool,
}

impl std::fmt::Display for FailingAtom {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.negated {
            write!(f, "(not {})", self.atom)
        } else {
            self.atom.fmt(f)
        }
    }
}

/// For an expression that evaluates false, the atom literals responsible.
///
/// Each returned literal evaluates false by itself in `env`. Empty when the
/// expression holds, or for a bare `(or)`.
pub fn blame(expr: &PredicateExpr, env: &BindingEnv<'_>) -> Vec<FailingAtom> {
    let mut out = Vec::new();
    collect_blame(expr, env, false, &mut out);
    out
}

// Collects literals of polarity `negated` that falsify `expr` (or, when
// negated, that make `expr` true).
fn collect_blame(
    expr: &PredicateExpr,
    env: &BindingEnv<'_>,
    negated: bool,
    out: &mut Vec<FailingAtom>,
) {
    let value = holds(expr, env);
    if value != negated {
        return;
    }
    match expr {
        PredicateExpr::Atom(a) => out.push(FailingAtom {
            atom: a.clone(),
            negated,
        }),
        PredicateExpr::Not(x) => collect_blame(x, env, !negated, out),
        // and-false / or-false / and-true / or-true: recurse into children
        // sharing the offending value
        PredicateExpr::And(xs) | PredicateExpr::Or(xs) => {
            for x in xs {
                collect_blame(x, env, negated, out);
            }
        }
    }
}

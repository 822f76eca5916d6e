//! Shared random generators and reference evaluators for integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use bun_core::bib::{Context, ObjectRecord, SubjectRecord};
use bun_core::predicate::{Atom, AttrPath, Entity, OpBinding, PredicateExpr, TagHolder};
use bun_core::{CmpOp, Decimal, Literal};
use rand::{Rng, RngExt};

pub const ROLES: [&str; 3] = ["admin", "editor", "viewer"];
pub const OPS: [&str; 3] = ["read", "write", "publish"];
pub const TAGS: [&str; 3] = ["red", "blue", "green"];
pub const KEYS: [&str; 3] = ["level", "status", "score"];
pub const CLASSES: [&str; 2] = ["Doc", "Sensor"];

pub fn pick<'a, R: Rng>(rng: &mut R, xs: &[&'a str]) -> &'a str {
    xs[rng.random_range(0..xs.len())]
}

pub fn literal<R: Rng>(rng: &mut R) -> Literal {
    match rng.random_range(0..6) {
        0 => Literal::Int(rng.random_range(-3..4)),
        1 => Literal::Dec(Decimal::new(
            rng.random_range(-40..40),
            rng.random_range(0..3),
        )),
        2 => Literal::Bool(rng.random_bool(0.5)),
        3 => Literal::Str(pick(rng, &["open", "closed", "a\"b", "x y", "é", ""]).to_string()),
        _ => Literal::Int(rng.random_range(0..3)),
    }
}

fn path<R: Rng>(rng: &mut R, entity: Entity) -> AttrPath {
    let key = pick(rng, &KEYS);
    let rest = match entity {
        Entity::Subject => match rng.random_range(0..4) {
            0 => "id".to_string(),
            _ => format!("attributes.{key}"),
        },
        Entity::Object => match rng.random_range(0..5) {
            0 => "class".to_string(),
            1 => "id".to_string(),
            2 => format!("attributes.{key}"),
            _ => format!("state.{key}"),
        },
        Entity::Op => match rng.random_range(0..3) {
            0 => "name".to_string(),
            _ => format!("args.{key}"),
        },
        Entity::Context => match rng.random_range(0..3) {
            0 => "logical_time".to_string(),
            _ => key.to_string(),
        },
    };
    AttrPath::new(entity, rest)
}

pub fn atom<R: Rng>(rng: &mut R, namespaces: &[Entity]) -> Atom {
    let entity = namespaces[rng.random_range(0..namespaces.len())];
    let specific = match entity {
        Entity::Subject => match rng.random_range(0..2) {
            0 => Some(Atom::HasRole(pick(rng, &ROLES).into())),
            _ => Some(Atom::HasCapability(pick(rng, &OPS).into())),
        },
        Entity::Object => match rng.random_range(0..2) {
            0 => Some(Atom::HasTag {
                holder: TagHolder::Object,
                tag: pick(rng, &TAGS).into(),
            }),
            _ => Some(Atom::Affords(pick(rng, &OPS).into())),
        },
        Entity::Context => Some(Atom::HasTag {
            holder: TagHolder::Context,
            tag: pick(rng, &TAGS).into(),
        }),
        Entity::Op => None,
    };
    match rng.random_range(0..5) {
        0 | 1 => Atom::Cmp {
            path: path(rng, entity),
            op: CmpOp::ALL[rng.random_range(0..6)],
            value: literal(rng),
        },
        2 => {
            let n = rng.random_range(1..4);
            Atom::In {
                path: path(rng, entity),
                set: (0..n).map(|_| literal(rng)).collect(),
            }
        }
        3 => Atom::Exists(path(rng, entity)),
        _ => specific.unwrap_or_else(|| Atom::Exists(path(rng, entity))),
    }
}

/// Random expression over `namespaces` with at most `budget` atoms.
pub fn expr<R: Rng>(rng: &mut R, namespaces: &[Entity], budget: usize) -> PredicateExpr {
    fn go<R: Rng>(rng: &mut R, ns: &[Entity], budget: &mut usize, depth: usize) -> PredicateExpr {
        if *budget == 0 {
            return PredicateExpr::And(Vec::new());
        }
        let choice = if depth >= 4 {
            0
        } else {
            rng.random_range(0..6)
        };
        match choice {
            0..=2 => {
                *budget -= 1;
                PredicateExpr::Atom(atom(rng, ns))
            }
            3 => PredicateExpr::Not(Box::new(go(rng, ns, budget, depth + 1))),
            k => {
                let n = rng.random_range(0..4);
                let kids = (0..n).map(|_| go(rng, ns, budget, depth + 1)).collect();
                if k == 4 {
                    PredicateExpr::And(kids)
                } else {
                    PredicateExpr::Or(kids)
                }
            }
        }
    }
    let mut b = budget;
    go(rng, namespaces, &mut b, 0)
}

fn some_set<R: Rng>(rng: &mut R, xs: &[&str]) -> BTreeSet<String> {
    xs.iter()
        .filter(|_| rng.random_bool(0.5))
        .map(|s| s.to_string())
        .collect()
}

pub fn subject<R: Rng>(rng: &mut R) -> SubjectRecord {
    let mut s = SubjectRecord::new(pick(rng, &["u1", "u2"]));
    s.roles = some_set(rng, &ROLES);
    s.capabilities = some_set(rng, &OPS);
    for k in KEYS {
        if rng.random_bool(0.5) {
            s.attributes.insert(k.into(), literal(rng));
        }
    }
    s
}

pub fn object<R: Rng>(rng: &mut R) -> ObjectRecord {
    let mut o = ObjectRecord::new(pick(rng, &["o1", "o2"]), pick(rng, &CLASSES));
    o.affordances = some_set(rng, &OPS);
    o.tags = some_set(rng, &TAGS);
    for k in KEYS {
        if rng.random_bool(0.5) {
            o.attributes.insert(k.into(), literal(rng));
        }
        if rng.random_bool(0.5) {
            o.state.insert(k.into(), literal(rng));
        }
    }
    o
}

pub fn op<R: Rng>(rng: &mut R) -> OpBinding {
    let mut op = OpBinding::new(pick(rng, &OPS));
    for k in KEYS {
        if rng.random_bool(0.4) {
            op.args.insert(k.into(), literal(rng));
        }
    }
    op
}

pub fn context<R: Rng>(rng: &mut R) -> Context {
    let mut c = Context::at(rng.random_range(0..20));
    c.tags = some_set(rng, &TAGS);
    for k in KEYS {
        if rng.random_bool(0.4) {
            c.values.insert(k.into(), literal(rng));
        }
    }
    c
}

/// Straightforward reading of the predicate semantics, kept apart from the
/// library's evaluator.
pub struct Oracle<'a> {
    pub subject: &'a SubjectRecord,
    pub object: &'a ObjectRecord,
    pub op: &'a OpBinding,
    pub context: &'a Context,
}

fn number(l: &Literal) -> Option<Decimal> {
    match l {
        Literal::Int(i) => Some(Decimal::from(*i)),
        Literal::Dec(d) => Some(*d),
        _ => None,
    }
}

pub fn compare(a: &Literal, op: CmpOp, b: &Literal) -> bool {
    use std::cmp::Ordering::*;
    let ord = match (a, b) {
        (Literal::Str(x), Literal::Str(y)) => x.cmp(y),
        (Literal::Bool(x), Literal::Bool(y)) => {
            return match op {
                CmpOp::Eq => x == y,
                CmpOp::Ne => x != y,
                _ => false,
            }
        }
        _ => match (number(a), number(b)) {
            (Some(x), Some(y)) => x.cmp(&y),
            _ => return false,
        },
    };
    match op {
        CmpOp::Eq => ord == Equal,
        CmpOp::Ne => ord != Equal,
        CmpOp::Lt => ord == Less,
        CmpOp::Le => ord != Greater,
        CmpOp::Gt => ord == Greater,
        CmpOp::Ge => ord != Less,
    }
}

impl Oracle<'_> {
    fn lookup(&self, p: &AttrPath) -> Option<Literal> {
        let parts: Vec<&str> = p.rest.split('.').collect();
        match (p.entity, parts.as_slice()) {
            (Entity::Subject, ["id"]) => Some(Literal::Str(self.subject.id.clone())),
            (Entity::Subject, ["attributes", k]) => self.subject.attributes.get(*k).cloned(),
            (Entity::Object, ["id"]) => Some(Literal::Str(self.object.id.clone())),
            (Entity::Object, ["class"]) => Some(Literal::Str(self.object.class.clone())),
            (Entity::Object, ["attributes", k]) => self.object.attributes.get(*k).cloned(),
            (Entity::Object, ["state", k]) => self.object.state.get(*k).cloned(),
            (Entity::Op, ["name"]) => Some(Literal::Str(self.op.name.clone())),
            (Entity::Op, ["args", k]) => self.op.args.get(*k).cloned(),
            (Entity::Context, ["logical_time"]) => Some(Literal::Int(self.context.logical_time)),
            (Entity::Context, [k]) => self.context.values.get(*k).cloned(),
            _ => None,
        }
    }

    pub fn atom(&self, a: &Atom) -> bool {
        match a {
            Atom::Cmp { path, op, value } => {
                self.lookup(path).is_some_and(|v| compare(&v, *op, value))
            }
            Atom::In { path, set } => self
                .lookup(path)
                .is_some_and(|v| set.iter().any(|m| compare(&v, CmpOp::Eq, m))),
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
            Atom::Affords(o) => self.object.affordances.contains(o),
            Atom::Exists(p) => self.lookup(p).is_some(),
        }
    }

    pub fn holds(&self, e: &PredicateExpr) -> bool {
        match e {
            PredicateExpr::Atom(a) => self.atom(a),
            PredicateExpr::And(xs) => xs.iter().all(|x| self.holds(x)),
            PredicateExpr::Or(xs) => xs.iter().any(|x| self.holds(x)),
            PredicateExpr::Not(x) => !self.holds(x),
        }
    }
}

/// Exhaustive bigram counting: P(next | prev) over one subject's sequence,
/// with `None` standing for the start of the sequence.
pub fn bigram_probability(seq: &[String], prev: Option<&str>, next: &str) -> Option<f64> {
    let mut total = 0usize;
    let mut hits = 0usize;
    for i in 0..seq.len() {
        let before = if i == 0 {
            None
        } else {
            Some(seq[i - 1].as_str())
        };
        if before == prev {
            total += 1;
            if seq[i] == next {
                hits += 1;
            }
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

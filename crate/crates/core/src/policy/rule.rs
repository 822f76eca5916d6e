use std::fmt;

use serde::{Deserialize, Serialize};

use crate::predicate::{Entity, PredicateExpr};

/// Operation and object-class patterns; `*` matches anything.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scope {
    pub operation: String,
    pub class: String,
}

impl Scope {
    pub const ANY: &'static str = "*";

    pub fn new(operation: impl Into<String>, class: impl Into<String>) -> Self {
        Scope {
            operation: operation.into(),
            class: class.into(),
        }
    }

    pub fn matches(&self, operation: &str, class: &str) -> bool {
        (self.operation == Self::ANY || self.operation == operation)
            && (self.class == Self::ANY || self.class == class)
    }
}

/// Which of the three constraints of a rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Component {
    P1,
    P2,
    P3,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::P1, Component::P2, Component::P3];

    /// Namespaces the constraint may read.
    pub fn namespaces(self) -> &'static [Entity] {
        match self {
            Component::P1 => &[Entity::Subject],
            Component::P2 => &[Entity::Object],
            Component::P3 => &[Entity::Op, Entity::Context],
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Component::P1 => "P1",
            Component::P2 => "P2",
            Component::P3 => "P3",
        })
    }
}

/// Subject, object and operation/context constraints that must all hold for
/// an in-scope behavior to be valid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityRule {
    pub rule_id: String,
    pub scope: Scope,
    pub p1: PredicateExpr,
    pub p2: PredicateExpr,
    pub p3: PredicateExpr,
    pub description: String,
}

impl ValidityRule {
    /// A rule with all three constraints `(and)`.
    pub fn vacuous(rule_id: impl Into<String>, scope: Scope) -> Self {
        ValidityRule {
            rule_id: rule_id.into(),
            scope,
            p1: PredicateExpr::truth(),
            p2: PredicateExpr::truth(),
            p3: PredicateExpr::truth(),
            description: String::new(),
        }
    }

    pub fn component(&self, c: Component) -> &PredicateExpr {
        match c {
            Component::P1 => &self.p1,
            Component::P2 => &self.p2,
            Component::P3 => &self.p3,
        }
    }

    /// Text form used in scenario and snapshot RULES sections.
    pub fn to_line(&self) -> String {
        let mut line = format!(
            "rule {} scope {} {} p1 {} p2 {} p3 {}",
            self.rule_id, self.scope.operation, self.scope.class, self.p1, self.p2, self.p3
        );
        if !self.description.is_empty() {
            line.push_str(" desc ");
            line.push_str(&crate::literal::quote(&self.description));
        }
        line
    }
}

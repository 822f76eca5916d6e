use std::fmt;

use serde::{Deserialize, Serialize};

use super::rule::Component;
use crate::predicate::FailingAtom;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GateResult {
    /// Operation is among the object's affordances.
    pub affordance: bool,
    /// Operation is among the subject's capabilities.
    pub capability: bool,
}

impl GateResult {
    pub fn passed(&self) -> bool {
        self.affordance && self.capability
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule_id: String,
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
}

impl RuleResult {
    pub fn passed(&self) -> bool {
        self.p1 && self.p2 && self.p3
    }

    pub fn get(&self, c: Component) -> bool {
        match c {
            Component::P1 => self.p1,
            Component::P2 => self.p2,
            Component::P3 => self.p3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleFailure {
    pub rule_id: String,
    pub component: Component,
    pub atoms: Vec<FailingAtom>,
}

/// Outcome of a validity check with enough detail to explain it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Verdict {
    pub allow: bool,
    pub gate: GateResult,
    pub evaluated: Vec<RuleResult>,
    pub first_failure: Option<RuleFailure>,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "verdict: {}", if self.allow { "allow" } else { "deny" })?;
        writeln!(
            f,
            "gate: affordance={} capability={}",
            self.gate.affordance, self.gate.capability
        )?;
        for r in &self.evaluated {
            writeln!(f, "rule {}: P1={} P2={} P3={}", r.rule_id, r.p1, r.p2, r.p3)?;
        }
        if let Some(fail) = &self.first_failure {
            write!(f, "first failure: rule {} {}", fail.rule_id, fail.component)?;
            for a in &fail.atoms {
                write!(f, " {a}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

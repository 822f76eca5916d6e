use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::rule::{Component, Scope, ValidityRule};
use super::verdict::{GateResult, RuleFailure, RuleResult, Verdict};
use crate::bib::{AttrMap, Bib, Context, ObjectRecord, SubjectRecord};
use crate::predicate::{blame, holds, BindingEnv, OpBinding};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("rule {rule_id}: {component} may not reference {atom}")]
    Namespace {
        rule_id: String,
        component: Component,
        atom: String,
    },
    #[error("rule has an empty id")]
    EmptyId,
    #[error("unknown subject '{0}'")]
    UnknownSubject(String),
    #[error("unknown object '{0}'")]
    UnknownObject(String),
}

/// A requested behavior before it is checked.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BehaviorRequest {
    pub subject_id: String,
    pub operation: String,
    pub object_id: String,
    pub args: AttrMap,
    pub context: Context,
}

/// Validity rules indexed by (operation, class) scope.
#[derive(Debug, Clone, Default)]
pub struct PolicyEngine {
    rules: BTreeMap<String, ValidityRule>,
    index: BTreeMap<(String, String), BTreeSet<String>>,
}

impl PolicyEngine {
    pub fn new() -> Self {
        Self::default()
    }

    /// Checks that each constraint reads only its own namespaces.
    pub fn check_namespaces(rule: &ValidityRule) -> Result<(), PolicyError> {
        if rule.rule_id.is_empty() {
            return Err(PolicyError::EmptyId);
        }
        for c in Component::ALL {
            if let Some(atom) = rule.component(c).first_foreign_atom(c.namespaces()) {
                return Err(PolicyError::Namespace {
                    rule_id: rule.rule_id.clone(),
                    component: c,
                    atom: atom.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Adds or replaces a rule.
    pub fn register_rule(&mut self, rule: ValidityRule) -> Result<String, PolicyError> {
        Self::check_namespaces(&rule)?;
        let id = rule.rule_id.clone();
        if let Some(old) = self.rules.remove(&id) {
            let key = (old.scope.operation, old.scope.class);
            if let Some(ids) = self.index.get_mut(&key) {
                ids.remove(&id);
                if ids.is_empty() {
                    self.index.remove(&key);
                }
            }
        }
        self.index
            .entry((rule.scope.operation.clone(), rule.scope.class.clone()))
            .or_default()
            .insert(id.clone());
        self.rules.insert(id.clone(), rule);
        Ok(id)
    }

    pub fn rules(&self) -> impl Iterator<Item = &ValidityRule> {
        self.rules.values()
    }

    pub fn rule(&self, id: &str) -> Option<&ValidityRule> {
        self.rules.get(id)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    /// Rules whose scope covers (operation, class), ordered by rule id.
    pub fn applicable(&self, operation: &str, class: &str) -> Vec<&ValidityRule> {
        let mut ids = BTreeSet::new();
        for op in [operation, Scope::ANY] {
            for cl in [class, Scope::ANY] {
                if let Some(set) = self.index.get(&(op.to_string(), cl.to_string())) {
                    ids.extend(set.iter());
                }
            }
        }
        ids.into_iter().map(|id| &self.rules[id]).collect()
    }

    /// Resolves the request's subject and object from the store and checks it.
    pub fn check_validity(
        &self,
        request: &BehaviorRequest,
        bib: &Bib,
    ) -> Result<Verdict, PolicyError> {
        let subject = bib
            .subject(&request.subject_id)
            .ok_or_else(|| PolicyError::UnknownSubject(request.subject_id.clone()))?;
        let object = bib
            .object(&request.object_id)
            .ok_or_else(|| PolicyError::UnknownObject(request.object_id.clone()))?;
        let op = OpBinding {
            name: request.operation.clone(),
            args: request.args.clone(),
        };
        Ok(self.check(subject, object, &op, &request.context))
    }

    /// Affordance and capability gate, then the conjunction of every applicable rule.
    pub fn check(
        &self,
        subject: &SubjectRecord,
        object: &ObjectRecord,
        op: &OpBinding,
        context: &Context,
    ) -> Verdict {
        let gate = GateResult {
            affordance: object.affordances.contains(&op.name),
            capability: subject.capabilities.contains(&op.name),
        };
        let env = BindingEnv {
            subject,
            object,
            op,
            context,
        };
        let mut evaluated = Vec::new();
        let mut first_failure = None;
        for rule in self.applicable(&op.name, &object.class) {
            let result = RuleResult {
                rule_id: rule.rule_id.clone(),
                p1: holds(&rule.p1, &env),
                p2: holds(&rule.p2, &env),
                p3: holds(&rule.p3, &env),
            };
            if first_failure.is_none() {
                if let Some(c) = Component::ALL.into_iter().find(|&c| !result.get(c)) {
                    first_failure = Some(RuleFailure {
                        rule_id: rule.rule_id.clone(),
                        component: c,
                        atoms: blame(rule.component(c), &env),
                    });
                }
            }
            evaluated.push(result);
        }
        let allow = gate.passed() && first_failure.is_none();
        Verdict {
            allow,
            gate,
            evaluated,
            first_failure,
        }
    }
}

//! Behavior templates and the concrete behaviors they expand to.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

use crate::bib::{AttrMap, Bib, EventRecord};
use crate::literal::Literal;

/// Target object of a template.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectRef {
    Id(String),
    /// The entity of the triggering event (`$event.entity`).
    EventEntity,
}

/// Argument value of a template, resolved when the template is expanded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArgValue {
    Lit(Literal),
    /// `$event.entity`
    EventEntity,
    /// `$event.cause`: the behavior that caused the triggering event.
    EventCause,
    /// `$event.id`
    EventId,
    /// `$tick`
    Tick,
}

impl fmt::Display for ArgValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgValue::Lit(l) => l.fmt(f),
            ArgValue::EventEntity => f.write_str("$event.entity"),
            ArgValue::EventCause => f.write_str("$event.cause"),
            ArgValue::EventId => f.write_str("$event.id"),
            ArgValue::Tick => f.write_str("$tick"),
        }
    }
}

/// State change applied to the target object when a behavior is applied.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Effect {
    Set(String, Literal),
    /// Adds to a numeric state value; fails if the value is missing or not numeric.
    Incr(String, Decimal),
}

/// Template for a behavior: `operation` on `object` with `args` and `effects`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionTemplate {
    pub operation: String,
    pub object: ObjectRef,
    pub args: BTreeMap<String, ArgValue>,
    pub effects: Vec<Effect>,
}

impl ActionTemplate {
    pub fn new(operation: impl Into<String>, object: impl Into<String>) -> Self {
        ActionTemplate {
            operation: operation.into(),
            object: ObjectRef::Id(object.into()),
            args: BTreeMap::new(),
            effects: Vec::new(),
        }
    }

    pub fn with_set(mut self, path: impl Into<String>, value: impl Into<Literal>) -> Self {
        self.effects.push(Effect::Set(path.into(), value.into()));
        self
    }

    pub fn needs_event(&self) -> bool {
        self.object == ObjectRef::EventEntity
            || self
                .args
                .values()
                .any(|a| !matches!(a, ArgValue::Lit(_) | ArgValue::Tick))
    }

    /// Object id this template targets, if it is fixed.
    pub fn fixed_object(&self) -> Option<&str> {
        match &self.object {
            ObjectRef::Id(id) => Some(id),
            ObjectRef::EventEntity => None,
        }
    }

    /// Expands against an optional triggering event. `None` when the target
    /// object does not resolve to a registered object.
    pub fn resolve(
        &self,
        event: Option<&EventRecord>,
        tick: i64,
        bib: &Bib,
    ) -> Option<(String, AttrMap)> {
        let object_id = match &self.object {
            ObjectRef::Id(id) => id.clone(),
            ObjectRef::EventEntity => event?.entity_id.clone(),
        };
        bib.object(&object_id)?;
        let mut args = AttrMap::new();
        for (k, v) in &self.args {
            let lit = match v {
                ArgValue::Lit(l) => l.clone(),
                ArgValue::Tick => Literal::Int(tick),
                ArgValue::EventEntity => Literal::Str(event?.entity_id.clone()),
                ArgValue::EventId => Literal::Int(event?.event_id as i64),
                ArgValue::EventCause => match event?.cause_behavior_id {
                    Some(c) => Literal::Int(c as i64),
                    None => continue,
                },
            };
            args.insert(k.clone(), lit);
        }
        Some((object_id, args))
    }
}

/// Where a planned behavior came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Origin {
    Agent {
        subject_id: String,
        clause: usize,
    },
    Trigger {
        trigger_id: String,
        event_id: u64,
        priority: i64,
    },
    Fallback {
        rule_id: String,
        request_id: u64,
    },
}

/// A fully resolved behavior waiting for validation and execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedBehavior {
    pub subject_id: String,
    pub operation: String,
    pub object_id: String,
    pub args: AttrMap,
    pub effects: Vec<Effect>,
    pub caused_by: Option<u64>,
    pub cascade_depth: u32,
    pub context_tags: BTreeSet<String>,
    pub origin: Origin,
}

impl PlannedBehavior {
    /// Builds a behavior for `actor` from a template; provenance comes from
    /// the event's causing behavior.
    pub fn from_template(
        actor: &str,
        template: &ActionTemplate,
        event: Option<&EventRecord>,
        tick: i64,
        bib: &Bib,
        origin: Origin,
    ) -> Option<PlannedBehavior> {
        let (object_id, args) = template.resolve(event, tick, bib)?;
        let caused_by = event.and_then(|e| e.cause_behavior_id);
        let cascade_depth = match caused_by {
            Some(p) => bib.behavior(p).map_or(0, |b| b.cascade_depth + 1),
            None => 0,
        };
        Some(PlannedBehavior {
            subject_id: actor.to_string(),
            operation: template.operation.clone(),
            object_id,
            args,
            effects: template.effects.clone(),
            caused_by,
            cascade_depth,
            context_tags: event.map(|e| e.tags.clone()).unwrap_or_default(),
            origin,
        })
    }
}

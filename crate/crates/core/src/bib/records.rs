use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::literal::{is_bare_name, Literal};
use crate::policy::Verdict;

pub type AttrMap = BTreeMap<String, Literal>;

/// An active agent: the bearer of behavior.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub roles: BTreeSet<String>,
    pub capabilities: BTreeSet<String>,
    pub attributes: AttrMap,
    pub goals: Vec<String>,
}

impl SubjectRecord {
    pub fn new(id: impl Into<String>) -> Self {
        SubjectRecord {
            id: id.into(),
            ..Default::default()
        }
    }

    pub fn with_roles<I, S>(mut self, roles: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.roles.extend(roles.into_iter().map(Into::into));
        self
    }

    pub fn with_capabilities<I, S>(mut self, caps: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.capabilities.extend(caps.into_iter().map(Into::into));
        self
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<Literal>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }
}

/// A passive resource with semantic descriptors, mutable state and the
/// closed set of operations that may ever be applied to it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub id: String,
    pub class: String,
    pub attributes: AttrMap,
    pub state: AttrMap,
    pub affordances: BTreeSet<String>,
    pub tags: BTreeSet<String>,
}

impl ObjectRecord {
    pub fn new(id: impl Into<String>, class: impl Into<String>) -> Self {
        ObjectRecord {
            id: id.into(),
            class: class.into(),
            ..Default::default()
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<Literal>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }

    pub fn with_state(mut self, key: impl Into<String>, value: impl Into<Literal>) -> Self {
        self.state.insert(key.into(), value.into());
        self
    }

    pub fn with_affordances<I, S>(mut self, ops: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.affordances.extend(ops.into_iter().map(Into::into));
        self
    }

    pub fn with_tags<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.tags.extend(tags.into_iter().map(Into::into));
        self
    }
}

/// Operation names follow identifier syntax.
pub fn is_operation_name(s: &str) -> bool {
    is_bare_name(s) && !s.contains('.')
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Applied,
    Denied,
    Failed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Applied => "applied",
            Outcome::Denied => "denied",
            Outcome::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Outcome> {
        match s {
            "applied" => Some(Outcome::Applied),
            "denied" => Some(Outcome::Denied),
            "failed" => Some(Outcome::Failed),
            _ => None,
        }
    }
}

/// Why a behavior did not apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    /// Operation missing from the object's affordances or the subject's capabilities.
    Gate,
    /// An applicable validity rule failed.
    Policy,
    /// Another write to the same object already holds this tick.
    Mutex,
    /// The state effect could not be applied.
    Effect,
}

/// One state change: `old` is absent when the path did not exist before.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Change {
    pub old: Option<Literal>,
    pub new: Literal,
}

pub type StateDelta = BTreeMap<String, Change>;

/// Evaluation context of a behavior.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Context {
    pub logical_time: i64,
    pub tags: BTreeSet<String>,
    pub values: AttrMap,
}

impl Context {
    pub fn at(logical_time: i64) -> Self {
        Context {
            logical_time,
            ..Default::default()
        }
    }

    pub fn lookup(&self, key: &str) -> Option<Literal> {
        if key == "logical_time" {
            Some(Literal::Int(self.logical_time))
        } else {
            self.values.get(key).cloned()
        }
    }
}

/// One recorded interaction: `subject` performs `operation` on `object`.
///
/// The first ten fields are in canonical export order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BehaviorRecord {
    pub behavior_id: u64,
    pub logical_time: i64,
    pub subject_id: String,
    pub operation: String,
    pub object_id: String,
    pub outcome: Outcome,
    pub cascade_depth: u32,
    pub caused_by: Option<u64>,
    pub verdict: Verdict,
    pub state_delta: StateDelta,
    pub object_class: String,
    pub args: AttrMap,
    pub context: Context,
    pub reason: Option<DenyReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ObjectChanged,
    BehaviorRecorded,
    ExternalSignal,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::ObjectChanged => "object_changed",
            EventKind::BehaviorRecorded => "behavior_recorded",
            EventKind::ExternalSignal => "external_signal",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        match s {
            "object_changed" => Some(EventKind::ObjectChanged),
            "behavior_recorded" => Some(EventKind::BehaviorRecorded),
            "external_signal" => Some(EventKind::ExternalSignal),
            _ => None,
        }
    }
}

/// An entry of the change feed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub event_id: u64,
    pub kind: EventKind,
    pub entity_id: String,
    pub delta: StateDelta,
    pub tags: BTreeSet<String>,
    pub cause_behavior_id: Option<u64>,
    pub logical_time: i64,
}

use std::collections::{BTreeMap, BTreeSet};

use rust_decimal::Decimal;
use thiserror::Error;

use super::forecast::{ForecastError, ForecastModel, ModelOutput};
use super::records::*;
use crate::literal::Literal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BibError {
    #[error("id '{id}' is already registered as a {existing}, cannot store a {incoming}")]
    TypeConflict {
        id: String,
        existing: &'static str,
        incoming: &'static str,
    },
    #[error("invalid {kind} '{id}': {reason}")]
    Invalid {
        kind: &'static str,
        id: String,
        reason: String,
    },
    #[error("unknown object '{0}'")]
    UnknownObject(String),
    #[error("unknown subject '{0}'")]
    UnknownSubject(String),
    #[error("unknown model '{0}'")]
    UnknownModel(String),
    #[error("empty state delta for object '{0}'")]
    EmptyDelta(String),
    #[error("behavior {0} referenced as cause does not exist")]
    UnknownCause(u64),
    #[error("cascade depth {got} inconsistent with cause (expected {expected})")]
    CascadeDepth { expected: u32, got: u32 },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
}

/// Anything `put_entity` accepts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entity {
    Subject(SubjectRecord),
    Object(ObjectRecord),
    Model(ForecastModel),
}

impl Entity {
    fn kind(&self) -> &'static str {
        match self {
            Entity::Subject(_) => "subject",
            Entity::Object(_) => "object",
            Entity::Model(_) => "model",
        }
    }

    fn id(&self) -> &str {
        match self {
            Entity::Subject(s) => &s.id,
            Entity::Object(o) => &o.id,
            Entity::Model(m) => &m.model_id,
        }
    }
}

impl From<SubjectRecord> for Entity {
    fn from(s: SubjectRecord) -> Self {
        Entity::Subject(s)
    }
}

impl From<ObjectRecord> for Entity {
    fn from(o: ObjectRecord) -> Self {
        Entity::Object(o)
    }
}

impl From<ForecastModel> for Entity {
    fn from(m: ForecastModel) -> Self {
        Entity::Model(m)
    }
}

/// Conjunctive filter over the behavior log; unset fields match everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BehaviorFilter {
    pub subject_id: Option<String>,
    pub object_id: Option<String>,
    pub operation: Option<String>,
    pub outcome: Option<Outcome>,
    /// Inclusive tick range.
    pub time_range: Option<(i64, i64)>,
}

impl BehaviorFilter {
    pub fn matches(&self, r: &BehaviorRecord) -> bool {
        self.subject_id.as_ref().is_none_or(|s| *s == r.subject_id)
            && self.object_id.as_ref().is_none_or(|o| *o == r.object_id)
            && self.operation.as_ref().is_none_or(|op| *op == r.operation)
            && self.outcome.is_none_or(|o| o == r.outcome)
            && self
                .time_range
                .is_none_or(|(lo, hi)| lo <= r.logical_time && r.logical_time <= hi)
    }
}

/// The behavioral information base: entities, the append-only behavior log
/// and the change feed.
///
/// All mutation goes through `&mut self`, so a single owner serializes
/// writes; the type is `Send + Sync` and may be shared behind a lock for
/// concurrent readers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Bib {
    subjects: BTreeMap<String, SubjectRecord>,
    objects: BTreeMap<String, ObjectRecord>,
    models: BTreeMap<String, ForecastModel>,
    log: Vec<BehaviorRecord>,
    feed: Vec<EventRecord>,
}

impl Bib {
    pub fn new() -> Self {
        Self::default()
    }

    fn kind_of(&self, id: &str) -> Option<&'static str> {
        if self.subjects.contains_key(id) {
            Some("subject")
        } else if self.objects.contains_key(id) {
            Some("object")
        } else if self.models.contains_key(id) {
            Some("model")
        } else {
            None
        }
    }

    /// Registers or replaces an entity. Registration is not behavior and emits no event.
    pub fn put_entity(&mut self, entity: impl Into<Entity>) -> Result<String, BibError> {
        let entity = entity.into();
        let id = entity.id().to_string();
        let kind = entity.kind();
        let invalid = |reason: String| BibError::Invalid {
            kind,
            id: id.clone(),
            reason,
        };
        if id.is_empty() {
            return Err(invalid("empty id".into()));
        }
        if let Some(existing) = self.kind_of(&id) {
            if existing != entity.kind() {
                return Err(BibError::TypeConflict {
                    id,
                    existing,
                    incoming: entity.kind(),
                });
            }
        }
        match entity {
            Entity::Subject(s) => {
                if let Some(bad) = s.capabilities.iter().find(|c| !is_operation_name(c)) {
                    return Err(invalid(format!(
                        "capability '{bad}' is not an operation name"
                    )));
                }
                self.subjects.insert(id.clone(), s);
            }
            Entity::Object(o) => {
                if let Some(bad) = o.affordances.iter().find(|c| !is_operation_name(c)) {
                    return Err(invalid(format!(
                        "affordance '{bad}' is not an operation name"
                    )));
                }
                self.objects.insert(id.clone(), o);
            }
            Entity::Model(m) => {
                m.check().map_err(invalid)?;
                self.models.insert(id.clone(), m);
            }
        }
        Ok(id)
    }

    pub fn subject(&self, id: &str) -> Option<&SubjectRecord> {
        self.subjects.get(id)
    }

    pub fn object(&self, id: &str) -> Option<&ObjectRecord> {
        self.objects.get(id)
    }

    pub fn model(&self, id: &str) -> Option<&ForecastModel> {
        self.models.get(id)
    }

    pub fn subjects(&self) -> impl Iterator<Item = &SubjectRecord> {
        self.subjects.values()
    }

    pub fn objects(&self) -> impl Iterator<Item = &ObjectRecord> {
        self.objects.values()
    }

    pub fn models(&self) -> impl Iterator<Item = &ForecastModel> {
        self.models.values()
    }

    pub fn log(&self) -> &[BehaviorRecord] {
        &self.log
    }

    pub fn feed(&self) -> &[EventRecord] {
        &self.feed
    }

    pub fn behavior(&self, id: u64) -> Option<&BehaviorRecord> {
        id.checked_sub(1).and_then(|i| self.log.get(i as usize))
    }

    /// Id the next appended behavior will receive.
    pub fn next_behavior_id(&self) -> u64 {
        self.log.len() as u64 + 1
    }

    pub fn last_event_id(&self) -> u64 {
        self.feed.len() as u64
    }

    fn push_event(
        &mut self,
        kind: EventKind,
        entity_id: String,
        delta: StateDelta,
        tags: BTreeSet<String>,
        cause: Option<u64>,
        time: i64,
    ) -> EventRecord {
        let ev = EventRecord {
            event_id: self.feed.len() as u64 + 1,
            kind,
            entity_id,
            delta,
            tags,
            cause_behavior_id: cause,
            logical_time: time,
        };
        self.feed.push(ev.clone());
        ev
    }

    /// Merges `delta` into the object's state and appends an `object_changed`
    /// event. Writes equal to the current value are still reported.
    pub fn update_object_state(
        &mut self,
        object_id: &str,
        delta: &AttrMap,
        cause: Option<u64>,
        time: i64,
    ) -> Result<EventRecord, BibError> {
        if delta.is_empty() {
            return Err(BibError::EmptyDelta(object_id.to_string()));
        }
        let obj = self
            .objects
            .get_mut(object_id)
            .ok_or_else(|| BibError::UnknownObject(object_id.to_string()))?;
        let mut changes = StateDelta::new();
        for (path, value) in delta {
            let old = obj.state.insert(path.clone(), value.clone());
            changes.insert(
                path.clone(),
                Change {
                    old,
                    new: value.clone(),
                },
            );
        }
        let tags = obj.tags.clone();
        Ok(self.push_event(
            EventKind::ObjectChanged,
            object_id.to_string(),
            changes,
            tags,
            cause,
            time,
        ))
    }

    /// Appends an environment signal to the feed; no state changes.
    pub fn emit_signal(
        &mut self,
        entity_id: &str,
        tags: BTreeSet<String>,
        payload: &AttrMap,
        time: i64,
    ) -> EventRecord {
        let delta = payload
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    Change {
                        old: None,
                        new: v.clone(),
                    },
                )
            })
            .collect();
        self.push_event(
            EventKind::ExternalSignal,
            entity_id.to_string(),
            delta,
            tags,
            None,
            time,
        )
    }

    /// Appends to the behavior log, assigning the next id, and emits a
    /// `behavior_recorded` event carrying the object's tags.
    pub fn append_behavior(&mut self, mut record: BehaviorRecord) -> Result<u64, BibError> {
        if !self.subjects.contains_key(&record.subject_id) {
            return Err(BibError::UnknownSubject(record.subject_id));
        }
        let Some(obj) = self.objects.get(&record.object_id) else {
            return Err(BibError::UnknownObject(record.object_id));
        };
        let expected = match record.caused_by {
            None => 0,
            Some(p) => {
                self.behavior(p)
                    .ok_or(BibError::UnknownCause(p))?
                    .cascade_depth
                    + 1
            }
        };
        if record.cascade_depth != expected {
            return Err(BibError::CascadeDepth {
                expected,
                got: record.cascade_depth,
            });
        }
        let id = self.next_behavior_id();
        record.behavior_id = id;
        let tags = obj.tags.clone();
        let mut delta = StateDelta::new();
        let mut note = |k: &str, v: &str| {
            delta.insert(
                format!("behavior.{k}"),
                Change {
                    old: None,
                    new: Literal::from(v),
                },
            );
        };
        note("operation", &record.operation);
        note("outcome", record.outcome.as_str());
        note("subject", &record.subject_id);
        let object_id = record.object_id.clone();
        let time = record.logical_time;
        self.log.push(record);
        self.push_event(
            EventKind::BehaviorRecorded,
            object_id,
            delta,
            tags,
            Some(id),
            time,
        );
        Ok(id)
    }

    /// Matching log entries in behavior-id order.
    pub fn query_behaviors(&self, filter: &BehaviorFilter) -> Vec<&BehaviorRecord> {
        self.log.iter().filter(|r| filter.matches(r)).collect()
    }

    /// Events with id greater than `event_id`, in order.
    pub fn change_feed_since(&self, event_id: u64) -> &[EventRecord] {
        let start = (event_id as usize).min(self.feed.len());
        &self.feed[start..]
    }

    pub fn evaluate_model(
        &self,
        model_id: &str,
        series: &[(i64, Decimal)],
    ) -> Result<ModelOutput, BibError> {
        let model = self
            .models
            .get(model_id)
            .ok_or_else(|| BibError::UnknownModel(model_id.to_string()))?;
        Ok(model.evaluate(series)?)
    }

    /// Numeric history of `object.state.<path>` reconstructed from the feed.
    pub fn state_series(&self, object_id: &str, path: &str) -> Vec<(i64, Decimal)> {
        let mut out: Vec<(i64, Decimal)> = Vec::new();
        for ev in &self.feed {
            if ev.kind != EventKind::ObjectChanged || ev.entity_id != object_id {
                continue;
            }
            let Some(v) = ev.delta.get(path).and_then(|c| c.new.as_decimal()) else {
                continue;
            };
            match out.last_mut() {
                Some(last) if last.0 == ev.logical_time => last.1 = v,
                _ => out.push((ev.logical_time, v)),
            }
        }
        out
    }

    /// Object records keyed by id.
    pub fn objects_map(&self) -> &BTreeMap<String, ObjectRecord> {
        &self.objects
    }
}

/// Applies one event to a set of object records; non-state events are ignored.
pub fn apply_event(objects: &mut BTreeMap<String, ObjectRecord>, ev: &EventRecord) {
    if ev.kind != EventKind::ObjectChanged {
        return;
    }
    if let Some(obj) = objects.get_mut(&ev.entity_id) {
        for (path, change) in &ev.delta {
            obj.state.insert(path.clone(), change.new.clone());
        }
    }
}

/// Folds the feed over `initial` object records.
pub fn replay_feed<'a>(
    initial: &BTreeMap<String, ObjectRecord>,
    feed: impl IntoIterator<Item = &'a EventRecord>,
) -> BTreeMap<String, ObjectRecord> {
    let mut objects = initial.clone();
    for ev in feed {
        apply_event(&mut objects, ev);
    }
    objects
}

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::pattern::EventPattern;
use super::types::*;
use crate::action::{Origin, PlannedBehavior};
use crate::bib::{Bib, Context, EventRecord, ObjectRecord, SubjectRecord};
use crate::literal::Literal;
use crate::predicate::{holds, BindingEnv, Entity, OpBinding};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TriggerError {
    #[error("unknown subscriber '{0}'")]
    UnknownSubscriber(String),
    #[error("subscription pattern has no filter fields")]
    EmptyPattern,
    #[error("trigger '{0}' is already registered")]
    DuplicateTrigger(String),
    #[error("trigger '{trigger}': unknown actor '{actor}'")]
    UnknownActor { trigger: String, actor: String },
    #[error("trigger '{trigger}': unknown object '{object}'")]
    UnknownObject { trigger: String, object: String },
    #[error("trigger '{trigger}': condition may not reference {atom}")]
    Namespace { trigger: String, atom: String },
    #[error("invalid propagation policy: {0}")]
    Policy(String),
}

type DedupKey = (Option<String>, Option<String>, Option<String>);

#[derive(Debug, Clone)]
struct Pending {
    priority: i64,
    trigger_id: String,
    event_id: u64,
    behavior: PlannedBehavior,
}

/// Subscriptions, trigger rules and propagation governance.
///
/// Matching is pure; the dedup ledger, tick budget and pending queue change
/// only through `&mut self`.
#[derive(Debug, Clone, Default)]
pub struct TriggerEngine {
    policy: PropagationPolicy,
    triggers: BTreeMap<String, TriggerRule>,
    subscriptions: BTreeMap<u64, Subscription>,
    first_event: BTreeMap<u64, u64>,
    queues: BTreeMap<u64, Vec<EventRecord>>,
    dedup: HashMap<DedupKey, i64>,
    budget: (i64, usize),
    pending: Vec<Pending>,
    decisions: Vec<FiringDecision>,
}

/// Context visible to trigger conditions and agent guards for an event.
pub fn event_context(event: &EventRecord, tick: i64) -> Context {
    let mut ctx = Context::at(tick);
    ctx.tags = event.tags.clone();
    ctx.values
        .insert("event.kind".into(), Literal::from(event.kind.as_str()));
    ctx.values.insert(
        "event.entity".into(),
        Literal::from(event.entity_id.as_str()),
    );
    ctx.values
        .insert("event.id".into(), Literal::Int(event.event_id as i64));
    ctx.values
        .insert("event.time".into(), Literal::Int(event.logical_time));
    for (path, change) in &event.delta {
        ctx.values
            .insert(format!("event.{path}"), change.new.clone());
    }
    ctx
}

impl TriggerEngine {
    pub fn new(policy: PropagationPolicy) -> Result<Self, TriggerError> {
        policy.validate().map_err(TriggerError::Policy)?;
        Ok(TriggerEngine {
            policy,
            ..Default::default()
        })
    }

    pub fn policy(&self) -> &PropagationPolicy {
        &self.policy
    }

    /// Registers a subscription; it receives events appended after this call.
    pub fn subscribe(
        &mut self,
        subscriber: &str,
        pattern: EventPattern,
        created_at: i64,
        bib: &Bib,
    ) -> Result<u64, TriggerError> {
        if bib.subject(subscriber).is_none() {
            return Err(TriggerError::UnknownSubscriber(subscriber.to_string()));
        }
        if pattern.is_empty() {
            return Err(TriggerError::EmptyPattern);
        }
        let id = self.subscriptions.len() as u64 + 1;
        self.subscriptions.insert(
            id,
            Subscription {
                subscription_id: id,
                subscriber: subscriber.to_string(),
                pattern,
                created_at,
            },
        );
        self.first_event.insert(id, bib.last_event_id() + 1);
        self.queues.insert(id, Vec::new());
        Ok(id)
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &Subscription> {
        self.subscriptions.values()
    }

    /// Routes events to every matching subscription queue, once per subscription.
    pub fn publish(&mut self, events: &[EventRecord]) -> usize {
        let mut delivered = 0;
        for (id, sub) in &self.subscriptions {
            let start = self.first_event[id];
            let queue = self.queues.get_mut(id).expect("queue per subscription");
            for ev in events
                .iter()
                .filter(|e| e.event_id >= start && sub.pattern.matches(e))
            {
                queue.push(ev.clone());
                delivered += 1;
            }
        }
        delivered
    }

    /// Drains the delivery queue of one subscription.
    pub fn take_deliveries(&mut self, subscription_id: u64) -> Vec<EventRecord> {
        self.queues
            .get_mut(&subscription_id)
            .map(std::mem::take)
            .unwrap_or_default()
    }

    pub fn pending_deliveries(&self) -> usize {
        self.queues.values().map(Vec::len).sum()
    }

    /// Validates references and the condition's namespaces, then registers.
    pub fn register_trigger(&mut self, rule: TriggerRule, bib: &Bib) -> Result<(), TriggerError> {
        let trigger = rule.trigger_id.clone();
        if self.triggers.contains_key(&trigger) {
            return Err(TriggerError::DuplicateTrigger(trigger));
        }
        if bib.subject(&rule.actor).is_none() {
            return Err(TriggerError::UnknownActor {
                trigger,
                actor: rule.actor,
            });
        }
        if let Some(obj) = rule.action.fixed_object() {
            if bib.object(obj).is_none() {
                return Err(TriggerError::UnknownObject {
                    trigger,
                    object: obj.to_string(),
                });
            }
        }
        if let Some(atom) = rule
            .condition
            .first_foreign_atom(&[Entity::Object, Entity::Context])
        {
            return Err(TriggerError::Namespace {
                trigger,
                atom: atom.to_string(),
            });
        }
        self.triggers.insert(trigger, rule);
        Ok(())
    }

    pub fn triggers(&self) -> impl Iterator<Item = &TriggerRule> {
        self.triggers.values()
    }

    pub fn trigger(&self, id: &str) -> Option<&TriggerRule> {
        self.triggers.get(id)
    }

    /// Rules whose pattern matches, by descending priority then trigger id.
    pub fn match_triggers(&self, event: &EventRecord) -> Vec<&TriggerRule> {
        let mut out: Vec<&TriggerRule> = self
            .triggers
            .values()
            .filter(|t| t.pattern.matches(event))
            .collect();
        out.sort_by(|a, b| {
            b.priority
                .cmp(&a.priority)
                .then_with(|| a.trigger_id.cmp(&b.trigger_id))
        });
        out
    }

    fn dedup_key(&self, rule: &TriggerRule, object_id: &str) -> DedupKey {
        let k = self.policy.dedup_key;
        (
            k.trigger.then(|| rule.trigger_id.clone()),
            k.actor.then(|| rule.actor.clone()),
            k.object.then(|| object_id.to_string()),
        )
    }

    /// Evaluates one trigger against one event. Every outcome is recorded as
    /// a decision; a fired trigger also queues its behavior.
    pub fn fire(
        &mut self,
        trigger_id: &str,
        event: &EventRecord,
        tick: i64,
        bib: &Bib,
    ) -> (FiringDecision, Option<PlannedBehavior>) {
        let rule = self.triggers[trigger_id].clone();
        let decide = |reason: FiringReason| FiringDecision {
            trigger_id: trigger_id.to_string(),
            event_id: event.event_id,
            tick,
            fired: reason == FiringReason::Fired,
            reason,
        };
        let origin = Origin::Trigger {
            trigger_id: trigger_id.to_string(),
            event_id: event.event_id,
            priority: rule.priority,
        };
        let planned = PlannedBehavior::from_template(
            &rule.actor,
            &rule.action,
            Some(event),
            tick,
            bib,
            origin,
        );

        let reason = match &planned {
            None => FiringReason::ConditionFalse,
            Some(p) => {
                let placeholder_subject = SubjectRecord::default();
                let placeholder_object = ObjectRecord {
                    id: event.entity_id.clone(),
                    ..Default::default()
                };
                let object = bib.object(&event.entity_id).unwrap_or(&placeholder_object);
                let op = OpBinding {
                    name: p.operation.clone(),
                    args: p.args.clone(),
                };
                let context = event_context(event, tick);
                let env = BindingEnv {
                    subject: &placeholder_subject,
                    object,
                    op: &op,
                    context: &context,
                };
                let key = self.dedup_key(&rule, &p.object_id);
                if !holds(&rule.condition, &env) {
                    FiringReason::ConditionFalse
                } else if self
                    .dedup
                    .get(&key)
                    .is_some_and(|&last| tick - last < self.policy.dedup_window)
                {
                    FiringReason::Deduped
                } else if p.cascade_depth > self.policy.max_cascade_depth {
                    FiringReason::DepthExceeded
                } else if self.budget.0 == tick && self.budget.1 >= self.policy.tick_budget {
                    FiringReason::BudgetExhausted
                } else {
                    self.dedup.insert(key, tick);
                    if self.budget.0 != tick {
                        self.budget = (tick, 0);
                    }
                    self.budget.1 += 1;
                    FiringReason::Fired
                }
            }
        };
        let decision = decide(reason);
        self.decisions.push(decision.clone());
        let planned = planned.filter(|_| reason == FiringReason::Fired);
        if let Some(p) = &planned {
            self.pending.push(Pending {
                priority: rule.priority,
                trigger_id: trigger_id.to_string(),
                event_id: event.event_id,
                behavior: p.clone(),
            });
        }
        (decision, planned)
    }

    /// Matches and fires every trigger for `event`.
    pub fn process_event(
        &mut self,
        event: &EventRecord,
        tick: i64,
        bib: &Bib,
    ) -> Vec<FiringDecision> {
        let ids: Vec<String> = self
            .match_triggers(event)
            .iter()
            .map(|t| t.trigger_id.clone())
            .collect();
        ids.iter()
            .map(|id| self.fire(id, event, tick, bib).0)
            .collect()
    }

    /// Queued behaviors ordered by (priority desc, trigger id, event id); empties the queue.
    pub fn drain_pending(&mut self) -> Vec<PlannedBehavior> {
        let mut pending = std::mem::take(&mut self.pending);
        pending.sort_by(|a, b| {
            b.priority
                .cmp(&a.priority)
                .then_with(|| a.trigger_id.cmp(&b.trigger_id))
                .then_with(|| a.event_id.cmp(&b.event_id))
        });
        pending.into_iter().map(|p| p.behavior).collect()
    }

    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    pub fn decisions(&self) -> &[FiringDecision] {
        &self.decisions
    }
}

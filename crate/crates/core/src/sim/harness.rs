use std::collections::{BTreeMap, BTreeSet};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{Activation, ExternalEvent, NegotiationSpec, Scenario};
use super::ScenarioError;
use crate::action::{ArgValue, Effect, ObjectRef, Origin, PlannedBehavior};
use crate::bib::{
    AttrMap, BehaviorRecord, Bib, Context, DenyReason, EventRecord, Outcome, StateDelta,
};
use crate::literal::Literal;
use crate::policy::{
    negotiation_timeout_check, responder_of, Directive, MutexGuard, PolicyEngine, Verdict,
};
use crate::predicate::{holds, BindingEnv, OpBinding};
use crate::trigger::{event_context, FiringDecision, TriggerEngine};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLimits {
    pub max_ticks: i64,
}

impl Default for RunLimits {
    fn default() -> Self {
        RunLimits { max_ticks: 1000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectCounters {
    pub requested: u64,
    pub applied: u64,
    pub denied: u64,
    pub failed: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickStats {
    pub tick: i64,
    pub requests: u64,
    pub applied: u64,
    pub denied: u64,
    pub failed: u64,
    /// Feed events appended during the tick.
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunResult {
    pub final_tick: i64,
    pub log: Vec<BehaviorRecord>,
    pub feed: Vec<EventRecord>,
    pub decisions: Vec<FiringDecision>,
    pub directives: Vec<Directive>,
    pub quiescent: bool,
    pub counters: BTreeMap<String, SubjectCounters>,
    pub ticks: Vec<TickStats>,
}

#[derive(Debug, Clone)]
struct OpenRequest {
    request_id: u64,
    negotiation: usize,
}

/// Simulation state. `step` advances one tick; `run` steps to quiescence.
#[derive(Debug, Clone)]
pub struct Simulation {
    scenario: Scenario,
    bib: Bib,
    policy: PolicyEngine,
    triggers: TriggerEngine,
    mutex: MutexGuard,
    rng: ChaCha8Rng,
    tick: i64,
    published: u64,
    injected: Vec<ExternalEvent>,
    // (agent index, clause index) -> subscription id
    subscriptions: BTreeMap<(usize, usize), u64>,
    agent_order: Vec<usize>,
    open: Vec<OpenRequest>,
    directives: Vec<Directive>,
    counters: BTreeMap<String, SubjectCounters>,
    ticks: Vec<TickStats>,
}

fn invalid(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::Invalid(e.to_string())
}

fn add(current: &Literal, n: rust_decimal::Decimal) -> Option<Literal> {
    match current {
        Literal::Int(i) if n.fract().is_zero() => {
            let n: i64 = n.try_into().ok()?;
            i.checked_add(n).map(Literal::Int)
        }
        Literal::Int(i) => Some(Literal::Dec(
            rust_decimal::Decimal::from(*i).checked_add(n)?,
        )),
        Literal::Dec(d) => Some(Literal::Dec(d.checked_add(n)?)),
        _ => None,
    }
}

impl Simulation {
    pub fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        scenario.check_references()?;
        let bib = scenario.initial_bib()?;
        let policy = scenario.policy_engine()?;
        let mut triggers = TriggerEngine::new(scenario.policy).map_err(invalid)?;
        for t in &scenario.triggers {
            triggers
                .register_trigger(t.clone(), &bib)
                .map_err(invalid)?;
        }
        let mut agent_order: Vec<usize> = (0..scenario.agents.len()).collect();
        agent_order.sort_by(|&a, &b| {
            scenario.agents[a]
                .subject_id
                .cmp(&scenario.agents[b].subject_id)
        });
        let mut subscriptions = BTreeMap::new();
        for &ai in &agent_order {
            let agent = &scenario.agents[ai];
            for (ci, clause) in agent.clauses.iter().enumerate() {
                if let Activation::On(pattern) = &clause.activation {
                    let id = triggers
                        .subscribe(&agent.subject_id, pattern.clone(), 0, &bib)
                        .map_err(invalid)?;
                    subscriptions.insert((ai, ci), id);
                }
            }
        }
        Ok(Simulation {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            mutex: MutexGuard::new(scenario.mutex_granularity),
            scenario,
            bib,
            policy,
            triggers,
            tick: 0,
            published: 0,
            injected: Vec::new(),
            subscriptions,
            agent_order,
            open: Vec::new(),
            directives: Vec::new(),
            counters: BTreeMap::new(),
            ticks: Vec::new(),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn bib(&self) -> &Bib {
        &self.bib
    }

    pub fn policy(&self) -> &PolicyEngine {
        &self.policy
    }

    pub fn tick(&self) -> i64 {
        self.tick
    }

    /// Queues an environment event; it is applied on the next step, after
    /// that tick's scheduled events.
    pub fn inject_external_event(&mut self, event: ExternalEvent) -> Result<(), ScenarioError> {
        match &event {
            ExternalEvent::Update { object, delta } => {
                if self.bib.object(object).is_none() {
                    return Err(invalid(format!("unknown object '{object}'")));
                }
                if delta.is_empty() {
                    return Err(invalid("update needs a non-empty delta"));
                }
            }
            ExternalEvent::Signal { entity, .. } => {
                if self.bib.object(entity).is_none() && self.bib.subject(entity).is_none() {
                    return Err(invalid(format!("unknown entity '{entity}'")));
                }
            }
        }
        self.injected.push(event);
        Ok(())
    }

    /// Nothing left that could produce a behavior or an event.
    pub fn is_quiescent(&self) -> bool {
        let now = self.tick;
        self.published == self.bib.last_event_id()
            && self.injected.is_empty()
            && self.open.is_empty()
            && self.triggers.pending_deliveries() == 0
            && !self.triggers.has_pending()
            && !self.scenario.events.iter().any(|e| e.tick >= now)
            && !self.scenario.agents.iter().any(|a| {
                a.clauses
                    .iter()
                    .any(|c| c.activation.fires_between(now - 1, a.fail_at))
            })
    }

    fn apply_external(&mut self, event: &ExternalEvent) {
        match event {
            ExternalEvent::Signal {
                entity,
                tags,
                payload,
            } => {
                self.bib
                    .emit_signal(entity, tags.clone(), payload, self.tick);
            }
            ExternalEvent::Update { object, delta } => {
                self.bib
                    .update_object_state(object, delta, None, self.tick)
                    .expect("external updates are checked on load and injection");
            }
        }
    }

    fn agent_requests(&mut self) -> Vec<PlannedBehavior> {
        let tick = self.tick;
        let mut out = Vec::new();
        for &ai in &self.agent_order.clone() {
            let agent = &self.scenario.agents[ai];
            let Some(subject) = self.bib.subject(&agent.subject_id) else {
                continue;
            };
            let active = agent.active_at(tick);
            for (ci, clause) in agent.clauses.iter().enumerate() {
                let events: Vec<Option<EventRecord>> = match &clause.activation {
                    Activation::On(_) => {
                        let sub = self.subscriptions[&(ai, ci)];
                        self.triggers
                            .take_deliveries(sub)
                            .into_iter()
                            .map(Some)
                            .collect()
                    }
                    a if a.fires_at(tick) => vec![None],
                    _ => Vec::new(),
                };
                if !active {
                    continue;
                }
                for event in events {
                    let template = if clause.choice {
                        &clause.templates[self.rng.random_range(0..clause.templates.len())]
                    } else {
                        &clause.templates[0]
                    };
                    let origin = Origin::Agent {
                        subject_id: agent.subject_id.clone(),
                        clause: ci,
                    };
                    let Some(p) = PlannedBehavior::from_template(
                        &agent.subject_id,
                        template,
                        event.as_ref(),
                        tick,
                        &self.bib,
                        origin,
                    ) else {
                        continue;
                    };
                    if let Some(guard) = &clause.guard {
                        let object = self.bib.object(&p.object_id).expect("resolved object");
                        let op = OpBinding {
                            name: p.operation.clone(),
                            args: p.args.clone(),
                        };
                        let context = match &event {
                            Some(e) => event_context(e, tick),
                            None => Context::at(tick),
                        };
                        if !holds(
                            guard,
                            &BindingEnv {
                                subject,
                                object,
                                op: &op,
                                context: &context,
                            },
                        ) {
                            continue;
                        }
                    }
                    out.push(p);
                }
            }
        }
        out
    }

    fn fallback_request(&self, spec: &NegotiationSpec, d: &Directive) -> Option<PlannedBehavior> {
        let request = self.bib.behavior(d.request_id)?;
        let t = &spec.completion;
        let object_id = match &t.object {
            ObjectRef::Id(id) => id.clone(),
            ObjectRef::EventEntity => d.object_id.clone(),
        };
        let mut args = AttrMap::new();
        for (k, v) in &t.args {
            match v {
                ArgValue::Lit(l) => args.insert(k.clone(), l.clone()),
                ArgValue::Tick => args.insert(k.clone(), Literal::Int(self.tick)),
                ArgValue::EventEntity => args.insert(k.clone(), Literal::Str(d.object_id.clone())),
                ArgValue::EventCause | ArgValue::EventId => {
                    args.insert(k.clone(), Literal::Int(d.request_id as i64))
                }
            };
        }
        Some(PlannedBehavior {
            subject_id: d.fallback.clone(),
            operation: t.operation.clone(),
            object_id,
            args,
            effects: t.effects.clone(),
            caused_by: Some(d.request_id),
            cascade_depth: request.cascade_depth + 1,
            context_tags: BTreeSet::new(),
            origin: Origin::Fallback {
                rule_id: d.rule_id.clone(),
                request_id: d.request_id,
            },
        })
    }

    fn check_negotiations(&mut self) -> Vec<PlannedBehavior> {
        let mut out = Vec::new();
        let mut still_open = Vec::new();
        for open in std::mem::take(&mut self.open) {
            let spec = &self.scenario.negotiations[open.negotiation];
            let request = self
                .bib
                .behavior(open.request_id)
                .expect("open request is logged");
            let due = crate::policy::due_tick(request, spec.rule.deadline);
            if self.tick < due {
                still_open.push(open);
                continue;
            }
            let found = negotiation_timeout_check(
                request,
                self.bib.log(),
                spec.rule.deadline,
                &spec.rule.fallback,
                self.tick,
            );
            if let Some(mut d) = found {
                d.rule_id = spec.rule.rule_id.clone();
                if let Some(p) = self.fallback_request(spec, &d) {
                    out.push(p);
                }
                self.directives.push(d);
            }
        }
        self.open = still_open;
        out
    }

    fn execute(&mut self, p: PlannedBehavior, stats: &mut TickStats) {
        let tick = self.tick;
        let subject = self
            .bib
            .subject(&p.subject_id)
            .expect("planned subject exists")
            .clone();
        let object = self
            .bib
            .object(&p.object_id)
            .expect("planned object exists")
            .clone();
        let op = OpBinding {
            name: p.operation.clone(),
            args: p.args.clone(),
        };
        let context = Context {
            logical_time: tick,
            tags: p.context_tags.clone(),
            values: AttrMap::new(),
        };
        let verdict: Verdict = self.policy.check(&subject, &object, &op, &context);
        let next_id = self.bib.next_behavior_id();

        let (outcome, reason, delta) = if !verdict.allow {
            let reason = if verdict.gate.passed() {
                DenyReason::Policy
            } else {
                DenyReason::Gate
            };
            (Outcome::Denied, Some(reason), None)
        } else if !p.effects.is_empty()
            && !self.mutex.acquire_write_mutex(&p.object_id, tick, next_id)
        {
            (Outcome::Denied, Some(DenyReason::Mutex), None)
        } else {
            let mut delta = AttrMap::new();
            let mut ok = true;
            for e in &p.effects {
                match e {
                    Effect::Set(k, v) => {
                        delta.insert(k.clone(), v.clone());
                    }
                    Effect::Incr(k, n) => {
                        let current = delta.get(k).or_else(|| object.state.get(k));
                        match current.and_then(|c| add(c, *n)) {
                            Some(v) => {
                                delta.insert(k.clone(), v);
                            }
                            None => ok = false,
                        }
                    }
                }
            }
            if ok {
                (Outcome::Applied, None, Some(delta))
            } else {
                (Outcome::Failed, Some(DenyReason::Effect), None)
            }
        };

        let state_delta = match delta {
            Some(d) if !d.is_empty() => {
                self.bib
                    .update_object_state(&p.object_id, &d, Some(next_id), tick)
                    .expect("object exists")
                    .delta
            }
            _ => StateDelta::new(),
        };
        let record = BehaviorRecord {
            behavior_id: 0,
            logical_time: tick,
            subject_id: p.subject_id.clone(),
            operation: p.operation.clone(),
            object_id: p.object_id.clone(),
            outcome,
            cascade_depth: p.cascade_depth,
            caused_by: p.caused_by,
            verdict,
            state_delta,
            object_class: object.class.clone(),
            args: p.args,
            context,
            reason,
        };
        let id = self
            .bib
            .append_behavior(record)
            .expect("planned behaviors reference logged causes");

        if outcome == Outcome::Applied {
            let request = self.bib.behavior(id).expect("just appended");
            if responder_of(request).is_some() {
                if let Some(n) = self
                    .scenario
                    .negotiations
                    .iter()
                    .position(|n| n.rule.operation == p.operation)
                {
                    self.open.push(OpenRequest {
                        request_id: id,
                        negotiation: n,
                    });
                }
            }
        }

        let c = self.counters.entry(p.subject_id).or_default();
        c.requested += 1;
        stats.requests += 1;
        match outcome {
            Outcome::Applied => {
                c.applied += 1;
                stats.applied += 1;
            }
            Outcome::Denied => {
                c.denied += 1;
                stats.denied += 1;
            }
            Outcome::Failed => {
                c.failed += 1;
                stats.failed += 1;
            }
        }
    }

    /// Advances one tick. Events appended during tick `t` are seen at `t + 1`.
    pub fn step(&mut self) {
        let tick = self.tick;
        let feed_before = self.bib.last_event_id();
        let mut stats = TickStats {
            tick,
            ..Default::default()
        };

        let scheduled: Vec<ExternalEvent> = self
            .scenario
            .events
            .iter()
            .filter(|e| e.tick == tick)
            .map(|e| e.event.clone())
            .collect();
        for e in scheduled
            .iter()
            .chain(std::mem::take(&mut self.injected).iter())
        {
            self.apply_external(e);
        }

        let new_events: Vec<EventRecord> = self.bib.change_feed_since(self.published).to_vec();
        self.published = self.bib.last_event_id();
        self.triggers.publish(&new_events);
        let fallbacks = self.check_negotiations();

        let agent_requests = self.agent_requests();

        for ev in &new_events {
            self.triggers.process_event(ev, tick, &self.bib);
        }
        let trigger_requests = self.triggers.drain_pending();

        for p in agent_requests
            .into_iter()
            .chain(trigger_requests)
            .chain(fallbacks)
        {
            self.execute(p, &mut stats);
        }

        stats.events = self.bib.last_event_id() - feed_before;
        self.ticks.push(stats);
        self.tick += 1;
    }

    /// Steps until quiescent or `max_ticks` ticks have been simulated.
    pub fn run(&mut self, limits: RunLimits) -> RunResult {
        while !self.is_quiescent() && self.tick < limits.max_ticks {
            self.step();
        }
        self.result()
    }

    pub fn result(&self) -> RunResult {
        RunResult {
            final_tick: self.tick,
            log: self.bib.log().to_vec(),
            feed: self.bib.feed().to_vec(),
            decisions: self.triggers.decisions().to_vec(),
            directives: self.directives.clone(),
            quiescent: self.is_quiescent(),
            counters: self.counters.clone(),
            ticks: self.ticks.clone(),
        }
    }
}

//! Scenario documents: `bun-scenario v1` header, then named sections.
//!
//! ```text
//! bun-scenario v1
//! name traffic
//! seed 42
//! policy max_cascade_depth 16 dedup_window 10 tick_budget 1000 dedup_key trigger,actor,object
//! mutex_granularity 1
//! tick_unit "1 tick = 1 second"
//!
//! SUBJECTS
//! subject <id> [roles [..]] [capabilities [..]] [attrs {k=v}] [goals [..]]
//! OBJECTS
//! object <id> class <class> [attrs {..}] [state {..}] [affords [..]] [tags [..]]
//! MODELS
//! model <id> threshold <path> <op> <bound>
//! model <id> linear <path> window <n> <op> <bound>
//! RULES
//! rule <id> scope <op|*> <class|*> p1 <expr> p2 <expr> p3 <expr> [desc "..."]
//! negotiation <id> on <op> deadline <ticks> fallback <subject> do <template>
//! TRIGGERS
//! trigger <id> priority <n> on <pattern> when <expr> do <actor> <template> [desc "..."]
//! AGENTS
//! agent <id> [fail_at <tick>]
//!   [choice] on <pattern> [when <expr>] do <template> (| <template>)*
//!   [choice] every <k> [from <tick>] [until <tick>] [when <expr>] do <template> ...
//!   [choice] at <tick> [when <expr>] do <template> ...
//! end
//! EVENTS
//! at <tick> signal <entity> [tags [..]] [{payload}]
//! at <tick> update <object> {delta}
//! ```
//!
//! A template is `<operation> <object|$event.entity> [with {..}] [set {..}] [incr {..}]`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rust_decimal::Decimal;

use super::syntax::*;
use super::ScenarioError;
use crate::action::{ActionTemplate, ObjectRef};
use crate::bib::{AttrMap, Bib, ForecastModel, ModelKind, ObjectRecord, SubjectRecord};
use crate::literal::{quote, CmpOp};
use crate::policy::{NegotiationRule, PolicyEngine, Scope, ValidityRule};
use crate::predicate::{Entity, PredicateExpr};
use crate::trigger::{DedupKeyFields, EventPattern, PropagationPolicy, TriggerRule};

pub const SCENARIO_HEADER: &str = "bun-scenario v1";
pub const SNAPSHOT_HEADER: &str = "bun-snapshot v1";

/// Negotiation deadline plus what the fallback subject does on timeout.
/// The completion template's object is the request's object unless fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegotiationSpec {
    pub rule: NegotiationRule,
    pub completion: ActionTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Activation {
    On(EventPattern),
    Every {
        period: i64,
        from: i64,
        until: Option<i64>,
    },
    At(i64),
}

impl Activation {
    /// Whether a time-based activation fires at `tick`.
    pub fn fires_at(&self, tick: i64) -> bool {
        match *self {
            Activation::On(_) => false,
            Activation::Every {
                period,
                from,
                until,
            } => tick >= from && (tick - from) % period == 0 && until.is_none_or(|u| tick <= u),
            Activation::At(t) => t == tick,
        }
    }

    /// True if a time-based activation fires at some tick in `(after, before)`.
    pub fn fires_between(&self, after: i64, before: Option<i64>) -> bool {
        let in_range = |t: i64| t > after && before.is_none_or(|b| t < b);
        match *self {
            Activation::On(_) => false,
            Activation::At(t) => in_range(t),
            Activation::Every {
                period,
                from,
                until,
            } => {
                let first = if after < from {
                    from
                } else {
                    from + ((after - from) / period + 1) * period
                };
                in_range(first) && until.is_none_or(|u| first <= u)
            }
        }
    }
}

/// One agent clause. A `choice` clause picks one template with the seeded RNG.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub activation: Activation,
    pub guard: Option<PredicateExpr>,
    pub templates: Vec<ActionTemplate>,
    pub choice: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgentScript {
    pub subject_id: String,
    pub clauses: Vec<Clause>,
    /// From this tick on the agent no longer acts.
    pub fail_at: Option<i64>,
}

impl AgentScript {
    pub fn active_at(&self, tick: i64) -> bool {
        self.fail_at.is_none_or(|f| tick < f)
    }
}

/// Environment input scheduled at a tick.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExternalEvent {
    Signal {
        entity: String,
        tags: BTreeSet<String>,
        payload: AttrMap,
    },
    Update {
        object: String,
        delta: AttrMap,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledEvent {
    pub tick: i64,
    pub event: ExternalEvent,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub version: u32,
    pub seed: u64,
    pub policy: PropagationPolicy,
    pub mutex_granularity: i64,
    pub tick_unit: Option<String>,
    pub subjects: Vec<SubjectRecord>,
    pub objects: Vec<ObjectRecord>,
    pub models: Vec<ForecastModel>,
    pub rules: Vec<ValidityRule>,
    pub negotiations: Vec<NegotiationSpec>,
    pub triggers: Vec<TriggerRule>,
    pub agents: Vec<AgentScript>,
    pub events: Vec<ScheduledEvent>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            name: String::new(),
            version: 1,
            seed: 0,
            policy: PropagationPolicy::default(),
            mutex_granularity: 1,
            tick_unit: None,
            subjects: Vec::new(),
            objects: Vec::new(),
            models: Vec::new(),
            rules: Vec::new(),
            negotiations: Vec::new(),
            triggers: Vec::new(),
            agents: Vec::new(),
            events: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Section {
    Header,
    Subjects,
    Objects,
    Models,
    Rules,
    Triggers,
    Agents,
    Events,
    Log,
}

impl Section {
    fn parse(line: &str) -> Option<Section> {
        Some(match line {
            "SUBJECTS" => Section::Subjects,
            "OBJECTS" => Section::Objects,
            "MODELS" => Section::Models,
            "RULES" => Section::Rules,
            "TRIGGERS" => Section::Triggers,
            "AGENTS" => Section::Agents,
            "EVENTS" => Section::Events,
            "LOG" => Section::Log,
            _ => return None,
        })
    }
}

fn parse_subject(c: &mut Cursor<'_>) -> Result<SubjectRecord, ScenarioError> {
    c.keyword("subject")?;
    let mut s = SubjectRecord::new(c.name("subject id")?);
    while !c.at_end() {
        match c.word("subject field")?.as_str() {
            "roles" => s.roles = c.name_set()?,
            "capabilities" => s.capabilities = c.name_set()?,
            "attrs" => s.attributes = c.literal_map()?,
            "goals" => s.goals = c.name_list()?,
            other => return Err(c.error(format!("unknown subject field '{other}'"))),
        }
    }
    Ok(s)
}

fn parse_object(c: &mut Cursor<'_>) -> Result<ObjectRecord, ScenarioError> {
    c.keyword("object")?;
    let id = c.name("object id")?;
    c.keyword("class")?;
    let mut o = ObjectRecord::new(id, c.name("class")?);
    while !c.at_end() {
        match c.word("object field")?.as_str() {
            "attrs" => o.attributes = c.literal_map()?,
            "state" => o.state = c.literal_map()?,
            "affords" => o.affordances = c.name_set()?,
            "tags" => o.tags = c.name_set()?,
            other => return Err(c.error(format!("unknown object field '{other}'"))),
        }
    }
    Ok(o)
}

fn parse_direction(c: &mut Cursor<'_>) -> Result<CmpOp, ScenarioError> {
    let w = c.word("direction")?;
    match CmpOp::from_symbol(&w) {
        Some(op) if op.is_ordering() => Ok(op),
        _ => Err(c.error(format!("direction must be one of < <= > >=, got '{w}'"))),
    }
}

fn parse_bound(c: &mut Cursor<'_>) -> Result<Decimal, ScenarioError> {
    c.literal()?
        .as_decimal()
        .ok_or_else(|| c.error("bound must be numeric"))
}

fn parse_model(c: &mut Cursor<'_>) -> Result<ForecastModel, ScenarioError> {
    c.keyword("model")?;
    let id = c.name("model id")?;
    let m = match c.word("model kind")?.as_str() {
        "threshold" => {
            let path = c.name("path")?;
            let dir = parse_direction(c)?;
            ForecastModel::threshold(id, path, dir, parse_bound(c)?)
        }
        "linear" => {
            let path = c.name("path")?;
            c.keyword("window")?;
            let window = c.int("window")?;
            if window < 0 {
                return Err(c.error("window must be non-negative"));
            }
            let dir = parse_direction(c)?;
            ForecastModel::linear(id, path, window as usize, dir, parse_bound(c)?)
        }
        other => return Err(c.error(format!("unknown model kind '{other}'"))),
    };
    m.check().map_err(|e| c.error(e))?;
    Ok(m)
}

fn parse_rule(c: &mut Cursor<'_>) -> Result<ValidityRule, ScenarioError> {
    c.keyword("rule")?;
    let rule_id = c.name("rule id")?;
    c.keyword("scope")?;
    let scope = Scope::new(c.name("operation pattern")?, c.name("class pattern")?);
    c.keyword("p1")?;
    let p1 = c.predicate()?;
    c.keyword("p2")?;
    let p2 = c.predicate()?;
    c.keyword("p3")?;
    let p3 = c.predicate()?;
    let description = if c.eat_keyword("desc") {
        c.name("description")?
    } else {
        String::new()
    };
    let rule = ValidityRule {
        rule_id,
        scope,
        p1,
        p2,
        p3,
        description,
    };
    PolicyEngine::check_namespaces(&rule)
        .map_err(|e| ScenarioError::parse(c.line(), 1, e.to_string()))?;
    Ok(rule)
}

fn parse_negotiation(c: &mut Cursor<'_>) -> Result<NegotiationSpec, ScenarioError> {
    c.keyword("negotiation")?;
    let rule_id = c.name("negotiation id")?;
    c.keyword("on")?;
    let operation = c.word("operation")?;
    c.keyword("deadline")?;
    let deadline = c.int("deadline")?;
    if deadline < 0 {
        return Err(c.error("deadline must be non-negative"));
    }
    c.keyword("fallback")?;
    let fallback = c.name("fallback subject")?;
    c.keyword("do")?;
    let completion = c.template()?;
    Ok(NegotiationSpec {
        rule: NegotiationRule {
            rule_id,
            operation,
            deadline: deadline as u32,
            fallback,
        },
        completion,
    })
}

fn parse_trigger(c: &mut Cursor<'_>) -> Result<TriggerRule, ScenarioError> {
    c.keyword("trigger")?;
    let trigger_id = c.name("trigger id")?;
    c.keyword("priority")?;
    let priority = c.int("priority")?;
    c.keyword("on")?;
    let pattern = c.pattern()?;
    let condition = if c.eat_keyword("when") {
        c.predicate()?
    } else {
        PredicateExpr::truth()
    };
    c.keyword("do")?;
    let actor = c.name("actor")?;
    let action = c.template()?;
    let description = if c.eat_keyword("desc") {
        c.name("description")?
    } else {
        String::new()
    };
    if let Some(atom) = condition.first_foreign_atom(&[Entity::Object, Entity::Context]) {
        return Err(ScenarioError::parse(
            c.line(),
            1,
            format!("trigger {trigger_id}: condition may not reference {atom}"),
        ));
    }
    Ok(TriggerRule {
        trigger_id,
        pattern,
        condition,
        actor,
        action,
        priority,
        description,
    })
}

fn parse_clause(c: &mut Cursor<'_>) -> Result<Clause, ScenarioError> {
    let choice = c.eat_keyword("choice");
    let activation = match c.word("clause kind")?.as_str() {
        "on" => Activation::On(c.pattern()?),
        "every" => {
            let period = c.int("period")?;
            if period < 1 {
                return Err(c.error("period must be at least 1"));
            }
            let from = if c.eat_keyword("from") {
                c.int("start tick")?
            } else {
                0
            };
            let until = if c.eat_keyword("until") {
                Some(c.int("end tick")?)
            } else {
                None
            };
            Activation::Every {
                period,
                from,
                until,
            }
        }
        "at" => Activation::At(c.int("tick")?),
        other => return Err(c.error(format!("unknown clause kind '{other}'"))),
    };
    let guard = if c.eat_keyword("when") {
        Some(c.predicate()?)
    } else {
        None
    };
    c.keyword("do")?;
    let mut templates = vec![c.template()?];
    while c.eat_sym('|') {
        templates.push(c.template()?);
    }
    if templates.len() > 1 && !choice {
        return Err(c.error("alternative templates need a 'choice' clause"));
    }
    Ok(Clause {
        activation,
        guard,
        templates,
        choice,
    })
}

fn parse_event(c: &mut Cursor<'_>) -> Result<ScheduledEvent, ScenarioError> {
    c.keyword("at")?;
    let tick = c.int("tick")?;
    if tick < 0 {
        return Err(c.error("ticks must be non-negative"));
    }
    let event = match c.word("event kind")?.as_str() {
        "signal" => {
            let entity = c.name("entity")?;
            let tags = if c.eat_keyword("tags") {
                c.name_set()?
            } else {
                BTreeSet::new()
            };
            let payload = if matches!(c.peek(), Some(Tok::Sym('{'))) {
                c.literal_map()?
            } else {
                AttrMap::new()
            };
            ExternalEvent::Signal {
                entity,
                tags,
                payload,
            }
        }
        "update" => {
            let object = c.name("object")?;
            let delta = c.literal_map()?;
            if delta.is_empty() {
                return Err(c.error("update needs a non-empty delta"));
            }
            ExternalEvent::Update { object, delta }
        }
        other => return Err(c.error(format!("unknown event kind '{other}'"))),
    };
    Ok(ScheduledEvent { tick, event })
}

fn parse_header_line(c: &mut Cursor<'_>, s: &mut Scenario) -> Result<(), ScenarioError> {
    match c.word("header field")?.as_str() {
        "name" => s.name = c.name("name")?,
        "seed" => {
            let w = c.word("seed")?;
            s.seed = w
                .parse()
                .map_err(|_| c.error(format!("invalid seed '{w}'")))?;
        }
        "mutex_granularity" => {
            s.mutex_granularity = c.int("granularity")?;
            if s.mutex_granularity < 1 {
                return Err(c.error("mutex_granularity must be at least 1"));
            }
        }
        "tick_unit" => s.tick_unit = Some(c.name("tick unit")?),
        "policy" => {
            while !c.at_end() {
                match c.word("policy field")?.as_str() {
                    "max_cascade_depth" => {
                        s.policy.max_cascade_depth = c.int("depth")?.try_into().unwrap_or(0)
                    }
                    "dedup_window" => s.policy.dedup_window = c.int("window")?,
                    "tick_budget" => {
                        s.policy.tick_budget = c.int("budget")?.try_into().unwrap_or(0)
                    }
                    "dedup_key" => {
                        let mut k = DedupKeyFields {
                            trigger: false,
                            actor: false,
                            object: false,
                        };
                        loop {
                            match c.word("dedup key field")?.as_str() {
                                "trigger" => k.trigger = true,
                                "actor" => k.actor = true,
                                "object" => k.object = true,
                                other => {
                                    return Err(
                                        c.error(format!("unknown dedup key field '{other}'"))
                                    )
                                }
                            }
                            if !c.eat_sym(',') {
                                break;
                            }
                        }
                        s.policy.dedup_key = k;
                    }
                    other => return Err(c.error(format!("unknown policy field '{other}'"))),
                }
            }
            s.policy.validate().map_err(|e| c.error(e))?;
        }
        other => return Err(c.error(format!("unknown header field '{other}'"))),
    }
    Ok(())
}

/// Parsed document plus any LOG section lines (snapshots only).
pub(crate) struct Document {
    pub scenario: Scenario,
    pub log_lines: Vec<(usize, String)>,
}

pub(crate) fn parse_document(text: &str, header: &str) -> Result<Document, ScenarioError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let first = lines
        .by_ref()
        .find(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    match first {
        Some((_, l)) if l.trim() == header => {}
        Some((n, l)) => {
            let version_hint = l.trim().starts_with(header.split(' ').next().unwrap_or(""));
            let msg = if version_hint {
                format!("unsupported version '{}', expected '{header}'", l.trim())
            } else {
                format!("expected '{header}' header")
            };
            return Err(ScenarioError::parse(n, 1, msg));
        }
        None => {
            return Err(ScenarioError::parse(
                1,
                1,
                format!("expected '{header}' header"),
            ))
        }
    }

    let mut s = Scenario::default();
    let mut log_lines = Vec::new();
    let mut section = Section::Header;
    let mut agent: Option<AgentScript> = None;
    for (n, raw) in lines {
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if let Some(next) = Section::parse(trimmed) {
            if let Some(a) = agent.take() {
                return Err(ScenarioError::parse(
                    n,
                    1,
                    format!("agent '{}' is missing 'end'", a.subject_id),
                ));
            }
            if next == Section::Log && header != SNAPSHOT_HEADER {
                return Err(ScenarioError::parse(
                    n,
                    1,
                    "LOG section is only valid in snapshots",
                ));
            }
            section = next;
            continue;
        }
        if section == Section::Log {
            log_lines.push((n, trimmed.to_string()));
            continue;
        }
        let toks = tokenize(raw, n)?;
        let mut c = Cursor::new(&toks, n, raw.chars().count());
        match section {
            Section::Header => parse_header_line(&mut c, &mut s)?,
            Section::Subjects => s.subjects.push(parse_subject(&mut c)?),
            Section::Objects => s.objects.push(parse_object(&mut c)?),
            Section::Models => s.models.push(parse_model(&mut c)?),
            Section::Rules => match c.peek_word() {
                Some("negotiation") => s.negotiations.push(parse_negotiation(&mut c)?),
                _ => s.rules.push(parse_rule(&mut c)?),
            },
            Section::Triggers => s.triggers.push(parse_trigger(&mut c)?),
            Section::Agents => match (&mut agent, c.peek_word()) {
                (None, Some("agent")) => {
                    c.next();
                    let id = c.name("agent subject id")?;
                    let fail_at = if c.eat_keyword("fail_at") {
                        Some(c.int("tick")?)
                    } else {
                        None
                    };
                    agent = Some(AgentScript {
                        subject_id: id,
                        clauses: Vec::new(),
                        fail_at,
                    });
                }
                (None, _) => return Err(c.error("expected 'agent <id>'")),
                (Some(_), Some("end")) => {
                    c.next();
                    s.agents.push(agent.take().expect("open agent"));
                }
                (Some(a), Some("fail_at")) => {
                    c.next();
                    a.fail_at = Some(c.int("tick")?);
                }
                (Some(a), _) => a.clauses.push(parse_clause(&mut c)?),
            },
            Section::Events => s.events.push(parse_event(&mut c)?),
            Section::Log => unreachable!(),
        }
        c.expect_end()?;
    }
    if let Some(a) = agent {
        return Err(ScenarioError::parse(
            text.lines().count(),
            1,
            format!("agent '{}' is missing 'end'", a.subject_id),
        ));
    }
    Ok(Document {
        scenario: s,
        log_lines,
    })
}

/// Parses and cross-references a scenario.
pub fn load_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario = parse_document(text, SCENARIO_HEADER)?.scenario;
    scenario.check_references()?;
    Ok(scenario)
}

impl Scenario {
    /// Store holding the declared entities, before any event.
    pub fn initial_bib(&self) -> Result<Bib, ScenarioError> {
        let mut bib = Bib::new();
        let invalid = |e: crate::bib::BibError| ScenarioError::Invalid(e.to_string());
        for s in &self.subjects {
            bib.put_entity(s.clone()).map_err(invalid)?;
        }
        for o in &self.objects {
            bib.put_entity(o.clone()).map_err(invalid)?;
        }
        for m in &self.models {
            bib.put_entity(m.clone()).map_err(invalid)?;
        }
        Ok(bib)
    }

    /// Policy engine holding the declared validity rules.
    pub fn policy_engine(&self) -> Result<PolicyEngine, ScenarioError> {
        let mut policy = PolicyEngine::new();
        for r in &self.rules {
            policy
                .register_rule(r.clone())
                .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        }
        Ok(policy)
    }

    /// Reports every unresolved or conflicting id at once.
    pub fn check_references(&self) -> Result<(), ScenarioError> {
        let mut problems = Vec::new();
        let mut kinds: BTreeMap<String, &str> = BTreeMap::new();
        let mut claim = |id: &str, kind: &'static str, problems: &mut Vec<String>| {
            if let Some(prev) = kinds.insert(id.to_string(), kind) {
                problems.push(format!("duplicate id '{id}' ({prev} and {kind})"));
            }
        };
        for s in &self.subjects {
            claim(&s.id, "subject", &mut problems);
        }
        for o in &self.objects {
            claim(&o.id, "object", &mut problems);
        }
        for m in &self.models {
            claim(&m.model_id, "model", &mut problems);
        }
        let subjects: BTreeSet<&str> = self.subjects.iter().map(|s| s.id.as_str()).collect();
        let objects: BTreeSet<&str> = self.objects.iter().map(|o| o.id.as_str()).collect();
        let need_subject = |id: &str, ctx: String, problems: &mut Vec<String>| {
            if !subjects.contains(id) {
                problems.push(format!("{ctx}: unknown subject '{id}'"));
            }
        };
        let need_object = |t: &ActionTemplate, ctx: &str, problems: &mut Vec<String>| {
            if let ObjectRef::Id(id) = &t.object {
                if !objects.contains(id.as_str()) {
                    problems.push(format!("{ctx}: unknown object '{id}'"));
                }
            }
        };
        let need_entity = |p: &EventPattern, ctx: &str, problems: &mut Vec<String>| {
            if let Some(e) = &p.entity_id {
                if !objects.contains(e.as_str()) && !subjects.contains(e.as_str()) {
                    problems.push(format!("{ctx}: unknown entity '{e}'"));
                }
            }
        };

        let mut seen_rules = BTreeSet::new();
        for r in &self.rules {
            if !seen_rules.insert(r.rule_id.as_str()) {
                problems.push(format!("duplicate rule id '{}'", r.rule_id));
            }
        }
        for n in &self.negotiations {
            let ctx = format!("negotiation {}", n.rule.rule_id);
            need_subject(&n.rule.fallback, ctx.clone(), &mut problems);
            need_object(&n.completion, &ctx, &mut problems);
        }
        let mut seen_triggers = BTreeSet::new();
        for t in &self.triggers {
            let ctx = format!("trigger {}", t.trigger_id);
            if !seen_triggers.insert(t.trigger_id.as_str()) {
                problems.push(format!("duplicate trigger id '{}'", t.trigger_id));
            }
            need_subject(&t.actor, ctx.clone(), &mut problems);
            need_object(&t.action, &ctx, &mut problems);
            need_entity(&t.pattern, &ctx, &mut problems);
        }
        let mut seen_agents = BTreeSet::new();
        for a in &self.agents {
            let ctx = format!("agent {}", a.subject_id);
            if !seen_agents.insert(a.subject_id.as_str()) {
                problems.push(format!("duplicate agent '{}'", a.subject_id));
            }
            need_subject(&a.subject_id, ctx.clone(), &mut problems);
            for cl in &a.clauses {
                match &cl.activation {
                    Activation::On(p) => {
                        need_entity(p, &ctx, &mut problems);
                        if p.is_empty() {
                            problems.push(format!(
                                "{ctx}: reactive clause needs at least one pattern field"
                            ));
                        }
                    }
                    Activation::At(t) if *t < 0 => {
                        problems.push(format!("{ctx}: negative tick {t}"))
                    }
                    Activation::Every { from, .. } if *from < 0 => {
                        problems.push(format!("{ctx}: negative tick {from}"))
                    }
                    _ => {}
                }
                for t in &cl.templates {
                    need_object(t, &ctx, &mut problems);
                    if t.needs_event() && !matches!(cl.activation, Activation::On(_)) {
                        problems.push(format!("{ctx}: $event variables need an 'on' clause"));
                    }
                }
            }
        }
        for e in &self.events {
            match &e.event {
                ExternalEvent::Update { object, .. } if !objects.contains(object.as_str()) => {
                    problems.push(format!(
                        "event at tick {}: unknown object '{object}'",
                        e.tick
                    ))
                }
                ExternalEvent::Signal { entity, .. }
                    if !objects.contains(entity.as_str())
                        && !subjects.contains(entity.as_str()) =>
                {
                    problems.push(format!(
                        "event at tick {}: unknown entity '{entity}'",
                        e.tick
                    ))
                }
                _ => {}
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ScenarioError::Dangling(problems))
        }
    }

    pub fn header_text(&self, header: &str) -> String {
        let mut out = String::new();
        let p = &self.policy;
        let mut key = Vec::new();
        if p.dedup_key.trigger {
            key.push("trigger");
        }
        if p.dedup_key.actor {
            key.push("actor");
        }
        if p.dedup_key.object {
            key.push("object");
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "name {}", name_text(&self.name));
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(
            out,
            "policy max_cascade_depth {} dedup_window {} tick_budget {} dedup_key {}",
            p.max_cascade_depth,
            p.dedup_window,
            p.tick_budget,
            key.join(",")
        );
        let _ = writeln!(out, "mutex_granularity {}", self.mutex_granularity);
        if let Some(u) = &self.tick_unit {
            let _ = writeln!(out, "tick_unit {}", quote(u));
        }
        out
    }

    /// Canonical text of the scenario; reloads to an equal value.
    pub fn to_text(&self) -> String {
        let mut out = self.header_text(SCENARIO_HEADER);
        write_entity_sections(
            &mut out,
            self.subjects.iter(),
            self.objects.iter(),
            self.models.iter(),
        );
        write_rules(&mut out, &self.rules, &self.negotiations);
        let _ = writeln!(out, "\nTRIGGERS");
        for t in &self.triggers {
            let mut line = format!(
                "trigger {} priority {} on {} when {} do {} {}",
                t.trigger_id,
                t.priority,
                t.pattern,
                t.condition,
                name_text(&t.actor),
                template_text(&t.action)
            );
            if !t.description.is_empty() {
                line.push_str(&format!(" desc {}", quote(&t.description)));
            }
            let _ = writeln!(out, "{line}");
        }
        let _ = writeln!(out, "\nAGENTS");
        for a in &self.agents {
            let fail = a
                .fail_at
                .map(|f| format!(" fail_at {f}"))
                .unwrap_or_default();
            let _ = writeln!(out, "agent {}{fail}", name_text(&a.subject_id));
            for cl in &a.clauses {
                let mut line = String::from("  ");
                if cl.choice {
                    line.push_str("choice ");
                }
                match &cl.activation {
                    Activation::On(p) => line.push_str(&format!("on {p}")),
                    Activation::Every {
                        period,
                        from,
                        until,
                    } => {
                        line.push_str(&format!("every {period} from {from}"));
                        if let Some(u) = until {
                            line.push_str(&format!(" until {u}"));
                        }
                    }
                    Activation::At(t) => line.push_str(&format!("at {t}")),
                }
                if let Some(g) = &cl.guard {
                    line.push_str(&format!(" when {g}"));
                }
                let ts: Vec<String> = cl.templates.iter().map(template_text).collect();
                line.push_str(&format!(" do {}", ts.join(" | ")));
                let _ = writeln!(out, "{line}");
            }
            let _ = writeln!(out, "end");
        }
        let _ = writeln!(out, "\nEVENTS");
        for e in &self.events {
            match &e.event {
                ExternalEvent::Signal {
                    entity,
                    tags,
                    payload,
                } => {
                    let _ = writeln!(
                        out,
                        "at {} signal {} tags {} {}",
                        e.tick,
                        name_text(entity),
                        set_text(tags),
                        map_text(payload)
                    );
                }
                ExternalEvent::Update { object, delta } => {
                    let _ = writeln!(
                        out,
                        "at {} update {} {}",
                        e.tick,
                        name_text(object),
                        map_text(delta)
                    );
                }
            }
        }
        out
    }
}

pub(crate) fn subject_line(s: &SubjectRecord) -> String {
    format!(
        "subject {} roles {} capabilities {} attrs {} goals {}",
        name_text(&s.id),
        set_text(&s.roles),
        set_text(&s.capabilities),
        map_text(&s.attributes),
        vec_text(&s.goals)
    )
}

pub(crate) fn object_line(o: &ObjectRecord) -> String {
    format!(
        "object {} class {} attrs {} state {} affords {} tags {}",
        name_text(&o.id),
        name_text(&o.class),
        map_text(&o.attributes),
        map_text(&o.state),
        set_text(&o.affordances),
        set_text(&o.tags)
    )
}

pub(crate) fn model_line(m: &ForecastModel) -> String {
    match &m.kind {
        ModelKind::Threshold {
            path,
            bound,
            direction,
        } => {
            format!(
                "model {} threshold {} {direction} {bound}",
                name_text(&m.model_id),
                name_text(path)
            )
        }
        ModelKind::LinearExtrapolation {
            path,
            window,
            bound,
            direction,
        } => format!(
            "model {} linear {} window {window} {direction} {bound}",
            name_text(&m.model_id),
            name_text(path)
        ),
    }
}

pub(crate) fn negotiation_line(n: &NegotiationSpec) -> String {
    format!(
        "negotiation {} on {} deadline {} fallback {} do {}",
        n.rule.rule_id,
        n.rule.operation,
        n.rule.deadline,
        name_text(&n.rule.fallback),
        template_text(&n.completion)
    )
}

pub(crate) fn write_entity_sections<'a>(
    out: &mut String,
    subjects: impl Iterator<Item = &'a SubjectRecord>,
    objects: impl Iterator<Item = &'a ObjectRecord>,
    models: impl Iterator<Item = &'a ForecastModel>,
) {
    let _ = writeln!(out, "\nSUBJECTS");
    for s in subjects {
        let _ = writeln!(out, "{}", subject_line(s));
    }
    let _ = writeln!(out, "\nOBJECTS");
    for o in objects {
        let _ = writeln!(out, "{}", object_line(o));
    }
    let _ = writeln!(out, "\nMODELS");
    for m in models {
        let _ = writeln!(out, "{}", model_line(m));
    }
}

pub(crate) fn write_rules(
    out: &mut String,
    rules: &[ValidityRule],
    negotiations: &[NegotiationSpec],
) {
    let _ = writeln!(out, "\nRULES");
    for r in rules {
        let _ = writeln!(out, "{}", r.to_line());
    }
    for n in negotiations {
        let _ = writeln!(out, "{}", negotiation_line(n));
    }
}

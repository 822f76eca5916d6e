use super::*;
use crate::bib::{
    AttrMap, BehaviorRecord, Bib, Context, ObjectRecord, Outcome, StateDelta, SubjectRecord,
};
use crate::literal::Literal;
use crate::predicate::parse_predicate;

fn rule(id: &str, op: &str, class: &str, p1: &str, p2: &str, p3: &str) -> ValidityRule {
    ValidityRule {
        rule_id: id.into(),
        scope: Scope::new(op, class),
        p1: parse_predicate(p1).unwrap(),
        p2: parse_predicate(p2).unwrap(),
        p3: parse_predicate(p3).unwrap(),
        description: String::new(),
    }
}

fn store() -> Bib {
    let mut bib = Bib::new();
    bib.put_entity(SubjectRecord::new("clerk").with_capabilities(["release", "read"]))
        .unwrap();
    bib.put_entity(
        SubjectRecord::new("publisher")
            .with_roles(["publisher"])
            .with_capabilities(["release", "read"]),
    )
    .unwrap();
    bib.put_entity(
        ObjectRecord::new("doc1", "FinancialReport")
            .with_attribute("Sensitivity", "Confidential")
            .with_attribute("Status", "Approved")
            .with_affordances(["read", "release"]),
    )
    .unwrap();
    bib
}

fn embargo() -> ValidityRule {
    rule(
        "embargo",
        "release",
        "FinancialReport",
        "(has_role subject publisher)",
        "(= object.attributes.Status \"Approved\")",
        "(>= context.logical_time 100)",
    )
}

fn request(subject: &str, op: &str, object: &str, time: i64) -> BehaviorRequest {
    BehaviorRequest {
        subject_id: subject.into(),
        operation: op.into(),
        object_id: object.into(),
        args: AttrMap::new(),
        context: Context::at(time),
    }
}

#[test]
fn register_embargo_and_vacuous_rules() {
    let mut engine = PolicyEngine::new();
    assert_eq!(engine.register_rule(embargo()).unwrap(), "embargo");
    assert_eq!(
        engine
            .register_rule(ValidityRule::vacuous("open", Scope::new("*", "*")))
            .unwrap(),
        "open"
    );
    assert_eq!(engine.applicable("release", "FinancialReport").len(), 2);
    assert_eq!(engine.applicable("read", "FinancialReport").len(), 1);
}

#[test]
fn namespace_violation_is_rejected() {
    let mut engine = PolicyEngine::new();
    let bad = rule("bad", "*", "*", "(and)", "(= subject.roles \"x\")", "(and)");
    let err = engine.register_rule(bad).unwrap_err();
    assert!(
        matches!(&err, PolicyError::Namespace { component: Component::P2, atom, .. } if atom.contains("subject.roles"))
    );
    let bad = rule("bad", "*", "*", "(has_tag object x)", "(and)", "(and)");
    assert!(engine.register_rule(bad).is_err());
    let bad = rule("bad", "*", "*", "(and)", "(and)", "(has_role subject x)");
    assert!(engine.register_rule(bad).is_err());
    let ok = rule(
        "ok",
        "*",
        "*",
        "(and)",
        "(affords object read)",
        "(and (has_tag context a) (= op.name \"read\"))",
    );
    assert!(engine.register_rule(ok).is_ok());
    assert!(engine.is_empty() || engine.len() == 1);
}

#[test]
fn replacing_a_rule_moves_its_scope() {
    let mut engine = PolicyEngine::new();
    engine.register_rule(embargo()).unwrap();
    let mut moved = embargo();
    moved.scope = Scope::new("read", "*");
    engine.register_rule(moved).unwrap();
    assert!(engine.applicable("release", "FinancialReport").is_empty());
    assert_eq!(engine.applicable("read", "Other").len(), 1);
}

#[test]
fn missing_role_fails_p1() {
    let bib = store();
    let mut engine = PolicyEngine::new();
    engine.register_rule(embargo()).unwrap();
    let v = engine
        .check_validity(&request("clerk", "release", "doc1", 200), &bib)
        .unwrap();
    assert!(!v.allow);
    let f = v.first_failure.unwrap();
    assert_eq!(
        (f.rule_id.as_str(), f.component),
        ("embargo", Component::P1)
    );
    assert_eq!(f.atoms[0].to_string(), "(has_role subject publisher)");
}

#[test]
fn embargo_tick_fails_p3_then_passes() {
    let bib = store();
    let mut engine = PolicyEngine::new();
    engine.register_rule(embargo()).unwrap();
    let v = engine
        .check_validity(&request("publisher", "release", "doc1", 99), &bib)
        .unwrap();
    assert_eq!(
        v.first_failure.as_ref().map(|f| f.component),
        Some(Component::P3)
    );
    let v = engine
        .check_validity(&request("publisher", "release", "doc1", 100), &bib)
        .unwrap();
    assert!(v.allow);
    assert_eq!(v.evaluated.len(), 1);
}

#[test]
fn affordance_gate_without_rules() {
    let mut bib = store();
    bib.put_entity(SubjectRecord::new("writer").with_capabilities(["shred"]))
        .unwrap();
    let engine = PolicyEngine::new();
    let v = engine
        .check_validity(&request("writer", "shred", "doc1", 0), &bib)
        .unwrap();
    assert!(!v.allow);
    assert!(!v.gate.affordance && v.gate.capability);
    assert!(v.evaluated.is_empty() && v.first_failure.is_none());
    let v = engine
        .check_validity(&request("clerk", "read", "doc1", 0), &bib)
        .unwrap();
    assert!(v.allow, "gate-only allow");
}

#[test]
fn unresolved_request() {
    let bib = store();
    let engine = PolicyEngine::new();
    assert_eq!(
        engine.check_validity(&request("ghost", "read", "doc1", 0), &bib),
        Err(PolicyError::UnknownSubject("ghost".into()))
    );
    assert_eq!(
        engine.check_validity(&request("clerk", "read", "doc2", 0), &bib),
        Err(PolicyError::UnknownObject("doc2".into()))
    );
}

fn logged(id: u64, subject: &str, time: i64, args: &[(&str, Literal)]) -> BehaviorRecord {
    BehaviorRecord {
        behavior_id: id,
        logical_time: time,
        subject_id: subject.into(),
        operation: "ask".into(),
        object_id: "task".into(),
        outcome: Outcome::Applied,
        cascade_depth: 0,
        caused_by: None,
        verdict: Verdict::default(),
        state_delta: StateDelta::new(),
        object_class: "Task".into(),
        args: args
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect(),
        context: Context::at(time),
        reason: None,
    }
}

#[test]
fn negotiation_answered_in_time() {
    let req = logged(1, "agentA", 10, &[(REQUEST_TO, Literal::from("agentB"))]);
    let reply = logged(2, "agentB", 13, &[(IN_REPLY_TO, Literal::Int(1))]);
    let log = vec![req.clone(), reply];
    for now in 10..20 {
        assert_eq!(
            negotiation_timeout_check(&req, &log, 5, "agentC", now),
            None
        );
    }
}

#[test]
fn negotiation_unanswered_yields_at_deadline() {
    let req = logged(1, "agentA", 10, &[(REQUEST_TO, Literal::from("agentB"))]);
    let log = vec![req.clone()];
    assert_eq!(negotiation_timeout_check(&req, &log, 5, "agentC", 14), None);
    let d = negotiation_timeout_check(&req, &log, 5, "agentC", 15).unwrap();
    assert_eq!(
        (
            d.tick,
            d.fallback.as_str(),
            d.responder.as_str(),
            d.request_id
        ),
        (15, "agentC", "agentB", 1)
    );
    // late answers, answers from others, or denied answers do not count
    let late = logged(2, "agentB", 15, &[(IN_REPLY_TO, Literal::Int(1))]);
    let other = logged(3, "agentD", 12, &[(IN_REPLY_TO, Literal::Int(1))]);
    let mut denied = logged(4, "agentB", 12, &[(IN_REPLY_TO, Literal::Int(1))]);
    denied.outcome = Outcome::Denied;
    let log = vec![req.clone(), late, other, denied];
    assert!(negotiation_timeout_check(&req, &log, 5, "agentC", 16).is_some());
}

#[test]
fn zero_deadline_fires_at_next_tick() {
    let req = logged(1, "agentA", 10, &[(REQUEST_TO, Literal::from("agentB"))]);
    assert_eq!(
        negotiation_timeout_check(&req, std::slice::from_ref(&req), 0, "agentC", 10),
        None
    );
    assert_eq!(
        negotiation_timeout_check(&req, std::slice::from_ref(&req), 0, "agentC", 11)
            .unwrap()
            .tick,
        11
    );
}

#[test]
fn non_request_behaviors_never_time_out() {
    let plain = logged(1, "agentA", 0, &[]);
    assert_eq!(
        negotiation_timeout_check(&plain, std::slice::from_ref(&plain), 5, "agentC", 100),
        None
    );
}

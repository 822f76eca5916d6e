//! Request/response deadlines with reassignment to a fallback subject.
//!
//! A request is a behavior whose args carry `request_to = "<responder>"`.
//! A response is an applied behavior by the responder whose args carry
//! `in_reply_to = <request behavior id>`.

use serde::{Deserialize, Serialize};

use crate::bib::{BehaviorRecord, Outcome};
use crate::literal::Literal;

pub const REQUEST_TO: &str = "request_to";
pub const IN_REPLY_TO: &str = "in_reply_to";

/// Protocol parameters: requests made with `operation` must be answered
/// within `deadline` ticks or the task goes to `fallback`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationRule {
    pub rule_id: String,
    pub operation: String,
    pub deadline: u32,
    pub fallback: String,
}

/// Instruction to hand a timed-out request to the fallback subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Directive {
    pub rule_id: String,
    pub request_id: u64,
    pub responder: String,
    pub fallback: String,
    pub object_id: String,
    pub tick: i64,
}

pub fn responder_of(request: &BehaviorRecord) -> Option<&str> {
    request.args.get(REQUEST_TO).and_then(Literal::as_str)
}

/// Tick at which an unanswered request times out. A zero deadline still
/// waits for the next tick boundary.
pub fn due_tick(request: &BehaviorRecord, deadline: u32) -> i64 {
    request.logical_time + i64::from(deadline.max(1))
}

pub fn is_response_to(
    candidate: &BehaviorRecord,
    request: &BehaviorRecord,
    responder: &str,
) -> bool {
    candidate.subject_id == responder
        && candidate.outcome == Outcome::Applied
        && candidate.args.get(IN_REPLY_TO) == Some(&Literal::Int(request.behavior_id as i64))
}

/// Directive if, as of tick `now`, the responder has not answered `request`
/// before its due tick; `None` while still waiting or once answered.
pub fn negotiation_timeout_check(
    request: &BehaviorRecord,
    log: &[BehaviorRecord],
    deadline: u32,
    fallback: &str,
    now: i64,
) -> Option<Directive> {
    let responder = responder_of(request)?;
    let due = due_tick(request, deadline);
    if now < due {
        return None;
    }
    let answered = log.iter().any(|b| {
        b.logical_time < due
            && b.behavior_id > request.behavior_id
            && is_response_to(b, request, responder)
    });
    if answered {
        return None;
    }
    Some(Directive {
        rule_id: String::new(),
        request_id: request.behavior_id,
        responder: responder.to_string(),
        fallback: fallback.to_string(),
        object_id: request.object_id.clone(),
        tick: due,
    })
}

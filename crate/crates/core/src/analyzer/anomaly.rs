use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ngram::{sequences, ActionKey, NGramModel};
use super::AnalyzerError;
use crate::bib::{
    apply_event, BehaviorRecord, Bib, Context, EventKind, EventRecord, ObjectRecord, Outcome,
};
use crate::policy::PolicyEngine;
use crate::predicate::OpBinding;

pub const DEFAULT_THETA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    EnvelopeViolation,
    NeverSeenTransition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anomaly {
    pub behavior_id: u64,
    pub kind: AnomalyKind,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub anomalies: Vec<Anomaly>,
    pub envelope_violations: usize,
    pub never_seen_transitions: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct ScanOptions<'a> {
    /// Transition model fitted on a baseline log; without one only the
    /// envelope is checked.
    pub baseline: Option<&'a NGramModel>,
    pub theta: f64,
}

impl Default for ScanOptions<'_> {
    fn default() -> Self {
        ScanOptions {
            baseline: None,
            theta: DEFAULT_THETA,
        }
    }
}

fn mismatch(msg: String) -> AnalyzerError {
    AnalyzerError::Mismatch(msg)
}

fn check_structure(
    initial: &Bib,
    log: &[BehaviorRecord],
    feed: &[EventRecord],
) -> Result<(), AnalyzerError> {
    for (i, b) in log.iter().enumerate() {
        if b.behavior_id != i as u64 + 1 {
            return Err(mismatch(format!(
                "behavior at position {} has id {}",
                i + 1,
                b.behavior_id
            )));
        }
        if initial.subject(&b.subject_id).is_none() {
            return Err(mismatch(format!(
                "behavior {} names unknown subject '{}'",
                b.behavior_id, b.subject_id
            )));
        }
        if initial.object(&b.object_id).is_none() {
            return Err(mismatch(format!(
                "behavior {} names unknown object '{}'",
                b.behavior_id, b.object_id
            )));
        }
        if b.caused_by.is_some_and(|p| p >= b.behavior_id) {
            return Err(mismatch(format!(
                "behavior {} is caused by a later behavior",
                b.behavior_id
            )));
        }
    }
    for (i, e) in feed.iter().enumerate() {
        if e.event_id != i as u64 + 1 {
            return Err(mismatch(format!(
                "event at position {} has id {}",
                i + 1,
                e.event_id
            )));
        }
        if e.cause_behavior_id
            .is_some_and(|c| c == 0 || c > log.len() as u64)
        {
            return Err(mismatch(format!(
                "event {} cites a behavior missing from the log",
                e.event_id
            )));
        }
    }
    let recorded = feed
        .iter()
        .filter(|e| e.kind == EventKind::BehaviorRecorded)
        .count();
    if recorded != log.len() {
        return Err(mismatch(format!(
            "{} behaviors but {recorded} behavior_recorded events",
            log.len()
        )));
    }
    Ok(())
}

/// Re-checks every applied behavior against the store as it stood just
/// before that behavior's first event, and optionally scores transitions
/// against a baseline model.
///
/// `initial` holds the run's entities as registered, before any event.
pub fn anomaly_scan(
    initial: &Bib,
    policy: &PolicyEngine,
    log: &[BehaviorRecord],
    feed: &[EventRecord],
    options: ScanOptions<'_>,
) -> Result<AnomalyReport, AnalyzerError> {
    check_structure(initial, log, feed)?;
    let mut anomalies = Vec::new();

    let mut objects: BTreeMap<String, ObjectRecord> = initial.objects_map().clone();
    let mut next = 0;
    for b in log {
        while next < feed.len() && feed[next].cause_behavior_id != Some(b.behavior_id) {
            apply_event(&mut objects, &feed[next]);
            next += 1;
        }
        if next == feed.len() {
            return Err(mismatch(format!(
                "no event records behavior {}",
                b.behavior_id
            )));
        }
        if b.outcome != Outcome::Applied {
            continue;
        }
        let subject = initial.subject(&b.subject_id).expect("checked above");
        let object = &objects[&b.object_id];
        let op = OpBinding {
            name: b.operation.clone(),
            args: b.args.clone(),
        };
        let context = Context {
            logical_time: b.logical_time,
            ..b.context.clone()
        };
        if !policy.check(subject, object, &op, &context).allow {
            anomalies.push(Anomaly {
                behavior_id: b.behavior_id,
                kind: AnomalyKind::EnvelopeViolation,
                score: 1.0,
            });
        }
    }

    if let Some(model) = options.baseline {
        for seq in sequences(log).values() {
            let mut history: Vec<ActionKey> = Vec::new();
            for b in seq {
                let key = ActionKey::of(b);
                if b.outcome == Outcome::Applied {
                    let p = model.probability(&history, &key);
                    if p < options.theta {
                        anomalies.push(Anomaly {
                            behavior_id: b.behavior_id,
                            kind: AnomalyKind::NeverSeenTransition,
                            score: 1.0 - p,
                        });
                    }
                }
                history.push(key);
            }
        }
    }

    anomalies.sort_by(|a, b| a.behavior_id.cmp(&b.behavior_id).then(a.kind.cmp(&b.kind)));
    let count = |k| anomalies.iter().filter(|a| a.kind == k).count();
    Ok(AnomalyReport {
        envelope_violations: count(AnomalyKind::EnvelopeViolation),
        never_seen_transitions: count(AnomalyKind::NeverSeenTransition),
        anomalies,
    })
}

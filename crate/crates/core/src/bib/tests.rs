use rust_decimal::Decimal;

use super::*;
use crate::literal::{CmpOp, Literal};
use crate::policy::Verdict;

fn attrs(pairs: &[(&str, Literal)]) -> AttrMap {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn record(subject: &str, op: &str, object: &str, outcome: Outcome, time: i64) -> BehaviorRecord {
    BehaviorRecord {
        behavior_id: 0,
        logical_time: time,
        subject_id: subject.into(),
        operation: op.into(),
        object_id: object.into(),
        outcome,
        cascade_depth: 0,
        caused_by: None,
        verdict: Verdict::default(),
        state_delta: StateDelta::new(),
        object_class: String::new(),
        args: AttrMap::new(),
        context: Context::at(time),
        reason: None,
    }
}

fn seeded() -> Bib {
    let mut bib = Bib::new();
    bib.put_entity(SubjectRecord::new("alice").with_capabilities(["read", "release"]))
        .unwrap();
    bib.put_entity(SubjectRecord::new("bob")).unwrap();
    bib.put_entity(
        ObjectRecord::new("transformer1", "Transformer")
            .with_state("temperature", 78i64)
            .with_tags(["grid"]),
    )
    .unwrap();
    bib.put_entity(ObjectRecord::new("doc1", "FinancialReport"))
        .unwrap();
    bib
}

#[test]
fn put_semantic_object() {
    let mut bib = Bib::new();
    let id = bib
        .put_entity(
            ObjectRecord::new("doc1", "FinancialReport")
                .with_attribute("Sensitivity", "Confidential")
                .with_attribute("Status", "Approved"),
        )
        .unwrap();
    assert_eq!(id, "doc1");
    assert_eq!(
        bib.object("doc1").unwrap().attributes["Status"],
        Literal::from("Approved")
    );
    assert!(bib.feed().is_empty(), "registration emits no events");
}

#[test]
fn empty_subject_is_accepted() {
    let mut bib = Bib::new();
    bib.put_entity(SubjectRecord::new("nobody")).unwrap();
    assert!(bib.subject("nobody").unwrap().capabilities.is_empty());
}

#[test]
fn second_put_wins() {
    let mut bib = Bib::new();
    bib.put_entity(ObjectRecord::new("o", "C").with_attribute("v", 1i64))
        .unwrap();
    bib.put_entity(ObjectRecord::new("o", "C").with_attribute("v", 2i64))
        .unwrap();
    assert_eq!(bib.objects().count(), 1);
    assert_eq!(bib.object("o").unwrap().attributes["v"], Literal::Int(2));
}

#[test]
fn put_rejections() {
    let mut bib = seeded();
    assert!(matches!(
        bib.put_entity(ObjectRecord::new("alice", "C")),
        Err(BibError::TypeConflict { .. })
    ));
    assert!(matches!(
        bib.put_entity(SubjectRecord::new("")),
        Err(BibError::Invalid { .. })
    ));
    assert!(matches!(
        bib.put_entity(SubjectRecord::new("x").with_capabilities(["not valid"])),
        Err(BibError::Invalid { .. })
    ));
    assert!(matches!(
        bib.put_entity(ForecastModel::linear("m", "t", 1, CmpOp::Gt, Decimal::ONE)),
        Err(BibError::Invalid { .. })
    ));
}

#[test]
fn update_reports_old_and_new() {
    let mut bib = seeded();
    let ev = bib
        .update_object_state(
            "transformer1",
            &attrs(&[("temperature", Literal::Int(85))]),
            None,
            1,
        )
        .unwrap();
    assert_eq!(ev.kind, EventKind::ObjectChanged);
    assert_eq!(
        ev.delta["temperature"],
        Change {
            old: Some(Literal::Int(78)),
            new: Literal::Int(85)
        }
    );
    assert!(ev.tags.contains("grid"));
}

#[test]
fn noop_update_still_emits() {
    let mut bib = seeded();
    let ev = bib
        .update_object_state(
            "transformer1",
            &attrs(&[("temperature", Literal::Int(78))]),
            None,
            1,
        )
        .unwrap();
    assert_eq!(
        ev.delta["temperature"].old.as_ref(),
        Some(&ev.delta["temperature"].new)
    );
    assert_eq!(bib.feed().len(), 1);
}

#[test]
fn update_errors() {
    let mut bib = seeded();
    assert_eq!(
        bib.update_object_state("nope", &attrs(&[("a", Literal::Int(1))]), None, 0),
        Err(BibError::UnknownObject("nope".into()))
    );
    assert_eq!(
        bib.update_object_state("doc1", &AttrMap::new(), None, 0),
        Err(BibError::EmptyDelta("doc1".into()))
    );
}

#[test]
fn feed_replay_reconstructs_state() {
    let mut bib = seeded();
    let initial = bib.objects_map().clone();
    for (t, v) in [(1, 80), (2, 90), (3, 70)] {
        bib.update_object_state(
            "transformer1",
            &attrs(&[("temperature", Literal::Int(v)), ("step", Literal::Int(t))]),
            None,
            t,
        )
        .unwrap();
    }
    let replayed = replay_feed(&initial, bib.change_feed_since(0));
    assert_eq!(&replayed, bib.objects_map());
}

#[test]
fn append_logs_and_emits() {
    let mut bib = seeded();
    let id = bib
        .append_behavior(record("bob", "release", "doc1", Outcome::Denied, 3))
        .unwrap();
    assert_eq!(id, 1);
    assert_eq!(bib.log()[0].outcome, Outcome::Denied);
    let ev = &bib.feed()[0];
    assert_eq!(
        (ev.kind, ev.cause_behavior_id),
        (EventKind::BehaviorRecorded, Some(1))
    );
}

#[test]
fn append_checks_references_and_depth() {
    let mut bib = seeded();
    assert_eq!(
        bib.append_behavior(record("carol", "read", "doc1", Outcome::Applied, 0)),
        Err(BibError::UnknownSubject("carol".into()))
    );
    assert_eq!(
        bib.append_behavior(record("alice", "read", "doc9", Outcome::Applied, 0)),
        Err(BibError::UnknownObject("doc9".into()))
    );
    let mut child = record("alice", "read", "doc1", Outcome::Applied, 1);
    child.caused_by = Some(4);
    child.cascade_depth = 1;
    assert_eq!(
        bib.append_behavior(child.clone()),
        Err(BibError::UnknownCause(4))
    );
    bib.append_behavior(record("alice", "read", "doc1", Outcome::Applied, 0))
        .unwrap();
    child.caused_by = Some(1);
    child.cascade_depth = 2;
    assert_eq!(
        bib.append_behavior(child.clone()),
        Err(BibError::CascadeDepth {
            expected: 1,
            got: 2
        })
    );
    child.cascade_depth = 1;
    assert_eq!(bib.append_behavior(child), Ok(2));
}

#[test]
fn query_matches_linear_scan() {
    let mut bib = seeded();
    let subjects = ["alice", "bob"];
    let ops = ["read", "release"];
    let outcomes = [Outcome::Applied, Outcome::Denied, Outcome::Failed];
    for i in 0..30usize {
        bib.append_behavior(record(
            subjects[i % 2],
            ops[i % 3 % 2],
            "doc1",
            outcomes[i % 3],
            i as i64,
        ))
        .unwrap();
    }
    assert_eq!(bib.query_behaviors(&BehaviorFilter::default()).len(), 30);
    let filters = [
        BehaviorFilter {
            subject_id: Some("bob".into()),
            ..Default::default()
        },
        BehaviorFilter {
            outcome: Some(Outcome::Denied),
            ..Default::default()
        },
        BehaviorFilter {
            operation: Some("read".into()),
            time_range: Some((5, 20)),
            ..Default::default()
        },
        BehaviorFilter {
            object_id: Some("transformer1".into()),
            ..Default::default()
        },
    ];
    for f in &filters {
        let got: Vec<u64> = bib
            .query_behaviors(f)
            .iter()
            .map(|r| r.behavior_id)
            .collect();
        let mut want = Vec::new();
        for r in bib.log() {
            let keep = f.subject_id.as_deref().is_none_or(|s| s == r.subject_id)
                && f.object_id.as_deref().is_none_or(|s| s == r.object_id)
                && f.operation.as_deref().is_none_or(|s| s == r.operation)
                && f.outcome.is_none_or(|o| o == r.outcome)
                && f.time_range
                    .is_none_or(|(a, b)| r.logical_time >= a && r.logical_time <= b);
            if keep {
                want.push(r.behavior_id);
            }
        }
        assert_eq!(got, want);
    }
    assert!(Bib::new()
        .query_behaviors(&BehaviorFilter::default())
        .is_empty());
}

#[test]
fn incremental_feed_reads_concatenate() {
    let mut bib = seeded();
    let mut seen = Vec::new();
    let mut cursor = 0;
    for t in 0..5 {
        bib.update_object_state(
            "transformer1",
            &attrs(&[("temperature", Literal::Int(t))]),
            None,
            t,
        )
        .unwrap();
        if t % 2 == 0 {
            let fresh = bib.change_feed_since(cursor).to_vec();
            cursor = fresh.last().map_or(cursor, |e| e.event_id);
            seen.extend(fresh);
        }
    }
    seen.extend(bib.change_feed_since(cursor).to_vec());
    assert_eq!(seen, bib.change_feed_since(0));
    assert!(bib.change_feed_since(bib.last_event_id()).is_empty());
    assert_eq!(bib.change_feed_since(0).len(), 5);
}

#[test]
fn ids_are_gapless() {
    let mut bib = seeded();
    for t in 0..4 {
        bib.update_object_state("doc1", &attrs(&[("v", Literal::Int(t))]), None, t)
            .unwrap();
        bib.append_behavior(record("alice", "read", "doc1", Outcome::Applied, t))
            .unwrap();
    }
    for (i, e) in bib.feed().iter().enumerate() {
        assert_eq!(e.event_id, i as u64 + 1);
    }
    for (i, b) in bib.log().iter().enumerate() {
        assert_eq!(b.behavior_id, i as u64 + 1);
    }
}

#[test]
fn models_through_the_store() {
    let mut bib = seeded();
    bib.put_entity(ForecastModel::threshold(
        "hot",
        "temperature",
        CmpOp::Gt,
        Decimal::from(80),
    ))
    .unwrap();
    for (t, v) in [(1, 82), (2, 85)] {
        bib.update_object_state(
            "transformer1",
            &attrs(&[("temperature", Literal::Int(v))]),
            None,
            t,
        )
        .unwrap();
    }
    let series = bib.state_series("transformer1", "temperature");
    assert_eq!(series, vec![(1, Decimal::from(82)), (2, Decimal::from(85))]);
    assert!(bib.evaluate_model("hot", &series).unwrap().fired);
    assert_eq!(
        bib.evaluate_model("cold", &series),
        Err(BibError::UnknownModel("cold".into()))
    );
    assert!(matches!(
        bib.evaluate_model("hot", &[]),
        Err(BibError::Forecast(_))
    ));
}

#[test]
fn store_is_thread_safe_to_share() {
    fn assert_send_sync<T: Send + Sync>() {}
    assert_send_sync::<Bib>();
    let bib = std::sync::Arc::new(std::sync::RwLock::new(seeded()));
    let readers: Vec<_> = (0..4)
        .map(|_| {
            let b = bib.clone();
            std::thread::spawn(move || b.read().unwrap().objects().count())
        })
        .collect();
    for r in readers {
        assert_eq!(r.join().unwrap(), 2);
    }
}

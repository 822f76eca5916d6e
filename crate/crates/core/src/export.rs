//! Line-delimited JSON artifacts and `bun-snapshot v1` text.
//!
//! Every JSON line serializes one record with fields in declaration order,
//! so equal runs export byte-identical files.

use std::fmt::Write as _;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::bib::{BehaviorRecord, Bib};
use crate::sim::{
    parse_document, write_entity_sections, write_rules, Scenario, ScenarioError, Simulation,
    SNAPSHOT_HEADER,
};

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("log is not numbered 1..n: found behavior {found} at position {expected}")]
    Numbering { expected: u64, found: u64 },
}

pub fn to_jsonl<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Parses one record per non-blank line.
pub fn from_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, ExportError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ExportError::Json {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Store contents and rules at a point in time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    /// Header, entities and rules; script sections are empty.
    pub scenario: Scenario,
    pub log: Vec<BehaviorRecord>,
}

/// Current store of a simulation, with its header and rules.
pub fn snapshot_text(sim: &Simulation) -> String {
    write_snapshot(sim.scenario(), sim.bib())
}

pub fn write_snapshot(header: &Scenario, bib: &Bib) -> String {
    let mut out = header.header_text(SNAPSHOT_HEADER);
    write_entity_sections(&mut out, bib.subjects(), bib.objects(), bib.models());
    write_rules(&mut out, &header.rules, &header.negotiations);
    let _ = writeln!(out, "\nLOG");
    out.push_str(&to_jsonl(bib.log()));
    out
}

pub fn read_snapshot(text: &str) -> Result<Snapshot, ExportError> {
    let doc = parse_document(text, SNAPSHOT_HEADER)?;
    let mut log = Vec::with_capacity(doc.log_lines.len());
    for (line, raw) in &doc.log_lines {
        let rec: BehaviorRecord = serde_json::from_str(raw).map_err(|e| ExportError::Json {
            line: *line,
            message: e.to_string(),
        })?;
        let expected = log.len() as u64 + 1;
        if rec.behavior_id != expected {
            return Err(ExportError::Numbering {
                expected,
                found: rec.behavior_id,
            });
        }
        log.push(rec);
    }
    doc.scenario.check_references()?;
    Ok(Snapshot {
        scenario: doc.scenario,
        log,
    })
}

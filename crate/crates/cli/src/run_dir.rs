//! Artifacts of one run, kept together in a directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use bun_core::bib::{BehaviorRecord, EventRecord};
use bun_core::export::{from_jsonl, snapshot_text, to_jsonl};
use bun_core::sim::{load_scenario, RunResult, Scenario, Simulation};
use bun_core::trigger::FiringDecision;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "run.json";
pub const BEHAVIORS: &str = "behaviors.jsonl";
pub const EVENTS: &str = "events.jsonl";
pub const DECISIONS: &str = "decisions.jsonl";
pub const DIRECTIVES: &str = "directives.jsonl";
pub const INITIAL: &str = "initial.bun";
pub const SNAPSHOT: &str = "snapshot.bun";
pub const SUMMARY: &str = "summary.txt";

const FORMAT: &str = "bun-run v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub run_id: String,
    pub scenario: String,
    pub seed: u64,
    pub final_tick: i64,
    pub quiescent: bool,
    pub behaviors: usize,
    pub events: usize,
    /// File name to SHA-256 of its bytes.
    pub artifacts: BTreeMap<String, String>,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes every artifact of a finished run and returns its manifest.
pub fn write(dir: &Path, sim: &Simulation, result: &RunResult) -> Result<Manifest> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let scenario = sim.scenario();
    let initial = scenario.to_text();
    let files = [
        (BEHAVIORS, to_jsonl(&result.log)),
        (EVENTS, to_jsonl(&result.feed)),
        (DECISIONS, to_jsonl(&result.decisions)),
        (DIRECTIVES, to_jsonl(&result.directives)),
        (SNAPSHOT, snapshot_text(sim)),
        (SUMMARY, summary_text(scenario, result)),
        (INITIAL, initial.clone()),
    ];
    let mut artifacts = BTreeMap::new();
    for (name, text) in &files {
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        artifacts.insert(name.to_string(), digest(text.as_bytes()));
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        run_id: digest(initial.as_bytes())[..16].to_string(),
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        final_tick: result.final_tick,
        quiescent: result.quiescent,
        behaviors: result.log.len(),
        events: result.feed.len(),
        artifacts,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    fs::write(dir.join(MANIFEST), json)?;
    Ok(manifest)
}

pub fn summary_text(scenario: &Scenario, r: &RunResult) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} seed {}", scenario.name, scenario.seed);
    let stop = if r.quiescent {
        "quiescent"
    } else {
        "tick limit"
    };
    let _ = writeln!(out, "stopped at tick {} ({stop})", r.final_tick);
    let (mut applied, mut denied, mut failed) = (0, 0, 0);
    for c in r.counters.values() {
        applied += c.applied;
        denied += c.denied;
        failed += c.failed;
    }
    let _ = writeln!(
        out,
        "behaviors {} applied {applied} denied {denied} failed {failed}",
        r.log.len()
    );
    let fired = r.decisions.iter().filter(|d| d.fired).count();
    let _ = writeln!(
        out,
        "events {} firing decisions {} fired {fired} directives {}",
        r.feed.len(),
        r.decisions.len(),
        r.directives.len()
    );
    if !r.counters.is_empty() {
        let _ = writeln!(out, "\nsubject requested applied denied failed");
        for (id, c) in &r.counters {
            let _ = writeln!(
                out,
                "{id} {} {} {} {}",
                c.requested, c.applied, c.denied, c.failed
            );
        }
    }
    let busy: Vec<_> = r
        .ticks
        .iter()
        .filter(|t| t.requests > 0 || t.events > 0)
        .collect();
    if !busy.is_empty() {
        let _ = writeln!(out, "\ntick requests applied denied failed events");
        for t in busy {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                t.tick, t.requests, t.applied, t.denied, t.failed, t.events
            );
        }
    }
    out
}

/// A run directory whose artifacts match its manifest.
pub struct RunDir {
    pub path: PathBuf,
    pub manifest: Manifest,
    pub scenario: Scenario,
    pub log: Vec<BehaviorRecord>,
    pub feed: Vec<EventRecord>,
    pub decisions: Vec<FiringDecision>,
}

impl RunDir {
    pub fn open(path: &Path) -> Result<RunDir> {
        let manifest_path = path.join(MANIFEST);
        let text = fs::read_to_string(&manifest_path)
            .with_context(|| format!("reading {}", manifest_path.display()))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", manifest_path.display()))?;
        if manifest.format != FORMAT {
            bail!(
                "{}: unsupported format '{}'",
                manifest_path.display(),
                manifest.format
            );
        }
        let read = |name: &str| read_artifact(path, &manifest, name);
        let initial = read(INITIAL)?;
        if digest(initial.as_bytes())[..16] != manifest.run_id {
            bail!(
                "artifact mismatch: {INITIAL} does not produce run id {}",
                manifest.run_id
            );
        }
        let scenario = load_scenario(&initial)
            .with_context(|| format!("loading {}", path.join(INITIAL).display()))?;
        let log: Vec<BehaviorRecord> =
            from_jsonl(&read(BEHAVIORS)?).with_context(|| format!("reading {BEHAVIORS}"))?;
        let feed: Vec<EventRecord> =
            from_jsonl(&read(EVENTS)?).with_context(|| format!("reading {EVENTS}"))?;
        let decisions: Vec<FiringDecision> =
            from_jsonl(&read(DECISIONS)?).with_context(|| format!("reading {DECISIONS}"))?;
        if log.len() != manifest.behaviors || feed.len() != manifest.events {
            bail!("artifact mismatch: record counts differ from {MANIFEST}");
        }
        Ok(RunDir {
            path: path.to_path_buf(),
            manifest,
            scenario,
            log,
            feed,
            decisions,
        })
    }

    pub fn artifact(&self, name: &str) -> Result<String> {
        read_artifact(&self.path, &self.manifest, name)
    }
}

fn read_artifact(dir: &Path, manifest: &Manifest, name: &str) -> Result<String> {
    let Some(expected) = manifest.artifacts.get(name) else {
        bail!("{}: {name} is not listed in {MANIFEST}", dir.display());
    };
    let file = dir.join(name);
    let text = fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    if digest(text.as_bytes()) != *expected {
        bail!(
            "artifact mismatch: {} is not part of run {}",
            file.display(),
            manifest.run_id
        );
    }
    Ok(text)
}

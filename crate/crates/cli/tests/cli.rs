use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn bun(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bun"))
        .args(args)
        .output()
        .expect("bun runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "scenarios", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn run_into(name: &str, dir: &Path, extra: &[&str]) -> Output {
    let s = scenario(name);
    let mut args = vec!["run", s.as_str(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    bun(&args)
}

fn lines(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn stdout_lines(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

const ARTIFACTS: [&str; 8] = [
    "run.json",
    "behaviors.jsonl",
    "events.jsonl",
    "decisions.jsonl",
    "directives.jsonl",
    "initial.bun",
    "snapshot.bun",
    "summary.txt",
];

#[test]
fn run_writes_identical_artifacts_twice() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let o = run_into("traffic.bun", dir, &["--seed", "42"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(o.stderr.is_empty());
    }
    for name in ARTIFACTS {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    assert_eq!(lines(&a.join("behaviors.jsonl")).len(), 7);
}

#[test]
fn empty_scenario_gives_empty_log() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_into("empty.bun", tmp.path(), &[]);
    assert_eq!(code(&o), 0);
    assert_eq!(
        fs::read_to_string(tmp.path().join("behaviors.jsonl")).unwrap(),
        ""
    );
    let manifest: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(manifest["quiescent"], true);
    assert_eq!(manifest["final_tick"], 0);
}

#[test]
fn tick_limit_and_load_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let endless = tmp.path().join("endless.bun");
    fs::write(
        &endless,
        "bun-scenario v1\nSUBJECTS\nsubject s capabilities [poke]\nOBJECTS\nobject o class O affords [poke]\nAGENTS\nagent s\n  every 1 do poke o\nend\n",
    )
    .unwrap();
    let out = tmp.path().join("run");
    let o = bun(&[
        "run",
        endless.to_str().unwrap(),
        "--max-ticks",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert_eq!(lines(&out.join("behaviors.jsonl")).len(), 3);

    let broken = tmp.path().join("broken.bun");
    fs::write(&broken, "bun-scenario v1\nOBJECTS\nobject o klass O\n").unwrap();
    let o = bun(&[
        "run",
        broken.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let o = bun(&["run", tmp.path().join("missing.bun").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn check_reports_embargo_denial() {
    let s = scenario("document-embargo.bun");
    let base = [
        "check",
        &s,
        "--subject",
        "alice",
        "--operation",
        "release",
        "--object",
        "doc1",
    ];
    let mut args = base.to_vec();
    args.extend(["--time", "5", "--format", "summary"]);
    let o = bun(&args);
    assert_eq!(code(&o), 3);
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(
        text.contains("rule embargo: P1=true P2=true P3=false"),
        "{text}"
    );
    assert!(text.contains("first failure: rule embargo P3 (>= context.logical_time 10)"));

    let mut args = base.to_vec();
    args.extend(["--time", "10"]);
    assert_eq!(code(&bun(&args)), 0);

    let o = bun(&[
        "check",
        &s,
        "--subject",
        "nobody",
        "--operation",
        "release",
        "--object",
        "doc1",
    ]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
}

#[test]
fn gate_only_allow() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("gate.bun");
    fs::write(
        &path,
        "bun-scenario v1\nSUBJECTS\nsubject s capabilities [read]\nOBJECTS\nobject o class Doc affords [read, write]\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let o = bun(&[
        "check",
        p,
        "--subject",
        "s",
        "--operation",
        "read",
        "--object",
        "o",
    ]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["evaluated"], Value::Array(vec![]));
    let o = bun(&[
        "check",
        p,
        "--subject",
        "s",
        "--operation",
        "write",
        "--object",
        "o",
    ]);
    assert_eq!(code(&o), 3);
}

// Rules in these scenarios only read state that their behaviors never
// change, so checking against the initial state must reproduce each verdict.
#[test]
fn check_agrees_with_recorded_verdicts() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["document-embargo.bun", "mutex.bun"] {
        let dir = tmp.path().join(name);
        assert_eq!(code(&run_into(name, &dir, &[])), 0);
        let s = scenario(name);
        for b in lines(&dir.join("behaviors.jsonl")) {
            let time = b["logical_time"].to_string();
            let o = bun(&[
                "check",
                &s,
                "--subject",
                b["subject_id"].as_str().unwrap(),
                "--operation",
                b["operation"].as_str().unwrap(),
                "--object",
                b["object_id"].as_str().unwrap(),
                "--time",
                &time,
            ]);
            let verdict: Value = serde_json::from_slice(&o.stdout).unwrap();
            assert_eq!(
                verdict, b["verdict"],
                "{name} behavior {}",
                b["behavior_id"]
            );
            let allow = b["verdict"]["allow"].as_bool().unwrap();
            assert_eq!(code(&o), if allow { 0 } else { 3 });
        }
    }
}

#[test]
fn inspect_matches_linear_scan() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["traffic.bun", "mutex.bun", "document-embargo.bun"] {
        let dir = tmp.path().join(name);
        run_into(name, &dir, &[]);
        let all = lines(&dir.join("behaviors.jsonl"));
        let d = dir.to_str().unwrap();
        for outcome in ["applied", "denied", "failed"] {
            let o = bun(&["inspect", d, "--outcome", outcome]);
            assert_eq!(code(&o), 0);
            let want: Vec<&Value> = all.iter().filter(|b| b["outcome"] == outcome).collect();
            let got = stdout_lines(&o);
            assert_eq!(got.iter().collect::<Vec<_>>(), want, "{name} {outcome}");
        }
        let o = bun(&[
            "inspect",
            d,
            "--where",
            "reason=mutex",
            "--from",
            "1",
            "--to",
            "2",
        ]);
        let want = all
            .iter()
            .filter(|b| {
                b["reason"] == "mutex" && (1..=2).contains(&b["logical_time"].as_i64().unwrap())
            })
            .count();
        assert_eq!(stdout_lines(&o).len(), want);
    }
}

#[test]
fn inspect_rejects_unknown_fields() {
    let tmp = tempfile::tempdir().unwrap();
    run_into("traffic.bun", tmp.path(), &[]);
    let d = tmp.path().to_str().unwrap();
    let o = bun(&["inspect", d, "--where", "colour=red"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown filter field 'colour'"));
    assert_eq!(code(&bun(&["inspect", d, "--outcome", "maybe"])), 1);
}

#[test]
fn predict_distribution_sums_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    run_into("traffic.bun", tmp.path(), &[]);
    let d = tmp.path().to_str().unwrap();
    for subject in ["vehicle3", "reporter", "vehicle7"] {
        let o = bun(&["predict", d, "--subject", subject, "--n", "2"]);
        assert_eq!(code(&o), 0);
        let ranked = stdout_lines(&o);
        assert!(!ranked.is_empty());
        let total: f64 = ranked.iter().map(|r| r["p"].as_f64().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9, "{subject}: {total}");
    }
    assert_eq!(code(&bun(&["predict", d, "--subject", "ghost"])), 1);
}

fn rewrite_artifact(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
    let path = dir.join("run.json");
    let mut manifest: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    manifest["artifacts"][name] = Value::String(hex::encode(Sha256::digest(text.as_bytes())));
    fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
}

#[test]
fn scan_lists_injected_violation() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into("document-embargo.bun", &a, &[]);
    run_into("document-embargo.bun", &b, &[]);
    let args = [
        "scan",
        "--baseline",
        a.to_str().unwrap(),
        "--test",
        b.to_str().unwrap(),
    ];

    let clean: Value = serde_json::from_slice(&bun(&args).stdout).unwrap();
    assert_eq!(clean["envelope_violations"], 0);

    // The tick-10 release by the publisher, attributed to the analyst instead.
    let log = fs::read_to_string(b.join("behaviors.jsonl")).unwrap();
    let mut out: Vec<String> = log.lines().map(str::to_string).collect();
    assert!(out[1].contains("\"subject_id\":\"alice\""));
    out[1] = out[1].replace("\"subject_id\":\"alice\"", "\"subject_id\":\"mallory\"");
    rewrite_artifact(&b, "behaviors.jsonl", &(out.join("\n") + "\n"));

    let o = bun(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["envelope_violations"], 1);
    assert_eq!(report["anomalies"][0]["behavior_id"], 2);
    assert_eq!(report["anomalies"][0]["kind"], "envelope_violation");
}

#[test]
fn tampered_artifacts_are_refused() {
    let tmp = tempfile::tempdir().unwrap();
    run_into("mutex.bun", tmp.path(), &[]);
    let path = tmp.path().join("behaviors.jsonl");
    let log = fs::read_to_string(&path).unwrap();
    fs::write(&path, log.replacen("\"denied\"", "\"applied\"", 1)).unwrap();
    let o = bun(&["inspect", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("artifact mismatch"));
}

#[test]
fn export_reproduces_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    for name in ["negotiation.bun", "failover.bun", "empty.bun"] {
        let dir = tmp.path().join(name);
        run_into(name, &dir, &[]);
        let o = bun(&["export", dir.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        assert_eq!(
            o.stdout,
            fs::read(dir.join("snapshot.bun")).unwrap(),
            "{name}"
        );
        let again = tmp.path().join(format!("{name}.export"));
        bun(&[
            "export",
            dir.to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ]);
        assert_eq!(
            fs::read(again.join("behaviors.jsonl")).unwrap(),
            fs::read(dir.join("behaviors.jsonl")).unwrap()
        );
    }
}

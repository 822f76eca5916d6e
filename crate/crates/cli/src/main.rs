//! `bun`: run scenarios, check behaviors and analyze run artifacts.

mod run_dir;

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use bun_core::analyzer::{
    anomaly_scan, cascade_stats, fit_ngram, predict_next, ActionKey, CascadeStats, ScanOptions,
    DEFAULT_THETA,
};
use bun_core::bib::{BehaviorFilter, BehaviorRecord, Context, Outcome};
use bun_core::export::{read_snapshot, to_jsonl, write_snapshot};
use bun_core::predicate::OpBinding;
use bun_core::sim::{load_scenario, RunLimits, Scenario, Simulation};
use bun_core::Literal;
use clap::{Args, Parser, Subcommand, ValueEnum};

use run_dir::RunDir;

const EXIT_ERROR: u8 = 1;
const EXIT_TICK_LIMIT: u8 = 2;
const EXIT_DENY: u8 = 3;

#[derive(Parser)]
#[command(name = "bun", version, about = "Behavior coordination engine")]
struct Cli {
    /// Output format on standard output.
    #[arg(long, value_enum, global = true, default_value_t = Format::Lines)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Lines,
    Summary,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario until quiescence or the tick limit.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = RunLimits::default().max_ticks)]
        max_ticks: i64,
        /// Run directory; defaults to runs/<scenario file stem>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check one behavior against a scenario's initial state.
    Check(CheckArgs),
    /// List behaviors of a run, optionally filtered.
    Inspect(InspectArgs),
    /// Rank a subject's likely next actions from an n-gram model of a run.
    Predict {
        run: PathBuf,
        #[arg(long)]
        subject: String,
        /// Model order.
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Re-check a run against its policy and score it against a baseline run.
    Scan {
        #[arg(long)]
        baseline: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = DEFAULT_THETA)]
        theta: f64,
        #[arg(long, default_value_t = 2)]
        n: usize,
    },
    /// Re-emit a run's snapshot and log in canonical form.
    Export {
        run: PathBuf,
        /// Directory for snapshot.bun and behaviors.jsonl; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CheckArgs {
    scenario: PathBuf,
    #[arg(long)]
    subject: String,
    #[arg(long)]
    operation: String,
    #[arg(long)]
    object: String,
    /// Logical time of the check.
    #[arg(long, default_value_t = 0)]
    time: i64,
    /// Context tag; repeatable.
    #[arg(long = "tag")]
    tags: Vec<String>,
    /// Context value as key=value; repeatable.
    #[arg(long = "ctx", value_name = "KEY=VALUE")]
    values: Vec<String>,
    /// Operation argument as key=value; repeatable.
    #[arg(long = "arg", value_name = "KEY=VALUE")]
    args: Vec<String>,
}

#[derive(Args)]
struct InspectArgs {
    run: PathBuf,
    #[arg(long)]
    subject: Option<String>,
    #[arg(long)]
    operation: Option<String>,
    #[arg(long)]
    object: Option<String>,
    /// applied, denied or failed.
    #[arg(long)]
    outcome: Option<String>,
    /// First logical time to include.
    #[arg(long)]
    from: Option<i64>,
    /// Last logical time to include.
    #[arg(long)]
    to: Option<i64>,
    /// Extra filter as field=value (class, depth, caused_by, reason); repeatable.
    #[arg(long = "where", value_name = "FIELD=VALUE")]
    conditions: Vec<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            max_ticks,
            out,
        } => cmd_run(&scenario, seed, max_ticks, out, cli.format),
        Command::Check(args) => cmd_check(&args, cli.format),
        Command::Inspect(args) => cmd_inspect(&args, cli.format),
        Command::Predict { run, subject, n } => cmd_predict(&run, &subject, n, cli.format),
        Command::Scan {
            baseline,
            test,
            theta,
            n,
        } => cmd_scan(&baseline, &test, theta, n, cli.format),
        Command::Export { run, out } => cmd_export(&run, out.as_deref()),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("bun: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    load_scenario(&text).with_context(|| format!("{}", path.display()))
}

fn emit(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn json_line<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string(value).expect("serializable");
    s.push('\n');
    s
}

/// `key=value`; the value is a literal if it parses as one, a string otherwise.
fn key_value(s: &str) -> Result<(String, Literal)> {
    let Some((k, v)) = s.split_once('=') else {
        bail!("expected key=value, got '{s}'");
    };
    let lit = Literal::parse(v).unwrap_or_else(|| Literal::Str(v.to_string()));
    Ok((k.to_string(), lit))
}

fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    max_ticks: i64,
    out: Option<PathBuf>,
    format: Format,
) -> Result<ExitCode> {
    let mut scenario = load(path)?;
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    let dir = out.unwrap_or_else(|| {
        let stem = path.file_stem().unwrap_or_default();
        Path::new("runs").join(stem)
    });
    let mut sim = Simulation::new(scenario)?;
    let result = sim.run(RunLimits { max_ticks });
    let manifest = run_dir::write(&dir, &sim, &result)?;
    match format {
        Format::Lines => emit(&json_line(&manifest))?,
        Format::Summary => emit(&run_dir::summary_text(sim.scenario(), &result))?,
    }
    if !result.quiescent {
        eprintln!(
            "bun: stopped at tick limit {max_ticks} before quiescence; artifacts in {}",
            dir.display()
        );
        return Ok(ExitCode::from(EXIT_TICK_LIMIT));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(args: &CheckArgs, format: Format) -> Result<ExitCode> {
    let scenario = load(&args.scenario)?;
    let bib = scenario.initial_bib()?;
    let policy = scenario.policy_engine()?;
    let subject = bib
        .subject(&args.subject)
        .with_context(|| format!("unknown subject '{}'", args.subject))?;
    let object = bib
        .object(&args.object)
        .with_context(|| format!("unknown object '{}'", args.object))?;
    let op = OpBinding {
        name: args.operation.clone(),
        args: args
            .args
            .iter()
            .map(|a| key_value(a))
            .collect::<Result<_>>()?,
    };
    let context = Context {
        logical_time: args.time,
        tags: args.tags.iter().cloned().collect(),
        values: args
            .values
            .iter()
            .map(|a| key_value(a))
            .collect::<Result<_>>()?,
    };
    let verdict = policy.check(subject, object, &op, &context);
    match format {
        Format::Lines => emit(&json_line(&verdict))?,
        Format::Summary => emit(&verdict.to_string())?,
    }
    Ok(if verdict.allow {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_DENY)
    })
}

/// Predicate over one behavior built from a `--where` condition.
type Condition = Box<dyn Fn(&BehaviorRecord) -> bool>;

fn condition(spec: &str) -> Result<Condition> {
    let Some((field, value)) = spec.split_once('=') else {
        bail!("expected field=value, got '{spec}'");
    };
    let value = value.to_string();
    let number = |v: &str| -> Result<u64> {
        v.parse()
            .with_context(|| format!("'{field}' needs a number, got '{v}'"))
    };
    Ok(match field {
        "subject" => Box::new(move |b| b.subject_id == value),
        "operation" => Box::new(move |b| b.operation == value),
        "object" => Box::new(move |b| b.object_id == value),
        "class" => Box::new(move |b| b.object_class == value),
        "outcome" => {
            let o = parse_outcome(&value)?;
            Box::new(move |b| b.outcome == o)
        }
        "time" => {
            let t = number(&value)? as i64;
            Box::new(move |b| b.logical_time == t)
        }
        "depth" => {
            let d = number(&value)?;
            Box::new(move |b| u64::from(b.cascade_depth) == d)
        }
        "caused_by" if value == "none" => Box::new(|b| b.caused_by.is_none()),
        "caused_by" => {
            let id = number(&value)?;
            Box::new(move |b| b.caused_by == Some(id))
        }
        "reason" => {
            let r = serde_json::from_value(serde_json::Value::String(value.clone()))
                .map_err(|_| anyhow::anyhow!("unknown reason '{value}'"))?;
            Box::new(move |b| b.reason == Some(r))
        }
        other => bail!(
            "unknown filter field '{other}' (expected subject, operation, object, class, \
             outcome, time, depth, caused_by or reason)"
        ),
    })
}

fn parse_outcome(s: &str) -> Result<Outcome> {
    Outcome::parse(s).with_context(|| format!("unknown outcome '{s}'"))
}

fn cmd_inspect(args: &InspectArgs, format: Format) -> Result<ExitCode> {
    let conditions = args
        .conditions
        .iter()
        .map(|c| condition(c))
        .collect::<Result<Vec<_>>>()?;
    let filter = BehaviorFilter {
        subject_id: args.subject.clone(),
        object_id: args.object.clone(),
        operation: args.operation.clone(),
        outcome: args.outcome.as_deref().map(parse_outcome).transpose()?,
        time_range: (args.from.is_some() || args.to.is_some())
            .then(|| (args.from.unwrap_or(i64::MIN), args.to.unwrap_or(i64::MAX))),
    };
    let run = RunDir::open(&args.run)?;
    let hits: Vec<&BehaviorRecord> = run
        .log
        .iter()
        .filter(|b| filter.matches(b) && conditions.iter().all(|c| c(b)))
        .collect();
    let text = match format {
        Format::Lines => to_jsonl(hits.iter().copied()),
        Format::Summary => {
            let mut s = String::from("id tick subject operation object outcome depth caused_by\n");
            for b in &hits {
                let outcome = match b.reason {
                    Some(r) => format!(
                        "{}:{}",
                        b.outcome.as_str(),
                        serde_json::to_value(r)
                            .expect("serializable")
                            .as_str()
                            .unwrap_or("")
                    ),
                    None => b.outcome.as_str().to_string(),
                };
                let cause = b.caused_by.map_or("-".to_string(), |c| c.to_string());
                s.push_str(&format!(
                    "{} {} {} {} {} {outcome} {} {cause}\n",
                    b.behavior_id,
                    b.logical_time,
                    b.subject_id,
                    b.operation,
                    b.object_id,
                    b.cascade_depth
                ));
            }
            s.push_str(&format!("{} of {} behaviors\n", hits.len(), run.log.len()));
            s.push_str(&cascade_summary(&cascade_stats(&run.log, &run.decisions)));
            s
        }
    };
    emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cascade_summary(c: &CascadeStats) -> String {
    let mut s = String::from("\ncascades\ndepth count\n");
    for (d, n) in &c.depth_histogram {
        s.push_str(&format!("{d} {n}\n"));
    }
    s.push_str(&format!(
        "edges {} max fan-out {} mean chain length {:.3}\n",
        c.edges, c.max_fan_out, c.mean_chain_length
    ));
    if !c.triggers.is_empty() {
        s.push_str("trigger fired condition_false deduped depth_exceeded budget_exhausted\n");
        for (id, t) in &c.triggers {
            s.push_str(&format!(
                "{id} {} {} {} {} {}\n",
                t.fired, t.condition_false, t.deduped, t.depth_exceeded, t.budget_exhausted
            ));
        }
    }
    s
}

#[derive(serde::Serialize)]
struct Ranked<'a> {
    operation: &'a str,
    class: &'a str,
    p: f64,
}

fn cmd_predict(path: &Path, subject: &str, n: usize, format: Format) -> Result<ExitCode> {
    let run = RunDir::open(path)?;
    if !run.scenario.subjects.iter().any(|s| s.id == subject) {
        bail!("unknown subject '{subject}' in run {}", run.manifest.run_id);
    }
    let model = fit_ngram(&run.log, n)?;
    let history: Vec<ActionKey> = run
        .log
        .iter()
        .filter(|b| b.subject_id == subject)
        .map(ActionKey::of)
        .collect();
    let ranked = predict_next(&model, &history);
    let mut text = String::new();
    for (key, p) in &ranked {
        text.push_str(&match format {
            Format::Lines => json_line(&Ranked {
                operation: &key.operation,
                class: &key.class,
                p: *p,
            }),
            Format::Summary => format!("{key} {p:.4}\n"),
        });
    }
    emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan(
    baseline: &Path,
    test: &Path,
    theta: f64,
    n: usize,
    format: Format,
) -> Result<ExitCode> {
    if !(0.0..=1.0).contains(&theta) {
        bail!("theta must be within [0, 1], got {theta}");
    }
    let base = RunDir::open(baseline)?;
    let run = RunDir::open(test)?;
    let model = fit_ngram(&base.log, n).context("fitting baseline")?;
    let initial = run.scenario.initial_bib()?;
    let policy = run.scenario.policy_engine()?;
    let report = anomaly_scan(
        &initial,
        &policy,
        &run.log,
        &run.feed,
        ScanOptions {
            baseline: Some(&model),
            theta,
        },
    )?;
    let text = match format {
        Format::Lines => json_line(&report),
        Format::Summary => {
            let mut s = format!(
                "envelope violations {}\nnever-seen transitions {}\n",
                report.envelope_violations, report.never_seen_transitions
            );
            for a in &report.anomalies {
                let kind = serde_json::to_value(a.kind).expect("serializable");
                s.push_str(&format!(
                    "behavior {} {} {:.4}\n",
                    a.behavior_id,
                    kind.as_str().unwrap_or(""),
                    a.score
                ));
            }
            s
        }
    };
    emit(&text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_export(path: &Path, out: Option<&Path>) -> Result<ExitCode> {
    let run = RunDir::open(path)?;
    let snapshot = read_snapshot(&run.artifact(run_dir::SNAPSHOT)?)?;
    if snapshot.log != run.log {
        bail!(
            "artifact mismatch: {} and {} disagree",
            run_dir::SNAPSHOT,
            run_dir::BEHAVIORS
        );
    }
    let mut bib = snapshot.scenario.initial_bib()?;
    for b in &snapshot.log {
        bib.append_behavior(b.clone())
            .with_context(|| format!("replaying behavior {}", b.behavior_id))?;
    }
    let text = write_snapshot(&snapshot.scenario, &bib);
    match out {
        None => emit(&text)?,
        Some(dir) => {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(run_dir::SNAPSHOT), &text)?;
            fs::write(dir.join(run_dir::BEHAVIORS), to_jsonl(&snapshot.log))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

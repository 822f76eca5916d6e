use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::AnalyzerError;
use crate::bib::BehaviorRecord;

/// What a behavior did, independent of the object instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActionKey {
    pub operation: String,
    pub class: String,
}

impl ActionKey {
    pub fn new(operation: impl Into<String>, class: impl Into<String>) -> Self {
        ActionKey {
            operation: operation.into(),
            class: class.into(),
        }
    }

    pub fn of(b: &BehaviorRecord) -> Self {
        ActionKey::new(&b.operation, &b.object_class)
    }
}

impl fmt::Display for ActionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.operation, self.class)
    }
}

/// Context element; `Start` pads histories shorter than the context.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Token {
    Start,
    Key(ActionKey),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramModel {
    pub n: usize,
    pub counts: BTreeMap<Vec<Token>, BTreeMap<ActionKey, u64>>,
    pub totals: BTreeMap<Vec<Token>, u64>,
    pub keys: BTreeSet<ActionKey>,
}

impl NGramModel {
    /// The last `n - 1` tokens of a start-padded history.
    pub fn context_of(&self, history: &[ActionKey]) -> Vec<Token> {
        let k = self.n - 1;
        let mut ctx: Vec<Token> = history
            .iter()
            .rev()
            .take(k)
            .rev()
            .cloned()
            .map(Token::Key)
            .collect();
        while ctx.len() < k {
            ctx.insert(0, Token::Start);
        }
        ctx
    }

    /// P(next | history); unseen contexts fall back to uniform over known keys.
    pub fn probability(&self, history: &[ActionKey], next: &ActionKey) -> f64 {
        let ctx = self.context_of(history);
        match self.counts.get(&ctx) {
            Some(c) => c
                .get(next)
                .map_or(0.0, |&n| n as f64 / self.totals[&ctx] as f64),
            None if self.keys.contains(next) => 1.0 / self.keys.len() as f64,
            None => 0.0,
        }
    }
}

/// Per-subject sequences in behavior-id order.
pub(crate) fn sequences(log: &[BehaviorRecord]) -> BTreeMap<&str, Vec<&BehaviorRecord>> {
    let mut by_subject: BTreeMap<&str, Vec<&BehaviorRecord>> = BTreeMap::new();
    let mut sorted: Vec<&BehaviorRecord> = log.iter().collect();
    sorted.sort_by_key(|b| b.behavior_id);
    for b in sorted {
        by_subject.entry(b.subject_id.as_str()).or_default().push(b);
    }
    by_subject
}

/// Counts every length-`n` window of each subject's sequence, padding the
/// first windows with `Start`.
pub fn fit_ngram(log: &[BehaviorRecord], n: usize) -> Result<NGramModel, AnalyzerError> {
    if n == 0 {
        return Err(AnalyzerError::Order);
    }
    if log.is_empty() {
        return Err(AnalyzerError::EmptyLog);
    }
    let mut model = NGramModel {
        n,
        counts: BTreeMap::new(),
        totals: BTreeMap::new(),
        keys: BTreeSet::new(),
    };
    for seq in sequences(log).values() {
        let keys: Vec<ActionKey> = seq.iter().map(|b| ActionKey::of(b)).collect();
        for i in 0..keys.len() {
            let ctx = model.context_of(&keys[..i]);
            *model
                .counts
                .entry(ctx.clone())
                .or_default()
                .entry(keys[i].clone())
                .or_default() += 1;
            *model.totals.entry(ctx).or_default() += 1;
            model.keys.insert(keys[i].clone());
        }
    }
    Ok(model)
}

/// Ranked next actions for a history, most likely first; ties by key order.
pub fn predict_next(model: &NGramModel, history: &[ActionKey]) -> Vec<(ActionKey, f64)> {
    let ctx = model.context_of(history);
    let mut out: Vec<(ActionKey, f64)> = match model.counts.get(&ctx) {
        Some(c) => {
            let total = model.totals[&ctx] as f64;
            c.iter()
                .map(|(k, &n)| (k.clone(), n as f64 / total))
                .collect()
        }
        None => {
            let p = 1.0 / model.keys.len() as f64;
            model.keys.iter().map(|k| (k.clone(), p)).collect()
        }
    };
    out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

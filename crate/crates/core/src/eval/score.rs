//! Micro-averaged precision, recall and F1 per task.
//!
//! Matching keys:
//! - NER: (sentence, start, end, type)
//! - RE: (sentence, head, tail, relation), direction-sensitive
//! - EE: (sentence, event type)
//! - EAE: (sentence, event type, filler span, role)
//!
//! Duplicate items within a document count once.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::{Corpus, CorpusDocument};
use super::EvalError;
use crate::candidates::Task;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub true_positives: usize,
    pub predicted: usize,
    pub gold: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// Nothing predicted and nothing expected is a perfect score. Otherwise
    /// an empty denominator gives 0.
    pub fn from_counts(true_positives: usize, predicted: usize, gold: usize) -> Prf {
        let (precision, recall) = if predicted == 0 && gold == 0 {
            (1.0, 1.0)
        } else {
            let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
            (ratio(true_positives, predicted), ratio(true_positives, gold))
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf {
            true_positives,
            predicted,
            gold,
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub task: Task,
    /// Threshold applied to prediction scores, if any.
    pub threshold: Option<f64>,
    pub micro: Prf,
    pub per_type: BTreeMap<String, Prf>,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Aligned plain-text table, one row per type followed by the micro row.
    pub fn to_table(&self) -> String {
        let mut rows: Vec<(String, &Prf)> = self.per_type.iter().map(|(k, v)| (k.clone(), v)).collect();
        rows.push(("micro".to_string(), &self.micro));
        let width = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(4);
        let mut out = String::new();
        match self.threshold {
            Some(t) => writeln!(out, "{} (threshold {t:.2})", self.task).unwrap(),
            None => writeln!(out, "{}", self.task).unwrap(),
        }
        writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}",
            "type", "P", "R", "F1", "tp", "pred", "gold"
        )
        .unwrap();
        for (name, p) in rows {
            writeln!(
                out,
                "{:<width$}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6}  {:>6}  {:>6}",
                name, p.precision, p.recall, p.f1, p.true_positives, p.predicted, p.gold
            )
            .unwrap();
        }
        out
    }
}

type Key = (String, Vec<usize>);
type Counts = HashMap<String, [usize; 3]>;

fn kept(score: Option<f64>, threshold: Option<f64>) -> bool {
    match (score, threshold) {
        (Some(s), Some(t)) => s >= t,
        _ => true,
    }
}

fn keys(doc: &CorpusDocument, task: Task, threshold: Option<f64>) -> HashSet<Key> {
    match task {
        Task::Ner => doc
            .entities
            .iter()
            .filter(|e| kept(e.score, threshold))
            .map(|e| (e.label.clone(), vec![e.sentence, e.start, e.end]))
            .collect(),
        Task::Re => doc
            .relations
            .iter()
            .filter(|r| kept(r.score, threshold))
            .map(|r| (r.label.clone(), vec![r.sentence, r.head[0], r.head[1], r.tail[0], r.tail[1]]))
            .collect(),
        Task::Ee => doc
            .events
            .iter()
            .filter(|e| kept(e.score, threshold))
            .map(|e| (e.label.clone(), vec![e.sentence]))
            .collect(),
        // The event type is part of the key but rows are per role, so it is
        // folded into the label and split back out when counting.
        Task::Eae => doc
            .arguments
            .iter()
            .filter(|a| kept(a.score, threshold))
            .map(|a| (format!("{}\u{0}{}", a.label, a.event_type), vec![a.sentence, a.start, a.end]))
            .collect(),
    }
}

fn type_of(label: &str) -> &str {
    label.split('\u{0}').next().unwrap_or(label)
}

fn count_document(pred: &CorpusDocument, gold: &CorpusDocument, task: Task, threshold: Option<f64>) -> Counts {
    let p = keys(pred, task, threshold);
    let g = keys(gold, task, None);
    let mut counts = Counts::new();
    for k in &p {
        let c = counts.entry(type_of(&k.0).to_string()).or_default();
        c[1] += 1;
        if g.contains(k) {
            c[0] += 1;
        }
    }
    for k in &g {
        counts.entry(type_of(&k.0).to_string()).or_default()[2] += 1;
    }
    counts
}

fn merge(mut a: Counts, b: Counts) -> Counts {
    for (k, v) in b {
        let c = a.entry(k).or_default();
        for i in 0..3 {
            c[i] += v[i];
        }
    }
    a
}

/// Pairs prediction documents with gold documents by id.
pub(crate) fn align<'a>(pred: &'a Corpus, gold: &'a Corpus) -> Result<Vec<(&'a CorpusDocument, &'a CorpusDocument)>, EvalError> {
    let by_id: HashMap<&str, &CorpusDocument> = pred.documents.iter().map(|d| (d.id.as_str(), d)).collect();
    if by_id.len() != pred.documents.len() {
        return Err(EvalError::DocumentMismatch("duplicate document id in predictions".into()));
    }
    let mut pairs = Vec::with_capacity(gold.documents.len());
    for g in &gold.documents {
        let p = by_id
            .get(g.id.as_str())
            .ok_or_else(|| EvalError::DocumentMismatch(format!("no predictions for document {}", g.id)))?;
        if p.sentences.len() != g.sentences.len() {
            return Err(EvalError::DocumentMismatch(format!(
                "document {} has {} predicted sentences but {} gold sentences",
                g.id,
                p.sentences.len(),
                g.sentences.len()
            )));
        }
        pairs.push((*p, g));
    }
    if pred.documents.len() != gold.documents.len() {
        let gold_ids: HashSet<&str> = gold.documents.iter().map(|d| d.id.as_str()).collect();
        let extra = pred
            .documents
            .iter()
            .find(|d| !gold_ids.contains(d.id.as_str()))
            .map(|d| d.id.clone())
            .unwrap_or_default();
        return Err(EvalError::DocumentMismatch(format!("document {extra} is not in the gold corpus")));
    }
    Ok(pairs)
}

pub(crate) fn score_aligned(pairs: &[(&CorpusDocument, &CorpusDocument)], task: Task, threshold: Option<f64>) -> ScoreReport {
    let counts = pairs
        .par_iter()
        .map(|(p, g)| count_document(p, g, task, threshold))
        .reduce(Counts::new, merge);
    let mut total = [0usize; 3];
    let mut per_type = BTreeMap::new();
    for (k, c) in counts {
        for i in 0..3 {
            total[i] += c[i];
        }
        per_type.insert(k, Prf::from_counts(c[0], c[1], c[2]));
    }
    ScoreReport {
        task,
        threshold,
        micro: Prf::from_counts(total[0], total[1], total[2]),
        per_type,
    }
}

/// Scores `pred` against `gold` for one task. With a threshold, prediction
/// items whose score is below it are dropped; unscored items are kept.
pub fn score_task(pred: &Corpus, gold: &Corpus, task: Task, threshold: Option<f64>) -> Result<ScoreReport, EvalError> {
    let pairs = align(pred, gold)?;
    Ok(score_aligned(&pairs, task, threshold))
}

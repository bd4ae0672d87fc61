//! Threshold search on development data.

use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::score::{align, score_aligned, ScoreReport};
use super::EvalError;
use crate::candidates::Task;

pub const DEFAULT_STEP: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub threshold: f64,
    pub report: ScoreReport,
    /// (threshold, micro F1) for every grid point, ascending.
    pub curve: Vec<(f64, f64)>,
}

/// Grid `i / n` for `i = 0..=n`, with `n = round(1 / step)`.
pub fn grid(step: f64) -> Result<Vec<f64>, EvalError> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(EvalError::Invalid(format!("grid step {step} must lie in (0, 1]")));
    }
    let n = (1.0 / step).round() as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

/// Scores the predictions at every grid threshold and returns the one with
/// the highest micro F1; ties go to the largest threshold.
pub fn tune_threshold(pred: &Corpus, gold: &Corpus, task: Task, step: f64) -> Result<TuneResult, EvalError> {
    let points = grid(step)?;
    let empty = gold.documents.is_empty()
        || (gold.documents.iter().all(|d| d.is_empty_for(task)) && pred.documents.iter().all(|d| d.is_empty_for(task)));
    if empty {
        return Err(EvalError::EmptyDevSet);
    }
    let pairs = align(pred, gold)?;
    let mut best: Option<ScoreReport> = None;
    let mut curve = Vec::with_capacity(points.len());
    for t in points {
        let report = score_aligned(&pairs, task, Some(t));
        curve.push((t, report.micro.f1));
        if best.as_ref().is_none_or(|b| report.micro.f1 >= b.micro.f1) {
            best = Some(report);
        }
    }
    let report = best.expect("grid is never empty");
    Ok(TuneResult {
        threshold: report.threshold.expect("tuned reports carry a threshold"),
        report,
        curve,
    })
}

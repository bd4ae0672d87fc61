//! Entailment scoring interface and the table-driven mock backend.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;

/// Tolerance on the probability simplex.
pub const SIMPLEX_TOLERANCE: f64 = 1e-6;

/// Three-way entailment distribution for one (premise, hypothesis) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntailmentScore {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid probability triple ({entail}, {neutral}, {contradict}): {reason}")]
pub struct InvalidScore {
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
    pub reason: &'static str,
}

impl EntailmentScore {
    /// Fully neutral: the score given to pairs a mock table does not know.
    pub const NEUTRAL: EntailmentScore = EntailmentScore {
        entail: 0.0,
        neutral: 1.0,
        contradict: 0.0,
    };

    pub fn new(entail: f64, neutral: f64, contradict: f64) -> Result<Self, InvalidScore> {
        let s = EntailmentScore {
            entail,
            neutral,
            contradict,
        };
        s.validate().map(|_| s)
    }

    pub fn validate(&self) -> Result<(), InvalidScore> {
        let err = |reason| InvalidScore {
            entail: self.entail,
            neutral: self.neutral,
            contradict: self.contradict,
            reason,
        };
        let parts = [self.entail, self.neutral, self.contradict];
        if parts.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(err("each probability must lie in [0, 1]"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(err("probabilities must sum to 1"));
        }
        Ok(())
    }
}

/// Scores hypotheses against a premise. Implementations must be safe to call
/// concurrently and must return one score per hypothesis, in input order.
pub trait EntailmentBackend: Send + Sync {
    fn entail_batch(&self, premise: &str, hypotheses: &[String]) -> Result<Vec<EntailmentScore>, BackendError>;
}

impl<B: EntailmentBackend + ?Sized> EntailmentBackend for std::sync::Arc<B> {
    fn entail_batch(&self, premise: &str, hypotheses: &[String]) -> Result<Vec<EntailmentScore>, BackendError> {
        (**self).entail_batch(premise, hypotheses)
    }
}

/// One line of the oracle file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub premise: String,
    pub hypothesis: String,
    pub entail: f64,
    pub neutral: f64,
    pub contradict: f64,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("oracle entry {index}: {source}")]
    InvalidScore { index: usize, source: InvalidScore },
    #[error("oracle entry {index} repeats the pair ({premise:?}, {hypothesis:?})")]
    Duplicate {
        index: usize,
        premise: String,
        hypothesis: String,
    },
}

/// Fixed (premise, hypothesis) → score table. Unknown pairs get the default
/// score, fully neutral unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTable {
    entries: HashMap<(String, String), EntailmentScore>,
    default: EntailmentScore,
}

impl Default for OracleTable {
    fn default() -> Self {
        OracleTable {
            entries: HashMap::new(),
            default: EntailmentScore::NEUTRAL,
        }
    }
}

impl OracleTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(default: EntailmentScore) -> Self {
        OracleTable {
            entries: HashMap::new(),
            default,
        }
    }

    pub fn insert(&mut self, premise: impl Into<String>, hypothesis: impl Into<String>, score: EntailmentScore) {
        self.entries.insert((premise.into(), hypothesis.into()), score);
    }

    pub fn get(&self, premise: &str, hypothesis: &str) -> Option<EntailmentScore> {
        // Tuple keys need owned strings for lookup.
        self.entries
            .get(&(premise.to_string(), hypothesis.to_string()))
            .copied()
    }

    pub fn lookup(&self, premise: &str, hypothesis: &str) -> EntailmentScore {
        self.get(premise, hypothesis).unwrap_or(self.default)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by (premise, hypothesis), in the file format.
    pub fn entries(&self) -> Vec<OracleEntry> {
        let mut out: Vec<OracleEntry> = self
            .entries
            .iter()
            .map(|((p, h), s)| OracleEntry {
                premise: p.clone(),
                hypothesis: h.clone(),
                entail: s.entail,
                neutral: s.neutral,
                contradict: s.contradict,
            })
            .collect();
        out.sort_by(|a, b| (&a.premise, &a.hypothesis).cmp(&(&b.premise, &b.hypothesis)));
        out
    }
}

/// Reads an oracle file: a JSON list of
/// `{"premise", "hypothesis", "entail", "neutral", "contradict"}` objects.
pub fn load_oracle(source: &[u8]) -> Result<OracleTable, OracleError> {
    let entries: Vec<OracleEntry> = serde_json::from_slice(source).map_err(|e| OracleError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut table = OracleTable::new();
    for (index, e) in entries.into_iter().enumerate() {
        let score = EntailmentScore::new(e.entail, e.neutral, e.contradict)
            .map_err(|source| OracleError::InvalidScore { index, source })?;
        if table.get(&e.premise, &e.hypothesis).is_some() {
            return Err(OracleError::Duplicate {
                index,
                premise: e.premise,
                hypothesis: e.hypothesis,
            });
        }
        table.insert(e.premise, e.hypothesis, score);
    }
    Ok(table)
}

pub fn save_oracle(table: &OracleTable) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&table.entries()).expect("oracle serializes");
    out.push(b'\n');
    out
}

/// In-process backend answering from an [`OracleTable`].
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    table: OracleTable,
}

impl MockBackend {
    pub fn new(table: OracleTable) -> Self {
        MockBackend { table }
    }

    pub fn table(&self) -> &OracleTable {
        &self.table
    }
}

impl EntailmentBackend for MockBackend {
    fn entail_batch(&self, premise: &str, hypotheses: &[String]) -> Result<Vec<EntailmentScore>, BackendError> {
        Ok(hypotheses.iter().map(|h| self.table.lookup(premise, h)).collect())
    }
}

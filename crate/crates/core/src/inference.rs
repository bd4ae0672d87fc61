//! Entailment decision rule.
//!
//! Each type's score is the highest entailment probability among its
//! templates. Single-label tasks (NER, RE, EAE) pick the best type if it
//! reaches the threshold and otherwise return the negative class. Event
//! classification is multi-label: every type at or above the threshold is
//! reported. Ties go to the type declared first, then the template declared
//! first. Neutral and contradiction probabilities do not affect decisions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backend::BackendError;
use crate::candidates::{Candidate, Task};
use crate::entailment::{EntailmentBackend, EntailmentScore};
use crate::verbalize::Hypothesis;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub task_thresholds: BTreeMap<Task, f64>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            threshold: DEFAULT_THRESHOLD,
            task_thresholds: BTreeMap::new(),
        }
    }
}

impl InferenceConfig {
    pub fn with_threshold(threshold: f64) -> Self {
        InferenceConfig {
            threshold,
            ..Default::default()
        }
    }

    pub fn threshold_for(&self, task: Task) -> f64 {
        self.task_thresholds.get(&task).copied().unwrap_or(self.threshold)
    }

    /// Returns a message for every threshold outside [0, 1].
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let bad = |t: f64| !(0.0..=1.0).contains(&t);
        if bad(self.threshold) {
            out.push(format!("threshold {} is outside [0, 1]", self.threshold));
        }
        for (task, t) in &self.task_thresholds {
            if bad(*t) {
                out.push(format!("{task} threshold {t} is outside [0, 1]"));
            }
        }
        out
    }
}

/// Best entailment probability of one type and the template that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub label: String,
    pub score: f64,
    pub template_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    pub id: String,
    pub task: Task,
    pub candidate: Candidate,
    /// Winning type, or `None` for the negative class.
    pub label: Option<String>,
    /// Entailment probability of the winning hypothesis. For negatives this
    /// is the best score seen, so the decision can be replayed at another
    /// threshold.
    pub score: f64,
    pub winning_template_id: Option<String>,
    /// Per-type best scores, highest first (ties in declaration order).
    pub all_scores: Vec<TypeScore>,
}

impl Extraction {
    pub fn is_positive(&self) -> bool {
        self.label.is_some()
    }

    /// Best-scoring type regardless of the threshold.
    pub fn top(&self) -> Option<&TypeScore> {
        self.all_scores.first()
    }
}

/// Per-type maxima in declaration order (order of first appearance in
/// `hypotheses`).
pub fn aggregate(hypotheses: &[Hypothesis], scores: &[EntailmentScore]) -> Vec<TypeScore> {
    let mut out: Vec<TypeScore> = Vec::new();
    for (h, s) in hypotheses.iter().zip(scores) {
        match out.iter_mut().find(|t| t.label == h.label) {
            Some(t) => {
                if s.entail > t.score {
                    t.score = s.entail;
                    t.template_id = h.template_id.clone();
                }
            }
            None => out.push(TypeScore {
                label: h.label.clone(),
                score: s.entail,
                template_id: h.template_id.clone(),
            }),
        }
    }
    out
}

/// Sorts by score, highest first; the sort is stable, so equal scores keep
/// declaration order.
fn ranked(mut scores: Vec<TypeScore>) -> Vec<TypeScore> {
    scores.sort_by(|a, b| b.score.total_cmp(&a.score));
    scores
}

/// Deterministic identifier derived from the extraction's content.
pub fn extraction_id(task: Task, premise: &str, candidate: &Candidate, label: Option<&str>) -> String {
    let mut h = Sha256::new();
    let mut field = |s: &str| {
        h.update((s.len() as u64).to_le_bytes());
        h.update(s.as_bytes());
    };
    field(task.as_str());
    field(premise);
    field(&candidate.sentence_index.to_string());
    for span in [&candidate.primary, &candidate.secondary] {
        match span {
            Some(s) => field(&format!("{}-{}", s.char_start, s.char_end)),
            None => field("-"),
        }
    }
    field(&serde_json::to_string(&candidate.context).expect("context serializes"));
    field(label.unwrap_or(""));
    let digest = h.finalize();
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("{}-{hex}", task.as_str().to_ascii_lowercase())
}

fn score_all(
    premise: &str,
    hypotheses: &[Hypothesis],
    backend: &dyn EntailmentBackend,
) -> Result<Vec<EntailmentScore>, BackendError> {
    if hypotheses.is_empty() {
        return Ok(Vec::new());
    }
    let texts: Vec<String> = hypotheses.iter().map(|h| h.text.clone()).collect();
    let scores = backend.entail_batch(premise, &texts)?;
    if scores.len() != texts.len() {
        return Err(BackendError::Malformed(format!(
            "backend returned {} scores for {} hypotheses",
            scores.len(),
            texts.len()
        )));
    }
    Ok(scores)
}

/// Single-label decision for one candidate given its entailment scores.
pub fn decide(
    premise: &str,
    candidate: &Candidate,
    hypotheses: &[Hypothesis],
    scores: &[EntailmentScore],
    threshold: f64,
) -> Extraction {
    let per_type = aggregate(hypotheses, scores);
    let all_scores = ranked(per_type);
    let (label, score, template) = match all_scores.first() {
        Some(best) if best.score >= threshold => (Some(best.label.clone()), best.score, Some(best.template_id.clone())),
        Some(best) => (None, best.score, None),
        None => (None, 0.0, None),
    };
    Extraction {
        id: extraction_id(candidate.task, premise, candidate, label.as_deref()),
        task: candidate.task,
        candidate: candidate.clone(),
        label,
        score,
        winning_template_id: template,
        all_scores,
    }
}

/// Multi-label decision: one positive extraction per type at or above the
/// threshold, in declaration order.
pub fn decide_multi(
    premise: &str,
    candidate: &Candidate,
    hypotheses: &[Hypothesis],
    scores: &[EntailmentScore],
    threshold: f64,
) -> Vec<Extraction> {
    let per_type = aggregate(hypotheses, scores);
    let all_scores = ranked(per_type.clone());
    per_type
        .into_iter()
        .filter(|t| t.score >= threshold)
        .map(|t| Extraction {
            id: extraction_id(candidate.task, premise, candidate, Some(&t.label)),
            task: candidate.task,
            candidate: candidate.clone(),
            label: Some(t.label),
            score: t.score,
            winning_template_id: Some(t.template_id),
            all_scores: all_scores.clone(),
        })
        .collect()
}

/// Scores `hypotheses` and applies the single-label rule. An empty
/// hypothesis list yields a negative with score 0 without calling the
/// backend.
pub fn classify_candidate(
    premise: &str,
    candidate: &Candidate,
    hypotheses: &[Hypothesis],
    backend: &dyn EntailmentBackend,
    config: &InferenceConfig,
) -> Result<Extraction, BackendError> {
    let scores = score_all(premise, hypotheses, backend)?;
    Ok(decide(
        premise,
        candidate,
        hypotheses,
        &scores,
        config.threshold_for(candidate.task),
    ))
}

/// Scores event hypotheses for one candidate and applies the multi-label rule.
pub fn classify_events(
    premise: &str,
    candidate: &Candidate,
    hypotheses: &[Hypothesis],
    backend: &dyn EntailmentBackend,
    config: &InferenceConfig,
) -> Result<Vec<Extraction>, BackendError> {
    let scores = score_all(premise, hypotheses, backend)?;
    Ok(decide_multi(
        premise,
        candidate,
        hypotheses,
        &scores,
        config.threshold_for(Task::Ee),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{CandidateContext, Span};
    use crate::entailment::{MockBackend, OracleTable};

    fn candidate(task: Task) -> Candidate {
        Candidate {
            task,
            sentence_index: 0,
            primary: Some(Span {
                sentence_index: 0,
                char_start: 0,
                char_end: 4,
                text: "John".into(),
            }),
            secondary: None,
            context: CandidateContext::None,
            labels: vec![],
            sources: vec![],
        }
    }

    /// Builds hypotheses and a mock backend from (type, [entail per template]).
    fn fixture(spec: &[(&str, &[f64])]) -> (Vec<Hypothesis>, MockBackend) {
        let mut hyps = Vec::new();
        let mut table = OracleTable::new();
        for (label, scores) in spec {
            for (i, e) in scores.iter().enumerate() {
                let text = format!("{label} hypothesis {i}");
                table.insert("p", text.clone(), EntailmentScore::new(*e, 1.0 - e, 0.0).unwrap());
                hyps.push(Hypothesis {
                    text,
                    label: label.to_string(),
                    template_id: format!("t{i}"),
                });
            }
        }
        (hyps, MockBackend::new(table))
    }

    #[test]
    fn argmax_above_threshold() {
        let (h, b) = fixture(&[("PERSON", &[0.98, 0.90]), ("ORG", &[0.20])]);
        let x = classify_candidate("p", &candidate(Task::Ner), &h, &b, &InferenceConfig::default()).unwrap();
        assert_eq!(x.label.as_deref(), Some("PERSON"));
        assert_eq!(x.score, 0.98);
        assert_eq!(x.winning_template_id.as_deref(), Some("t0"));
        assert_eq!(x.all_scores.iter().map(|t| t.label.as_str()).collect::<Vec<_>>(), vec!["PERSON", "ORG"]);
    }

    #[test]
    fn all_below_default_threshold_is_negative() {
        let (h, b) = fixture(&[("PERSON", &[0.40]), ("ORG", &[0.30])]);
        let x = classify_candidate("p", &candidate(Task::Ner), &h, &b, &InferenceConfig::default()).unwrap();
        assert_eq!(x.label, None);
        assert_eq!(x.score, 0.40);
        assert_eq!(x.top().unwrap().label, "PERSON");
    }

    #[test]
    fn empty_hypotheses_is_negative_zero() {
        let b = MockBackend::default();
        let x = classify_candidate("p", &candidate(Task::Re), &[], &b, &InferenceConfig::default()).unwrap();
        assert_eq!(x.label, None);
        assert_eq!(x.score, 0.0);
        assert!(x.all_scores.is_empty());
    }

    #[test]
    fn ties_follow_declaration_order() {
        let (h, b) = fixture(&[("A", &[0.3, 0.7]), ("B", &[0.7, 0.7])]);
        let x = classify_candidate("p", &candidate(Task::Ner), &h, &b, &InferenceConfig::default()).unwrap();
        assert_eq!(x.label.as_deref(), Some("A"));
        assert_eq!(x.winning_template_id.as_deref(), Some("t1"));
        let (h, b) = fixture(&[("A", &[0.2]), ("B", &[0.7, 0.7])]);
        let x = classify_candidate("p", &candidate(Task::Ner), &h, &b, &InferenceConfig::default()).unwrap();
        assert_eq!(x.winning_template_id.as_deref(), Some("t0"));
    }

    #[test]
    fn threshold_is_inclusive() {
        let (h, b) = fixture(&[("A", &[0.5])]);
        let x = classify_candidate("p", &candidate(Task::Ner), &h, &b, &InferenceConfig::default()).unwrap();
        assert!(x.is_positive());
    }

    #[test]
    fn task_override_applies() {
        let (h, b) = fixture(&[("A", &[0.6])]);
        let mut config = InferenceConfig::default();
        config.task_thresholds.insert(Task::Ner, 0.7);
        let x = classify_candidate("p", &candidate(Task::Ner), &h, &b, &config).unwrap();
        assert!(!x.is_positive());
        let x = classify_candidate("p", &candidate(Task::Re), &h, &b, &config).unwrap();
        assert!(x.is_positive());
    }

    #[test]
    fn multi_label_events() {
        let (h, b) = fixture(&[("Life.Die", &[0.9]), ("Justice.Jail", &[0.4, 0.7]), ("Movement", &[0.2])]);
        let c = Candidate {
            primary: None,
            ..candidate(Task::Ee)
        };
        let xs = classify_events("p", &c, &h, &b, &InferenceConfig::default()).unwrap();
        let labels: Vec<_> = xs.iter().map(|x| x.label.clone().unwrap()).collect();
        assert_eq!(labels, vec!["Life.Die", "Justice.Jail"]);
        assert_eq!(xs[1].winning_template_id.as_deref(), Some("t1"));
        assert_ne!(xs[0].id, xs[1].id);

        let (h, b) = fixture(&[("Life.Die", &[0.1])]);
        assert!(classify_events("p", &c, &h, &b, &InferenceConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn short_backend_answer_is_malformed() {
        struct Short;
        impl EntailmentBackend for Short {
            fn entail_batch(&self, _: &str, _: &[String]) -> Result<Vec<EntailmentScore>, BackendError> {
                Ok(vec![])
            }
        }
        let (h, _) = fixture(&[("A", &[0.5])]);
        let r = classify_candidate("p", &candidate(Task::Ner), &h, &Short, &InferenceConfig::default());
        assert!(matches!(r, Err(BackendError::Malformed(_))));
    }

    #[test]
    fn ids_are_content_derived() {
        let c = candidate(Task::Ner);
        assert_eq!(extraction_id(Task::Ner, "p", &c, Some("A")), extraction_id(Task::Ner, "p", &c, Some("A")));
        assert_ne!(extraction_id(Task::Ner, "p", &c, Some("A")), extraction_id(Task::Ner, "p", &c, Some("B")));
        assert_ne!(extraction_id(Task::Ner, "p", &c, Some("A")), extraction_id(Task::Ner, "q", &c, Some("A")));
        assert!(extraction_id(Task::Ner, "p", &c, None).starts_with("ner-"));
    }

    #[test]
    fn config_problems() {
        assert!(InferenceConfig::default().problems().is_empty());
        let mut c = InferenceConfig::with_threshold(1.5);
        c.task_thresholds.insert(Task::Re, -0.1);
        assert_eq!(c.problems().len(), 2);
    }
}

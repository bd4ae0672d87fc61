//! Gold-corpus JSON format, also used for scored predictions.
//!
//! ```json
//! {
//!   "labels": {"entity_types": ["PER"], "relation_types": [], "event_types": [], "roles": []},
//!   "documents": [{
//!     "id": "d1",
//!     "sentences": ["John Smith died in Florida ."],
//!     "entities":  [{"sentence": 0, "start": 0, "end": 10, "label": "PER"}],
//!     "relations": [{"sentence": 0, "head": [0, 10], "tail": [19, 26], "label": "LivesIn"}],
//!     "events":    [{"sentence": 0, "label": "Life.Die"}],
//!     "arguments": [{"sentence": 0, "event_type": "Life.Die", "start": 0, "end": 10, "label": "Victim"}]
//!   }]
//! }
//! ```
//!
//! Offsets are character offsets into the sentence. Every item may carry a
//! `score` (the winning entailment probability); prediction files use it to
//! replay the decision at other thresholds.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::candidates::{CandidateContext, Task};
use crate::inference::Extraction;
use crate::pipeline::DocumentAnnotations;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelInventory {
    #[serde(default)]
    pub entity_types: Vec<String>,
    #[serde(default)]
    pub relation_types: Vec<String>,
    #[serde(default)]
    pub event_types: Vec<String>,
    #[serde(default)]
    pub roles: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityItem {
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationItem {
    pub sentence: usize,
    pub head: [usize; 2],
    pub tail: [usize; 2],
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventItem {
    pub sentence: usize,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgumentItem {
    pub sentence: usize,
    pub event_type: String,
    pub start: usize,
    pub end: usize,
    /// Role name.
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    pub sentences: Vec<String>,
    #[serde(default)]
    pub entities: Vec<EntityItem>,
    #[serde(default)]
    pub relations: Vec<RelationItem>,
    #[serde(default)]
    pub events: Vec<EventItem>,
    #[serde(default)]
    pub arguments: Vec<ArgumentItem>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<LabelInventory>,
    pub documents: Vec<CorpusDocument>,
}

fn top_label(x: &Extraction) -> Option<String> {
    x.label.clone().or_else(|| x.top().map(|t| t.label.clone()))
}

fn range(span: &Option<crate::candidates::Span>) -> Option<[usize; 2]> {
    span.as_ref().map(|s| [s.char_start, s.char_end])
}

impl CorpusDocument {
    /// Prediction record for one pipeline run. Rejected candidates are kept
    /// with their best label and score so thresholds can be replayed; event
    /// classification contributes every scored type of every candidate,
    /// reduced to the best score per (sentence, type).
    pub fn from_annotations(id: impl Into<String>, doc: &DocumentAnnotations) -> Self {
        let mut out = CorpusDocument {
            id: id.into(),
            sentences: doc.sentences.iter().map(|s| s.text.trim_end().to_string()).collect(),
            ..Default::default()
        };
        for x in doc.extractions().chain(doc.rejected.iter()) {
            let c = &x.candidate;
            let sentence = c.sentence_index;
            match x.task {
                Task::Ner => {
                    let (Some([start, end]), Some(label)) = (range(&c.primary), top_label(x)) else {
                        continue;
                    };
                    out.entities.push(EntityItem {
                        sentence,
                        start,
                        end,
                        label,
                        score: Some(x.score),
                    });
                }
                Task::Re => {
                    let (Some(head), Some(tail), Some(label)) = (range(&c.primary), range(&c.secondary), top_label(x)) else {
                        continue;
                    };
                    out.relations.push(RelationItem {
                        sentence,
                        head,
                        tail,
                        label,
                        score: Some(x.score),
                    });
                }
                Task::Ee => {
                    for t in &x.all_scores {
                        match out.events.iter_mut().find(|e| e.sentence == sentence && e.label == t.label) {
                            Some(e) => {
                                if e.score.is_some_and(|s| s < t.score) {
                                    e.score = Some(t.score);
                                }
                            }
                            None => out.events.push(EventItem {
                                sentence,
                                label: t.label.clone(),
                                score: Some(t.score),
                            }),
                        }
                    }
                }
                Task::Eae => {
                    let CandidateContext::Argument { event_type, .. } = &c.context else {
                        continue;
                    };
                    let (Some([start, end]), Some(label)) = (range(&c.secondary), top_label(x)) else {
                        continue;
                    };
                    out.arguments.push(ArgumentItem {
                        sentence,
                        event_type: event_type.clone(),
                        start,
                        end,
                        label,
                        score: Some(x.score),
                    });
                }
            }
        }
        out
    }

    pub fn is_empty_for(&self, task: Task) -> bool {
        match task {
            Task::Ner => self.entities.is_empty(),
            Task::Re => self.relations.is_empty(),
            Task::Ee => self.events.is_empty(),
            Task::Eae => self.arguments.is_empty(),
        }
    }
}

impl Corpus {
    /// Checks document ids, sentence indices, span bounds, scores and (when
    /// an inventory is present) labels.
    pub fn validate(&self) -> Result<(), EvalError> {
        let mut ids = HashSet::new();
        for (d, doc) in self.documents.iter().enumerate() {
            let bad = |msg: String| EvalError::Invalid(format!("document {} ({}): {msg}", d, doc.id));
            if !ids.insert(doc.id.as_str()) {
                return Err(bad("duplicate document id".into()));
            }
            let lens: Vec<usize> = doc.sentences.iter().map(|s| s.chars().count()).collect();
            let check_sentence = |s: usize| {
                lens.get(s)
                    .copied()
                    .ok_or_else(|| bad(format!("sentence {s} does not exist")))
            };
            let check_span = |s: usize, start: usize, end: usize| -> Result<(), EvalError> {
                let len = check_sentence(s)?;
                if start >= end || end > len {
                    return Err(bad(format!("span {start}..{end} is not valid in sentence {s}")));
                }
                Ok(())
            };
            let check_score = |score: Option<f64>| match score {
                Some(p) if !(0.0..=1.0).contains(&p) => Err(bad(format!("score {p} outside [0, 1]"))),
                _ => Ok(()),
            };
            let inv = self.labels.as_ref();
            let check_label = |kind: &str, declared: Option<&Vec<String>>, label: &str| match declared {
                Some(list) if !list.iter().any(|l| l == label) => Err(bad(format!("undeclared {kind} {label}"))),
                _ => Ok(()),
            };
            for e in &doc.entities {
                check_span(e.sentence, e.start, e.end)?;
                check_score(e.score)?;
                check_label("entity type", inv.map(|i| &i.entity_types), &e.label)?;
            }
            for r in &doc.relations {
                check_span(r.sentence, r.head[0], r.head[1])?;
                check_span(r.sentence, r.tail[0], r.tail[1])?;
                check_score(r.score)?;
                check_label("relation type", inv.map(|i| &i.relation_types), &r.label)?;
            }
            for e in &doc.events {
                check_sentence(e.sentence)?;
                check_score(e.score)?;
                check_label("event type", inv.map(|i| &i.event_types), &e.label)?;
            }
            for a in &doc.arguments {
                check_span(a.sentence, a.start, a.end)?;
                check_score(a.score)?;
                check_label("event type", inv.map(|i| &i.event_types), &a.event_type)?;
                check_label("role", inv.map(|i| &i.roles), &a.label)?;
            }
        }
        Ok(())
    }
}

pub fn load_corpus(source: &[u8]) -> Result<Corpus, EvalError> {
    let corpus: Corpus = serde_json::from_slice(source).map_err(|e| EvalError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    corpus.validate()?;
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(corpus).expect("corpus serializes");
    out.push(b'\n');
    out
}

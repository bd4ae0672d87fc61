//! Task orchestration.
//!
//! End-to-end mode runs preprocessing, then NER, EE, RE (on the NER
//! entities) and EAE (on the EE events and NER entities). Task mode runs a
//! single task; RE and EAE take their entities and events from user-supplied
//! gold spans, falling back to the configured sources.
//!
//! Stages run one after another; candidates inside a stage are scored in
//! parallel. A backend failure stops the run and returns what was committed
//! so far, marked incomplete.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::BackendError;
use crate::candidates::{
    argument_candidates, ner_candidates, relation_pair_candidates, trigger_candidates, Candidate, EntityMention,
    EventMention, Span, Task,
};
use crate::config::{EntitySource, RunConfig};
use crate::entailment::{EntailmentBackend, MockBackend, OracleTable};
use crate::inference::{decide, decide_multi, Extraction};
use crate::schema::{validate_schema, Schema, TriggerMode, ValidationReport};
use crate::text::{pos_tag_all, segment_and_tokenize, RuleTagger, Sentence, Tagger};
use crate::verbalize::{hypotheses_for, Hypothesis, VerbalizeError};

/// The scoring and tagging services a run uses.
#[derive(Clone)]
pub struct Backends {
    pub entailment: Arc<dyn EntailmentBackend>,
    pub tagger: Arc<dyn Tagger>,
}

impl Backends {
    pub fn new(entailment: Arc<dyn EntailmentBackend>, tagger: Arc<dyn Tagger>) -> Self {
        Backends { entailment, tagger }
    }

    /// Mock entailment over `table` with the built-in rule tagger.
    pub fn mock(table: OracleTable) -> Self {
        Backends {
            entailment: Arc::new(MockBackend::new(table)),
            tagger: Arc::new(RuleTagger),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    E2e,
    Task,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldEntity {
    #[serde(default)]
    pub id: Option<String>,
    pub sentence_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub entity_type: String,
}

/// A user-tagged event. Without offsets it marks a sentence-level event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldTrigger {
    #[serde(default)]
    pub id: Option<String>,
    pub sentence_index: usize,
    #[serde(default)]
    pub char_start: Option<usize>,
    #[serde(default)]
    pub char_end: Option<usize>,
    pub event_type: String,
}

/// User-tagged spans feeding RE and EAE in task mode. Offsets are relative
/// to the sentence.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct GoldSpans {
    #[serde(default)]
    pub entities: Vec<GoldEntity>,
    #[serde(default)]
    pub triggers: Vec<GoldTrigger>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub mode: Mode,
    pub task: Option<Task>,
    pub schema_version: u64,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentAnnotations {
    pub sentences: Vec<Sentence>,
    pub entities: Vec<Extraction>,
    pub relations: Vec<Extraction>,
    pub events: Vec<Extraction>,
    pub arguments: Vec<Extraction>,
    /// Single-label candidates that fell below the threshold.
    pub rejected: Vec<Extraction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<GoldSpans>,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub provenance: Provenance,
}

impl DocumentAnnotations {
    fn new(provenance: Provenance) -> Self {
        DocumentAnnotations {
            sentences: Vec::new(),
            entities: Vec::new(),
            relations: Vec::new(),
            events: Vec::new(),
            arguments: Vec::new(),
            rejected: Vec::new(),
            gold: None,
            warnings: Vec::new(),
            complete: true,
            error: None,
            provenance,
        }
    }

    /// Positive extractions of every task.
    pub fn extractions(&self) -> impl Iterator<Item = &Extraction> {
        self.entities
            .iter()
            .chain(&self.relations)
            .chain(&self.events)
            .chain(&self.arguments)
    }

    pub fn extractions_for(&self, task: Task) -> &[Extraction] {
        match task {
            Task::Ner => &self.entities,
            Task::Re => &self.relations,
            Task::Ee => &self.events,
            Task::Eae => &self.arguments,
        }
    }

    pub fn premise(&self, sentence_index: usize) -> Option<&str> {
        self.sentences.get(sentence_index).map(|s| s.premise())
    }

    /// Entity mentions built from the positive NER extractions.
    pub fn entity_mentions(&self) -> Vec<EntityMention> {
        self.entities.iter().filter_map(entity_mention).collect()
    }

    /// Event mentions built from the positive EE extractions.
    pub fn event_mentions(&self) -> Vec<EventMention> {
        self.events.iter().filter_map(event_mention).collect()
    }

    /// Gold spans equivalent to this run's NER and EE output, with the
    /// extraction ids carried over.
    pub fn as_gold(&self) -> GoldSpans {
        GoldSpans {
            entities: self
                .entity_mentions()
                .into_iter()
                .map(|m| GoldEntity {
                    id: Some(m.id),
                    sentence_index: m.span.sentence_index,
                    char_start: m.span.char_start,
                    char_end: m.span.char_end,
                    entity_type: m.entity_type,
                })
                .collect(),
            triggers: self
                .event_mentions()
                .into_iter()
                .map(|m| GoldTrigger {
                    id: Some(m.id),
                    sentence_index: m.sentence_index,
                    char_start: m.trigger.as_ref().map(|t| t.char_start),
                    char_end: m.trigger.as_ref().map(|t| t.char_end),
                    event_type: m.event_type,
                })
                .collect(),
        }
    }
}

pub fn entity_mention(x: &Extraction) -> Option<EntityMention> {
    Some(EntityMention {
        id: x.id.clone(),
        entity_type: x.label.clone()?,
        span: x.candidate.primary.clone()?,
    })
}

pub fn event_mention(x: &Extraction) -> Option<EventMention> {
    Some(EventMention {
        id: x.id.clone(),
        event_type: x.label.clone()?,
        sentence_index: x.candidate.sentence_index,
        trigger: x.candidate.primary.clone(),
    })
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Verbalize(#[from] VerbalizeError),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid schema: {0}")]
    InvalidSchema(ValidationReport),
    /// The request cannot be served with this configuration (e.g. RE
    /// without any entity source).
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid gold spans: {0}")]
    InvalidGold(String),
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        source: StageError,
        partial: Box<DocumentAnnotations>,
    },
}

impl PipelineError {
    pub fn partial(&self) -> Option<&DocumentAnnotations> {
        match self {
            PipelineError::Stage { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

struct Run<'a> {
    schema: &'a Schema,
    config: &'a RunConfig,
    backends: &'a Backends,
    doc: DocumentAnnotations,
}

type StageResult<T> = Result<T, (&'static str, StageError)>;

impl<'a> Run<'a> {
    fn start(mode: Mode, task: Option<Task>, schema: &'a Schema, config: &'a RunConfig, backends: &'a Backends) -> Result<Self, PipelineError> {
        let report = validate_schema(schema);
        if !report.is_valid() {
            return Err(PipelineError::InvalidSchema(report));
        }
        if let Err(e) = config.validate() {
            return Err(PipelineError::Config(e.to_string()));
        }
        Ok(Run {
            schema,
            config,
            backends,
            doc: DocumentAnnotations::new(Provenance {
                mode,
                task,
                schema_version: schema.version,
                config: config.clone(),
            }),
        })
    }

    fn fail(mut self, (stage, source): (&'static str, StageError)) -> PipelineError {
        self.doc.complete = false;
        self.doc.error = Some(format!("{stage} stage failed: {source}"));
        PipelineError::Stage {
            stage,
            source,
            partial: Box::new(self.doc),
        }
    }

    fn preprocess(&mut self, sentences: Vec<Sentence>) -> StageResult<()> {
        self.doc.sentences = sentences.clone();
        let tagged = pos_tag_all(&sentences, self.backends.tagger.as_ref()).map_err(|e| ("preprocess", e.into()))?;
        self.doc.sentences = tagged;
        Ok(())
    }

    fn verbalize(&mut self, candidates: Vec<Candidate>) -> Result<Vec<(Candidate, Vec<Hypothesis>)>, StageError> {
        let mut out = Vec::with_capacity(candidates.len());
        for c in candidates {
            let set = hypotheses_for(&c, self.schema)?;
            for s in set.skipped {
                let w = format!(
                    "{} template {}/{} skipped: {}",
                    c.task, s.label, s.template_id, s.reason
                );
                if !self.doc.warnings.contains(&w) {
                    self.doc.warnings.push(w);
                }
            }
            out.push((c, set.hypotheses));
        }
        Ok(out)
    }

    /// Scores every candidate (in parallel) and returns per-candidate
    /// extractions in candidate order.
    fn score(
        &self,
        work: &[(Candidate, Vec<Hypothesis>)],
        multi_label: bool,
    ) -> Result<Vec<Vec<Extraction>>, BackendError> {
        let backend = self.backends.entailment.as_ref();
        let sentences = &self.doc.sentences;
        let threshold = |task| self.config.inference.threshold_for(task);
        work.par_iter()
            .map(|(c, hyps)| {
                let premise = sentences[c.sentence_index].premise();
                if hyps.is_empty() {
                    return Ok(if multi_label { Vec::new() } else { vec![decide(premise, c, hyps, &[], threshold(c.task))] });
                }
                let texts: Vec<String> = hyps.iter().map(|h| h.text.clone()).collect();
                let scores = backend.entail_batch(premise, &texts)?;
                if scores.len() != texts.len() {
                    return Err(BackendError::Malformed(format!(
                        "backend returned {} scores for {} hypotheses",
                        scores.len(),
                        texts.len()
                    )));
                }
                Ok(if multi_label {
                    let positives = decide_multi(premise, c, hyps, &scores, threshold(c.task));
                    if positives.is_empty() {
                        // Keep the best score so the decision can be replayed.
                        vec![decide(premise, c, hyps, &scores, threshold(c.task))]
                    } else {
                        positives
                    }
                } else {
                    vec![decide(premise, c, hyps, &scores, threshold(c.task))]
                })
            })
            .collect()
    }

    fn single_label_stage(&mut self, stage: &'static str, task: Task, candidates: Vec<Candidate>) -> StageResult<()> {
        let work = self.verbalize(candidates).map_err(|e| (stage, e))?;
        let results = self.score(&work, false).map_err(|e| (stage, e.into()))?;
        for x in results.into_iter().flatten() {
            if x.is_positive() {
                match task {
                    Task::Ner => self.doc.entities.push(x),
                    Task::Re => self.doc.relations.push(x),
                    Task::Eae => self.doc.arguments.push(x),
                    Task::Ee => unreachable!("event classification is multi-label"),
                }
            } else {
                self.doc.rejected.push(x);
            }
        }
        Ok(())
    }

    fn ner(&mut self) -> StageResult<()> {
        let candidates = self
            .doc
            .sentences
            .iter()
            .flat_map(|s| ner_candidates(s, &self.config.pos_patterns))
            .collect();
        self.single_label_stage("NER", Task::Ner, candidates)
    }

    fn ee(&mut self) -> StageResult<()> {
        let modes: Vec<TriggerMode> = [TriggerMode::SentenceLevel, TriggerMode::TriggerSpan]
            .into_iter()
            .filter(|m| self.schema.event_types.iter().any(|t| t.trigger_mode == *m))
            .collect();
        let mut candidates = Vec::new();
        for s in &self.doc.sentences {
            for &mode in &modes {
                candidates.extend(trigger_candidates(s, mode, &self.config.trigger_tags));
            }
        }
        let work = self.verbalize(candidates).map_err(|e| ("EE", e))?;
        let results = self.score(&work, true).map_err(|e| ("EE", e.into()))?;
        for x in results.into_iter().flatten() {
            if x.is_positive() {
                self.doc.events.push(x);
            } else {
                self.doc.rejected.push(x);
            }
        }
        Ok(())
    }

    fn re(&mut self, entities: &[EntityMention]) -> StageResult<()> {
        let candidates = relation_pair_candidates(entities, self.schema);
        self.single_label_stage("RE", Task::Re, candidates)
    }

    fn eae(&mut self, events: &[EventMention], entities: &[EntityMention]) -> StageResult<()> {
        let candidates = events
            .iter()
            .flat_map(|e| argument_candidates(e, entities, self.schema))
            .collect();
        self.single_label_stage("EAE", Task::Eae, candidates)
    }

    fn gold_entities(&self, gold: &GoldSpans) -> Result<Vec<EntityMention>, PipelineError> {
        gold.entities
            .iter()
            .map(|g| {
                if self.schema.entity_type(&g.entity_type).is_none() {
                    return Err(PipelineError::InvalidGold(format!("unknown entity type {}", g.entity_type)));
                }
                let span = self.gold_span(g.sentence_index, g.char_start, g.char_end)?;
                let id = g.id.clone().unwrap_or_else(|| {
                    format!("gold-{}-{}-{}-{}", g.sentence_index, g.char_start, g.char_end, g.entity_type)
                });
                Ok(EntityMention {
                    id,
                    entity_type: g.entity_type.clone(),
                    span,
                })
            })
            .collect()
    }

    fn gold_events(&self, gold: &GoldSpans) -> Result<Vec<EventMention>, PipelineError> {
        gold.triggers
            .iter()
            .map(|g| {
                if self.schema.event_type(&g.event_type).is_none() {
                    return Err(PipelineError::InvalidGold(format!("unknown event type {}", g.event_type)));
                }
                let trigger = match (g.char_start, g.char_end) {
                    (Some(s), Some(e)) => Some(self.gold_span(g.sentence_index, s, e)?),
                    (None, None) => {
                        if g.sentence_index >= self.doc.sentences.len() {
                            return Err(PipelineError::InvalidGold(format!(
                                "sentence {} does not exist",
                                g.sentence_index
                            )));
                        }
                        None
                    }
                    _ => {
                        return Err(PipelineError::InvalidGold(
                            "trigger needs both char_start and char_end, or neither".into(),
                        ))
                    }
                };
                let id = g.id.clone().unwrap_or_else(|| match &trigger {
                    Some(t) => format!("gold-{}-{}-{}-{}", g.sentence_index, t.char_start, t.char_end, g.event_type),
                    None => format!("gold-{}-{}", g.sentence_index, g.event_type),
                });
                Ok(EventMention {
                    id,
                    event_type: g.event_type.clone(),
                    sentence_index: g.sentence_index,
                    trigger,
                })
            })
            .collect()
    }

    fn gold_span(&self, sentence_index: usize, start: usize, end: usize) -> Result<Span, PipelineError> {
        let sentence = self
            .doc
            .sentences
            .get(sentence_index)
            .ok_or_else(|| PipelineError::InvalidGold(format!("sentence {sentence_index} does not exist")))?;
        Span::from_sentence(sentence, start, end).ok_or_else(|| {
            PipelineError::InvalidGold(format!("span {start}..{end} is not valid in sentence {sentence_index}"))
        })
    }

    /// Scratch run sharing this run's sentences, used to produce upstream
    /// mentions in task mode without reporting them.
    fn upstream(&self) -> Run<'a> {
        let mut doc = DocumentAnnotations::new(self.doc.provenance.clone());
        doc.sentences = self.doc.sentences.clone();
        Run {
            schema: self.schema,
            config: self.config,
            backends: self.backends,
            doc,
        }
    }
}

/// Runs all four tasks respecting their dependencies.
pub fn run_e2e(text: &str, schema: &Schema, config: &RunConfig, backends: &Backends) -> Result<DocumentAnnotations, PipelineError> {
    run_e2e_on(segment_and_tokenize(text), schema, config, backends)
}

/// [`run_e2e`] over already segmented sentences (see
/// [`crate::text::tokenize_sentences`]).
pub fn run_e2e_on(
    sentences: Vec<Sentence>,
    schema: &Schema,
    config: &RunConfig,
    backends: &Backends,
) -> Result<DocumentAnnotations, PipelineError> {
    let mut run = Run::start(Mode::E2e, None, schema, config, backends)?;
    if let Err(e) = run.preprocess(sentences) {
        return Err(run.fail(e));
    }
    if let Err(e) = run.ner() {
        return Err(run.fail(e));
    }
    if let Err(e) = run.ee() {
        return Err(run.fail(e));
    }
    let entities = run.doc.entity_mentions();
    if let Err(e) = run.re(&entities) {
        return Err(run.fail(e));
    }
    let events = run.doc.event_mentions();
    if let Err(e) = run.eae(&events, &entities) {
        return Err(run.fail(e));
    }
    Ok(run.doc)
}

/// Runs one task. For RE and EAE, entities come from `gold` when it lists
/// any, otherwise from the configured entity source; events for EAE come
/// from gold triggers when present, otherwise from event classification.
pub fn run_task(
    task: Task,
    text: &str,
    gold: Option<&GoldSpans>,
    schema: &Schema,
    config: &RunConfig,
    backends: &Backends,
) -> Result<DocumentAnnotations, PipelineError> {
    run_task_on(task, segment_and_tokenize(text), gold, schema, config, backends)
}

/// [`run_task`] over already segmented sentences.
pub fn run_task_on(
    task: Task,
    sentences: Vec<Sentence>,
    gold: Option<&GoldSpans>,
    schema: &Schema,
    config: &RunConfig,
    backends: &Backends,
) -> Result<DocumentAnnotations, PipelineError> {
    let mut run = Run::start(Mode::Task, Some(task), schema, config, backends)?;
    let needs_entities = matches!(task, Task::Re | Task::Eae);
    let te_entities = config.task_entity_source == EntitySource::Te;
    if needs_entities && gold.is_none() && !te_entities {
        return Err(PipelineError::Config(format!(
            "{task} needs entities: supply gold spans or set task_entity_source"
        )));
    }
    if let Err(e) = run.preprocess(sentences) {
        return Err(run.fail(e));
    }
    if needs_entities {
        run.doc.gold = gold.cloned();
    }
    let result = match task {
        Task::Ner => run.ner(),
        Task::Ee => run.ee(),
        Task::Re => {
            let entities = match task_entities(&run, gold, te_entities) {
                Ok(Ok(e)) => e,
                Ok(Err(stage)) => return Err(run.fail(stage)),
                Err(e) => return Err(e),
            };
            run.re(&entities)
        }
        Task::Eae => {
            let entities = match task_entities(&run, gold, te_entities) {
                Ok(Ok(e)) => e,
                Ok(Err(stage)) => return Err(run.fail(stage)),
                Err(e) => return Err(e),
            };
            let gold_events = match gold {
                Some(g) => run.gold_events(g)?,
                None => Vec::new(),
            };
            let events = if gold_events.is_empty() {
                let mut up = run.upstream();
                if let Err(e) = up.ee() {
                    return Err(run.fail(e));
                }
                up.doc.event_mentions()
            } else {
                gold_events
            };
            run.eae(&events, &entities)
        }
    };
    match result {
        Ok(()) => Ok(run.doc),
        Err(e) => Err(run.fail(e)),
    }
}

fn task_entities(
    run: &Run<'_>,
    gold: Option<&GoldSpans>,
    te_entities: bool,
) -> Result<StageResult<Vec<EntityMention>>, PipelineError> {
    if let Some(g) = gold {
        let mentions = run.gold_entities(g)?;
        if !mentions.is_empty() || !te_entities {
            return Ok(Ok(mentions));
        }
    }
    let mut up = run.upstream();
    Ok(up.ner().map(|_| up.doc.entity_mentions()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entailment::EntailmentScore;
    use crate::schema::{EntityTypeDef, RelationTypeDef, Template, TypePair};

    fn schema() -> Schema {
        let e = |n: &str, t: &str| EntityTypeDef {
            name: n.into(),
            templates: vec![Template::new("t0", t)],
        };
        Schema {
            version: 3,
            entity_types: vec![e("PERSON", "{X} is a person"), e("DATE", "{X} is a date")],
            relation_types: vec![RelationTypeDef {
                name: "per:date_of_death".into(),
                templates: vec![Template::new("t0", "{X} died on {Y}")],
                allowed_pairs: vec![TypePair::new("PERSON", "DATE")],
            }],
            ..Default::default()
        }
    }

    const TEXT: &str = "John Smith died on Sunday";

    fn backends() -> Backends {
        let mut t = OracleTable::new();
        let hi = EntailmentScore::new(0.9, 0.1, 0.0).unwrap();
        t.insert(TEXT, "John Smith is a person", hi);
        t.insert(TEXT, "Sunday is a date", hi);
        t.insert(TEXT, "John Smith died on Sunday", hi);
        Backends::mock(t)
    }

    #[test]
    fn empty_text_gives_empty_annotations() {
        let doc = run_e2e("", &schema(), &RunConfig::default(), &backends()).unwrap();
        assert!(doc.sentences.is_empty());
        assert_eq!(doc.extractions().count(), 0);
        assert!(doc.complete);
        assert_eq!(doc.provenance.schema_version, 3);
    }

    #[test]
    fn e2e_small() {
        let doc = run_e2e(TEXT, &schema(), &RunConfig::default(), &backends()).unwrap();
        let ents: Vec<_> = doc.entities.iter().map(|x| x.label.clone().unwrap()).collect();
        assert_eq!(ents, vec!["PERSON", "DATE"]);
        assert_eq!(doc.relations.len(), 1);
        assert!(doc.events.is_empty() && doc.arguments.is_empty());
        // the relation references the NER extraction ids
        assert_eq!(doc.relations[0].candidate.sources, vec![doc.entities[0].id.clone(), doc.entities[1].id.clone()]);
    }

    #[test]
    fn re_task_needs_entity_source() {
        let r = run_task(Task::Re, TEXT, None, &schema(), &RunConfig::default(), &backends());
        assert!(matches!(r, Err(PipelineError::Config(_))));
        let config = RunConfig {
            task_entity_source: EntitySource::Te,
            ..Default::default()
        };
        let doc = run_task(Task::Re, TEXT, None, &schema(), &config, &backends()).unwrap();
        assert_eq!(doc.relations.len(), 1);
        assert!(doc.entities.is_empty());
    }

    #[test]
    fn re_task_with_gold() {
        let gold = GoldSpans {
            entities: vec![
                GoldEntity {
                    id: None,
                    sentence_index: 0,
                    char_start: 0,
                    char_end: 10,
                    entity_type: "PERSON".into(),
                },
                GoldEntity {
                    id: Some("g2".into()),
                    sentence_index: 0,
                    char_start: 19,
                    char_end: 25,
                    entity_type: "DATE".into(),
                },
            ],
            triggers: vec![],
        };
        let doc = run_task(Task::Re, TEXT, Some(&gold), &schema(), &RunConfig::default(), &backends()).unwrap();
        assert_eq!(doc.relations.len(), 1);
        assert_eq!(doc.relations[0].candidate.sources, vec!["gold-0-0-10-PERSON", "g2"]);
        assert!(doc.entities.is_empty());
        assert_eq!(doc.gold.as_ref(), Some(&gold));

        let mut bad = gold.clone();
        bad.entities[0].char_end = 100;
        assert!(matches!(
            run_task(Task::Re, TEXT, Some(&bad), &schema(), &RunConfig::default(), &backends()),
            Err(PipelineError::InvalidGold(_))
        ));
        let mut bad = gold;
        bad.entities[0].entity_type = "ORG".into();
        assert!(matches!(
            run_task(Task::Re, TEXT, Some(&bad), &schema(), &RunConfig::default(), &backends()),
            Err(PipelineError::InvalidGold(_))
        ));
    }

    #[test]
    fn ner_task_ignores_gold() {
        let gold = GoldSpans::default();
        let doc = run_task(Task::Ner, TEXT, Some(&gold), &schema(), &RunConfig::default(), &backends()).unwrap();
        assert_eq!(doc.entities.len(), 2);
        assert!(doc.gold.is_none());
        assert!(doc.relations.is_empty());
    }

    #[test]
    fn backend_failure_returns_partial() {
        struct FailOnRelations;
        impl EntailmentBackend for FailOnRelations {
            fn entail_batch(&self, _: &str, h: &[String]) -> Result<Vec<EntailmentScore>, BackendError> {
                if h.iter().any(|h| h.contains("died on")) {
                    Err(BackendError::Transport {
                        message: "connection refused".into(),
                        retryable: true,
                    })
                } else {
                    let good = ["John Smith is a person", "Sunday is a date"];
                    Ok(h.iter()
                        .map(|h| {
                            if good.contains(&h.as_str()) {
                                EntailmentScore::new(0.9, 0.1, 0.0).unwrap()
                            } else {
                                EntailmentScore::NEUTRAL
                            }
                        })
                        .collect())
                }
            }
        }
        let b = Backends::new(Arc::new(FailOnRelations), Arc::new(RuleTagger));
        let err = run_e2e(TEXT, &schema(), &RunConfig::default(), &b).unwrap_err();
        let partial = err.partial().unwrap();
        assert!(!partial.complete);
        assert_eq!(partial.entities.len(), 2);
        assert!(partial.error.as_ref().unwrap().starts_with("RE stage failed"));
    }

    #[test]
    fn invalid_schema_rejected() {
        let mut s = schema();
        s.relation_types[0].allowed_pairs.push(TypePair::new("PERSON", "GPE"));
        assert!(matches!(
            run_e2e(TEXT, &s, &RunConfig::default(), &backends()),
            Err(PipelineError::InvalidSchema(_))
        ));
    }
}

//! Template instantiation: turns candidates into hypotheses.
//!
//! Span text is substituted verbatim. Templates are expected to be
//! well-formed sentences; no casing or punctuation is adjusted.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::candidates::{Candidate, CandidateContext, Task};
use crate::schema::{Placeholder, Schema, Template, TriggerMode};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub text: String,
    /// Target type name.
    pub label: String,
    pub template_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerbalizeError {
    #[error("template {template:?} needs {slot} but the {task} candidate has no span for it")]
    Arity {
        template: String,
        slot: Placeholder,
        task: Task,
    },
    #[error("{task} candidate context references {name}, which is not in the schema")]
    UnknownType { task: Task, name: String },
}

/// A template that was not applied to a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedTemplate {
    pub label: String,
    pub template_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HypothesisSet {
    pub hypotheses: Vec<Hypothesis>,
    pub skipped: Vec<SkippedTemplate>,
}

/// Substitutes the candidate's spans into the template.
pub fn instantiate(template: &Template, candidate: &Candidate) -> Result<String, VerbalizeError> {
    let mut text = String::with_capacity(template.text.len() + 16);
    let mut rest = template.text.as_str();
    while let Some(at) = rest.find('{') {
        let slot = if rest[at..].starts_with("{X}") {
            Placeholder::X
        } else if rest[at..].starts_with("{Y}") {
            Placeholder::Y
        } else {
            text.push_str(&rest[..=at]);
            rest = &rest[at + 1..];
            continue;
        };
        let span = match slot {
            Placeholder::X => candidate.primary.as_ref(),
            Placeholder::Y => candidate.secondary.as_ref(),
        };
        let span = span.ok_or_else(|| VerbalizeError::Arity {
            template: template.text.clone(),
            slot,
            task: candidate.task,
        })?;
        text.push_str(&rest[..at]);
        text.push_str(&span.text);
        rest = &rest[at + 3..];
    }
    text.push_str(rest);
    Ok(text)
}

fn push_all(
    out: &mut HypothesisSet,
    label: &str,
    templates: &[Template],
    candidate: &Candidate,
) -> Result<(), VerbalizeError> {
    for t in templates {
        out.hypotheses.push(Hypothesis {
            text: instantiate(t, candidate)?,
            label: label.to_string(),
            template_id: t.id.clone(),
        });
    }
    Ok(())
}

/// One hypothesis per (eligible type, template), in schema declaration
/// order then template order.
///
/// Eligibility: NER uses every entity type; EE uses the event types whose
/// trigger mode matches the candidate shape; RE and EAE use only the types
/// whose constraints admit the candidate's context. Argument templates that
/// reference the trigger are skipped (and reported) when the event has no
/// trigger span.
pub fn hypotheses_for(candidate: &Candidate, schema: &Schema) -> Result<HypothesisSet, VerbalizeError> {
    let mut out = HypothesisSet::default();
    match candidate.task {
        Task::Ner => {
            for t in &schema.entity_types {
                push_all(&mut out, &t.name, &t.templates, candidate)?;
            }
        }
        Task::Ee => {
            let mode = if candidate.is_sentence_level() {
                TriggerMode::SentenceLevel
            } else {
                TriggerMode::TriggerSpan
            };
            for t in schema.event_types.iter().filter(|t| t.trigger_mode == mode) {
                push_all(&mut out, &t.name, &t.templates, candidate)?;
            }
        }
        Task::Re => {
            let CandidateContext::Pair { left_type, right_type } = &candidate.context else {
                return Ok(out);
            };
            for name in [left_type, right_type] {
                if schema.entity_type(name).is_none() {
                    return Err(VerbalizeError::UnknownType {
                        task: Task::Re,
                        name: name.clone(),
                    });
                }
            }
            for r in schema.relations_admitting(left_type, right_type) {
                push_all(&mut out, &r.name, &r.templates, candidate)?;
            }
        }
        Task::Eae => {
            let CandidateContext::Argument { event_type, filler_type } = &candidate.context else {
                return Ok(out);
            };
            if schema.event_type(event_type).is_none() {
                return Err(VerbalizeError::UnknownType {
                    task: Task::Eae,
                    name: event_type.clone(),
                });
            }
            for role in schema.roles_for(event_type).filter(|r| r.admits_filler(filler_type)) {
                for t in &role.templates {
                    if t.uses(Placeholder::X) && candidate.primary.is_none() {
                        out.skipped.push(SkippedTemplate {
                            label: role.name.clone(),
                            template_id: t.id.clone(),
                            reason: "template references the trigger but the event has no trigger span".into(),
                        });
                        continue;
                    }
                    out.hypotheses.push(Hypothesis {
                        text: instantiate(t, candidate)?,
                        label: role.name.clone(),
                        template_id: t.id.clone(),
                    });
                }
            }
        }
    }
    Ok(out)
}

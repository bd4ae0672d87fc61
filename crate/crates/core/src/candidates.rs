//! Candidate generation for the four extraction tasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::pattern::PosPattern;
use crate::schema::{Schema, TriggerMode};
use crate::text::{Pos, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "NER")]
    Ner,
    #[serde(rename = "RE")]
    Re,
    #[serde(rename = "EE")]
    Ee,
    #[serde(rename = "EAE")]
    Eae,
}

impl Task {
    pub const ALL: [Task; 4] = [Task::Ner, Task::Re, Task::Ee, Task::Eae];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Ner => "NER",
            Task::Re => "RE",
            Task::Ee => "EE",
            Task::Eae => "EAE",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .iter()
            .copied()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown task {s} (expected NER, RE, EE or EAE)"))
    }
}

/// A character range of one sentence together with its surface text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub sentence_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl Span {
    /// Builds a span from sentence offsets; `None` if the range is empty or
    /// out of bounds.
    pub fn from_sentence(sentence: &Sentence, char_start: usize, char_end: usize) -> Option<Span> {
        if char_start >= char_end {
            return None;
        }
        let text = sentence.slice(char_start, char_end)?;
        Some(Span {
            sentence_index: sentence.index,
            char_start,
            char_end,
            text,
        })
    }

    pub fn same_range(&self, other: &Span) -> bool {
        self.sentence_index == other.sentence_index
            && self.char_start == other.char_start
            && self.char_end == other.char_end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.sentence_index == other.sentence_index
            && self.char_start <= other.char_start
            && other.char_end <= self.char_end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateContext {
    #[default]
    None,
    /// Entity types of the left and right relation arguments.
    Pair { left_type: String, right_type: String },
    /// Event type and filler entity type of an argument candidate.
    Argument { event_type: String, filler_type: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub task: Task,
    pub sentence_index: usize,
    /// Entity span, trigger span, or left relation argument. `None` marks a
    /// sentence-level candidate.
    pub primary: Option<Span>,
    /// Right relation argument or argument filler.
    pub secondary: Option<Span>,
    #[serde(default)]
    pub context: CandidateContext,
    /// Types this candidate may instantiate under the schema constraints
    /// (relation names for RE, role names for EAE; empty otherwise).
    #[serde(default)]
    pub labels: Vec<String>,
    /// Ids of the upstream extractions or gold spans the candidate is built on.
    #[serde(default)]
    pub sources: Vec<String>,
}

impl Candidate {
    fn single(task: Task, sentence_index: usize, primary: Option<Span>) -> Self {
        Candidate {
            task,
            sentence_index,
            primary,
            secondary: None,
            context: CandidateContext::None,
            labels: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn is_sentence_level(&self) -> bool {
        self.primary.is_none()
    }
}

/// A typed entity span (an NER extraction or a user-supplied gold span).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub id: String,
    pub entity_type: String,
    pub span: Span,
}

/// A detected event: a sentence-level decision, or a typed trigger span.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventMention {
    pub id: String,
    pub event_type: String,
    pub sentence_index: usize,
    pub trigger: Option<Span>,
}

fn token_span(sentence: &Sentence, first: usize, last: usize) -> Span {
    let start = sentence.tokens[first].char_start;
    let end = sentence.tokens[last].char_end;
    Span::from_sentence(sentence, start, end).expect("token offsets lie within the sentence")
}

/// Spans matching any of `patterns`, with spans strictly contained in
/// another match dropped. Ordered by start, then end.
pub fn ner_candidates(sentence: &Sentence, patterns: &[PosPattern]) -> Vec<Candidate> {
    let tags: Vec<Pos> = sentence
        .tokens
        .iter()
        .map(|t| t.pos.unwrap_or(Pos::Other))
        .collect();
    let mut ranges: Vec<(usize, usize)> = patterns.iter().flat_map(|p| p.matches(&tags)).collect();
    ranges.sort_unstable();
    ranges.dedup();
    let maximal: Vec<(usize, usize)> = ranges
        .iter()
        .copied()
        .filter(|&(s, e)| {
            !ranges
                .iter()
                .any(|&(s2, e2)| s2 <= s && e <= e2 && (s2, e2) != (s, e))
        })
        .collect();
    maximal
        .into_iter()
        .map(|(s, e)| Candidate::single(Task::Ner, sentence.index, Some(token_span(sentence, s, e - 1))))
        .collect()
}

/// EE candidates: one sentence-level candidate, or one per token whose tag is
/// in `trigger_tags`.
pub fn trigger_candidates(sentence: &Sentence, mode: TriggerMode, trigger_tags: &[Pos]) -> Vec<Candidate> {
    match mode {
        TriggerMode::SentenceLevel => vec![Candidate::single(Task::Ee, sentence.index, None)],
        TriggerMode::TriggerSpan => sentence
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.pos.is_some_and(|p| trigger_tags.contains(&p)))
            .map(|(i, _)| Candidate::single(Task::Ee, sentence.index, Some(token_span(sentence, i, i))))
            .collect(),
    }
}

/// Ordered entity pairs within one sentence that satisfy at least one
/// relation's allowed pairs. Pairs over the same span are excluded.
pub fn relation_pair_candidates(entities: &[EntityMention], schema: &Schema) -> Vec<Candidate> {
    let mut out = Vec::new();
    for left in entities {
        for right in entities {
            if left.span.sentence_index != right.span.sentence_index || left.span.same_range(&right.span) {
                continue;
            }
            let labels: Vec<String> = schema
                .relations_admitting(&left.entity_type, &right.entity_type)
                .map(|r| r.name.clone())
                .collect();
            if labels.is_empty() {
                continue;
            }
            out.push(Candidate {
                task: Task::Re,
                sentence_index: left.span.sentence_index,
                primary: Some(left.span.clone()),
                secondary: Some(right.span.clone()),
                context: CandidateContext::Pair {
                    left_type: left.entity_type.clone(),
                    right_type: right.entity_type.clone(),
                },
                labels,
                sources: vec![left.id.clone(), right.id.clone()],
            });
        }
    }
    out
}

/// Entities in the event's sentence that can fill at least one of its roles.
pub fn argument_candidates(event: &EventMention, entities: &[EntityMention], schema: &Schema) -> Vec<Candidate> {
    let mut out = Vec::new();
    for entity in entities {
        if entity.span.sentence_index != event.sentence_index {
            continue;
        }
        let labels: Vec<String> = schema
            .roles_for(&event.event_type)
            .filter(|r| r.admits_filler(&entity.entity_type))
            .map(|r| r.name.clone())
            .collect();
        if labels.is_empty() {
            continue;
        }
        out.push(Candidate {
            task: Task::Eae,
            sentence_index: event.sentence_index,
            primary: event.trigger.clone(),
            secondary: Some(entity.span.clone()),
            context: CandidateContext::Argument {
                event_type: event.event_type.clone(),
                filler_type: entity.entity_type.clone(),
            },
            labels,
            sources: vec![event.id.clone(), entity.id.clone()],
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{ArgumentRoleDef, EntityTypeDef, EventTypeDef, RelationTypeDef, Template, TypePair};
    use crate::text::{segment_and_tokenize, RuleTagger};

    const APPENDIX: &str = "John Smith, an executive at XYZ Corp., died in Florida on Sunday";

    fn tagged(text: &str) -> Sentence {
        RuleTagger.tag_sentence(&segment_and_tokenize(text)[0])
    }

    fn texts(c: &[Candidate]) -> Vec<&str> {
        c.iter().map(|c| c.primary.as_ref().unwrap().text.as_str()).collect()
    }

    fn mention(id: &str, ty: &str, start: usize, text: &str) -> EntityMention {
        EntityMention {
            id: id.into(),
            entity_type: ty.into(),
            span: Span {
                sentence_index: 0,
                char_start: start,
                char_end: start + text.chars().count(),
                text: text.into(),
            },
        }
    }

    fn entity(name: &str) -> EntityTypeDef {
        EntityTypeDef {
            name: name.into(),
            templates: vec![Template::new("t0", "{X} is a thing")],
        }
    }

    #[test]
    fn appendix_proper_noun_runs() {
        let c = ner_candidates(&tagged(APPENDIX), &[PosPattern::proper_nouns()]);
        assert_eq!(texts(&c), vec!["John Smith", "XYZ Corp.", "Florida", "Sunday"]);
        assert!(c.iter().all(|c| c.task == Task::Ner && c.secondary.is_none()));
    }

    #[test]
    fn no_proper_nouns() {
        assert!(ner_candidates(&tagged("it rained"), &[PosPattern::proper_nouns()]).is_empty());
    }

    #[test]
    fn overlapping_patterns_keep_only_maximal() {
        let patterns: Vec<PosPattern> = vec!["PROPN+".parse().unwrap(), "NOUN PROPN+".parse().unwrap()];
        let c = ner_candidates(&tagged("The executive Smith Jones left"), &patterns);
        assert_eq!(texts(&c), vec!["executive Smith Jones"]);
    }

    #[test]
    fn triggers_by_mode() {
        let s = tagged(APPENDIX);
        let c = trigger_candidates(&s, TriggerMode::TriggerSpan, &[Pos::Verb]);
        assert_eq!(texts(&c), vec!["died"]);
        let c = trigger_candidates(&s, TriggerMode::SentenceLevel, &[Pos::Verb]);
        assert_eq!(c.len(), 1);
        assert!(c[0].is_sentence_level());

        let s = tagged("He said they killed and buried the man");
        assert_eq!(trigger_candidates(&s, TriggerMode::TriggerSpan, &[Pos::Verb]).len(), 3);
    }

    #[test]
    fn appendix_relation_pair() {
        let schema = Schema {
            entity_types: vec![entity("PERSON"), entity("DATE")],
            relation_types: vec![RelationTypeDef {
                name: "per:date_of_death".into(),
                templates: vec![Template::new("t0", "{X} died on {Y}")],
                allowed_pairs: vec![TypePair::new("PERSON", "DATE")],
            }],
            ..Default::default()
        };
        let entities = vec![mention("e1", "PERSON", 0, "John Smith"), mention("e2", "DATE", 58, "Sunday")];
        let c = relation_pair_candidates(&entities, &schema);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].primary.as_ref().unwrap().text, "John Smith");
        assert_eq!(c[0].secondary.as_ref().unwrap().text, "Sunday");
        assert_eq!(c[0].labels, vec!["per:date_of_death"]);
        assert_eq!(c[0].sources, vec!["e1", "e2"]);
        assert!(relation_pair_candidates(&[], &schema).is_empty());
    }

    #[test]
    fn same_span_pairs_excluded_but_same_type_allowed() {
        let schema = Schema {
            entity_types: vec![entity("PERSON")],
            relation_types: vec![RelationTypeDef {
                name: "per:spouse".into(),
                templates: vec![Template::new("t0", "{X} is married to {Y}")],
                allowed_pairs: vec![TypePair::new("PERSON", "PERSON")],
            }],
            ..Default::default()
        };
        let entities = vec![
            mention("a", "PERSON", 0, "Ann"),
            mention("a2", "PERSON", 0, "Ann"),
            mention("b", "PERSON", 8, "Bob"),
        ];
        let c = relation_pair_candidates(&entities, &schema);
        let pairs: Vec<(&str, &str)> = c.iter().map(|c| (c.sources[0].as_str(), c.sources[1].as_str())).collect();
        assert_eq!(pairs, vec![("a", "b"), ("a2", "b"), ("b", "a"), ("b", "a2")]);
    }

    #[test]
    fn appendix_argument_candidates() {
        let schema = Schema {
            entity_types: vec![entity("PERSON"), entity("ORG"), entity("GPE"), entity("DATE")],
            event_types: vec![EventTypeDef {
                name: "Life.Die".into(),
                templates: vec![Template::new("t0", "Someone died")],
                trigger_mode: TriggerMode::SentenceLevel,
            }],
            argument_roles: ["Victim:PERSON", "Place:GPE", "Time:DATE"]
                .iter()
                .map(|s| {
                    let (role, ty) = s.split_once(':').unwrap();
                    ArgumentRoleDef {
                        name: role.into(),
                        owning_event: "Life.Die".into(),
                        templates: vec![Template::new("t0", "{Y} is involved")],
                        allowed_filler_types: vec![ty.into()],
                    }
                })
                .collect(),
            ..Default::default()
        };
        let event = EventMention {
            id: "ev".into(),
            event_type: "Life.Die".into(),
            sentence_index: 0,
            trigger: None,
        };
        let entities = vec![
            mention("e1", "PERSON", 0, "John Smith"),
            mention("e2", "ORG", 28, "XYZ Corp."),
            mention("e3", "GPE", 47, "Florida"),
            mention("e4", "DATE", 58, "Sunday"),
        ];
        let c = argument_candidates(&event, &entities, &schema);
        let roles: Vec<&str> = c.iter().map(|c| c.labels[0].as_str()).collect();
        assert_eq!(roles, vec!["Victim", "Place", "Time"]);
        assert!(c.iter().all(|c| c.primary.is_none()));

        let other = EventMention {
            event_type: "Conflict.Attack".into(),
            ..event
        };
        assert!(argument_candidates(&other, &entities, &schema).is_empty());
    }

    #[test]
    fn task_parsing() {
        assert_eq!("eae".parse::<Task>().unwrap(), Task::Eae);
        assert_eq!(serde_json::to_string(&Task::Re).unwrap(), "\"RE\"");
        assert!("SRL".parse::<Task>().is_err());
    }
}

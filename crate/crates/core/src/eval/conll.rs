//! CoNLL 2003 column files.
//!
//! Four whitespace-separated columns per token (word, POS, chunk, NER tag),
//! blank lines between sentences and `-DOCSTART-` lines between documents.
//! MISC is relabeled to O before decoding, so MISC tokens never form or
//! extend a span. Both IOB1 and IOB2 tagging decode correctly: a span starts
//! at `B-T`, or at `I-T` when the previous tag is not of type T.

use std::collections::BTreeSet;

use super::corpus::{Corpus, CorpusDocument, EntityItem, LabelInventory};
use super::EvalError;

pub const DROPPED_TYPE: &str = "MISC";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tag {
    O,
    B(String),
    I(String),
}

impl Tag {
    pub fn parse(s: &str) -> Option<Tag> {
        if s == "O" {
            return Some(Tag::O);
        }
        let (prefix, ty) = s.split_once('-')?;
        if ty.is_empty() {
            return None;
        }
        match prefix {
            "B" => Some(Tag::B(ty.to_string())),
            "I" => Some(Tag::I(ty.to_string())),
            _ => None,
        }
    }

    pub fn entity_type(&self) -> Option<&str> {
        match self {
            Tag::O => None,
            Tag::B(t) | Tag::I(t) => Some(t),
        }
    }

    /// MISC becomes O; everything else is unchanged.
    pub fn relabel(self) -> Tag {
        if self.entity_type() == Some(DROPPED_TYPE) {
            Tag::O
        } else {
            self
        }
    }
}

/// Decodes a tag sequence into `(start, end, type)` token spans.
pub fn decode_tags(tags: &[Tag]) -> Vec<(usize, usize, String)> {
    let mut spans: Vec<(usize, usize, String)> = Vec::new();
    let mut open: Option<(usize, &str)> = None;
    for (i, tag) in tags.iter().enumerate() {
        let continues = matches!((tag, open), (Tag::I(t), Some((_, cur))) if t == cur);
        if continues {
            continue;
        }
        if let Some((start, ty)) = open.take() {
            spans.push((start, i, ty.to_string()));
        }
        if let Some(ty) = tag.entity_type() {
            open = Some((i, ty));
        }
    }
    if let Some((start, ty)) = open {
        spans.push((start, tags.len(), ty.to_string()));
    }
    spans
}

fn finish_sentence(doc: &mut CorpusDocument, words: &mut Vec<String>, tags: &mut Vec<Tag>) {
    if words.is_empty() {
        return;
    }
    // Character offset of each token in the space-joined sentence.
    let mut offsets = Vec::with_capacity(words.len() + 1);
    let mut pos = 0;
    for w in words.iter() {
        offsets.push(pos);
        pos += w.chars().count() + 1;
    }
    let sentence = doc.sentences.len();
    for (start, end, label) in decode_tags(tags) {
        doc.entities.push(EntityItem {
            sentence,
            start: offsets[start],
            end: offsets[end - 1] + words[end - 1].chars().count(),
            label,
            score: None,
        });
    }
    doc.sentences.push(words.join(" "));
    words.clear();
    tags.clear();
}

fn finish_document(corpus: &mut Corpus, doc: &mut CorpusDocument) {
    if !doc.sentences.is_empty() {
        let mut d = std::mem::take(doc);
        d.id = format!("doc-{}", corpus.documents.len());
        corpus.documents.push(d);
    }
}

/// Parses a CoNLL 2003 file into a corpus with MISC removed. The label
/// inventory lists the entity types that remain.
pub fn load_conll(source: &str) -> Result<Corpus, EvalError> {
    let mut corpus = Corpus::default();
    let mut doc = CorpusDocument::default();
    let mut words = Vec::new();
    let mut tags = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line_no = i + 1;
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.is_empty() {
            finish_sentence(&mut doc, &mut words, &mut tags);
            continue;
        }
        if cols[0] == "-DOCSTART-" {
            finish_sentence(&mut doc, &mut words, &mut tags);
            finish_document(&mut corpus, &mut doc);
            continue;
        }
        if cols.len() != 4 {
            return Err(EvalError::Conll {
                line: line_no,
                message: format!("expected 4 columns, found {}", cols.len()),
            });
        }
        let tag = Tag::parse(cols[3]).ok_or_else(|| EvalError::Conll {
            line: line_no,
            message: format!("bad NER tag {:?}", cols[3]),
        })?;
        words.push(cols[0].to_string());
        tags.push(tag.relabel());
    }
    finish_sentence(&mut doc, &mut words, &mut tags);
    finish_document(&mut corpus, &mut doc);
    let types: BTreeSet<String> = corpus
        .documents
        .iter()
        .flat_map(|d| d.entities.iter().map(|e| e.label.clone()))
        .collect();
    corpus.labels = Some(LabelInventory {
        entity_types: types.into_iter().collect(),
        ..Default::default()
    });
    Ok(corpus)
}

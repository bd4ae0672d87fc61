//! Tag-sequence patterns for span candidates.
//!
//! A pattern is a whitespace-separated sequence of elements. Each element is
//! a tag or an alternation of tags (`NOUN|PROPN`, optionally parenthesized),
//! followed by an optional quantifier: `+` (one or more), `?` (optional) or
//! `*` (zero or more). Examples: `PROPN+`, `NOUN PROPN+`, `DET? (ADJ|NOUN)* PROPN+`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::text::Pos;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantifier {
    One,
    Optional,
    Plus,
    Star,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Element {
    tags: Vec<Pos>,
    quantifier: Quantifier,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid pattern {pattern:?}: {reason}")]
pub struct PatternError {
    pub pattern: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosPattern {
    source: String,
    elements: Vec<Element>,
}

impl PosPattern {
    /// Maximal runs of proper nouns.
    pub fn proper_nouns() -> Self {
        "PROPN+".parse().expect("default pattern parses")
    }

    pub fn as_str(&self) -> &str {
        &self.source
    }

    /// All non-empty token ranges `[start, end)` whose tags match the
    /// whole pattern.
    pub fn matches(&self, tags: &[Pos]) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for start in 0..tags.len() {
            let mut ends = self.ends_from(tags, start);
            ends.retain(|&e| e > start);
            ends.sort_unstable();
            ends.dedup();
            out.extend(ends.into_iter().map(|e| (start, e)));
        }
        out
    }

    fn ends_from(&self, tags: &[Pos], start: usize) -> Vec<usize> {
        let mut positions = vec![start];
        for el in &self.elements {
            let mut next = Vec::new();
            for &p in &positions {
                let run = tags[p..].iter().take_while(|t| el.tags.contains(t)).count();
                match el.quantifier {
                    Quantifier::One => {
                        if run >= 1 {
                            next.push(p + 1)
                        }
                    }
                    Quantifier::Optional => {
                        next.push(p);
                        if run >= 1 {
                            next.push(p + 1)
                        }
                    }
                    Quantifier::Plus => next.extend((1..=run).map(|k| p + k)),
                    Quantifier::Star => next.extend((0..=run).map(|k| p + k)),
                }
            }
            next.sort_unstable();
            next.dedup();
            if next.is_empty() {
                return next;
            }
            positions = next;
        }
        positions
    }
}

impl FromStr for PosPattern {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| PatternError {
            pattern: s.to_string(),
            reason,
        };
        let mut elements = Vec::new();
        for raw in s.split_whitespace() {
            let (body, quantifier) = match raw.chars().last() {
                Some('+') => (&raw[..raw.len() - 1], Quantifier::Plus),
                Some('?') => (&raw[..raw.len() - 1], Quantifier::Optional),
                Some('*') => (&raw[..raw.len() - 1], Quantifier::Star),
                _ => (raw, Quantifier::One),
            };
            let body = body
                .strip_prefix('(')
                .and_then(|b| b.strip_suffix(')'))
                .unwrap_or(body);
            let tags = body
                .split('|')
                .map(|t| t.parse::<Pos>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            elements.push(Element { tags, quantifier });
        }
        if elements.is_empty() {
            return Err(err("pattern is empty".into()));
        }
        if elements
            .iter()
            .all(|e| matches!(e.quantifier, Quantifier::Optional | Quantifier::Star))
        {
            return Err(err("pattern can only match the empty sequence".into()));
        }
        Ok(PosPattern {
            source: s.trim().to_string(),
            elements,
        })
    }
}

impl fmt::Display for PosPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl Serialize for PosPattern {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for PosPattern {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

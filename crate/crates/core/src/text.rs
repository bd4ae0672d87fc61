//! Sentence segmentation, tokenization and part-of-speech tagging.
//!
//! Offsets are character (code point) offsets. Token offsets are relative to
//! their sentence; a sentence's `char_start` is relative to the document.
//!
//! Tokenizer rules:
//! - whitespace separates chunks;
//! - leading punctuation characters of a chunk become one token each;
//! - trailing punctuation characters are peeled off one at a time, unless
//!   the remaining chunk is a known abbreviation (`Corp.`, `Mr.`, `U.S.`,
//!   single capital initials like `J.`);
//! - punctuation inside a chunk (`U.S`, `3.5`, `well-known`) stays put.
//!
//! A sentence ends after a `.`, `!` or `?` token that is followed by
//! whitespace and a token starting with an uppercase letter. Whitespace
//! between sentences belongs to the preceding sentence, so the sentences
//! concatenate back to the input.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backend::BackendError;

/// Coarse universal part-of-speech tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Pos {
    Propn,
    Noun,
    Verb,
    Adj,
    Adv,
    Num,
    Pron,
    Det,
    Adp,
    Aux,
    Punct,
    Other,
}

impl Pos {
    pub const ALL: [Pos; 12] = [
        Pos::Propn,
        Pos::Noun,
        Pos::Verb,
        Pos::Adj,
        Pos::Adv,
        Pos::Num,
        Pos::Pron,
        Pos::Det,
        Pos::Adp,
        Pos::Aux,
        Pos::Punct,
        Pos::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Propn => "PROPN",
            Pos::Noun => "NOUN",
            Pos::Verb => "VERB",
            Pos::Adj => "ADJ",
            Pos::Adv => "ADV",
            Pos::Num => "NUM",
            Pos::Pron => "PRON",
            Pos::Det => "DET",
            Pos::Adp => "ADP",
            Pos::Aux => "AUX",
            Pos::Punct => "PUNCT",
            Pos::Other => "OTHER",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pos {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Pos::ALL
            .iter()
            .copied()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown part-of-speech tag {s}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    #[serde(default)]
    pub pos: Option<Pos>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    /// Offset of the sentence within its document.
    pub char_start: usize,
    pub text: String,
    pub tokens: Vec<Token>,
}

impl Sentence {
    /// Sentence text without surrounding whitespace; this is the premise
    /// handed to the entailment model.
    pub fn premise(&self) -> &str {
        self.text.trim()
    }

    /// Characters `[start, end)` of the sentence, or `None` when out of range.
    pub fn slice(&self, start: usize, end: usize) -> Option<String> {
        if start > end {
            return None;
        }
        let len = self.text.chars().count();
        if end > len {
            return None;
        }
        Some(self.text.chars().skip(start).take(end - start).collect())
    }

    pub fn is_tagged(&self) -> bool {
        self.tokens.iter().all(|t| t.pos.is_some())
    }
}

const ABBREVIATIONS: &[&str] = &[
    "Corp.", "Inc.", "Ltd.", "Co.", "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.",
    "Gen.", "Gov.", "Sen.", "Rep.", "U.S.", "U.K.", "U.N.", "e.g.", "i.e.", "etc.", "vs.", "No.",
    "Jan.", "Feb.", "Mar.", "Apr.", "Aug.", "Sep.", "Sept.", "Oct.", "Nov.", "Dec.",
];

pub fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{00AB}' | '\u{00BB}' | '\u{2013}' | '\u{2014}' | '\u{2026}'
        )
}

fn is_abbreviation(chunk: &[char]) -> bool {
    if chunk.len() == 2 && chunk[0].is_uppercase() && chunk[1] == '.' {
        return true;
    }
    let s: String = chunk.iter().collect();
    ABBREVIATIONS.contains(&s.as_str())
}

/// Splits one whitespace-free chunk at `offset` into tokens.
fn split_chunk(chunk: &[char], offset: usize, out: &mut Vec<(usize, usize)>) {
    let mut start = 0;
    let mut end = chunk.len();
    while start < end && is_punct(chunk[start]) && !is_abbreviation(&chunk[start..end]) {
        out.push((offset + start, offset + start + 1));
        start += 1;
    }
    let mut trailing = Vec::new();
    while end > start && is_punct(chunk[end - 1]) && !is_abbreviation(&chunk[start..end]) {
        trailing.push((offset + end - 1, offset + end));
        end -= 1;
    }
    if start < end {
        out.push((offset + start, offset + end));
    }
    out.extend(trailing.into_iter().rev());
}

/// Tokenizes `chars` into `(start, end)` character ranges.
fn token_ranges(chars: &[char]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        split_chunk(&chars[start..i], start, &mut out);
    }
    out
}

fn ends_sentence(chars: &[char], tok: (usize, usize), next: (usize, usize)) -> bool {
    let is_terminal = tok.1 - tok.0 == 1 && matches!(chars[tok.0], '.' | '!' | '?');
    is_terminal && next.0 > tok.1 && chars[next.0].is_uppercase()
}

/// Segments `text` into sentences and tokenizes them. Input without any
/// non-whitespace character yields no sentences.
pub fn segment_and_tokenize(text: &str) -> Vec<Sentence> {
    let chars: Vec<char> = text.chars().collect();
    let ranges = token_ranges(&chars);
    if ranges.is_empty() {
        return Vec::new();
    }
    // Indices into `ranges` where a new sentence begins.
    let mut starts = vec![0];
    for i in 0..ranges.len() - 1 {
        if ends_sentence(&chars, ranges[i], ranges[i + 1]) {
            starts.push(i + 1);
        }
    }
    let mut sentences = Vec::with_capacity(starts.len());
    for (index, &first) in starts.iter().enumerate() {
        let last = starts.get(index + 1).copied().unwrap_or(ranges.len());
        let char_start = if index == 0 { 0 } else { ranges[first].0 };
        let char_end = match starts.get(index + 1) {
            Some(&next) => ranges[next].0,
            None => chars.len(),
        };
        let tokens = ranges[first..last]
            .iter()
            .map(|&(s, e)| Token {
                text: chars[s..e].iter().collect(),
                char_start: s - char_start,
                char_end: e - char_start,
                pos: None,
            })
            .collect();
        sentences.push(Sentence {
            index,
            char_start,
            text: chars[char_start..char_end].iter().collect(),
            tokens,
        });
    }
    sentences
}

/// Tokenizes already segmented sentences without re-segmenting them. The
/// document is the sentences joined by newlines; each newline belongs to the
/// sentence before it.
pub fn tokenize_sentences<S: AsRef<str>>(sentences: &[S]) -> Vec<Sentence> {
    let mut out = Vec::with_capacity(sentences.len());
    let mut offset = 0;
    for (index, s) in sentences.iter().enumerate() {
        let mut text = s.as_ref().to_string();
        if index + 1 < sentences.len() {
            text.push('\n');
        }
        let chars: Vec<char> = text.chars().collect();
        let tokens = token_ranges(&chars)
            .into_iter()
            .map(|(s, e)| Token {
                text: chars[s..e].iter().collect(),
                char_start: s,
                char_end: e,
                pos: None,
            })
            .collect();
        out.push(Sentence {
            index,
            char_start: offset,
            text,
            tokens,
        });
        offset += chars.len();
    }
    out
}

/// A part-of-speech tagger. Implementations may retokenize; the returned
/// sentences must keep text and index and carry a tag on every token.
pub trait Tagger: Send + Sync {
    fn tag(&self, sentences: &[Sentence]) -> Result<Vec<Sentence>, BackendError>;
}

/// Tags one sentence and checks the result against the token invariants.
pub fn pos_tag(sentence: &Sentence, tagger: &dyn Tagger) -> Result<Sentence, BackendError> {
    let mut tagged = tagger.tag(std::slice::from_ref(sentence))?;
    if tagged.len() != 1 {
        return Err(BackendError::Malformed(format!(
            "tagger returned {} sentences for 1",
            tagged.len()
        )));
    }
    let tagged = tagged.remove(0);
    check_tagged(sentence, &tagged)?;
    Ok(tagged)
}

/// Tags many sentences with one backend call.
pub fn pos_tag_all(sentences: &[Sentence], tagger: &dyn Tagger) -> Result<Vec<Sentence>, BackendError> {
    if sentences.is_empty() {
        return Ok(Vec::new());
    }
    let tagged = tagger.tag(sentences)?;
    if tagged.len() != sentences.len() {
        return Err(BackendError::Malformed(format!(
            "tagger returned {} sentences for {}",
            tagged.len(),
            sentences.len()
        )));
    }
    for (orig, t) in sentences.iter().zip(&tagged) {
        check_tagged(orig, t)?;
    }
    Ok(tagged)
}

fn check_tagged(orig: &Sentence, tagged: &Sentence) -> Result<(), BackendError> {
    if tagged.text != orig.text || tagged.index != orig.index || tagged.char_start != orig.char_start {
        return Err(BackendError::Malformed("tagger changed sentence identity".into()));
    }
    let mut prev_end = 0;
    for t in &tagged.tokens {
        if t.pos.is_none() {
            return Err(BackendError::Malformed(format!("token {:?} has no tag", t.text)));
        }
        if t.char_start >= t.char_end || t.char_start < prev_end {
            return Err(BackendError::Malformed(format!(
                "token {:?} has invalid offsets {}..{}",
                t.text, t.char_start, t.char_end
            )));
        }
        if tagged.slice(t.char_start, t.char_end).as_deref() != Some(t.text.as_str()) {
            return Err(BackendError::Malformed(format!(
                "token {:?} does not match sentence text at {}..{}",
                t.text, t.char_start, t.char_end
            )));
        }
        prev_end = t.char_end;
    }
    Ok(())
}

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "this", "that", "these", "those", "every", "each", "some", "any", "no",
    "all", "both", "either", "neither", "another", "such",
];
const ADPOSITIONS: &[&str] = &[
    "in", "on", "at", "of", "for", "with", "by", "from", "to", "into", "onto", "over", "under",
    "after", "before", "during", "about", "between", "through", "without", "within", "against",
    "among", "near", "since", "until", "upon", "across", "behind", "beyond", "despite", "per",
    "toward", "towards", "via", "than", "as",
];
const PRONOUNS: &[&str] = &[
    "i", "you", "he", "she", "it", "we", "they", "me", "him", "her", "us", "them", "his", "its",
    "our", "their", "my", "your", "mine", "yours", "hers", "ours", "theirs", "someone", "somebody",
    "anyone", "anybody", "everyone", "everybody", "nobody", "something", "anything", "everything",
    "nothing", "who", "whom", "whose", "which", "what", "himself", "herself", "itself",
    "themselves", "myself", "yourself", "ourselves",
];
const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "am", "has", "have", "had", "do", "does",
    "did", "will", "would", "shall", "should", "can", "could", "may", "might", "must",
];
const ADVERBS: &[&str] = &[
    "not", "very", "also", "too", "never", "always", "often", "here", "there", "now", "then",
    "soon", "just", "still", "already", "again", "almost", "only", "even", "ever", "yet",
];
const VERBS: &[&str] = &[
    "die", "dies", "say", "says", "said", "go", "goes", "went", "take", "took", "make", "made",
    "come", "came", "give", "gave", "tell", "told", "meet", "met", "leave", "left", "win", "won",
    "lose", "lost", "get", "got", "run", "ran", "see", "saw", "know", "knew", "find", "found",
    "become", "became", "fall", "fell", "hold", "held", "buy", "bought", "sell", "sold", "pay",
    "paid", "build", "built", "send", "sent", "bring", "brought", "hit", "shot", "fled", "born",
    "works", "work", "lives", "live",
];
const ADJECTIVES: &[&str] = &[
    "new", "old", "big", "small", "good", "bad", "former", "late", "great", "high", "low",
    "large", "long", "young", "early", "other", "first", "last", "many", "several",
];
const OTHERS: &[&str] = &["and", "or", "but", "nor", "so", "if", "because", "while", "although", "whether"];
const PROPER_NOUNS: &[&str] = &[
    "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday", "January",
    "February", "March", "April", "June", "July", "August", "September", "October", "November",
    "December",
];
const NOT_VERBS: &[&str] = &[
    "thing", "something", "nothing", "anything", "everything", "morning", "evening", "king",
    "ring", "spring", "string", "wing", "building", "ceiling", "red", "bed", "shed", "need",
    "seed", "speed", "hundred", "feed",
];

fn closed_class(lower: &str) -> Option<Pos> {
    if DETERMINERS.contains(&lower) {
        Some(Pos::Det)
    } else if ADPOSITIONS.contains(&lower) {
        Some(Pos::Adp)
    } else if PRONOUNS.contains(&lower) {
        Some(Pos::Pron)
    } else if AUXILIARIES.contains(&lower) {
        Some(Pos::Aux)
    } else if ADVERBS.contains(&lower) {
        Some(Pos::Adv)
    } else if OTHERS.contains(&lower) {
        Some(Pos::Other)
    } else {
        None
    }
}

fn open_class(lower: &str) -> Pos {
    if VERBS.contains(&lower) {
        return Pos::Verb;
    }
    if ADJECTIVES.contains(&lower) {
        return Pos::Adj;
    }
    let n = lower.chars().count();
    if n > 3 && lower.ends_with("ly") {
        return Pos::Adv;
    }
    if n >= 4 && (lower.ends_with("ed") || lower.ends_with("ing")) && !NOT_VERBS.contains(&lower) {
        return Pos::Verb;
    }
    if n > 5 && ["ous", "ful", "less", "able", "ible"].iter().any(|s| lower.ends_with(s)) {
        return Pos::Adj;
    }
    Pos::Noun
}

fn is_capitalized(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

/// Deterministic dictionary-and-suffix tagger. Good enough to drive the
/// default proper-noun candidate pattern offline; use an external tagger for
/// real accuracy.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleTagger;

impl RuleTagger {
    pub fn tag_sentence(&self, sentence: &Sentence) -> Sentence {
        let tokens = &sentence.tokens;
        let mut tagged = sentence.clone();
        for (i, token) in tagged.tokens.iter_mut().enumerate() {
            token.pos = Some(self.tag_token(tokens, i));
        }
        tagged
    }

    fn tag_token(&self, tokens: &[Token], i: usize) -> Pos {
        let text = tokens[i].text.as_str();
        if text.chars().all(is_punct) {
            return Pos::Punct;
        }
        if text.chars().any(|c| c.is_ascii_digit())
            && text.chars().all(|c| c.is_ascii_digit() || is_punct(c))
        {
            return Pos::Num;
        }
        if text == "I" {
            return Pos::Pron;
        }
        if PROPER_NOUNS.contains(&text) {
            return Pos::Propn;
        }
        let lower = text.to_lowercase();
        let initial = tokens[..i].iter().all(|t| t.text.chars().all(is_punct));
        if is_capitalized(text) {
            if !initial {
                return Pos::Propn;
            }
            if let Some(pos) = closed_class(&lower) {
                return pos;
            }
            if tokens.get(i + 1).is_some_and(|t| is_capitalized(&t.text)) {
                return Pos::Propn;
            }
            return open_class(&lower);
        }
        closed_class(&lower).unwrap_or_else(|| open_class(&lower))
    }
}

impl Tagger for RuleTagger {
    fn tag(&self, sentences: &[Sentence]) -> Result<Vec<Sentence>, BackendError> {
        Ok(sentences.iter().map(|s| self.tag_sentence(s)).collect())
    }
}

use proptest::prelude::*;

use zsie_core::candidates::ner_candidates;
use zsie_core::pattern::PosPattern;
use zsie_core::text::{segment_and_tokenize, tokenize_sentences};
use zsie_core::{Pos, RuleTagger, Sentence, Token};

fn text_strategy() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        "[A-Z][a-z]{0,6}",
        "[a-z]{1,7}",
        Just(".".to_string()),
        Just(",".to_string()),
        Just("Corp.".to_string()),
        Just("U.S.".to_string()),
        Just("?!".to_string()),
        Just("\"quoted\"".to_string()),
        Just("München".to_string()),
        "[0-9]{1,4}",
    ];
    let sep = prop_oneof![Just(" "), Just("  "), Just("\n"), Just(""), Just("\t")];
    prop::collection::vec((piece, sep), 0..30)
        .prop_map(|v| v.into_iter().map(|(p, s)| format!("{p}{s}")).collect())
}

fn check_cover(text: &str, sentences: &[Sentence]) -> Result<(), TestCaseError> {
    let joined: String = sentences.iter().map(|s| s.text.as_str()).collect();
    if text.trim().is_empty() {
        prop_assert!(sentences.is_empty());
        return Ok(());
    }
    prop_assert_eq!(joined, text);
    let mut offset = 0;
    for (i, s) in sentences.iter().enumerate() {
        prop_assert_eq!(s.index, i);
        prop_assert_eq!(s.char_start, offset);
        offset += s.text.chars().count();
        let mut prev_end = 0;
        for t in &s.tokens {
            prop_assert!(t.char_start < t.char_end);
            prop_assert!(t.char_start >= prev_end);
            prop_assert_eq!(Some(t.text.clone()), s.slice(t.char_start, t.char_end));
            prop_assert!(!t.text.chars().any(char::is_whitespace));
            prev_end = t.char_end;
        }
        prop_assert!(!s.tokens.is_empty());
    }
    Ok(())
}

proptest! {
    #[test]
    fn tokens_cover_text(text in text_strategy()) {
        let sentences = segment_and_tokenize(&text);
        check_cover(&text, &sentences)?;
        // Every non-whitespace character belongs to exactly one token.
        let covered: usize = sentences.iter().flat_map(|s| &s.tokens).map(|t| t.char_end - t.char_start).sum();
        prop_assert_eq!(covered, text.chars().filter(|c| !c.is_whitespace()).count());
    }

    #[test]
    fn tagger_is_pure(text in text_strategy()) {
        let sentences = segment_and_tokenize(&text);
        for s in &sentences {
            let a = RuleTagger.tag_sentence(s);
            let b = RuleTagger.tag_sentence(&s.clone());
            prop_assert!(a.is_tagged());
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn presegmented_sentences_keep_boundaries(parts in prop::collection::vec("[A-Za-z]{1,5}( [A-Za-z.]{1,5}){0,4}", 1..5)) {
        let sentences = tokenize_sentences(&parts);
        prop_assert_eq!(sentences.len(), parts.len());
        for (s, p) in sentences.iter().zip(&parts) {
            prop_assert_eq!(s.text.trim_end(), p.as_str());
        }
    }

    #[test]
    fn ner_spans_are_maximal(tags in prop::collection::vec(prop::sample::select(vec![Pos::Propn, Pos::Noun, Pos::Verb, Pos::Punct]), 0..25)) {
        let sentence = tagged_sentence(&tags);
        let got: Vec<(usize, usize)> = ner_candidates(&sentence, &[PosPattern::proper_nouns()])
            .into_iter()
            .map(|c| { let p = c.primary.unwrap(); (p.char_start, p.char_end) })
            .collect();
        // Brute force: maximal runs of PROPN tokens.
        let mut expected = Vec::new();
        let mut i = 0;
        while i < tags.len() {
            if tags[i] == Pos::Propn {
                let start = i;
                while i < tags.len() && tags[i] == Pos::Propn { i += 1; }
                expected.push((sentence.tokens[start].char_start, sentence.tokens[i - 1].char_end));
            } else {
                i += 1;
            }
        }
        prop_assert_eq!(&got, &expected);
        for a in &got {
            for b in &got {
                prop_assert!(a == b || !(a.0 <= b.0 && b.1 <= a.1));
            }
        }
    }
}

/// One-letter tokens separated by spaces, tagged as given.
fn tagged_sentence(tags: &[Pos]) -> Sentence {
    let tokens: Vec<Token> = tags
        .iter()
        .enumerate()
        .map(|(i, p)| Token {
            text: "w".into(),
            char_start: 2 * i,
            char_end: 2 * i + 1,
            pos: Some(*p),
        })
        .collect();
    Sentence {
        index: 0,
        char_start: 0,
        text: vec!["w"; tags.len()].join(" "),
        tokens,
    }
}

#[test]
fn appendix_sentence_tokens_and_spans() {
    let text = include_str!("../../../fixtures/appendix.txt");
    let sentences = segment_and_tokenize(text);
    assert_eq!(sentences.len(), 1);
    assert_eq!(sentences[0].tokens.len(), 14);
    let tagged = RuleTagger.tag_sentence(&sentences[0]);
    let spans: Vec<String> = ner_candidates(&tagged, &[PosPattern::proper_nouns()])
        .into_iter()
        .map(|c| c.primary.unwrap().text)
        .collect();
    assert_eq!(spans, ["John Smith", "XYZ Corp.", "Florida", "Sunday"]);
}

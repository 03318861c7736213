//! Part-of-speech tagging sufficient to pick out common nouns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::lexicon::{lookup_synsets, Lexicon};

/// A half-open range of Unicode scalar values (not bytes) into a text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> CharSpan {
        CharSpan { start, end }
    }

    /// The byte range of this span in `text`, if it lies within it.
    pub fn byte_range(&self, text: &str) -> Option<std::ops::Range<usize>> {
        let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
        let start = indices.nth(self.start)?;
        let end = if self.end == self.start {
            start
        } else {
            indices.nth(self.end - self.start - 1)?
        };
        Some(start..end)
    }

    pub fn slice<'a>(&self, text: &'a str) -> Option<&'a str> {
        self.byte_range(text).map(|r| &text[r])
    }
}

impl From<CharSpan> for [usize; 2] {
    fn from(s: CharSpan) -> Self {
        [s.start, s.end]
    }
}

impl From<[usize; 2]> for CharSpan {
    fn from(a: [usize; 2]) -> Self {
        CharSpan::new(a[0], a[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PosTag {
    CommonNoun,
    ProperNoun,
    Pronoun,
    Url,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaggedToken {
    pub text: String,
    pub span: CharSpan,
    pub tag: PosTag,
}

#[derive(Debug, Error)]
#[error("tagger failed: {0}")]
pub struct TaggerError(pub String);

pub trait PosTagger: Send + Sync {
    fn tag(&self, text: &str) -> Result<Vec<TaggedToken>, TaggerError>;
}

/// Every common noun in `text`, in order, with its exact character span.
///
/// A failing tagger yields an empty list and a warning.
pub fn extract_noun_candidates(text: &str, tagger: &dyn PosTagger) -> Vec<(String, CharSpan)> {
    match tagger.tag(text) {
        Ok(tokens) => tokens
            .into_iter()
            .filter(|t| t.tag == PosTag::CommonNoun && !looks_like_url(&t.text))
            .map(|t| (t.text, t.span))
            .collect(),
        Err(e) => {
            log::warn!("{e}; no noun candidates for {text:?}");
            Vec::new()
        }
    }
}

fn looks_like_url(token: &str) -> bool {
    let lower = token.to_ascii_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Raw whitespace tokens with surrounding punctuation stripped.
///
/// URLs, @mentions and #hashtags are kept whole. Returned spans are in chars.
pub fn tokenize(text: &str) -> Vec<(String, CharSpan)> {
    let chars: Vec<char> = text.chars().collect();
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
        let raw: String = chars[start..i].iter().collect();
        if looks_like_url(&raw) || raw.starts_with('@') || raw.starts_with('#') {
            out.push((raw, CharSpan::new(start, i)));
            continue;
        }
        let keep = |c: char| c.is_alphanumeric();
        let mut s = start;
        let mut e = i;
        while s < e && !keep(chars[s]) {
            s += 1;
        }
        while e > s && !keep(chars[e - 1]) {
            e -= 1;
        }
        if s < e {
            out.push((chars[s..e].iter().collect(), CharSpan::new(s, e)));
        }
    }
    out
}

const PRONOUNS: &[&str] = &[
    "i", "me", "my", "mine", "myself", "you", "your", "yours", "yourself", "he", "him", "his",
    "himself", "she", "her", "hers", "herself", "it", "its", "itself", "we", "us", "our", "ours",
    "ourselves", "they", "them", "their", "theirs", "themselves", "who", "whom", "whose", "this",
    "that", "these", "those", "everyone", "everybody", "someone", "somebody", "anyone", "nobody",
];

const FUNCTION_WORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "nor", "so", "yet", "if", "then", "than", "of", "to",
    "in", "on", "at", "by", "for", "with", "without", "from", "into", "onto", "through", "over",
    "under", "about", "against", "between", "after", "before", "during", "w", "is", "are", "was",
    "were", "be", "been", "being", "am", "do", "does", "did", "has", "have", "had", "will",
    "would", "can", "could", "should", "shall", "may", "might", "must", "not", "no", "all",
    "every", "each", "some", "any", "more", "most", "very", "too", "now", "just", "also", "up",
    "down", "out", "off", "here", "there", "when", "where", "why", "how", "what", "which", "rt",
];

const VERB_CONTEXT: &[&str] = &[
    "to", "will", "would", "can", "could", "should", "shall", "may", "might", "must", "i", "we",
    "they", "you", "don't", "dont", "never",
];

/// Lexicon-driven heuristic tagger.
///
/// A token is a common noun when the lexicon knows a noun sense for it and it
/// is not a function word, a pronoun, or in a verb slot (after a modal,
/// `to`, or a subject pronoun). Capitalized tokens that are not
/// sentence-initial, and all-caps acronyms, are proper nouns.
pub struct LexiconTagger<'a> {
    lexicon: &'a dyn Lexicon,
}

impl<'a> LexiconTagger<'a> {
    pub fn new(lexicon: &'a dyn Lexicon) -> LexiconTagger<'a> {
        LexiconTagger { lexicon }
    }
}

impl PosTagger for LexiconTagger<'_> {
    fn tag(&self, text: &str) -> Result<Vec<TaggedToken>, TaggerError> {
        let chars: Vec<char> = text.chars().collect();
        let tokens = tokenize(text);
        let mut out = Vec::with_capacity(tokens.len());
        let mut previous: Option<String> = None;
        for (token, span) in tokens {
            let lower = token.to_lowercase();
            let sentence_start = chars[..span.start]
                .iter()
                .rev()
                .find(|c| !c.is_whitespace())
                .is_none_or(|c| matches!(c, '.' | '!' | '?' | ':' | '"'));
            let has_upper = token.chars().any(char::is_uppercase);
            let all_caps = token.chars().filter(|c| c.is_alphabetic()).count() > 1
                && !token.chars().any(char::is_lowercase);
            let tag = if looks_like_url(&token) {
                PosTag::Url
            } else if token.starts_with('@') || token.starts_with('#') {
                PosTag::Other
            } else if PRONOUNS.contains(&lower.as_str()) {
                PosTag::Pronoun
            } else if FUNCTION_WORDS.contains(&lower.as_str())
                || !token.chars().all(|c| c.is_alphabetic() || c == '-' || c == '\'')
            {
                PosTag::Other
            } else if all_caps || (has_upper && !sentence_start) {
                PosTag::ProperNoun
            } else if previous.as_deref().is_some_and(|p| VERB_CONTEXT.contains(&p)) {
                PosTag::Other
            } else if !lookup_synsets(&lower, self.lexicon).is_empty() {
                PosTag::CommonNoun
            } else {
                PosTag::Other
            };
            previous = Some(lower);
            out.push(TaggedToken {
                text: token,
                span,
                tag,
            });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::lexicon::{MemoryLexicon, SynsetEntry};

    struct MarkNouns(&'static [&'static str]);

    impl PosTagger for MarkNouns {
        fn tag(&self, text: &str) -> Result<Vec<TaggedToken>, TaggerError> {
            Ok(tokenize(text)
                .into_iter()
                .map(|(t, span)| TaggedToken {
                    tag: if self.0.contains(&t.as_str()) { PosTag::CommonNoun } else { PosTag::Other },
                    text: t,
                    span,
                })
                .collect())
        }
    }

    struct Broken;

    impl PosTagger for Broken {
        fn tag(&self, _: &str) -> Result<Vec<TaggedToken>, TaggerError> {
            Err(TaggerError("model not loaded".into()))
        }
    }

    #[test]
    fn stub_tagger_span() {
        let got = extract_noun_candidates("Ban all guns now", &MarkNouns(&["guns"]));
        assert_eq!(got, vec![("guns".to_string(), CharSpan::new(8, 12))]);
    }

    #[test]
    fn no_nouns_and_failure_are_empty() {
        assert!(extract_noun_candidates(" !!! ", &MarkNouns(&["guns"])).is_empty());
        assert!(extract_noun_candidates("guns", &Broken).is_empty());
    }

    #[test]
    fn spans_count_chars_not_bytes() {
        let text = "¡Ñandú risk!";
        let toks = tokenize(text);
        assert_eq!(toks[1], ("risk".to_string(), CharSpan::new(7, 11)));
        assert_eq!(toks[1].1.slice(text), Some("risk"));
        assert_eq!(toks[0].1.slice(text), Some("Ñandú"));
    }

    #[test]
    fn heuristic_tags() {
        let lex = MemoryLexicon::new(vec![
            SynsetEntry::new("gun.n.01", "", vec!["gun".into()]).unwrap(),
            SynsetEntry::new("risk.n.01", "", vec!["risk".into()]).unwrap(),
            SynsetEntry::new("law.n.01", "", vec!["law".into()]).unwrap(),
        ]);
        let tagger = LexiconTagger::new(&lex);
        let tags = tagger
            .tag("Guns are a risk. We must risk it, says NRA and Law https://t.co/x")
            .unwrap();
        let find = |i: usize| (tags[i].text.as_str(), tags[i].tag);
        assert_eq!(find(0), ("Guns", PosTag::CommonNoun));
        assert_eq!(find(3), ("risk", PosTag::CommonNoun));
        assert_eq!(find(4), ("We", PosTag::Pronoun));
        assert_eq!(find(6), ("risk", PosTag::Other));
        assert_eq!(find(9), ("NRA", PosTag::ProperNoun));
        assert_eq!(find(11), ("Law", PosTag::ProperNoun));
        assert_eq!(find(12).1, PosTag::Url);
    }
}

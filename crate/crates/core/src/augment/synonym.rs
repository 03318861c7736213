//! Sense-gated synonym replacement of nouns.

use super::lexicon::{lookup_synsets, matched_base_form, normalize_lemma, Lexicon, SynsetEntry};
use super::tagger::{extract_noun_candidates, CharSpan, PosTagger};
use super::{AugmentError, AugmentationDetail, AugmentationRecord};
use crate::corpus::{Origin, Tweet};

/// Picks the contextually correct sense of a word.
pub trait Disambiguator: Send + Sync {
    /// Returns the id of one member of `candidates`.
    fn disambiguate(
        &self,
        target_word: &str,
        context_sentence: &str,
        candidates: &[SynsetEntry],
    ) -> Result<String, AugmentError>;
}

/// Always chooses the first candidate, i.e. the lexicon's most frequent sense.
#[derive(Clone, Copy, Debug, Default)]
pub struct MostFrequentSense;

pub fn most_frequent_sense(_noun: &str, candidates: &[SynsetEntry]) -> Result<String, AugmentError> {
    candidates
        .first()
        .map(|s| s.id.clone())
        .ok_or_else(|| AugmentError::Domain("no candidate senses to choose from".into()))
}

impl Disambiguator for MostFrequentSense {
    fn disambiguate(&self, target_word: &str, _context: &str, candidates: &[SynsetEntry]) -> Result<String, AugmentError> {
        most_frequent_sense(target_word, candidates)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpansionPolicy {
    /// Upper bound on new examples generated from one parent.
    pub max_per_example: usize,
}

impl Default for ExpansionPolicy {
    fn default() -> Self {
        ExpansionPolicy { max_per_example: 4 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum CasePattern {
    Lower,
    Capitalized,
    Upper,
    Mixed,
}

fn case_pattern(token: &str) -> CasePattern {
    let letters: Vec<char> = token.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.iter().all(|c| !c.is_uppercase()) {
        CasePattern::Lower
    } else if letters.len() > 1 && letters.iter().all(|c| !c.is_lowercase()) {
        CasePattern::Upper
    } else if letters[0].is_uppercase() && letters[1..].iter().all(|c| !c.is_uppercase()) {
        CasePattern::Capitalized
    } else {
        CasePattern::Mixed
    }
}

/// Renders a lexicon lemma as replacement text following `original`'s casing.
pub fn surface_form(lemma: &str, original: &str) -> String {
    let spaced = lemma.replace('_', " ");
    match case_pattern(original) {
        CasePattern::Lower => spaced.to_lowercase(),
        CasePattern::Upper => spaced.to_uppercase(),
        CasePattern::Capitalized => {
            let lower = spaced.to_lowercase();
            let mut chars = lower.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => lower,
            }
        }
        CasePattern::Mixed => spaced,
    }
}

/// Replaces the chars in `span` of `text` with `replacement`.
pub fn splice(text: &str, span: CharSpan, replacement: &str) -> Option<String> {
    let range = span.byte_range(text)?;
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..range.start]);
    out.push_str(replacement);
    out.push_str(&text[range.end..]);
    Some(out)
}

/// Variants of `example` with the noun at `span` replaced by each lemma of
/// `synset` other than the noun itself, at most `limit` of them.
pub fn expand_noun(
    example: &Tweet,
    noun: &str,
    span: CharSpan,
    synset: &SynsetEntry,
    lexicon: &dyn Lexicon,
    limit: usize,
    first_index: usize,
) -> Vec<(Tweet, AugmentationRecord)> {
    let noun_lemma = normalize_lemma(noun);
    let base = matched_base_form(noun, lexicon);
    synset
        .lemmas
        .iter()
        .filter(|lemma| {
            let l = normalize_lemma(lemma);
            l != noun_lemma && Some(&l) != base.as_ref()
        })
        .take(limit)
        .enumerate()
        .filter_map(|(k, lemma)| {
            let replacement = surface_form(lemma, noun);
            let text = splice(&example.text, span, &replacement)?;
            let child = example.derive(
                format!("{}~syn-{}", example.id, first_index + k),
                text,
                Origin::Synonym,
            );
            let record = AugmentationRecord {
                parent_id: example.id.clone(),
                child_id: child.id.clone(),
                detail: AugmentationDetail::Synonym {
                    original_noun: noun.to_string(),
                    synset_id: synset.id.clone(),
                    replacement_lemma: lemma.clone(),
                    replacement_text: replacement,
                    span,
                },
            };
            Some((child, record))
        })
        .collect()
}

/// Generates single-substitution synonym variants of an original tweet.
///
/// Nouns are visited in text order; each is disambiguated once and every
/// other lemma of the chosen sense yields one new tweet, until
/// `policy.max_per_example` outputs exist.
pub fn synonym_expand(
    example: &Tweet,
    tagger: &dyn PosTagger,
    lexicon: &dyn Lexicon,
    wsd: &dyn Disambiguator,
    policy: ExpansionPolicy,
) -> Result<Vec<(Tweet, AugmentationRecord)>, AugmentError> {
    if example.origin != Origin::Original {
        return Err(AugmentError::Usage(format!(
            "synonym expansion applies to original tweets only; {:?} is {:?}",
            example.id, example.origin
        )));
    }
    let mut out = Vec::new();
    if example.text.trim().is_empty() {
        return Ok(out);
    }
    for (noun, span) in extract_noun_candidates(&example.text, tagger) {
        if out.len() >= policy.max_per_example {
            break;
        }
        let candidates = lookup_synsets(&noun, lexicon);
        if candidates.is_empty() {
            continue;
        }
        let chosen = wsd.disambiguate(&noun, &example.text, &candidates)?;
        let synset = candidates.iter().find(|c| c.id == chosen).ok_or_else(|| {
            AugmentError::ContractViolation(format!(
                "disambiguator returned {chosen:?}, not among the candidates for {noun:?}"
            ))
        })?;
        let remaining = policy.max_per_example - out.len();
        let first = out.len();
        out.extend(expand_noun(example, &noun, span, synset, lexicon, remaining, first));
    }
    Ok(out)
}

//! Training-set expansion: back-translation of the minority class and
//! sense-gated synonym replacement of nouns.

pub mod lexicon;
mod rebalance;
mod synonym;
pub mod tagger;
pub mod translate;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::lexicon::{lookup_synsets, Lexicon, MemoryLexicon, SynsetEntry, WordNet};
pub use self::rebalance::{back_translate, rebalance, RebalanceOutput, DEFAULT_PIVOTS, SOURCE_LANGUAGE};
pub use self::synonym::{
    expand_noun, most_frequent_sense, splice, surface_form, synonym_expand, Disambiguator,
    ExpansionPolicy, MostFrequentSense,
};
pub use self::tagger::{extract_noun_candidates, CharSpan, LexiconTagger, PosTag, PosTagger, TaggedToken};
pub use self::translate::{IdentityTranslator, TableTranslator, TranslateError, Translator};

use crate::corpus::{CorpusError, Dataset, Origin, Split, Tweet};
use crate::exec::Execution;
use crate::fsutil::write_atomic;

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error("translation via {0} came back empty")]
    EmptyTranslation(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("disambiguator contract violated: {0}")]
    ContractViolation(String),
    #[error("lexicon: {0}")]
    Lexicon(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// What produced an augmented example.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum AugmentationDetail {
    BackTranslated {
        pivot: String,
    },
    Synonym {
        original_noun: String,
        synset_id: String,
        /// Lemma as spelled in the lexicon.
        replacement_lemma: String,
        /// Text actually inserted (spaces for underscores, case adapted).
        replacement_text: String,
        /// Char range of `original_noun` in the parent text.
        span: CharSpan,
    },
}

/// Provenance of one augmented tweet.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentationRecord {
    pub parent_id: String,
    pub child_id: String,
    #[serde(flatten)]
    pub detail: AugmentationDetail,
}

impl AugmentationRecord {
    pub fn origin(&self) -> Origin {
        match self.detail {
            AugmentationDetail::BackTranslated { .. } => Origin::BackTranslated,
            AugmentationDetail::Synonym { .. } => Origin::Synonym,
        }
    }

    fn sort_key(&self) -> (&str, &AugmentationDetail) {
        (&self.parent_id, &self.detail)
    }
}

/// Originals in their input order, then `added` sorted by (parent, method, detail).
pub(crate) fn assemble(
    base: &Dataset,
    mut added: Vec<(Tweet, AugmentationRecord)>,
) -> Result<(Dataset, Vec<AugmentationRecord>), AugmentError> {
    added.sort_by(|a, b| a.1.sort_key().cmp(&b.1.sort_key()));
    let mut examples = base.examples.clone();
    let mut records = Vec::with_capacity(added.len());
    for (tweet, record) in added {
        examples.push(tweet);
        records.push(record);
    }
    let dataset = Dataset::new(base.topic, base.split, examples)?;
    Ok((dataset, records))
}

/// Knobs for [`augment_train`].
#[derive(Clone, Debug)]
pub struct AugmentOptions {
    pub back_translation: bool,
    pub synonyms: bool,
    pub pivot_pool: Vec<String>,
    pub target_ratio: f64,
    pub policy: ExpansionPolicy,
    pub seed: u64,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            back_translation: true,
            synonyms: true,
            pivot_pool: DEFAULT_PIVOTS.iter().map(|s| s.to_string()).collect(),
            target_ratio: 1.0,
            policy: ExpansionPolicy::default(),
            seed: 0,
        }
    }
}

/// External services the augmentation stages call into.
pub struct AugmentServices<'a> {
    pub translator: &'a dyn Translator,
    pub tagger: &'a dyn PosTagger,
    pub lexicon: &'a dyn Lexicon,
    pub wsd: &'a dyn Disambiguator,
}

#[derive(Clone, Debug)]
pub struct AugmentOutput {
    pub dataset: Dataset,
    pub records: Vec<AugmentationRecord>,
    pub skipped_translations: usize,
}

/// Rebalances by back-translation, then synonym-expands the ORIGINAL examples.
///
/// Synonym expansion runs per example through `exec`; the result is
/// canonicalized so it does not depend on the execution strategy.
pub fn augment_train(
    train_set: &Dataset,
    options: &AugmentOptions,
    services: &AugmentServices<'_>,
    exec: Execution,
) -> Result<AugmentOutput, AugmentError> {
    if train_set.split != Split::Train {
        return Err(AugmentError::Usage(format!(
            "augmentation applies to the train split only, got {}",
            train_set.split
        )));
    }
    let mut added: Vec<(Tweet, AugmentationRecord)> = Vec::new();
    let mut skipped = 0;
    if options.back_translation {
        let out = rebalance(
            train_set,
            services.translator,
            &options.pivot_pool,
            options.target_ratio,
            options.seed,
        )?;
        skipped = out.skipped;
        let by_id: std::collections::HashMap<_, _> =
            out.dataset.examples.iter().map(|t| (t.id.as_str(), t)).collect();
        for record in out.records {
            added.push((by_id[record.child_id.as_str()].clone(), record));
        }
    }
    if options.synonyms {
        let originals: Vec<&Tweet> = train_set
            .examples
            .iter()
            .filter(|t| t.origin == Origin::Original)
            .collect();
        let expanded = exec.map(&originals, |tweet| {
            synonym_expand(tweet, services.tagger, services.lexicon, services.wsd, options.policy)
        });
        for result in expanded {
            added.extend(result?);
        }
    }
    let (dataset, records) = assemble(train_set, added)?;
    Ok(AugmentOutput {
        dataset,
        records,
        skipped_translations: skipped,
    })
}

pub fn write_records(path: &Path, records: &[AugmentationRecord]) -> Result<(), AugmentError> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes()).map_err(|e| CorpusError::io(path, e).into())
}

pub fn read_records(path: &Path) -> Result<Vec<AugmentationRecord>, AugmentError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            serde_json::from_str(l).map_err(|e| {
                CorpusError::Validation {
                    path: path.to_path_buf(),
                    line: n + 1,
                    message: e.to_string(),
                }
                .into()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{StanceLabel, Topic};

    #[test]
    fn record_json_shape() {
        let r = AugmentationRecord {
            parent_id: "p".into(),
            child_id: "p~syn-0".into(),
            detail: AugmentationDetail::Synonym {
                original_noun: "risk".into(),
                synset_id: "hazard.n.01".into(),
                replacement_lemma: "peril".into(),
                replacement_text: "peril".into(),
                span: CharSpan::new(3, 7),
            },
        };
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(
            json,
            r#"{"parent_id":"p","child_id":"p~syn-0","method":"synonym","original_noun":"risk","synset_id":"hazard.n.01","replacement_lemma":"peril","replacement_text":"peril","span":[3,7]}"#
        );
        assert_eq!(serde_json::from_str::<AugmentationRecord>(&json).unwrap(), r);
    }

    #[test]
    fn augment_refuses_test_split() {
        let d = Dataset::new(
            Topic::Abortion,
            Split::Test,
            vec![Tweet::original("a", "x", Topic::Abortion, StanceLabel::Support)],
        )
        .unwrap();
        let lex = MemoryLexicon::default();
        let tagger = LexiconTagger::new(&lex);
        let services = AugmentServices {
            translator: &IdentityTranslator,
            tagger: &tagger,
            lexicon: &lex,
            wsd: &MostFrequentSense,
        };
        let err = augment_train(&d, &AugmentOptions::default(), &services, Execution::Sequential);
        assert!(matches!(err, Err(AugmentError::Usage(_))));
    }
}

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::translate::Translator;
use super::{AugmentError, AugmentationDetail, AugmentationRecord};
use crate::corpus::{imbalance_ratio, Dataset, Origin, Split, Tweet};

pub const SOURCE_LANGUAGE: &str = "en";

/// Pivot languages used when none are configured.
pub const DEFAULT_PIVOTS: [&str; 4] = ["fr", "de", "es", "zh"];

/// English → pivot → English.
pub fn back_translate(text: &str, translator: &dyn Translator, pivot: &str) -> Result<String, AugmentError> {
    if text.trim().is_empty() {
        return Err(AugmentError::Usage("cannot back-translate empty text".into()));
    }
    let forward = translator.translate(text, SOURCE_LANGUAGE, pivot)?;
    let back = translator.translate(&forward, pivot, SOURCE_LANGUAGE)?;
    if back.trim().is_empty() {
        return Err(AugmentError::EmptyTranslation(pivot.to_string()));
    }
    Ok(back)
}

#[derive(Clone, Debug)]
pub struct RebalanceOutput {
    /// Originals in input order followed by the new examples.
    pub dataset: Dataset,
    pub records: Vec<AugmentationRecord>,
    /// (example, pivot) pairs whose translation failed.
    pub skipped: usize,
}

/// Back-translates minority-class examples until the class ratio reaches
/// `target_ratio` (minority / majority) or every minority example has been
/// used once with every pivot.
///
/// Minority examples are visited round-robin; on each visit one pivot not yet
/// used for that example is drawn uniformly with a ChaCha8 generator seeded
/// by `seed`. Failed translations are skipped and counted.
pub fn rebalance(
    train_set: &Dataset,
    translator: &dyn Translator,
    pivot_pool: &[String],
    target_ratio: f64,
    seed: u64,
) -> Result<RebalanceOutput, AugmentError> {
    if train_set.split != Split::Train {
        return Err(AugmentError::Usage(format!(
            "rebalancing applies to the train split only, got {}",
            train_set.split
        )));
    }
    if !(target_ratio > 0.0 && target_ratio <= 1.0) {
        return Err(AugmentError::Usage(format!("target ratio {target_ratio} outside (0, 1]")));
    }
    if pivot_pool.is_empty() {
        return Err(AugmentError::Usage("pivot pool is empty".into()));
    }
    let balance = imbalance_ratio(train_set).map_err(|e| AugmentError::Domain(e.to_string()))?;
    if balance.minority_count == 0 {
        return Err(AugmentError::Domain(format!(
            "no {} examples to back-translate",
            balance.minority
        )));
    }
    let required = (target_ratio * balance.majority_count as f64 - 1e-9).ceil() as usize;
    let minority: Vec<&Tweet> = train_set
        .examples
        .iter()
        .filter(|t| t.label == balance.minority && t.origin == Origin::Original)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unused: Vec<Vec<usize>> = vec![(0..pivot_pool.len()).collect(); minority.len()];
    let mut count = balance.minority_count;
    let mut added = Vec::new();
    let mut skipped = 0;
    'rounds: while count < required {
        let mut progressed = false;
        for (parent, pivots) in minority.iter().zip(unused.iter_mut()) {
            if count >= required {
                break 'rounds;
            }
            if pivots.is_empty() {
                continue;
            }
            progressed = true;
            let pivot = &pivot_pool[pivots.remove(rng.random_range(0..pivots.len()))];
            match back_translate(&parent.text, translator, pivot) {
                Ok(text) => {
                    let child = parent.derive(format!("{}~bt-{pivot}", parent.id), text, Origin::BackTranslated);
                    added.push((
                        child.clone(),
                        AugmentationRecord {
                            parent_id: parent.id.clone(),
                            child_id: child.id,
                            detail: AugmentationDetail::BackTranslated { pivot: pivot.clone() },
                        },
                    ));
                    count += 1;
                }
                Err(e) => {
                    log::warn!("skipping back-translation of {:?} via {pivot}: {e}", parent.id);
                    skipped += 1;
                }
            }
        }
        if !progressed {
            break;
        }
    }

    let (dataset, records) = super::assemble(train_set, added)?;
    Ok(RebalanceOutput {
        dataset,
        records,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::translate::{IdentityTranslator, TableTranslator, TranslateError};
    use crate::corpus::{StanceLabel, Topic};

    fn train(support: usize, oppose: usize) -> Dataset {
        let mut ex = Vec::new();
        for i in 0..support {
            ex.push(Tweet::original(format!("s{i}"), format!("support text {i}"), Topic::Abortion, StanceLabel::Support));
        }
        for i in 0..oppose {
            ex.push(Tweet::original(format!("o{i}"), format!("oppose text {i}"), Topic::Abortion, StanceLabel::Oppose));
        }
        Dataset::new(Topic::Abortion, Split::Train, ex).unwrap()
    }

    fn pivots(n: usize) -> Vec<String> {
        DEFAULT_PIVOTS[..n].iter().map(|s| s.to_string()).collect()
    }

    struct Case;

    impl Translator for Case {
        fn name(&self) -> &str {
            "case"
        }
        fn translate(&self, text: &str, _s: &str, target: &str) -> Result<String, TranslateError> {
            Ok(if target == "de" { text.to_uppercase() } else { text.to_lowercase() })
        }
    }

    #[test]
    fn back_translation_examples() {
        assert_eq!(back_translate("Guns save lives.", &IdentityTranslator, "fr").unwrap(), "Guns save lives.");
        let mut t = TableTranslator::new();
        t.insert("en", "fr", "a", "x");
        t.insert("fr", "en", "x", "b");
        assert_eq!(back_translate("a", &t, "fr").unwrap(), "b");
        assert_eq!(back_translate("Ban Guns", &Case, "de").unwrap(), "ban guns");
        assert!(back_translate("  ", &IdentityTranslator, "fr").is_err());
        assert!(matches!(back_translate("a", &t, "de"), Err(AugmentError::Translate(_))));
    }

    #[test]
    fn balanced_is_noop() {
        let d = train(10, 10);
        let out = rebalance(&d, &IdentityTranslator, &pivots(2), 1.0, 1).unwrap();
        assert_eq!(out.dataset, d);
        assert!(out.records.is_empty());
    }

    #[test]
    fn two_to_four_gains_two() {
        let out = rebalance(&train(2, 4), &IdentityTranslator, &pivots(4), 1.0, 3).unwrap();
        assert_eq!(out.dataset.label_counts(), (4, 4));
        let new: Vec<_> = out.dataset.examples.iter().filter(|t| t.origin == Origin::BackTranslated).collect();
        assert_eq!(new.len(), 2);
        assert!(new.iter().all(|t| t.label == StanceLabel::Support));
    }

    #[test]
    fn exhausted_pivots_stop_early() {
        let out = rebalance(&train(1, 3), &IdentityTranslator, &pivots(1), 1.0, 0).unwrap();
        assert_eq!(out.dataset.label_counts(), (2, 3));
    }

    #[test]
    fn failures_are_skipped() {
        let out = rebalance(&train(1, 3), &TableTranslator::new(), &pivots(2), 1.0, 0).unwrap();
        assert_eq!(out.skipped, 2);
        assert_eq!(out.dataset.label_counts(), (1, 3));
    }

    #[test]
    fn usage_and_domain_errors() {
        let mut d = train(1, 3);
        assert!(matches!(rebalance(&train(0, 3), &IdentityTranslator, &pivots(1), 1.0, 0), Err(AugmentError::Domain(_))));
        assert!(rebalance(&d, &IdentityTranslator, &[], 1.0, 0).is_err());
        assert!(rebalance(&d, &IdentityTranslator, &pivots(1), 0.0, 0).is_err());
        d.split = Split::Validation;
        assert!(matches!(rebalance(&d, &IdentityTranslator, &pivots(1), 1.0, 0), Err(AugmentError::Usage(_))));
    }

    #[test]
    fn seeded_pivot_choice_is_reproducible() {
        let d = train(5, 20);
        let a = rebalance(&d, &IdentityTranslator, &pivots(4), 1.0, 42).unwrap();
        let b = rebalance(&d, &IdentityTranslator, &pivots(4), 1.0, 42).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.dataset.label_counts(), (20, 20));
        // 15 needed from 5 examples: three pivots for each.
        for i in 0..5 {
            let n = a.records.iter().filter(|r| r.parent_id == format!("s{i}")).count();
            assert_eq!(n, 3);
        }
    }
}

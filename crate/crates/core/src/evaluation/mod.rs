//! Metrics, per-topic reports and the pooled micro-F1 merge.
//!
//! SUPPORT is the positive class. All metrics are percentages in [0, 100]
//! stored at full precision.

mod report;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::report::{read_merged_report, read_topic_report, render_csv, render_table, write_json};

use crate::corpus::{StanceLabel, Topic};
use crate::exec::Execution;
use crate::model::{ModelError, StanceModel};
use crate::pipeline::{Prepared, TestSplit};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("invalid report: {0}")]
    Validation(String),
    #[error("scoring {id}: {source}")]
    Model {
        id: String,
        #[source]
        source: ModelError,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Counts with OPPOSE as the positive class.
    pub fn swapped(&self) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    pub fn pooled<'a>(counts: impl IntoIterator<Item = &'a ConfusionCounts>) -> ConfusionCounts {
        counts.into_iter().fold(ConfusionCounts::default(), |acc, c| ConfusionCounts {
            tp: acc.tp + c.tp,
            fp: acc.fp + c.fp,
            fn_: acc.fn_ + c.fn_,
            tn: acc.tn + c.tn,
        })
    }
}

pub fn confusion(predictions: &[StanceLabel], gold: &[StanceLabel]) -> Result<ConfusionCounts, EvalError> {
    if predictions.len() != gold.len() {
        return Err(EvalError::Usage(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    if predictions.is_empty() {
        return Err(EvalError::Usage("no predictions to count".into()));
    }
    let mut c = ConfusionCounts::default();
    for (&p, &g) in predictions.iter().zip(gold) {
        match (p.is_positive(), g.is_positive()) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

fn nonempty(c: &ConfusionCounts) -> Result<(), EvalError> {
    if c.total() == 0 {
        Err(EvalError::Domain("metrics are undefined for zero examples".into()))
    } else {
        Ok(())
    }
}

fn positive_f1(c: &ConfusionCounts) -> f64 {
    let denom = 2 * c.tp + c.fp + c.fn_;
    if denom == 0 {
        log::info!("class absent from predictions and gold; its F1 is taken as 0");
        return 0.0;
    }
    200.0 * c.tp as f64 / denom as f64
}

/// Positive-class F1: `200·tp / (2tp + fp + fn)`.
pub fn f1(c: &ConfusionCounts) -> Result<f64, EvalError> {
    nonempty(c)?;
    Ok(positive_f1(c))
}

/// Mean of the SUPPORT-positive and OPPOSE-positive F1.
pub fn macro_f1(c: &ConfusionCounts) -> Result<f64, EvalError> {
    nonempty(c)?;
    Ok((positive_f1(c) + positive_f1(&c.swapped())) / 2.0)
}

pub fn accuracy(c: &ConfusionCounts) -> Result<f64, EvalError> {
    nonempty(c)?;
    Ok(100.0 * (c.tp + c.tn) as f64 / c.total() as f64)
}

/// Mann–Whitney AUC × 100 using average ranks, so tied scores count one half.
pub fn auc(scores: &[(f64, StanceLabel)]) -> Result<f64, EvalError> {
    let n_pos = scores.iter().filter(|(_, g)| g.is_positive()).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::Domain(
            "AUC undefined: gold labels contain a single class".into(),
        ));
    }
    if scores.iter().any(|(s, _)| !s.is_finite()) {
        return Err(EvalError::Domain("AUC undefined: non-finite score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].0.total_cmp(&scores[b].0));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]].0 == scores[order[i]].0 {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| scores[k].1.is_positive()).count();
        pos_rank_sum += avg_rank * tied_pos as f64;
        i = j + 1;
    }
    let (np, nn) = (n_pos as f64, n_neg as f64);
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    Ok(100.0 * u / (np * nn))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredExample {
    pub id: String,
    pub prob_support: f64,
    pub gold: StanceLabel,
}

impl ScoredExample {
    pub fn predicted(&self) -> StanceLabel {
        if self.prob_support >= 0.5 {
            StanceLabel::Support
        } else {
            StanceLabel::Oppose
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicReport {
    pub topic: Topic,
    pub f1: f64,
    pub macro_f1: f64,
    /// `None` when the test gold labels contain a single class.
    pub auc: Option<f64>,
    pub acc: f64,
    pub counts: ConfusionCounts,
    pub scores: Vec<ScoredExample>,
}

const RECOMPUTE_TOLERANCE: f64 = 1e-9;

impl TopicReport {
    pub fn from_scores(topic: Topic, scores: Vec<ScoredExample>) -> Result<TopicReport, EvalError> {
        if scores.is_empty() {
            return Err(EvalError::Domain(format!("no test examples for {topic}")));
        }
        let predicted: Vec<StanceLabel> = scores.iter().map(ScoredExample::predicted).collect();
        let gold: Vec<StanceLabel> = scores.iter().map(|s| s.gold).collect();
        let counts = confusion(&predicted, &gold)?;
        let pairs: Vec<(f64, StanceLabel)> = scores.iter().map(|s| (s.prob_support, s.gold)).collect();
        let auc = match auc(&pairs) {
            Ok(v) => Some(v),
            Err(e) => {
                log::warn!("{topic}: {e}");
                None
            }
        };
        Ok(TopicReport {
            topic,
            f1: f1(&counts)?,
            macro_f1: macro_f1(&counts)?,
            auc,
            acc: accuracy(&counts)?,
            counts,
            scores,
        })
    }

    /// Checks that every stored metric agrees with a recomputation from `scores`.
    pub fn validate(&self) -> Result<(), EvalError> {
        let ids: HashSet<&str> = self.scores.iter().map(|s| s.id.as_str()).collect();
        if ids.len() != self.scores.len() {
            return Err(EvalError::Validation(format!("{}: duplicate example ids", self.topic)));
        }
        if self.scores.iter().any(|s| !(0.0..=1.0).contains(&s.prob_support)) {
            return Err(EvalError::Validation(format!("{}: probability outside [0, 1]", self.topic)));
        }
        let again = TopicReport::from_scores(self.topic, self.scores.clone())?;
        let close = |a: f64, b: f64| (a - b).abs() <= RECOMPUTE_TOLERANCE;
        let auc_ok = match (self.auc, again.auc) {
            (Some(a), Some(b)) => close(a, b),
            (None, None) => true,
            _ => false,
        };
        if again.counts != self.counts
            || !close(self.f1, again.f1)
            || !close(self.macro_f1, again.macro_f1)
            || !close(self.acc, again.acc)
            || !auc_ok
        {
            return Err(EvalError::Validation(format!(
                "{}: stored metrics disagree with the scores",
                self.topic
            )));
        }
        Ok(())
    }
}

/// Scores every test example with a frozen model.
pub fn evaluate(model: &StanceModel, test: &Prepared<TestSplit>, exec: Execution) -> Result<TopicReport, EvalError> {
    let scored = exec.map(test.examples(), |ex| {
        model
            .predict(&ex.text, &ex.image)
            .map(|p| ScoredExample {
                id: ex.id.clone(),
                prob_support: p.prob_support,
                gold: ex.label,
            })
            .map_err(|source| EvalError::Model {
                id: ex.id.clone(),
                source,
            })
    });
    TopicReport::from_scores(test.topic, scored.into_iter().collect::<Result<_, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergedReport {
    pub topics: Vec<TopicReport>,
    pub pooled: ConfusionCounts,
    pub micro_f1: f64,
}

impl MergedReport {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.topics.is_empty() {
            return Err(EvalError::Validation("merged report has no topics".into()));
        }
        for t in &self.topics {
            t.validate()?;
        }
        let again = merge_micro_f1(&self.topics)?;
        if again.pooled != self.pooled || (again.micro_f1 - self.micro_f1).abs() > RECOMPUTE_TOLERANCE {
            return Err(EvalError::Validation("micro-F1 disagrees with the pooled counts".into()));
        }
        Ok(())
    }
}

/// Pools confusion counts across topics and takes the positive-class F1.
pub fn merge_micro_f1(reports: &[TopicReport]) -> Result<MergedReport, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::Usage("nothing to merge".into()));
    }
    let mut seen = HashSet::new();
    for r in reports {
        for s in &r.scores {
            if !seen.insert(s.id.as_str()) {
                return Err(EvalError::Validation(format!(
                    "example id {:?} appears in more than one report",
                    s.id
                )));
            }
        }
    }
    let pooled = ConfusionCounts::pooled(reports.iter().map(|r| &r.counts));
    Ok(MergedReport {
        topics: reports.to_vec(),
        pooled,
        micro_f1: f1(&pooled)?,
    })
}

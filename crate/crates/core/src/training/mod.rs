//! Mini-batch training, the hyperparameter grid and best-checkpoint selection.

mod optimizer;
mod rundir;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::optimizer::{clip_global_norm, select_optimizer, ModelDescription, OptimizerKind, OptimizerSpec, CLIP_NORM};
pub use self::rundir::{read_history, write_grid, GridSummary, TrialManifest, TrialStatus, TrialSummary};

use self::optimizer::Optimizer;
use crate::corpus::Topic;
use crate::evaluation::{EvalError, ScoredExample, TopicReport};
use crate::exec::Execution;
use crate::model::{FusionConfig, ImageEncoderFamily, ModelError, StanceModel};
use crate::pipeline::{ExampleFeatures, Prepared, TrainSplit, ValidationSplit};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("training data: {0}")]
    Data(String),
    #[error("epoch {epoch}: non-finite loss on example {example}")]
    NonFiniteLoss { epoch: usize, example: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("hyperparameter grid is empty")]
    Empty,
    #[error("every trial aborted:\n{}", .0.join("\n"))]
    AllAborted(Vec<String>),
    #[error("{path}: {message}")]
    Io { path: std::path::PathBuf, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

pub const DEFAULT_LEARNING_RATES: [f64; 3] = [1e-4, 1e-5, 5e-6];
pub const DEFAULT_BATCH_SIZES: [usize; 3] = [16, 8, 4];
pub const DEFAULT_MAX_EPOCHS: usize = 10;

impl Hyperparams {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.learning_rate > 0.0 && self.learning_rate < 1.0) {
            return Err(TrainError::Hyperparams(format!("learning rate {} outside (0, 1)", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Hyperparams("batch size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(TrainError::Hyperparams("at least one epoch required".into()));
        }
        Ok(())
    }
}

/// Cross product of learning rates (outer) and batch sizes (inner).
pub fn make_grid(learning_rates: &[f64], batch_sizes: &[usize], max_epochs: usize, seed: u64) -> Vec<Hyperparams> {
    learning_rates
        .iter()
        .flat_map(|&learning_rate| {
            batch_sizes.iter().map(move |&batch_size| Hyperparams {
                learning_rate,
                batch_size,
                max_epochs,
                seed,
            })
        })
        .collect()
}

/// {1e-4, 1e-5, 5e-6} × {16, 8, 4}.
pub fn default_grid(max_epochs: usize, seed: u64) -> Vec<Hyperparams> {
    make_grid(&DEFAULT_LEARNING_RATES, &DEFAULT_BATCH_SIZES, max_epochs, seed)
}

/// One line of `history.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub val_f1: f64,
    pub val_macro_f1: f64,
    pub val_auc: Option<f64>,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    /// Index of the first epoch with the highest validation F1.
    pub fn best_epoch(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, r) in self.epochs.iter().enumerate() {
            if best.is_none_or(|b| r.val_f1 > self.epochs[b].val_f1) {
                best = Some(i);
            }
        }
        best
    }
}

/// Everything about a model except its widths, which come from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub fusion: FusionConfig,
    pub text_encoder: String,
    pub image_encoder: String,
    pub image_family: ImageEncoderFamily,
}

impl ModelConfig {
    pub fn description(&self) -> ModelDescription {
        ModelDescription {
            image_family: Some(self.image_family),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters as of `best_epoch`.
    pub model: StanceModel,
    pub history: TrainHistory,
    /// 0-based index into `history.epochs`.
    pub best_epoch: usize,
    pub optimizer: OptimizerSpec,
}

fn widths(examples: &[ExampleFeatures]) -> Result<(usize, usize), TrainError> {
    let first = examples.first().ok_or_else(|| TrainError::Data("no examples".into()))?;
    let dims = (first.text.hidden_dim(), first.image.hidden_dim());
    if examples.iter().any(|e| (e.text.hidden_dim(), e.image.hidden_dim()) != dims) {
        return Err(TrainError::Data("examples have inconsistent encoder widths".into()));
    }
    Ok(dims)
}

pub(crate) fn score(model: &StanceModel, topic: Topic, examples: &[ExampleFeatures], exec: Execution) -> Result<TopicReport, TrainError> {
    let scored = exec.map(examples, |ex| {
        model.predict(&ex.text, &ex.image).map(|p| ScoredExample {
            id: ex.id.clone(),
            prob_support: p.prob_support,
            gold: ex.label,
        })
    });
    let scored = scored.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(TopicReport::from_scores(topic, scored)?)
}

fn dropout_rng(seed: u64, epoch: usize, position: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((1 << 63) | ((epoch as u64) << 32) | position as u64);
    rng
}

/// Trains one model and keeps the parameters of the epoch with the best
/// validation F1 (earliest on ties).
///
/// Each epoch visits the training examples in a seeded random order in
/// mini-batches. Per-example gradients inside a batch are computed through
/// `exec` and summed in batch order, so results do not depend on it.
pub fn train(
    config: &ModelConfig,
    train_set: &Prepared<TrainSplit>,
    val_set: &Prepared<ValidationSplit>,
    hp: &Hyperparams,
    exec: Execution,
) -> Result<TrainOutcome, TrainError> {
    hp.validate()?;
    let (text_dim, image_dim) = widths(train_set.examples())?;
    if widths(val_set.examples())? != (text_dim, image_dim) {
        return Err(TrainError::Data("validation widths differ from training widths".into()));
    }
    let mut model = StanceModel::new(config.fusion.clone(), text_dim, image_dim, hp.seed)?;
    let spec = select_optimizer(&config.description());
    let mut optimizer = Optimizer::new(spec, hp.learning_rate, &model.params);
    let examples = train_set.examples();
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(hp.seed);

    let mut history = TrainHistory::default();
    let mut best: Option<(usize, f64, StanceModel)> = None;
    for epoch in 0..hp.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(hp.batch_size).enumerate() {
            let current = &model;
            let results = exec.map_indexed(batch, |k, &i| {
                let ex = &examples[i];
                let mut rng = dropout_rng(hp.seed, epoch, b * hp.batch_size + k);
                current.loss_and_grad(&ex.text, &ex.image, ex.label, Some(&mut rng))
            });
            let mut total = model.params.zeros_like();
            for (&i, result) in batch.iter().zip(results) {
                let (loss, grad) = result?;
                if !loss.is_finite() || !grad.all_finite() {
                    return Err(TrainError::NonFiniteLoss {
                        epoch: epoch + 1,
                        example: examples[i].id.clone(),
                    });
                }
                loss_sum += loss;
                total.add_assign(&grad);
            }
            total.scale(1.0 / batch.len() as f64);
            clip_global_norm(&mut total, CLIP_NORM);
            optimizer.update(&mut model.params, &total);
        }
        let val = score(&model, val_set.topic, val_set.examples(), exec)?;
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / examples.len() as f64,
            val_f1: val.f1,
            val_macro_f1: val.macro_f1,
            val_auc: val.auc,
            val_acc: val.acc,
        };
        log::debug!("epoch {}: loss {:.4} val F1 {:.2}", record.epoch, record.train_loss, record.val_f1);
        if best.as_ref().is_none_or(|(_, f1, _)| record.val_f1 > *f1) {
            best = Some((epoch, record.val_f1, model.clone()));
        }
        history.epochs.push(record);
    }
    let (best_epoch, _, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        history,
        best_epoch,
        optimizer: spec,
    })
}

#[derive(Clone, Debug)]
pub struct Trial {
    pub hyperparams: Hyperparams,
    pub result: Result<TrainOutcome, String>,
}

/// Position of the selected model in a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestPointer {
    pub trial: usize,
    /// 1-based epoch number.
    pub epoch: usize,
    pub val_f1: f64,
}

#[derive(Clone, Debug)]
pub struct GridResult {
    pub trials: Vec<Trial>,
    pub best: BestPointer,
}

impl GridResult {
    pub fn best_model(&self) -> &StanceModel {
        &self.trials[self.best.trial].result.as_ref().expect("best trial completed").model
    }
}

/// Highest validation F1 over all (trial, epoch) pairs; ties go to the
/// earliest trial, then the earliest epoch. Aborted trials are `None`.
pub fn select_best(histories: &[Option<&TrainHistory>]) -> Option<BestPointer> {
    let mut best: Option<BestPointer> = None;
    for (t, h) in histories.iter().enumerate() {
        let Some(h) = h else { continue };
        for (e, r) in h.epochs.iter().enumerate() {
            if best.is_none_or(|b| r.val_f1 > b.val_f1) {
                best = Some(BestPointer {
                    trial: t,
                    epoch: e + 1,
                    val_f1: r.val_f1,
                });
            }
        }
    }
    best
}

/// Runs every grid point (trials in parallel under `exec`).
pub fn grid_search(
    config: &ModelConfig,
    train_set: &Prepared<TrainSplit>,
    val_set: &Prepared<ValidationSplit>,
    grid: &[Hyperparams],
    exec: Execution,
) -> Result<GridResult, GridError> {
    if grid.is_empty() {
        return Err(GridError::Empty);
    }
    let trials: Vec<Trial> = exec
        .map(grid, |hp| train(config, train_set, val_set, hp, exec))
        .into_iter()
        .zip(grid)
        .enumerate()
        .map(|(k, (result, hp))| {
            let result = result.map_err(|e| {
                let msg = format!("trial {k} (lr {}, batch {}): {e}", hp.learning_rate, hp.batch_size);
                log::warn!("{msg}");
                msg
            });
            Trial {
                hyperparams: *hp,
                result,
            }
        })
        .collect();
    let histories: Vec<Option<&TrainHistory>> = trials.iter().map(|t| t.result.as_ref().ok().map(|o| &o.history)).collect();
    match select_best(&histories) {
        Some(best) => Ok(GridResult { trials, best }),
        None => Err(GridError::AllAborted(
            trials.into_iter().filter_map(|t| t.result.err()).collect(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, f1: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            train_loss: 0.5,
            val_f1: f1,
            val_macro_f1: f1,
            val_auc: None,
            val_acc: f1,
        }
    }

    #[test]
    fn grid_shape() {
        let g = default_grid(10, 0);
        assert_eq!(g.len(), 9);
        let points: Vec<(f64, usize)> = g.iter().map(|h| (h.learning_rate, h.batch_size)).collect();
        assert_eq!(points[0], (1e-4, 16));
        assert_eq!(points[1], (1e-4, 8));
        assert_eq!(points[8], (5e-6, 4));
    }

    #[test]
    fn hyperparam_validation() {
        let hp = Hyperparams {
            learning_rate: 0.01,
            batch_size: 4,
            max_epochs: 0,
            seed: 0,
        };
        assert!(hp.validate().unwrap_err().to_string().contains("at least one epoch"));
        assert!(Hyperparams { learning_rate: 1.0, max_epochs: 1, ..hp }.validate().is_err());
        assert!(Hyperparams { batch_size: 0, max_epochs: 1, ..hp }.validate().is_err());
    }

    #[test]
    fn earliest_tie_wins() {
        let a = TrainHistory {
            epochs: vec![rec(1, 70.0), rec(2, 80.0)],
        };
        let b = TrainHistory {
            epochs: vec![rec(1, 80.0)],
        };
        let best = select_best(&[Some(&a), Some(&b)]).unwrap();
        assert_eq!((best.trial, best.epoch), (0, 2));
        let best = select_best(&[None, Some(&b), Some(&a)]).unwrap();
        assert_eq!((best.trial, best.epoch), (1, 1));
        assert!(select_best(&[None]).is_none());
        assert_eq!(a.best_epoch(), Some(1));
        let flat = TrainHistory {
            epochs: vec![rec(1, 50.0), rec(2, 50.0)],
        };
        assert_eq!(flat.best_epoch(), Some(0));
    }
}

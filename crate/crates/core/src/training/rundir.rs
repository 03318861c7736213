//! Run directory layout:
//!
//! ```text
//! <dir>/grid.json
//! <dir>/trial-<k>/manifest.json
//! <dir>/trial-<k>/history.jsonl     one EpochRecord per line
//! <dir>/trial-<k>/checkpoint/       best-epoch parameters (completed trials)
//! ```

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BestPointer, EpochRecord, GridError, GridResult, Hyperparams, ModelConfig, OptimizerSpec};
use crate::fsutil::write_dir_atomic;
use crate::model::{save_checkpoint, CheckpointManifest};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Aborted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub hyperparams: Hyperparams,
    pub status: TrialStatus,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: Option<usize>,
    pub best_val_f1: Option<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialManifest {
    #[serde(flatten)]
    pub summary: TrialSummary,
    pub model: ModelConfig,
    pub optimizer: Option<OptimizerSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub trials: Vec<TrialSummary>,
    pub best: BestPointer,
    /// Relative to the run directory.
    pub best_checkpoint: String,
}

fn to_io(e: impl std::fmt::Display) -> io::Error {
    io::Error::other(e.to_string())
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializes");
    s.push('\n');
    s
}

/// Replaces `dir` with the artifacts of `result`.
pub fn write_grid(dir: &Path, result: &GridResult, config: &ModelConfig) -> Result<GridSummary, GridError> {
    let mut trials = Vec::with_capacity(result.trials.len());
    for (k, trial) in result.trials.iter().enumerate() {
        trials.push(match &trial.result {
            Ok(outcome) => TrialSummary {
                trial: k,
                hyperparams: trial.hyperparams,
                status: TrialStatus::Completed,
                best_epoch: Some(outcome.best_epoch + 1),
                best_val_f1: Some(outcome.history.epochs[outcome.best_epoch].val_f1),
                diagnostic: None,
            },
            Err(msg) => TrialSummary {
                trial: k,
                hyperparams: trial.hyperparams,
                status: TrialStatus::Aborted,
                best_epoch: None,
                best_val_f1: None,
                diagnostic: Some(msg.clone()),
            },
        });
    }
    let summary = GridSummary {
        trials: trials.clone(),
        best: result.best,
        best_checkpoint: format!("trial-{}/checkpoint", result.best.trial),
    };
    write_dir_atomic(dir, |tmp| {
        for (trial, s) in result.trials.iter().zip(&trials) {
            let tdir = tmp.join(format!("trial-{}", s.trial));
            fs::create_dir_all(&tdir)?;
            let outcome = trial.result.as_ref().ok();
            let manifest = TrialManifest {
                summary: s.clone(),
                model: config.clone(),
                optimizer: outcome.map(|o| o.optimizer),
            };
            fs::write(tdir.join("manifest.json"), json(&manifest))?;
            let mut history = String::new();
            for r in outcome.map(|o| o.history.epochs.as_slice()).unwrap_or_default() {
                history.push_str(&serde_json::to_string(r).map_err(to_io)?);
                history.push('\n');
            }
            fs::write(tdir.join("history.jsonl"), history)?;
            if let Some(o) = outcome {
                let ckpt = CheckpointManifest::describe(
                    &o.model,
                    &config.text_encoder,
                    &config.image_encoder,
                    config.image_family,
                    trial.hyperparams.seed,
                );
                save_checkpoint(&tdir.join("checkpoint"), &o.model, &ckpt).map_err(to_io)?;
            }
        }
        fs::write(tmp.join("grid.json"), json(&summary))
    })
    .map_err(|e| GridError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(summary)
}

pub fn read_history(path: &Path) -> Result<Vec<EpochRecord>, GridError> {
    let fail = |message: String| GridError::Io {
        path: path.to_path_buf(),
        message,
    };
    let text = fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| fail(format!("line {}: {e}", n + 1))))
        .collect()
}

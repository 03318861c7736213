//! The declarative run configuration (TOML).
//!
//! Relative paths are resolved against the directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::DEFAULT_PIVOTS;
use crate::corpus::{Split, Topic};
use crate::model::{FusionConfig, FusionKind};
use crate::training::{make_grid, Hyperparams, DEFAULT_BATCH_SIZES, DEFAULT_LEARNING_RATES, DEFAULT_MAX_EPOCHS};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitPaths {
    pub train: PathBuf,
    pub validation: PathBuf,
    pub test: PathBuf,
}

impl SplitPaths {
    pub fn get(&self, split: Split) -> &Path {
        match split {
            Split::Train => &self.train,
            Split::Validation => &self.validation,
            Split::Test => &self.test,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OcrChoice {
    #[default]
    None,
    Tesseract,
    BitmapFont,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OcrSection {
    #[serde(default)]
    pub engine: OcrChoice,
    /// Path or name of the tesseract binary.
    pub binary: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TranslatorChoice {
    #[default]
    Identity,
    Table,
    Http,
}

fn yes() -> bool {
    true
}

fn default_pivots() -> Vec<String> {
    DEFAULT_PIVOTS.iter().map(|s| s.to_string()).collect()
}

fn one() -> f64 {
    1.0
}

fn four() -> usize {
    4
}

fn default_key_env() -> String {
    "STANCEFUSE_TRANSLATE_KEY".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentSection {
    #[serde(default = "yes")]
    pub back_translation: bool,
    #[serde(default = "yes")]
    pub synonyms: bool,
    #[serde(default)]
    pub translator: TranslatorChoice,
    /// TSV of `source, target, text, translation` for the table translator.
    pub table: Option<PathBuf>,
    pub endpoint: Option<String>,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_pivots")]
    pub pivot_pool: Vec<String>,
    #[serde(default = "one")]
    pub target_ratio: f64,
    #[serde(default = "four")]
    pub max_per_example: usize,
    /// Directory with `index.noun`, `data.noun` and `noun.exc`.
    pub lexicon_dir: Option<PathBuf>,
}

impl AugmentSection {
    pub fn enabled(&self) -> bool {
        self.back_translation || self.synonyms
    }
}

impl Default for AugmentSection {
    fn default() -> Self {
        AugmentSection {
            back_translation: false,
            synonyms: false,
            translator: TranslatorChoice::Identity,
            table: None,
            endpoint: None,
            api_key_env: default_key_env(),
            pivot_pool: default_pivots(),
            target_ratio: 1.0,
            max_per_example: 4,
            lexicon_dir: None,
        }
    }
}

fn toy() -> String {
    "toy".into()
}

fn sixteen() -> usize {
    16
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub fusion: FusionKind,
    pub common_dim: Option<usize>,
    pub num_heads: Option<usize>,
    pub dropout: Option<f64>,
    pub classifier_hidden: Option<usize>,
    #[serde(default = "toy")]
    pub text_encoder: String,
    #[serde(default = "toy")]
    pub image_encoder: String,
    /// Width of the toy encoders.
    #[serde(default = "sixteen")]
    pub hidden_dim: usize,
}

impl ModelSection {
    pub fn fusion_config(&self) -> Result<FusionConfig, ConfigError> {
        let mut c = FusionConfig::new(self.fusion, self.common_dim.unwrap_or(768));
        if let Some(h) = self.num_heads {
            c.num_heads = h;
        }
        if let Some(d) = self.dropout {
            c.dropout = d;
        }
        c.classifier_hidden = self.classifier_hidden.unwrap_or(c.common_dim);
        c.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingSection {
    #[serde(default = "default_rates")]
    pub learning_rates: Vec<f64>,
    #[serde(default = "default_batches")]
    pub batch_sizes: Vec<usize>,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
}

fn default_rates() -> Vec<f64> {
    DEFAULT_LEARNING_RATES.to_vec()
}

fn default_batches() -> Vec<usize> {
    DEFAULT_BATCH_SIZES.to_vec()
}

fn default_epochs() -> usize {
    DEFAULT_MAX_EPOCHS
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            learning_rates: default_rates(),
            batch_sizes: default_batches(),
            max_epochs: default_epochs(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seeds augmentation, encoders, initialization and shuffling.
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: BTreeMap<Topic, SplitPaths>,
    #[serde(default)]
    pub ocr: OcrSection,
    #[serde(default)]
    pub augment: AugmentSection,
    pub model: ModelSection,
    #[serde(default)]
    pub training: TrainingSection,
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        resolve(base_dir, &mut config.output_dir);
        for paths in config.data.values_mut() {
            resolve(base_dir, &mut paths.train);
            resolve(base_dir, &mut paths.validation);
            resolve(base_dir, &mut paths.test);
        }
        if let Some(p) = config.augment.table.as_mut() {
            resolve(base_dir, p);
        }
        if let Some(p) = config.augment.lexicon_dir.as_mut() {
            resolve(base_dir, p);
        }
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base).map_err(|e| match e {
            ConfigError::Invalid(m) => ConfigError::Read {
                path: path.to_path_buf(),
                message: m,
            },
            other => other,
        })
    }

    /// Structural checks that need no file system access.
    pub fn check(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.data.is_empty() {
            return bad("no [data.<topic>] sections".into());
        }
        self.model.fusion_config()?;
        if self.model.hidden_dim == 0 {
            return bad("model.hidden_dim must be positive".into());
        }
        for (what, name) in [("text", &self.model.text_encoder), ("image", &self.model.image_encoder)] {
            if name != "toy" {
                return bad(format!("unknown {what} encoder {name:?}; this build provides \"toy\""));
            }
        }
        let a = &self.augment;
        if !(a.target_ratio > 0.0 && a.target_ratio <= 1.0) {
            return bad(format!("augment.target_ratio {} outside (0, 1]", a.target_ratio));
        }
        if a.back_translation && a.pivot_pool.is_empty() {
            return bad("augment.pivot_pool is empty".into());
        }
        if a.back_translation && a.translator == TranslatorChoice::Table && a.table.is_none() {
            return bad("augment.translator = \"table\" needs augment.table".into());
        }
        if a.back_translation && a.translator == TranslatorChoice::Http && a.endpoint.is_none() {
            return bad("augment.translator = \"http\" needs augment.endpoint".into());
        }
        if a.synonyms && a.lexicon_dir.is_none() {
            return bad("augment.synonyms needs augment.lexicon_dir".into());
        }
        let t = &self.training;
        if t.learning_rates.is_empty() || t.batch_sizes.is_empty() {
            return bad("training grid is empty".into());
        }
        for hp in self.grid() {
            hp.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        }
        Ok(())
    }

    /// Checks that every referenced input path exists.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let mut paths: Vec<&Path> = Vec::new();
        for p in self.data.values() {
            paths.extend([p.train.as_path(), p.validation.as_path(), p.test.as_path()]);
        }
        if self.augment.back_translation {
            paths.extend(self.augment.table.as_deref());
        }
        if self.augment.synonyms {
            paths.extend(self.augment.lexicon_dir.as_deref());
        }
        match paths.into_iter().find(|p| !p.exists()) {
            Some(missing) => Err(ConfigError::Invalid(format!("{} does not exist", missing.display()))),
            None => Ok(()),
        }
    }

    pub fn grid(&self) -> Vec<Hyperparams> {
        make_grid(
            &self.training.learning_rates,
            &self.training.batch_sizes,
            self.training.max_epochs,
            self.seed,
        )
    }

    pub fn topics(&self) -> Vec<Topic> {
        self.data.keys().copied().collect()
    }
}

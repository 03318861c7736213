//! Encoders, fusion heads and the stance classifier.

mod checkpoint;
mod classifier;
pub mod encoder;
pub mod fusion;
pub(crate) mod ops;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use self::checkpoint::{load_checkpoint, save_checkpoint, CheckpointManifest, TensorInfo, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use self::classifier::{ClassifierParams, StancePrediction};
pub use self::encoder::{
    encode_image_layout, encode_text, make_toy_encoder, EncoderOutput, ImageEncoderFamily, LayoutImageEncoder,
    TextEncoder, ToyLayoutImageEncoder, ToyTextEncoder, MAX_TEXT_TOKENS,
};
pub use self::fusion::{
    cross_attention_trace, fuse_concat, fuse_cross_attention, fuse_semantic_similarity, semantic_similarity_trace,
    AttentionMap, CrossAttentionParams, FusionTrace, SemanticSimilarityParams,
};

use crate::corpus::StanceLabel;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Domain(String),
    #[error("encoder failed: {0}")]
    Encoder(String),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionKind {
    /// t1
    #[serde(alias = "t1")]
    Concat,
    /// t2
    #[serde(alias = "t2")]
    CrossAttention,
    /// t3
    #[serde(alias = "t3")]
    SemanticSimilarity,
}

impl FusionKind {
    pub const ALL: [FusionKind; 3] = [FusionKind::Concat, FusionKind::CrossAttention, FusionKind::SemanticSimilarity];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionKind::Concat => "concat",
            FusionKind::CrossAttention => "cross_attention",
            FusionKind::SemanticSimilarity => "semantic_similarity",
        }
    }

    /// Short name used in result tables.
    pub fn short_name(self) -> &'static str {
        match self {
            FusionKind::Concat => "t1",
            FusionKind::CrossAttention => "t2",
            FusionKind::SemanticSimilarity => "t3",
        }
    }
}

impl fmt::Display for FusionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FusionKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FusionKind::ALL
            .into_iter()
            .find(|k| s.eq_ignore_ascii_case(k.as_str()) || s.eq_ignore_ascii_case(k.short_name()))
            .ok_or_else(|| ModelError::Config(format!("unknown fusion kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFusionConfig")]
pub struct FusionConfig {
    pub kind: FusionKind,
    pub common_dim: usize,
    pub num_heads: usize,
    pub dropout: f64,
    pub classifier_hidden: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFusionConfig {
    kind: FusionKind,
    #[serde(default = "default_common_dim")]
    common_dim: usize,
    #[serde(default = "default_heads")]
    num_heads: usize,
    #[serde(default = "default_dropout")]
    dropout: f64,
    classifier_hidden: Option<usize>,
}

fn default_common_dim() -> usize {
    768
}

fn default_heads() -> usize {
    8
}

fn default_dropout() -> f64 {
    0.1
}

impl TryFrom<RawFusionConfig> for FusionConfig {
    type Error = ModelError;

    fn try_from(raw: RawFusionConfig) -> Result<Self, Self::Error> {
        let config = FusionConfig {
            kind: raw.kind,
            common_dim: raw.common_dim,
            num_heads: raw.num_heads,
            dropout: raw.dropout,
            classifier_hidden: raw.classifier_hidden.unwrap_or(raw.common_dim),
        };
        config.validate()?;
        Ok(config)
    }
}

impl FusionConfig {
    /// Defaults: 8 heads, dropout 0.1, classifier hidden = `common_dim`.
    pub fn new(kind: FusionKind, common_dim: usize) -> FusionConfig {
        FusionConfig {
            kind,
            common_dim,
            num_heads: default_heads(),
            dropout: default_dropout(),
            classifier_hidden: common_dim,
        }
    }

    pub fn with_heads(mut self, num_heads: usize) -> FusionConfig {
        self.num_heads = num_heads;
        self
    }

    pub fn with_dropout(mut self, dropout: f64) -> FusionConfig {
        self.dropout = dropout;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.common_dim == 0 || self.classifier_hidden == 0 || self.num_heads == 0 {
            return Err(ModelError::Config("dimensions and head count must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.kind == FusionKind::CrossAttention && self.common_dim % self.num_heads != 0 {
            return Err(ModelError::Config(format!(
                "common_dim {} is not divisible by num_heads {}",
                self.common_dim, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn fused_dim(&self, text_dim: usize, image_dim: usize) -> usize {
        match self.kind {
            FusionKind::Concat => text_dim + image_dim,
            FusionKind::CrossAttention => self.common_dim + text_dim,
            FusionKind::SemanticSimilarity => 4 * self.common_dim,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeadParams {
    Concat,
    CrossAttention(CrossAttentionParams),
    SemanticSimilarity(SemanticSimilarityParams),
}

/// All trainable tensors. Gradients use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub head: HeadParams,
    pub classifier: ClassifierParams,
}

impl ModelParams {
    /// `fusion.*` then `classifier.*`, in a fixed order.
    pub fn named_tensors(&self) -> Vec<(String, &Array2<f64>)> {
        let head = match &self.head {
            HeadParams::Concat => Vec::new(),
            HeadParams::CrossAttention(p) => p.tensors(),
            HeadParams::SemanticSimilarity(p) => p.tensors(),
        };
        head.into_iter()
            .map(|(n, t)| (format!("fusion.{n}"), t))
            .chain(self.classifier.tensors().into_iter().map(|(n, t)| (format!("classifier.{n}"), t)))
            .collect()
    }

    /// Same order as [`ModelParams::named_tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Array2<f64>> {
        let mut out = match &mut self.head {
            HeadParams::Concat => Vec::new(),
            HeadParams::CrossAttention(p) => p.tensors_mut(),
            HeadParams::SemanticSimilarity(p) => p.tensors_mut(),
        };
        out.extend(self.classifier.tensors_mut());
        out
    }

    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn add_assign(&mut self, other: &ModelParams) {
        let theirs: Vec<Array2<f64>> = other.named_tensors().into_iter().map(|(_, t)| t.clone()).collect();
        for (mine, t) in self.tensors_mut().into_iter().zip(&theirs) {
            *mine += t;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.mapv_inplace(|x| x * factor);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.named_tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn num_scalars(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.named_tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// A fusion head plus classifier over fixed encoder widths.
#[derive(Clone, Debug, PartialEq)]
pub struct StanceModel {
    pub config: FusionConfig,
    pub text_dim: usize,
    pub image_dim: usize,
    pub params: ModelParams,
}

impl StanceModel {
    /// Xavier-uniform weights and zero biases from a ChaCha8 stream.
    pub fn new(config: FusionConfig, text_dim: usize, image_dim: usize, seed: u64) -> Result<StanceModel, ModelError> {
        config.validate()?;
        if text_dim == 0 || image_dim == 0 {
            return Err(ModelError::Config("encoder widths must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let head = match config.kind {
            FusionKind::Concat => HeadParams::Concat,
            FusionKind::CrossAttention => HeadParams::CrossAttention(CrossAttentionParams::init(
                text_dim,
                image_dim,
                config.common_dim,
                config.num_heads,
                &mut rng,
            )),
            FusionKind::SemanticSimilarity => HeadParams::SemanticSimilarity(SemanticSimilarityParams::init(
                text_dim,
                image_dim,
                config.common_dim,
                &mut rng,
            )),
        };
        let classifier = ClassifierParams::init(config.fused_dim(text_dim, image_dim), config.classifier_hidden, &mut rng);
        Ok(StanceModel {
            config,
            text_dim,
            image_dim,
            params: ModelParams { head, classifier },
        })
    }

    /// Wraps existing parameters after checking every shape against `config`.
    pub fn from_params(config: FusionConfig, text_dim: usize, image_dim: usize, params: ModelParams) -> Result<StanceModel, ModelError> {
        let reference = StanceModel::new(config.clone(), text_dim, image_dim, 0)?;
        let expected: Vec<(String, Vec<usize>)> = reference
            .params
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        let got: Vec<(String, Vec<usize>)> = params
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect();
        if expected != got {
            return Err(ModelError::Config(format!(
                "parameter shapes {got:?} do not match the configuration {expected:?}"
            )));
        }
        if let (HeadParams::CrossAttention(p), FusionKind::CrossAttention) = (&params.head, config.kind) {
            if p.num_heads != config.num_heads {
                return Err(ModelError::Config("head count differs from configuration".into()));
            }
        }
        Ok(StanceModel {
            config,
            text_dim,
            image_dim,
            params,
        })
    }

    pub fn fused_dim(&self) -> usize {
        self.config.fused_dim(self.text_dim, self.image_dim)
    }

    fn check_inputs(&self, text: &EncoderOutput, image: &EncoderOutput) -> Result<(), ModelError> {
        text.validate()?;
        image.validate()?;
        if text.hidden_dim() != self.text_dim || image.hidden_dim() != self.image_dim {
            return Err(ModelError::InvalidInput(format!(
                "encoder widths ({}, {}) do not match the model ({}, {})",
                text.hidden_dim(),
                image.hidden_dim(),
                self.text_dim,
                self.image_dim
            )));
        }
        Ok(())
    }

    pub fn fuse(&self, text: &EncoderOutput, image: &EncoderOutput) -> Result<FusionTrace, ModelError> {
        self.check_inputs(text, image)?;
        match &self.params.head {
            HeadParams::Concat => Ok(fusion::concat_trace(text, image)),
            HeadParams::CrossAttention(p) => cross_attention_trace(text, image, p),
            HeadParams::SemanticSimilarity(p) => semantic_similarity_trace(text, image, p),
        }
    }

    pub fn predict(&self, text: &EncoderOutput, image: &EncoderOutput) -> Result<StancePrediction, ModelError> {
        let trace = self.fuse(text, image)?;
        Ok(self.params.classifier.classify(&trace.fused))
    }

    /// Cross-entropy without dropout.
    pub fn loss(&self, text: &EncoderOutput, image: &EncoderOutput, gold: StanceLabel) -> Result<f64, ModelError> {
        Ok(self.loss_and_grad(text, image, gold, None::<&mut ChaCha8Rng>)?.0)
    }

    /// Loss and its gradient with respect to every parameter. Dropout is
    /// applied to the classifier's hidden layer only when `dropout_rng` is given.
    pub fn loss_and_grad<R: Rng>(
        &self,
        text: &EncoderOutput,
        image: &EncoderOutput,
        gold: StanceLabel,
        dropout_rng: Option<&mut R>,
    ) -> Result<(f64, ModelParams), ModelError> {
        let trace = self.fuse(text, image)?;
        let dropout = dropout_rng.map(|r| (r, self.config.dropout));
        let cls_trace = self.params.classifier.forward(&trace.fused, dropout);
        let (loss, d_classifier, d_fused) = self.params.classifier.backward(&cls_trace, gold);
        let head = match &self.params.head {
            HeadParams::Concat => HeadParams::Concat,
            HeadParams::CrossAttention(p) => {
                HeadParams::CrossAttention(fusion::cross_attention_backward(text, image, p, &trace, d_fused.view()))
            }
            HeadParams::SemanticSimilarity(p) => {
                HeadParams::SemanticSimilarity(fusion::semantic_similarity_backward(text, image, p, &trace, d_fused.view()))
            }
        };
        Ok((
            loss,
            ModelParams {
                head,
                classifier: d_classifier,
            },
        ))
    }
}

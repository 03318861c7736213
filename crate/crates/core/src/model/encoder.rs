//! Encoder interfaces and the deterministic toy encoders.
//!
//! Pretrained text and image+layout encoders plug in by implementing
//! [`TextEncoder`] and [`LayoutImageEncoder`]. The toy encoders hash tokens
//! (and boxes, and patch statistics) to fixed pseudo-random vectors and
//! mean-pool, so the whole pipeline runs offline and reproducibly.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ModelError;
use crate::corpus::{ImageTensor, LayoutDocument, IMAGE_SIDE, LAYOUT_SCALE};

/// Maximum number of text tokens fed to the text encoder.
pub const MAX_TEXT_TOKENS: usize = 512;

/// Per-token hidden vectors, a pooled vector, and the token mask.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderOutput {
    pub sequence: Array2<f64>,
    pub pooled: Array1<f64>,
    pub mask: Vec<bool>,
}

impl EncoderOutput {
    pub fn new(sequence: Array2<f64>, pooled: Array1<f64>, mask: Vec<bool>) -> Result<EncoderOutput, ModelError> {
        let out = EncoderOutput {
            sequence,
            pooled,
            mask,
        };
        out.validate()?;
        Ok(out)
    }

    /// All tokens unmasked; pooled is the mean row.
    pub fn mean_pooled(sequence: Array2<f64>) -> Result<EncoderOutput, ModelError> {
        let n = sequence.nrows();
        let pooled = super::ops::masked_mean(&sequence, &vec![true; n]);
        EncoderOutput::new(sequence, pooled, vec![true; n])
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.mask.len() != self.sequence.nrows() {
            return Err(ModelError::InvalidInput(format!(
                "mask length {} != sequence rows {}",
                self.mask.len(),
                self.sequence.nrows()
            )));
        }
        if !self.mask.iter().any(|&m| m) {
            return Err(ModelError::InvalidInput("encoder output has no unmasked token".into()));
        }
        if self.pooled.len() != self.sequence.ncols() {
            return Err(ModelError::InvalidInput("pooled width != hidden dim".into()));
        }
        if !self.sequence.iter().chain(self.pooled.iter()).all(|x| x.is_finite()) {
            return Err(ModelError::InvalidInput("non-finite encoder output".into()));
        }
        Ok(())
    }

    pub fn hidden_dim(&self) -> usize {
        self.sequence.ncols()
    }

    pub fn len(&self) -> usize {
        self.sequence.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.nrows() == 0
    }
}

/// Which kind of image encoder a model uses; drives the optimizer rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageEncoderFamily {
    /// Consumes OCR words with their boxes alongside pixels.
    LayoutAware,
    /// Pixels only (convolutional backbones and the like).
    PixelOnly,
    /// The hashing toy encoder.
    Toy,
}

pub trait TextEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn hidden_dim(&self) -> usize;
    fn tokenize(&self, text: &str) -> Vec<String>;
    fn encode_tokens(&self, tokens: &[String]) -> Result<EncoderOutput, ModelError>;
    /// False if calls must be serialized.
    fn thread_safe(&self) -> bool {
        true
    }
}

pub trait LayoutImageEncoder: Send + Sync {
    fn name(&self) -> &str;
    fn hidden_dim(&self) -> usize;
    fn family(&self) -> ImageEncoderFamily;
    fn encode(&self, image: &ImageTensor, layout: &LayoutDocument) -> Result<EncoderOutput, ModelError>;
    fn thread_safe(&self) -> bool {
        true
    }
}

/// Tokenizes, truncates to [`MAX_TEXT_TOKENS`], and encodes.
pub fn encode_text(text: &str, encoder: &dyn TextEncoder) -> Result<EncoderOutput, ModelError> {
    if text.trim().is_empty() {
        return Err(ModelError::InvalidInput("cannot encode empty text".into()));
    }
    let mut tokens = encoder.tokenize(text);
    tokens.truncate(MAX_TEXT_TOKENS);
    let out = encoder
        .encode_tokens(&tokens)
        .map_err(|e| ModelError::Encoder(format!("{}: {e}", encoder.name())))?;
    out.validate()?;
    Ok(out)
}

/// Checks every box, then runs the image+layout encoder.
pub fn encode_image_layout(
    image: &ImageTensor,
    layout: &LayoutDocument,
    encoder: &dyn LayoutImageEncoder,
) -> Result<EncoderOutput, ModelError> {
    if let Some(bad) = layout.words.iter().find(|w| !w.bbox.is_valid()) {
        return Err(ModelError::InvalidInput(format!(
            "layout word {:?} has box {:?} outside [0, {LAYOUT_SCALE}]",
            bad.token,
            bad.bbox.to_array()
        )));
    }
    let out = encoder
        .encode(image, layout)
        .map_err(|e| ModelError::Encoder(format!("{}: {e}", encoder.name())))?;
    out.validate()?;
    Ok(out)
}

fn seeded_vector(seed: u64, domain: &str, key: &str, dim: usize) -> Array1<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(domain.as_bytes());
    hasher.update([0u8]);
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut first = [0u8; 8];
    first.copy_from_slice(&digest[..8]);
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from_le_bytes(first));
    Array1::from_shape_fn(dim, |_| rng.random_range(-1.0..1.0))
}

/// Lowercased alphanumeric runs.
pub fn toy_tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

const EMPTY_TOKEN: &str = "[empty]";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyTextEncoder {
    hidden_dim: usize,
    seed: u64,
}

impl ToyTextEncoder {
    pub fn new(hidden_dim: usize, seed: u64) -> ToyTextEncoder {
        assert!(hidden_dim >= 1, "hidden_dim must be positive");
        ToyTextEncoder { hidden_dim, seed }
    }

    pub fn token_embedding(&self, token: &str) -> Array1<f64> {
        seeded_vector(self.seed, "text-token", token, self.hidden_dim)
    }
}

impl TextEncoder for ToyTextEncoder {
    fn name(&self) -> &str {
        "toy"
    }

    fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn tokenize(&self, text: &str) -> Vec<String> {
        toy_tokenize(text)
    }

    fn encode_tokens(&self, tokens: &[String]) -> Result<EncoderOutput, ModelError> {
        let fallback = [EMPTY_TOKEN.to_string()];
        let tokens = if tokens.is_empty() { &fallback[..] } else { tokens };
        let mut seq = Array2::zeros((tokens.len(), self.hidden_dim));
        for (mut row, tok) in seq.outer_iter_mut().zip(tokens) {
            row.assign(&self.token_embedding(tok));
        }
        EncoderOutput::mean_pooled(seq)
    }
}

/// Number of patch rows along each image side.
pub const TOY_PATCH_GRID: usize = 4;

/// Toy image+layout encoder: a 4×4 grid of patch tokens (mean color through
/// a seeded projection plus a seeded position vector), followed by one token
/// per OCR word (seeded word vector plus a seeded projection of the
/// normalized box). The pooled vector is an order-independent mean.
#[derive(Clone, Debug, PartialEq)]
pub struct ToyLayoutImageEncoder {
    hidden_dim: usize,
    seed: u64,
}

impl ToyLayoutImageEncoder {
    pub fn new(hidden_dim: usize, seed: u64) -> ToyLayoutImageEncoder {
        assert!(hidden_dim >= 1, "hidden_dim must be positive");
        ToyLayoutImageEncoder { hidden_dim, seed }
    }

    fn vector(&self, domain: &str, key: &str) -> Array1<f64> {
        seeded_vector(self.seed, domain, key, self.hidden_dim)
    }

    fn patch_rows(&self, image: &ImageTensor) -> Vec<Array1<f64>> {
        let side = IMAGE_SIDE / TOY_PATCH_GRID;
        let channel: Vec<_> = (0..3).map(|c| self.vector("patch-channel", &c.to_string())).collect();
        let mut rows = Vec::with_capacity(TOY_PATCH_GRID * TOY_PATCH_GRID);
        for py in 0..TOY_PATCH_GRID {
            for px in 0..TOY_PATCH_GRID {
                let mut row = self.vector("patch-position", &format!("{py},{px}"));
                for (c, proj) in channel.iter().enumerate() {
                    let mut sum = 0.0;
                    for y in py * side..(py + 1) * side {
                        for x in px * side..(px + 1) * side {
                            sum += image.get(c, y, x) as f64;
                        }
                    }
                    row.scaled_add(sum / (side * side) as f64, proj);
                }
                rows.push(row);
            }
        }
        rows
    }

    fn word_row(&self, token: &str, bbox: [u16; 4]) -> Array1<f64> {
        let mut row = self.vector("ocr-token", &token.to_lowercase());
        for (i, &coord) in bbox.iter().enumerate() {
            let proj = self.vector("box-coordinate", &i.to_string());
            row.scaled_add(coord as f64 / LAYOUT_SCALE as f64, &proj);
        }
        row
    }
}

impl LayoutImageEncoder for ToyLayoutImageEncoder {
    fn name(&self) -> &str {
        "toy"
    }

    fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    fn family(&self) -> ImageEncoderFamily {
        ImageEncoderFamily::Toy
    }

    fn encode(&self, image: &ImageTensor, layout: &LayoutDocument) -> Result<EncoderOutput, ModelError> {
        let mut rows = self.patch_rows(image);
        let words: Vec<Array1<f64>> = layout
            .words
            .iter()
            .take(MAX_TEXT_TOKENS)
            .map(|w| self.word_row(&w.token, w.bbox.to_array()))
            .collect();

        // Sum word rows in a canonical order so the pooled vector is exactly
        // invariant to OCR word order.
        let mut canonical: Vec<&Array1<f64>> = words.iter().collect();
        canonical.sort_by(|a, b| {
            a.iter()
                .zip(b.iter())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let mut total = Array1::zeros(self.hidden_dim);
        for r in &rows {
            total += r;
        }
        for r in canonical {
            total += r;
        }
        rows.extend(words);
        let n = rows.len();
        let pooled = total / n as f64;
        let mut seq = Array2::zeros((n, self.hidden_dim));
        for (mut dst, src) in seq.outer_iter_mut().zip(&rows) {
            dst.assign(src);
        }
        EncoderOutput::new(seq, pooled, vec![true; n])
    }
}

/// Text and image+layout toy encoders sharing a seed.
pub fn make_toy_encoder(hidden_dim: usize, seed: u64) -> (ToyTextEncoder, ToyLayoutImageEncoder) {
    (
        ToyTextEncoder::new(hidden_dim, seed),
        ToyLayoutImageEncoder::new(hidden_dim, seed),
    )
}

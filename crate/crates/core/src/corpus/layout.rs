//! OCR words and their 2-D positions, normalized to the `[0, 1000]` layout grid.

use image::DynamicImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::CorpusError;
use crate::exec::Execution;

/// Upper bound of the normalized layout coordinate grid.
pub const LAYOUT_SCALE: u32 = 1000;

/// A word box in normalized layout units.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[u16; 4]", into = "[u16; 4]")]
pub struct BoundingBox {
    pub x0: u16,
    pub y0: u16,
    pub x1: u16,
    pub y1: u16,
}

impl BoundingBox {
    pub fn new(x0: u16, y0: u16, x1: u16, y1: u16) -> Result<BoundingBox, CorpusError> {
        let max = LAYOUT_SCALE as u16;
        if x0 > x1 || y0 > y1 || x1 > max || y1 > max {
            return Err(CorpusError::Layout(format!(
                "box [{x0},{y0},{x1},{y1}] violates 0 <= x0 <= x1 <= {max}, 0 <= y0 <= y1 <= {max}"
            )));
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }

    pub fn to_array(self) -> [u16; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    pub fn full_frame() -> BoundingBox {
        let m = LAYOUT_SCALE as u16;
        BoundingBox { x0: 0, y0: 0, x1: m, y1: m }
    }

    pub fn is_valid(&self) -> bool {
        BoundingBox::new(self.x0, self.y0, self.x1, self.y1).is_ok()
    }
}

impl TryFrom<[u16; 4]> for BoundingBox {
    type Error = CorpusError;

    fn try_from(b: [u16; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(b[0], b[1], b[2], b[3])
    }
}

impl From<BoundingBox> for [u16; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// A rectangle in source pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PixelBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> PixelBox {
        PixelBox { x0, y0, x1, y1 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutWord {
    pub token: String,
    pub bbox: BoundingBox,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayoutDocument {
    pub words: Vec<LayoutWord>,
    /// `(width_px, height_px)` of the image the words came from.
    pub source_size: (u32, u32),
}

impl LayoutDocument {
    pub fn empty(source_size: (u32, u32)) -> LayoutDocument {
        LayoutDocument {
            words: Vec::new(),
            source_size,
        }
    }
}

fn scale(coord: u32, dim: u32) -> u16 {
    let scaled = (LAYOUT_SCALE as u64 * coord as u64) / dim as u64;
    scaled.min(LAYOUT_SCALE as u64) as u16
}

/// Maps a pixel rectangle onto the layout grid with `floor(1000·c/d)`,
/// clamped to `[0, 1000]`.
pub fn normalize_box(raw: PixelBox, source_size: (u32, u32)) -> Result<BoundingBox, CorpusError> {
    let (w, h) = source_size;
    if w == 0 || h == 0 {
        return Err(CorpusError::Layout(format!("source size {w}x{h} has no pixels")));
    }
    if raw.x0 > raw.x1 || raw.y0 > raw.y1 {
        return Err(CorpusError::Layout(format!(
            "inverted rectangle ({},{},{},{})",
            raw.x0, raw.y0, raw.x1, raw.y1
        )));
    }
    Ok(BoundingBox {
        x0: scale(raw.x0, w),
        y0: scale(raw.y0, h),
        x1: scale(raw.x1, w),
        y1: scale(raw.y1, h),
    })
}

/// A recognized word with its pixel rectangle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OcrWord {
    pub text: String,
    pub pixel_box: PixelBox,
}

impl OcrWord {
    pub fn new(text: impl Into<String>, pixel_box: PixelBox) -> OcrWord {
        OcrWord {
            text: text.into(),
            pixel_box,
        }
    }
}

#[derive(Debug, Error)]
#[error("OCR engine {engine} failed: {message}")]
pub struct OcrError {
    pub engine: String,
    pub message: String,
}

/// Whether one engine instance may serve several threads at once.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EngineConcurrency {
    /// `recognize` may be called concurrently on a shared instance.
    Shared,
    /// Calls must be serialized; batch extraction runs one image at a time.
    Serial,
}

/// Word-level OCR returning words in reading order with pixel boxes.
pub trait OcrEngine: Send + Sync {
    fn name(&self) -> &str;

    fn recognize(&self, image: &DynamicImage) -> Result<Vec<OcrWord>, OcrError>;

    fn concurrency(&self) -> EngineConcurrency {
        EngineConcurrency::Shared
    }
}

/// Engine that never finds text.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoOcr;

impl OcrEngine for NoOcr {
    fn name(&self) -> &str {
        "none"
    }

    fn recognize(&self, _image: &DynamicImage) -> Result<Vec<OcrWord>, OcrError> {
        Ok(Vec::new())
    }
}

/// Runs OCR and normalizes each word box. Words with blank text are dropped.
pub fn extract_layout(image: &DynamicImage, ocr: &dyn OcrEngine) -> Result<LayoutDocument, CorpusError> {
    let size = (image.width(), image.height());
    let words = ocr.recognize(image)?;
    let mut out = Vec::with_capacity(words.len());
    for word in words {
        let token = word.text.trim();
        if token.is_empty() {
            continue;
        }
        let clamped = PixelBox {
            x0: word.pixel_box.x0.min(size.0),
            y0: word.pixel_box.y0.min(size.1),
            x1: word.pixel_box.x1.min(size.0),
            y1: word.pixel_box.y1.min(size.1),
        };
        out.push(LayoutWord {
            token: token.to_string(),
            bbox: normalize_box(clamped, size)?,
        });
    }
    Ok(LayoutDocument {
        words: out,
        source_size: size,
    })
}

/// Extracts layouts for a batch of images, in parallel when the engine allows it.
pub fn extract_layouts(
    images: &[DynamicImage],
    ocr: &dyn OcrEngine,
    exec: Execution,
) -> Vec<Result<LayoutDocument, CorpusError>> {
    let exec = exec.restrict(ocr.concurrency() == EngineConcurrency::Shared);
    exec.map(images, |img| extract_layout(img, ocr))
}

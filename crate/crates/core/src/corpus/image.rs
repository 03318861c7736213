use std::path::Path;

use image::{DynamicImage, RgbImage};

use super::CorpusError;

/// Side length of the square model input.
pub const IMAGE_SIDE: usize = 224;

/// A `3 × 224 × 224` channel-major image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor {
    data: Vec<f32>,
}

impl ImageTensor {
    pub fn zeros() -> ImageTensor {
        ImageTensor {
            data: vec![0.0; 3 * IMAGE_SIDE * IMAGE_SIDE],
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (3, IMAGE_SIDE, IMAGE_SIDE)
    }

    pub fn get(&self, channel: usize, y: usize, x: usize) -> f32 {
        self.data[(channel * IMAGE_SIDE + y) * IMAGE_SIDE + x]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize, usize) -> f32) -> ImageTensor {
        let mut data = Vec::with_capacity(3 * IMAGE_SIDE * IMAGE_SIDE);
        for c in 0..3 {
            for y in 0..IMAGE_SIDE {
                for x in 0..IMAGE_SIDE {
                    data.push(f(c, y, x));
                }
            }
        }
        ImageTensor { data }
    }
}

pub fn decode_image(bytes: &[u8]) -> Result<DynamicImage, CorpusError> {
    image::load_from_memory(bytes).map_err(|e| CorpusError::ImageFormat(e.to_string()))
}

pub fn load_image(path: &Path) -> Result<DynamicImage, CorpusError> {
    let bytes = std::fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    decode_image(&bytes).map_err(|e| CorpusError::ImageFormat(format!("{}: {e}", path.display())))
}

/// Bilinear resize to 224×224 without preserving aspect ratio.
///
/// Sampling uses pixel centers: output pixel `x` reads source coordinate
/// `(x + 0.5) · w_in / 224 − 0.5`, clamped to the source grid. Grayscale
/// inputs are replicated across the three channels.
pub fn resize_image(image: &DynamicImage) -> Result<ImageTensor, CorpusError> {
    if image.width() == 0 || image.height() == 0 {
        return Err(CorpusError::ImageFormat("image has no pixels".into()));
    }
    let rgb: RgbImage = image.to_rgb8();
    Ok(resize_rgb(&rgb))
}

fn source_coord(out: usize, in_len: u32) -> (u32, u32, f64) {
    let scale = in_len as f64 / IMAGE_SIDE as f64;
    let s = ((out as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_len - 1) as f64);
    let lo = s.floor() as u32;
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, s - lo as f64)
}

fn resize_rgb(rgb: &RgbImage) -> ImageTensor {
    let (w, h) = rgb.dimensions();
    let xs: Vec<_> = (0..IMAGE_SIDE).map(|x| source_coord(x, w)).collect();
    let ys: Vec<_> = (0..IMAGE_SIDE).map(|y| source_coord(y, h)).collect();
    ImageTensor::from_fn(|c, y, x| {
        let (y0, y1, fy) = ys[y];
        let (x0, x1, fx) = xs[x];
        let p = |xx: u32, yy: u32| rgb.get_pixel(xx, yy)[c] as f64 / 255.0;
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        (top * (1.0 - fy) + bottom * fy) as f32
    })
}

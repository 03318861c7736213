//! OCR through the `tesseract` command-line binary (`tesseract IMG stdout tsv`).

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use image::DynamicImage;

use super::{OcrEngine, OcrError, OcrWord, PixelBox};

#[derive(Clone, Debug)]
pub struct TesseractOcr {
    pub binary: PathBuf,
    pub language: String,
    /// Words with a confidence below this are dropped.
    pub min_confidence: f64,
}

impl Default for TesseractOcr {
    fn default() -> Self {
        TesseractOcr {
            binary: PathBuf::from("tesseract"),
            language: "eng".into(),
            min_confidence: 0.0,
        }
    }
}

static SCRATCH: AtomicU64 = AtomicU64::new(0);

impl TesseractOcr {
    fn error(&self, message: impl Into<String>) -> OcrError {
        OcrError {
            engine: "tesseract".into(),
            message: message.into(),
        }
    }
}

impl OcrEngine for TesseractOcr {
    fn name(&self) -> &str {
        "tesseract"
    }

    fn recognize(&self, image: &DynamicImage) -> Result<Vec<OcrWord>, OcrError> {
        let n = SCRATCH.fetch_add(1, Ordering::Relaxed);
        let scratch = std::env::temp_dir().join(format!("stancefuse-ocr-{}-{n}.png", std::process::id()));
        image
            .save(&scratch)
            .map_err(|e| self.error(format!("cannot write scratch image: {e}")))?;
        let output = Command::new(&self.binary)
            .arg(&scratch)
            .arg("stdout")
            .args(["-l", &self.language])
            .arg("tsv")
            .output();
        let _ = std::fs::remove_file(&scratch);
        let output = output.map_err(|e| self.error(format!("cannot run {}: {e}", self.binary.display())))?;
        if !output.status.success() {
            return Err(self.error(String::from_utf8_lossy(&output.stderr).trim().to_string()));
        }
        parse_tsv(&String::from_utf8_lossy(&output.stdout), self.min_confidence)
            .map_err(|m| self.error(m))
    }
}

/// Parses Tesseract's TSV output, keeping level-5 (word) rows in output order.
pub fn parse_tsv(tsv: &str, min_confidence: f64) -> Result<Vec<OcrWord>, String> {
    let mut lines = tsv.lines();
    let header: Vec<&str> = match lines.next() {
        Some(h) => h.split('\t').collect(),
        None => return Ok(Vec::new()),
    };
    let col = |name: &str| {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| format!("tesseract TSV lacks column {name:?}"))
    };
    let (level, left, top, width, height, conf, text) = (
        col("level")?,
        col("left")?,
        col("top")?,
        col("width")?,
        col("height")?,
        col("conf")?,
        col("text")?,
    );
    let mut words = Vec::new();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < header.len() - 1 || fields.get(level) != Some(&"5") {
            continue;
        }
        let num = |idx: usize| -> Result<u32, String> {
            fields[idx]
                .trim()
                .parse()
                .map_err(|_| format!("row {}: bad number {:?}", i + 2, fields[idx]))
        };
        let confidence: f64 = fields[conf].trim().parse().unwrap_or(-1.0);
        let word = fields.get(text).copied().unwrap_or("").trim();
        if word.is_empty() || confidence < min_confidence {
            continue;
        }
        let (x, y) = (num(left)?, num(top)?);
        words.push(OcrWord::new(
            word,
            PixelBox::new(x, y, x + num(width)?, y + num(height)?),
        ));
    }
    Ok(words)
}

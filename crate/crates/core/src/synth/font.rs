//! A 3×5 block font, a renderer for it, and an exact-match OCR engine.
//!
//! Every glyph has ink in each of its rows and columns, so lines and letters
//! can be cut apart by projection alone.

use image::{DynamicImage, Rgb, RgbImage};

use crate::corpus::{OcrEngine, OcrError, OcrWord, PixelBox};

pub const GLYPH_W: u32 = 3;
pub const GLYPH_H: u32 = 5;
/// Blank glyph columns between letters of a word.
const LETTER_GAP: u32 = 1;
/// Blank glyph columns between words.
const WORD_GAP: u32 = 3;
/// Blank glyph rows between lines.
const LINE_GAP: u32 = 3;

#[rustfmt::skip]
const GLYPHS: [(char, [&str; 5]); 26] = [
    ('A', [".#.", "#.#", "###", "#.#", "#.#"]),
    ('B', ["##.", "#.#", "##.", "#.#", "##."]),
    ('C', ["###", "#..", "#..", "#..", "###"]),
    ('D', ["##.", "#.#", "#.#", "#.#", "##."]),
    ('E', ["###", "#..", "##.", "#..", "###"]),
    ('F', ["###", "#..", "##.", "#..", "#.."]),
    ('G', ["###", "#..", "#.#", "#.#", "###"]),
    ('H', ["#.#", "#.#", "###", "#.#", "#.#"]),
    ('I', ["###", ".#.", ".#.", ".#.", "###"]),
    ('J', ["..#", "..#", "..#", "#.#", "###"]),
    ('K', ["#.#", "#.#", "##.", "#.#", "#.#"]),
    ('L', ["#..", "#..", "#..", "#..", "###"]),
    ('M', ["#.#", "###", "###", "#.#", "#.#"]),
    ('N', ["##.", "#.#", "#.#", "#.#", "#.#"]),
    ('O', ["###", "#.#", "#.#", "#.#", "###"]),
    ('P', ["###", "#.#", "###", "#..", "#.."]),
    ('Q', ["###", "#.#", "#.#", "###", "..#"]),
    ('R', ["###", "#.#", "##.", "#.#", "#.#"]),
    ('S', ["###", "#..", "###", "..#", "###"]),
    ('T', ["###", ".#.", ".#.", ".#.", ".#."]),
    ('U', ["#.#", "#.#", "#.#", "#.#", "###"]),
    ('V', ["#.#", "#.#", "#.#", "#.#", ".#."]),
    ('W', ["#.#", "#.#", "###", "###", "#.#"]),
    ('X', ["#.#", "#.#", ".#.", "#.#", "#.#"]),
    ('Y', ["#.#", "#.#", ".#.", ".#.", ".#."]),
    ('Z', ["###", "..#", ".#.", "#..", "###"]),
];

fn bits(rows: &[&str; 5]) -> u16 {
    let mut b = 0u16;
    for row in rows {
        for c in row.chars() {
            b = (b << 1) | u16::from(c == '#');
        }
    }
    b
}

fn glyph(c: char) -> Option<u16> {
    GLYPHS.iter().find(|(g, _)| *g == c).map(|(_, rows)| bits(rows))
}

fn lookup(pattern: u16) -> Option<char> {
    GLYPHS.iter().find(|(_, rows)| bits(rows) == pattern).map(|(c, _)| *c)
}

/// Uppercases `text` and keeps only words made entirely of A–Z.
pub fn renderable_words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_uppercase())
        .filter(|w| !w.is_empty() && w.chars().all(|c| c.is_ascii_uppercase()))
        .collect()
}

/// Block-letter rendering at `scale` pixels per glyph cell.
#[derive(Clone, Copy, Debug)]
pub struct FontRenderer {
    pub scale: u32,
    pub margin: u32,
    pub ink: [u8; 3],
}

impl Default for FontRenderer {
    fn default() -> Self {
        FontRenderer {
            scale: 4,
            margin: 8,
            ink: [20, 20, 20],
        }
    }
}

impl FontRenderer {
    fn word_width(&self, word: &str) -> u32 {
        let n = word.chars().count() as u32;
        (n * GLYPH_W + n.saturating_sub(1) * LETTER_GAP) * self.scale
    }

    /// Greedy line wrapping within `width`; returns each word's origin.
    pub fn layout(&self, words: &[String], width: u32) -> Vec<(String, u32, u32)> {
        let s = self.scale;
        let mut out = Vec::new();
        let (mut x, mut y) = (self.margin, self.margin);
        for w in words {
            let ww = self.word_width(w);
            if x > self.margin && x + ww > width - self.margin {
                x = self.margin;
                y += (GLYPH_H + LINE_GAP) * s;
            }
            out.push((w.clone(), x, y));
            x += ww + WORD_GAP * s;
        }
        out
    }

    /// Draws `words` onto a `width`×`height` canvas of `background`.
    /// Words that do not fit vertically are dropped.
    pub fn render(&self, words: &[String], width: u32, height: u32, background: [u8; 3]) -> RgbImage {
        let mut img = RgbImage::from_pixel(width, height, Rgb(background));
        let s = self.scale;
        for (word, x0, y0) in self.layout(words, width) {
            if y0 + GLYPH_H * s > height || x0 + self.word_width(&word) > width {
                continue;
            }
            for (i, c) in word.chars().enumerate() {
                let Some(pattern) = glyph(c) else { continue };
                let gx = x0 + i as u32 * (GLYPH_W + LETTER_GAP) * s;
                for r in 0..GLYPH_H {
                    for col in 0..GLYPH_W {
                        let bit = 14 - (r * GLYPH_W + col);
                        if pattern >> bit & 1 == 1 {
                            for dy in 0..s {
                                for dx in 0..s {
                                    img.put_pixel(gx + col * s + dx, y0 + r * s + dy, Rgb(self.ink));
                                }
                            }
                        }
                    }
                }
            }
        }
        img
    }
}

/// Reads text drawn by [`FontRenderer`] at a known scale.
#[derive(Clone, Copy, Debug)]
pub struct BitmapFontOcr {
    pub scale: u32,
}

impl Default for BitmapFontOcr {
    fn default() -> Self {
        BitmapFontOcr { scale: FontRenderer::default().scale }
    }
}

/// Maximal runs of `true`, as half-open ranges.
fn runs(flags: &[bool]) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, &f) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (f, start) {
            (true, None) => start = Some(i as u32),
            (false, Some(s)) => {
                out.push((s, i as u32));
                start = None;
            }
            _ => {}
        }
    }
    out
}

impl OcrEngine for BitmapFontOcr {
    fn name(&self) -> &str {
        "bitmap-font"
    }

    fn recognize(&self, image: &DynamicImage) -> Result<Vec<OcrWord>, OcrError> {
        let luma = image.to_luma8();
        let (w, h) = luma.dimensions();
        let ink = |x: u32, y: u32| luma.get_pixel(x, y).0[0] < 128;
        let s = self.scale;
        let row_flags: Vec<bool> = (0..h).map(|y| (0..w).any(|x| ink(x, y))).collect();
        let mut words = Vec::new();
        for (top, bottom) in runs(&row_flags) {
            if bottom - top != GLYPH_H * s {
                continue;
            }
            let col_flags: Vec<bool> = (0..w).map(|x| (top..bottom).any(|y| ink(x, y))).collect();
            let mut current: Option<(String, u32, u32)> = None;
            for (left, right) in runs(&col_flags) {
                let letter = if right - left == GLYPH_W * s {
                    let mut pattern = 0u16;
                    for r in 0..GLYPH_H {
                        for c in 0..GLYPH_W {
                            pattern = (pattern << 1) | u16::from(ink(left + c * s + s / 2, top + r * s + s / 2));
                        }
                    }
                    lookup(pattern)
                } else {
                    None
                };
                let c = letter.unwrap_or('?');
                match &mut current {
                    Some((text, _, end)) if left - *end < 2 * s => {
                        text.push(c);
                        *end = right;
                    }
                    _ => {
                        if let Some(done) = current.take() {
                            words.push((done, top, bottom));
                        }
                        current = Some((c.to_string(), left, right));
                    }
                }
            }
            if let Some(done) = current {
                words.push((done, top, bottom));
            }
        }
        Ok(words
            .into_iter()
            .filter(|((text, _, _), _, _)| !text.contains('?'))
            .map(|((text, x0, x1), y0, y1)| OcrWord::new(text, PixelBox::new(x0, y0, x1, y1)))
            .collect())
    }
}

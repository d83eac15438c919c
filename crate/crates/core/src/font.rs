//! Bundled glyph source: the public-domain X11 "10x20" fixed font.
//!
//! Glyphs are rasterised once into 10x20 cells. Text is laid out
//! proportionally by ink width so inter-character gaps are uniform, then
//! mapped onto the output raster with scale, rotation and 3x3 supersampled
//! coverage.

use std::sync::OnceLock;

use embedded_graphics::mono_font::ascii::FONT_10X20;
use embedded_graphics::mono_font::MonoTextStyle;
use embedded_graphics::pixelcolor::BinaryColor;
use embedded_graphics::prelude::*;
use embedded_graphics::text::{Baseline, Text};
use thiserror::Error;

use crate::imaging::BinaryImage;
use crate::recognition::{ClassLabel, CLASSES};

pub const CELL_W: usize = 10;
pub const CELL_H: usize = 20;
/// Top row of capitals and digits inside a cell.
pub const CAP_TOP: usize = 3;
/// Last row of capitals and digits inside a cell.
pub const BASELINE: usize = 15;
/// Supersampling factor per axis for coverage.
pub const SUBSAMPLES: usize = 3;
/// Coverage value of a fully inked pixel.
pub const FULL_COVERAGE: u8 = (SUBSAMPLES * SUBSAMPLES) as u8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FontError {
    #[error("character {0:?} is not in the recognised alphabet")]
    UnsupportedChar(char),
    #[error("text line is empty")]
    EmptyLine,
}

struct CellTarget {
    cell: BinaryImage,
}

impl OriginDimensions for CellTarget {
    fn size(&self) -> Size {
        Size::new(CELL_W as u32, CELL_H as u32)
    }
}

impl DrawTarget for CellTarget {
    type Color = BinaryColor;
    type Error = core::convert::Infallible;

    fn draw_iter<I>(&mut self, pixels: I) -> Result<(), Self::Error>
    where
        I: IntoIterator<Item = Pixel<BinaryColor>>,
    {
        for Pixel(p, c) in pixels {
            let (x, y) = (p.x as usize, p.y as usize);
            if p.x >= 0 && p.y >= 0 && x < CELL_W && y < CELL_H {
                self.cell.set(x, y, c.is_on());
            }
        }
        Ok(())
    }
}

fn rasterize(c: char) -> BinaryImage {
    let mut target = CellTarget {
        cell: BinaryImage::new(CELL_W, CELL_H),
    };
    let mut buf = [0u8; 4];
    let style = MonoTextStyle::new(&FONT_10X20, BinaryColor::On);
    Text::with_baseline(c.encode_utf8(&mut buf), Point::zero(), style, Baseline::Top)
        .draw(&mut target)
        .expect("infallible target");
    target.cell
}

fn cells() -> &'static [BinaryImage] {
    static CELLS: OnceLock<Vec<BinaryImage>> = OnceLock::new();
    CELLS.get_or_init(|| CLASSES.iter().map(|&c| rasterize(c)).collect())
}

/// The 10x20 cell bitmap of a class.
pub fn glyph_cell(label: ClassLabel) -> &'static BinaryImage {
    &cells()[label.index()]
}

/// First and last inked column of a class's cell.
pub fn ink_columns(label: ClassLabel) -> (usize, usize) {
    let bbox = glyph_cell(label)
        .foreground_bbox()
        .expect("every bundled glyph has ink");
    (bbox.x, bbox.right() - 1)
}

/// One glyph placed in a laid-out line, in font pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PlacedGlyph {
    pub label: ClassLabel,
    /// First inked column within the line bitmap.
    pub x0: usize,
    /// One past the last inked column.
    pub x1: usize,
    pub word: usize,
}

/// A text line rendered into font-pixel space, `CELL_H` rows tall.
#[derive(Debug, Clone)]
pub struct LineLayout {
    pub bitmap: BinaryImage,
    pub glyphs: Vec<PlacedGlyph>,
}

/// Lays out `text` with `char_gap` blank columns between glyph inks and
/// `word_gap` blank columns between words. Runs of spaces count as one break.
pub fn layout_line(text: &str, char_gap: usize, word_gap: usize) -> Result<LineLayout, FontError> {
    let mut placed: Vec<(ClassLabel, usize)> = Vec::new();
    let mut x = 0;
    let mut word = 0;
    let mut pending_break = false;
    for c in text.chars() {
        if c == ' ' {
            pending_break = !placed.is_empty();
            continue;
        }
        let label = ClassLabel::from_char(c).ok_or(FontError::UnsupportedChar(c))?;
        if !placed.is_empty() {
            if pending_break {
                x += word_gap;
                word += 1;
            } else {
                x += char_gap;
            }
        }
        pending_break = false;
        placed.push((label, word));
        let (a, b) = ink_columns(label);
        x += b - a + 1;
    }
    if placed.is_empty() {
        return Err(FontError::EmptyLine);
    }
    let mut bitmap = BinaryImage::new(x, CELL_H);
    let mut glyphs = Vec::with_capacity(placed.len());
    let mut cursor = 0;
    for (i, &(label, word)) in placed.iter().enumerate() {
        if i > 0 {
            cursor += if word != placed[i - 1].1 { word_gap } else { char_gap };
        }
        let (a, b) = ink_columns(label);
        let cell = glyph_cell(label);
        for y in 0..CELL_H {
            for cx in a..=b {
                if cell.get(cx, y) {
                    bitmap.set(cursor + cx - a, y, true);
                }
            }
        }
        glyphs.push(PlacedGlyph {
            label,
            x0: cursor,
            x1: cursor + b - a + 1,
            word,
        });
        cursor += b - a + 1;
    }
    Ok(LineLayout { bitmap, glyphs })
}

/// Supersampled ink coverage of a transformed bitmap. Each value counts the
/// inked subsamples of one output pixel, in `0..=FULL_COVERAGE`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coverage {
    pub width: usize,
    pub height: usize,
    pub values: Vec<u8>,
}

impl Coverage {
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }

    /// Pixels at least half covered.
    pub fn mask(&self) -> BinaryImage {
        let half = FULL_COVERAGE.div_ceil(2);
        BinaryImage::from_pixels(
            self.width,
            self.height,
            self.values.iter().map(|&v| v >= half).collect(),
        )
        .expect("same dimensions")
    }
}

/// Scales `bitmap` by `scale` and rotates it counter-clockwise (as
/// displayed) by `angle_deg` about its centre. The canvas is the bounding
/// box of the transformed bitmap.
pub fn render_coverage(bitmap: &BinaryImage, scale: f64, angle_deg: f64) -> Coverage {
    let (bw, bh) = (bitmap.width() as f64, bitmap.height() as f64);
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (sw, sh) = (bw * scale, bh * scale);
    let width = (sw * c.abs() + sh * s.abs() - 1e-9).ceil().max(1.0) as usize;
    let height = (sw * s.abs() + sh * c.abs() - 1e-9).ceil().max(1.0) as usize;
    let (ocx, ocy) = (width as f64 / 2.0, height as f64 / 2.0);
    let (icx, icy) = (bw / 2.0, bh / 2.0);
    let step = 1.0 / SUBSAMPLES as f64;
    let mut values = vec![0u8; width * height];
    for py in 0..height {
        for px in 0..width {
            let mut n = 0;
            for sy in 0..SUBSAMPLES {
                for sx in 0..SUBSAMPLES {
                    let dx = px as f64 + (sx as f64 + 0.5) * step - ocx;
                    let dy = py as f64 + (sy as f64 + 0.5) * step - ocy;
                    let u = (dx * c - dy * s) / scale + icx;
                    let v = (dx * s + dy * c) / scale + icy;
                    if u >= 0.0 && v >= 0.0 && u < bw && v < bh && bitmap.get(u as usize, v as usize) {
                        n += 1;
                    }
                }
            }
            values[py * width + px] = n;
        }
    }
    Coverage {
        width,
        height,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_class_has_a_gapless_glyph() {
        for label in ClassLabel::all() {
            let cell = glyph_cell(label);
            let (a, b) = ink_columns(label);
            for x in a..=b {
                assert!((0..CELL_H).any(|y| cell.get(x, y)), "{label} has a blank column");
            }
        }
    }

    #[test]
    fn glyphs_are_distinct() {
        for a in ClassLabel::all() {
            for b in ClassLabel::all().filter(|&b| b > a) {
                assert_ne!(glyph_cell(a), glyph_cell(b), "{a} and {b}");
            }
        }
    }

    #[test]
    fn capitals_share_the_cap_box() {
        for c in ('A'..='Z').chain('0'..='9') {
            let bbox = glyph_cell(ClassLabel::from_char(c).unwrap()).foreground_bbox().unwrap();
            assert_eq!(bbox.y, CAP_TOP, "{c}");
            assert!(bbox.bottom() - 1 >= BASELINE, "{c}");
        }
    }

    #[test]
    fn layout_gaps() {
        let l = layout_line("AB  C", 2, 7).unwrap();
        let g = &l.glyphs;
        assert_eq!(g.len(), 3);
        assert_eq!(g[0].x0, 0);
        assert_eq!(g[1].x0 - g[0].x1, 2);
        assert_eq!(g[2].x0 - g[1].x1, 7);
        assert_eq!((g[0].word, g[1].word, g[2].word), (0, 0, 1));
        assert_eq!(l.bitmap.width(), g[2].x1);
        for gl in g {
            let cell = glyph_cell(gl.label);
            assert_eq!(
                l.bitmap.crop(crate::imaging::Rect::new(gl.x0, 0, gl.x1 - gl.x0, CELL_H)).unwrap().foreground_count(),
                cell.foreground_count()
            );
        }
        assert_eq!(layout_line("a!b", 2, 7).unwrap_err(), FontError::UnsupportedChar('!'));
        assert_eq!(layout_line("  ", 2, 7).unwrap_err(), FontError::EmptyLine);
    }

    #[test]
    fn integer_scale_without_rotation_is_exact() {
        let l = layout_line("Ok", 2, 6).unwrap();
        let cov = render_coverage(&l.bitmap, 2.0, 0.0);
        assert_eq!((cov.width, cov.height), (l.bitmap.width() * 2, CELL_H * 2));
        for y in 0..cov.height {
            for x in 0..cov.width {
                let want = if l.bitmap.get(x / 2, y / 2) { FULL_COVERAGE } else { 0 };
                assert_eq!(cov.get(x, y), want);
            }
        }
    }

    #[test]
    fn rotation_lifts_the_right_end() {
        let l = layout_line("-----", 0, 0).unwrap();
        let cov = render_coverage(&l.bitmap, 3.0, 10.0).mask();
        let ink_rows = |x: usize| (0..cov.height()).filter(|&y| cov.get(x, y)).min();
        let left = (0..cov.width()).find_map(|x| ink_rows(x)).unwrap();
        let right = (0..cov.width()).rev().find_map(|x| ink_rows(x)).unwrap();
        assert!(right < left);
    }
}

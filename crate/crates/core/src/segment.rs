//! Projection-profile segmentation of a binarized text region.
//!
//! Lines: rows whose foreground count is at or below `line_threshold` are
//! separator candidates. The threshold is kept low on purpose so text is
//! over-segmented; bands much shorter than the median band are then merged
//! into a neighbour. Characters: zero columns of the line's vertical
//! histogram are gaps, and gaps that are wide relative to the typical gap
//! mark word breaks.

use std::fmt::Write as _;

use thiserror::Error;

use crate::imaging::{BinaryImage, Rect};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SegmentError {
    #[error("region has no text line")]
    EmptyRegion,
    #[error("line has no foreground")]
    EmptyLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentConfig {
    /// Rows with at most this many foreground pixels are separators.
    pub line_threshold: u32,
    /// Bands shorter than `r_min` x median band height are merged.
    pub r_min: f64,
    /// A gap at least this multiple of the median gap splits words.
    pub word_gap_factor: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            line_threshold: 0,
            r_min: 0.5,
            word_gap_factor: 2.0,
        }
    }
}

/// Per-row foreground counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizHistogram {
    pub counts: Vec<u32>,
}

/// A maximal run of separator rows, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Separator {
    pub start: usize,
    pub end: usize,
}

impl Separator {
    pub fn center(&self) -> usize {
        (self.start + self.end) / 2
    }

    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Inclusive row span of one text line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LineBand {
    pub top: usize,
    pub bottom: usize,
}

impl LineBand {
    pub fn height(&self) -> usize {
        self.bottom - self.top + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlyphBox {
    /// Position within the line crop.
    pub rect: Rect,
    pub pixels: BinaryImage,
    pub word_index: usize,
    pub char_index: usize,
}

pub fn horizontal_histogram(region: &BinaryImage) -> HorizHistogram {
    let w = region.width();
    let counts = region
        .pixels()
        .chunks(w.max(1))
        .take(region.height())
        .map(|row| row.iter().filter(|&&p| p).count() as u32)
        .collect();
    HorizHistogram { counts }
}

pub fn vertical_histogram(line: &BinaryImage) -> Vec<u32> {
    let mut g = vec![0u32; line.width()];
    for y in 0..line.height() {
        for (x, slot) in g.iter_mut().enumerate() {
            *slot += line.get(x, y) as u32;
        }
    }
    g
}

/// Maximal runs of rows with `f_i <= t`, including leading and trailing runs.
pub fn find_separators(h: &HorizHistogram, t: u32) -> Vec<Separator> {
    let mut seps = Vec::new();
    let mut start = None;
    for (i, &f) in h.counts.iter().enumerate() {
        match (f <= t, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                seps.push(Separator { start: s, end: i - 1 });
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        seps.push(Separator {
            start: s,
            end: h.counts.len() - 1,
        });
    }
    seps
}

/// Candidate bands are the row intervals between consecutive separators.
pub fn candidate_bands(seps: &[Separator], height: usize) -> Vec<LineBand> {
    let mut bands = Vec::new();
    let mut row = 0;
    for s in seps {
        if s.start > row {
            bands.push(LineBand {
                top: row,
                bottom: s.start - 1,
            });
        }
        row = s.end + 1;
    }
    if row < height {
        bands.push(LineBand {
            top: row,
            bottom: height - 1,
        });
    }
    bands
}

fn median(sorted: &[usize]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2] as f64
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0
    }
}

/// Merges bands shorter than `r_min` x median height into the neighbour
/// across the smaller gap (the upper one on ties), shortest band first,
/// until none is left. The median is recomputed after every merge.
pub fn reject_false_separators(
    seps: &[Separator],
    h: &HorizHistogram,
    r_min: f64,
) -> Result<Vec<LineBand>, SegmentError> {
    let mut bands = candidate_bands(seps, h.counts.len());
    if bands.is_empty() {
        return Err(SegmentError::EmptyRegion);
    }
    loop {
        if bands.len() < 2 {
            break;
        }
        let mut heights: Vec<usize> = bands.iter().map(LineBand::height).collect();
        heights.sort_unstable();
        let limit = r_min * median(&heights);
        let Some((i, _)) = bands
            .iter()
            .enumerate()
            .filter(|(_, b)| (b.height() as f64) < limit)
            .min_by_key(|(_, b)| b.height())
        else {
            break;
        };
        let gap_above = (i > 0).then(|| bands[i].top - bands[i - 1].bottom - 1);
        let gap_below = (i + 1 < bands.len()).then(|| bands[i + 1].top - bands[i].bottom - 1);
        let partner = match (gap_above, gap_below) {
            (Some(a), Some(b)) if b < a => i + 1,
            (Some(_), _) => i - 1,
            (None, _) => i + 1,
        };
        let (lo, hi) = (i.min(partner), i.max(partner));
        bands[lo] = LineBand {
            top: bands[lo].top,
            bottom: bands[hi].bottom,
        };
        bands.remove(hi);
    }
    Ok(bands)
}

fn row_has_ink(img: &BinaryImage, y: usize) -> bool {
    (0..img.width()).any(|x| img.get(x, y))
}

/// Splits a region into text lines. Each band is tightened to its
/// foreground rows and returned with its full-width crop.
pub fn segment_lines(
    region: &BinaryImage,
    cfg: &SegmentConfig,
) -> Result<Vec<(LineBand, BinaryImage)>, SegmentError> {
    let hist = horizontal_histogram(region);
    let seps = find_separators(&hist, cfg.line_threshold);
    let bands = reject_false_separators(&seps, &hist, cfg.r_min)?;
    let mut out = Vec::with_capacity(bands.len());
    for b in bands {
        let Some(top) = (b.top..=b.bottom).find(|&y| row_has_ink(region, y)) else {
            continue;
        };
        let bottom = (b.top..=b.bottom).rev().find(|&y| row_has_ink(region, y)).unwrap();
        let band = LineBand { top, bottom };
        let crop = region
            .crop(Rect::new(0, top, region.width(), band.height()))
            .expect("band inside region");
        out.push((band, crop));
    }
    if out.is_empty() {
        return Err(SegmentError::EmptyRegion);
    }
    Ok(out)
}

/// Splits a line into glyphs on zero columns and numbers them by word.
pub fn segment_characters(line: &BinaryImage, cfg: &SegmentConfig) -> Result<Vec<GlyphBox>, SegmentError> {
    let g = vertical_histogram(line);
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut start = None;
    for (x, &v) in g.iter().enumerate() {
        match (v > 0, start) {
            (true, None) => start = Some(x),
            (false, Some(s)) => {
                runs.push((s, x - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, g.len() - 1));
    }
    if runs.is_empty() {
        return Err(SegmentError::EmptyLine);
    }
    let gaps: Vec<usize> = runs.windows(2).map(|w| w[1].0 - w[0].1 - 1).collect();
    let word_limit = {
        let mut sorted = gaps.clone();
        sorted.sort_unstable();
        // Lower median: a line with one word gap and one letter gap still
        // resolves to the letter gap.
        sorted
            .get(sorted.len().saturating_sub(1) / 2)
            .map(|&m| cfg.word_gap_factor * m as f64)
    };
    let mut out = Vec::with_capacity(runs.len());
    let (mut word, mut ch) = (0, 0);
    for (i, &(x0, x1)) in runs.iter().enumerate() {
        if i > 0 {
            let gap = gaps[i - 1] as f64;
            if word_limit.is_some_and(|lim| gap >= lim) {
                word += 1;
                ch = 0;
            }
        }
        let col = Rect::new(x0, 0, x1 - x0 + 1, line.height());
        let strip = line.crop(col).expect("run inside line");
        let tight = strip.foreground_bbox().expect("run has foreground");
        let rect = Rect::new(x0, tight.y, col.w, tight.h);
        out.push(GlyphBox {
            rect,
            pixels: line.crop(rect).expect("glyph inside line"),
            word_index: word,
            char_index: ch,
        });
        ch += 1;
    }
    Ok(out)
}

pub fn dump_bands(bands: &[LineBand]) -> String {
    let mut s = String::new();
    for b in bands {
        let _ = writeln!(s, "band {} {}", b.top, b.bottom);
    }
    s
}

pub fn dump_glyphs(lines: &[Vec<GlyphBox>]) -> String {
    let mut s = String::new();
    for (k, glyphs) in lines.iter().enumerate() {
        let _ = writeln!(s, "line {k}");
        for g in glyphs {
            let _ = writeln!(
                s,
                "glyph {} {} {} {} {} {}",
                g.rect.x, g.rect.y, g.rect.w, g.rect.h, g.word_index, g.char_index
            );
        }
    }
    s
}

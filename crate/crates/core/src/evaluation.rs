//! Scoring against ground truth: region and pixel confusion counts,
//! recall/precision/F-measure, character accuracy and per-stage timings.

use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::imaging::{BinaryImage, Rect};
use crate::recognition::{ClassLabel, ClassScheme};
use crate::region::RegionKind;

/// Minimum overlap-over-union for a predicted region to match a truth region.
pub const MATCH_OOU: f64 = 0.5;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("recall undefined: no positives in ground truth")]
    UndefinedRecall,
    #[error("precision undefined: no positive predictions")]
    UndefinedPrecision,
    #[error("image sizes differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("sequence lengths differ: {predicted} predicted vs {truth} truth")]
    LengthMismatch { predicted: usize, truth: usize },
    #[error("empty sequence")]
    Empty,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl std::ops::AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

/// Percentages in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub recall: f64,
    pub precision: f64,
    pub f_measure: f64,
}

impl Metrics {
    /// Harmonic mean of recall and precision, both in percent.
    pub fn from_rates(recall: f64, precision: f64) -> Metrics {
        let f_measure = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        Metrics {
            recall,
            precision,
            f_measure,
        }
    }
}

pub fn f_measure(c: EvalCounts) -> Result<Metrics, EvalError> {
    if c.tp + c.fn_ == 0 {
        return Err(EvalError::UndefinedRecall);
    }
    if c.tp + c.fp == 0 {
        return Err(EvalError::UndefinedPrecision);
    }
    let recall = 100.0 * c.tp as f64 / (c.tp + c.fn_) as f64;
    let precision = 100.0 * c.tp as f64 / (c.tp + c.fp) as f64;
    Ok(Metrics::from_rates(recall, precision))
}

/// Greedy one-to-one matching, best overlap first. Returns
/// `(predicted, truth)` index pairs with overlap-over-union >= 0.5.
pub fn match_regions(predicted: &[Rect], truth: &[Rect]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, p) in predicted.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let o = p.overlap_over_union(t);
            if o >= MATCH_OOU {
                pairs.push((o, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut pred_used = vec![false; predicted.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut out = Vec::new();
    for (_, i, j) in pairs {
        if !pred_used[i] && !truth_used[j] {
            pred_used[i] = true;
            truth_used[j] = true;
            out.push((i, j));
        }
    }
    out
}

fn text_rects(regions: &[(Rect, RegionKind)]) -> Vec<Rect> {
    regions
        .iter()
        .filter(|(_, k)| *k == RegionKind::Text)
        .map(|(r, _)| *r)
        .collect()
}

/// Region-level counts: matched TRs are TP, unmatched predicted TRs FP,
/// unmatched truth TRs FN. TN counts truth NRs that no predicted TR matches.
pub fn region_eval(predicted: &[(Rect, RegionKind)], truth: &[(Rect, RegionKind)]) -> EvalCounts {
    let pred = text_rects(predicted);
    let truth_tr = text_rects(truth);
    let tp = match_regions(&pred, &truth_tr).len() as u64;
    let tn = truth
        .iter()
        .filter(|(r, k)| {
            *k == RegionKind::NonText && pred.iter().all(|p| p.overlap_over_union(r) < MATCH_OOU)
        })
        .count() as u64;
    EvalCounts {
        tp,
        fp: pred.len() as u64 - tp,
        tn,
        fn_: truth_tr.len() as u64 - tp,
    }
}

/// Splits a transcript into per-region blocks of per-line glyph strings
/// (spaces removed). `regions` is the number of text regions it covers.
pub fn transcript_blocks(text: &str, regions: usize) -> Vec<Vec<String>> {
    if regions == 0 {
        return Vec::new();
    }
    text.split("\n\n")
        .map(|block| {
            if block.is_empty() {
                Vec::new()
            } else {
                block.split('\n').map(|l| l.chars().filter(|c| *c != ' ').collect()).collect()
            }
        })
        .collect()
}

/// Character tallies over a set of truth glyphs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CharTally {
    pub total: u64,
    /// Truth glyphs that had an aligned prediction.
    pub aligned: u64,
    pub correct_full: u64,
    pub correct_merged: u64,
}

impl std::ops::AddAssign for CharTally {
    fn add_assign(&mut self, o: Self) {
        self.total += o.total;
        self.aligned += o.aligned;
        self.correct_full += o.correct_full;
        self.correct_merged += o.correct_merged;
    }
}

impl CharTally {
    pub fn accuracy(&self, scheme: ClassScheme) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let hits = match scheme {
            ClassScheme::Full => self.correct_full,
            ClassScheme::Merged => self.correct_merged,
        };
        100.0 * hits as f64 / self.total as f64
    }
}

fn labels(s: &str) -> Option<Vec<ClassLabel>> {
    s.chars().map(ClassLabel::from_char).collect()
}

/// Aligns predicted text to truth text through region matching. A truth
/// line is aligned when its region is matched, both regions have the same
/// line count and the line has the same glyph count; unaligned truth
/// glyphs count as errors.
pub fn score_transcripts(
    predicted: &[(Rect, Vec<String>)],
    truth: &[(Rect, Vec<String>)],
) -> CharTally {
    let mut tally = CharTally {
        total: truth.iter().flat_map(|(_, l)| l).map(|l| l.chars().count() as u64).sum(),
        ..CharTally::default()
    };
    let pred_rects: Vec<Rect> = predicted.iter().map(|(r, _)| *r).collect();
    let truth_rects: Vec<Rect> = truth.iter().map(|(r, _)| *r).collect();
    for (i, j) in match_regions(&pred_rects, &truth_rects) {
        let (p, t) = (&predicted[i].1, &truth[j].1);
        if p.len() != t.len() {
            continue;
        }
        for (pl, tl) in p.iter().zip(t) {
            let (Some(pl), Some(tl)) = (labels(pl), labels(tl)) else {
                continue;
            };
            if pl.len() != tl.len() {
                continue;
            }
            tally.aligned += tl.len() as u64;
            tally.correct_full += char_matches(&pl, &tl, ClassScheme::Full).expect("equal lengths") as u64;
            tally.correct_merged += char_matches(&pl, &tl, ClassScheme::Merged).expect("equal lengths") as u64;
        }
    }
    tally
}

/// Per-pixel confusion counts with foreground as the positive class.
pub fn pixel_eval(predicted: &BinaryImage, truth: &BinaryImage) -> Result<EvalCounts, EvalError> {
    if predicted.width() != truth.width() || predicted.height() != truth.height() {
        return Err(EvalError::DimensionMismatch(
            predicted.width(),
            predicted.height(),
            truth.width(),
            truth.height(),
        ));
    }
    let mut c = EvalCounts::default();
    for (&p, &t) in predicted.pixels().iter().zip(truth.pixels()) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Number of aligned positions whose labels agree under `scheme`.
pub fn char_matches(
    predicted: &[ClassLabel],
    truth: &[ClassLabel],
    scheme: ClassScheme,
) -> Result<usize, EvalError> {
    if predicted.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predicted: predicted.len(),
            truth: truth.len(),
        });
    }
    Ok(predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| scheme.map(**p) == scheme.map(**t))
        .count())
}

/// Percentage of aligned positions whose labels agree under `scheme`.
pub fn char_accuracy(
    predicted: &[ClassLabel],
    truth: &[ClassLabel],
    scheme: ClassScheme,
) -> Result<f64, EvalError> {
    let hits = char_matches(predicted, truth, scheme)?;
    if truth.is_empty() {
        return Err(EvalError::Empty);
    }
    Ok(100.0 * hits as f64 / truth.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Extraction,
    Skew,
    Binarize,
    Segment,
    Recognize,
}

impl Stage {
    pub const ALL: [Stage; 5] = [
        Stage::Extraction,
        Stage::Skew,
        Stage::Binarize,
        Stage::Segment,
        Stage::Recognize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Extraction => "extraction",
            Stage::Skew => "skew",
            Stage::Binarize => "binarize",
            Stage::Segment => "segment",
            Stage::Recognize => "recognize",
        }
    }
}

/// Wall time and peak working-buffer bytes per stage.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub ms: [f64; 5],
    pub peak_bytes: [usize; 5],
}

impl StageTimings {
    pub fn total_ms(&self) -> f64 {
        self.ms.iter().sum()
    }

    pub fn peak(&self) -> usize {
        self.peak_bytes.iter().copied().max().unwrap_or(0)
    }

    /// Element-wise mean of time, element-wise max of peak bytes.
    pub fn average(runs: &[StageTimings]) -> StageTimings {
        let mut out = StageTimings::default();
        if runs.is_empty() {
            return out;
        }
        for r in runs {
            for i in 0..5 {
                out.ms[i] += r.ms[i] / runs.len() as f64;
                out.peak_bytes[i] = out.peak_bytes[i].max(r.peak_bytes[i]);
            }
        }
        out
    }
}

/// Ordered `key=value` report lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a value with two decimals.
    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.entries.push((key.to_owned(), format!("{v:.2}")));
        self
    }

    pub fn int(&mut self, key: &str, v: u64) -> &mut Self {
        self.entries.push((key.to_owned(), v.to_string()));
        self
    }

    pub fn metrics(&mut self, prefix: &str, m: &Metrics) -> &mut Self {
        self.num(&format!("{prefix}recall"), m.recall)
            .num(&format!("{prefix}precision"), m.precision)
            .num(&format!("{prefix}f_measure"), m.f_measure)
    }

    pub fn timings(&mut self, t: &StageTimings) -> &mut Self {
        for (i, s) in Stage::ALL.iter().enumerate() {
            self.num(&format!("{}_ms", s.name()), t.ms[i]);
        }
        self.num("total_ms", t.total_ms());
        for (i, s) in Stage::ALL.iter().enumerate() {
            self.int(&format!("{}_peak_bytes", s.name()), t.peak_bytes[i] as u64);
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        for (k, v) in &self.entries {
            writeln!(s, "{k}={v}")?;
        }
        f.write_str(&s)
    }
}

/// Parses `key=value` lines.
pub fn parse_report(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .collect()
}

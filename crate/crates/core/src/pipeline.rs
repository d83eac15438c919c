//! The end-to-end pipeline: extraction, skew correction, binarization,
//! segmentation and recognition, run stage by stage over every text region.
//!
//! Each stage is timed and its working buffers are tallied by a
//! [`BufferMeter`]. The meter counts pixel rasters, profiles, histograms,
//! block labels and patterns explicitly; it is not an allocator hook.

use std::fs;
use std::io;
use std::path::Path;
use std::time::Instant;

use log::debug;
use thiserror::Error;

use crate::binarize::{self, Window};
use crate::config::PipelineConfig;
use crate::evaluation::{self, CharTally, EvalCounts, Stage, StageTimings};
use crate::imaging::{self, BinaryImage, ColorImage, GrayImage, Rect};
use crate::recognition::{self, Classification, Template, TranscriptGlyph};
use crate::region::{self, Region, RegionKind, RegionRecord};
use crate::segment::{self, GlyphBox, LineBand};
use crate::skew::{self, SkewAnalysis};
use crate::synth::SuiteCard;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Region(#[from] region::RegionError),
}

/// Running tally of live working-buffer bytes and the peak since the last
/// [`BufferMeter::start_stage`].
#[derive(Debug, Clone, Copy, Default)]
pub struct BufferMeter {
    live: usize,
    peak: usize,
}

impl BufferMeter {
    pub fn alloc(&mut self, bytes: usize) {
        self.live += bytes;
        self.peak = self.peak.max(self.live);
    }

    pub fn free(&mut self, bytes: usize) {
        self.live = self.live.saturating_sub(bytes);
    }

    pub fn start_stage(&mut self) {
        self.peak = self.live;
    }

    pub fn live(&self) -> usize {
        self.live
    }

    pub fn peak(&self) -> usize {
        self.peak
    }
}

/// Everything the pipeline produced for one text region.
#[derive(Debug, Clone)]
pub struct TextRegionResult {
    pub region: Region,
    /// Applied correction in degrees; 0 when the region passed through.
    pub skew_angle: f64,
    pub skew: Option<SkewAnalysis>,
    pub binary: BinaryImage,
    pub bands: Vec<LineBand>,
    pub lines: Vec<Vec<GlyphBox>>,
    pub labels: Vec<Vec<Classification>>,
}

impl TextRegionResult {
    pub fn text(&self) -> String {
        recognition::transcribe(&[self.transcript_glyphs()])
    }

    fn transcript_glyphs(&self) -> Vec<Vec<TranscriptGlyph>> {
        self.lines
            .iter()
            .zip(&self.labels)
            .map(|(glyphs, labels)| {
                glyphs
                    .iter()
                    .zip(labels)
                    .map(|(g, c)| TranscriptGlyph {
                        word: g.word_index,
                        label: c.label,
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// All regions, text and non-text, in reading order.
    pub regions: Vec<Region>,
    pub text: Vec<TextRegionResult>,
    pub transcript: String,
    pub timings: StageTimings,
    /// Bytes of the decoded input raster.
    pub input_bytes: usize,
}

pub struct Pipeline {
    pub config: PipelineConfig,
    pub store: Vec<Template>,
}

fn binary_bytes(b: &BinaryImage) -> usize {
    b.byte_len()
}

impl Pipeline {
    pub fn new(config: PipelineConfig, store: Vec<Template>) -> Self {
        Self { config, store }
    }

    fn binarize_config(&self) -> binarize::BinarizeConfig {
        let mut c = self.config.binarize;
        if let Window::Local(_) = c.window {
            c.window = Window::Local(self.config.local_side);
        }
        c
    }

    pub fn run(&self, img: &ColorImage) -> Result<RunOutput, PipelineError> {
        self.run_inner(Some(img), None)
    }

    pub fn run_gray(&self, gray: &GrayImage) -> Result<RunOutput, PipelineError> {
        self.run_inner(None, Some(gray))
    }

    fn run_inner(&self, color: Option<&ColorImage>, gray_in: Option<&GrayImage>) -> Result<RunOutput, PipelineError> {
        let mut meter = BufferMeter::default();
        let mut timings = StageTimings::default();
        let cfg = &self.config;

        // Extraction.
        meter.start_stage();
        let t = Instant::now();
        let converted;
        let gray = match (color, gray_in) {
            (Some(c), _) => {
                converted = imaging::to_grayscale(c);
                meter.alloc(converted.byte_len());
                &converted
            }
            (None, Some(g)) => g,
            (None, None) => unreachable!("one input is always given"),
        };
        let input_bytes = color.map_or(gray.byte_len(), ColorImage::byte_len);
        let grid_bytes = gray.width().div_ceil(cfg.region.block_w) * gray.height().div_ceil(cfg.region.block_h) * 2;
        meter.alloc(grid_bytes);
        let regions = region::extract_regions(gray, &cfg.region)?;
        let mut crops: Vec<(Region, GrayImage)> = Vec::new();
        for r in regions.iter().filter(|r| r.kind == RegionKind::Text) {
            let crop = imaging::crop(gray, r.bbox).expect("region inside image");
            meter.alloc(crop.byte_len());
            crops.push((r.clone(), crop));
        }
        meter.free(grid_bytes);
        if color.is_some() {
            meter.free(gray.byte_len());
        }
        timings.ms[0] = t.elapsed().as_secs_f64() * 1e3;
        timings.peak_bytes[0] = meter.peak();

        // Skew.
        meter.start_stage();
        let t = Instant::now();
        let mut deskewed = Vec::with_capacity(crops.len());
        for (r, crop) in crops {
            let profile_bytes = crop.width() * std::mem::size_of::<Option<u32>>() * 2;
            meter.alloc(profile_bytes);
            let d = skew::deskew(&crop, &cfg.skew);
            meter.alloc(d.image.byte_len());
            meter.free(profile_bytes + crop.byte_len());
            deskewed.push((r, d));
        }
        timings.ms[1] = t.elapsed().as_secs_f64() * 1e3;
        timings.peak_bytes[1] = meter.peak();

        // Binarization.
        meter.start_stage();
        let t = Instant::now();
        let bcfg = self.binarize_config();
        let mut binaries = Vec::with_capacity(deskewed.len());
        for (r, d) in deskewed {
            let n = d.image.width() * d.image.height();
            let extremes = if let Window::Local(_) = bcfg.window { 2 * n } else { 0 };
            meter.alloc(2 * n + extremes);
            let b = binarize::binarize_region(&d.image, &bcfg);
            meter.free(n + extremes + d.image.byte_len());
            binaries.push((r, d.angle, d.analysis, b));
        }
        timings.ms[2] = t.elapsed().as_secs_f64() * 1e3;
        timings.peak_bytes[2] = meter.peak();

        // Segmentation.
        meter.start_stage();
        let t = Instant::now();
        let mut segmented = Vec::with_capacity(binaries.len());
        for (r, angle, analysis, b) in binaries {
            let hist_bytes = b.height() * 4;
            meter.alloc(hist_bytes);
            let mut bands = Vec::new();
            let mut lines = Vec::new();
            match segment::segment_lines(&b, &cfg.segment) {
                Ok(found) => {
                    for (band, crop) in found {
                        meter.alloc(binary_bytes(&crop) + crop.width() * 4);
                        match segment::segment_characters(&crop, &cfg.segment) {
                            Ok(glyphs) => {
                                meter.alloc(glyphs.iter().map(|g| binary_bytes(&g.pixels)).sum());
                                bands.push(band);
                                lines.push(glyphs);
                            }
                            Err(e) => debug!("region {}: line {band:?} skipped: {e}", r.bbox),
                        }
                        meter.free(binary_bytes(&crop) + crop.width() * 4);
                    }
                }
                Err(e) => debug!("region {}: no lines: {e}", r.bbox),
            }
            meter.free(hist_bytes);
            segmented.push((r, angle, analysis, b, bands, lines));
        }
        timings.ms[3] = t.elapsed().as_secs_f64() * 1e3;
        timings.peak_bytes[3] = meter.peak();

        // Recognition.
        meter.start_stage();
        let t = Instant::now();
        let pattern_bytes = std::mem::size_of::<recognition::Pattern>();
        let mut text = Vec::with_capacity(segmented.len());
        for (region, skew_angle, skew, binary, bands, lines) in segmented {
            let mut labels = Vec::with_capacity(lines.len());
            for glyphs in &lines {
                meter.alloc(pattern_bytes);
                let line_labels: Vec<Classification> = glyphs
                    .iter()
                    .map(|g| {
                        let p = recognition::normalize_glyph(&g.pixels).expect("segmented glyphs have ink");
                        recognition::classify(&p, &self.store, cfg.scheme).expect("store is not empty")
                    })
                    .collect();
                meter.free(pattern_bytes);
                labels.push(line_labels);
            }
            text.push(TextRegionResult {
                region,
                skew_angle,
                skew,
                binary,
                bands,
                lines,
                labels,
            });
        }
        let glyphs: Vec<Vec<Vec<TranscriptGlyph>>> = text.iter().map(|r| r.transcript_glyphs()).collect();
        let transcript = recognition::transcribe(&glyphs);
        timings.ms[4] = t.elapsed().as_secs_f64() * 1e3;
        timings.peak_bytes[4] = meter.peak();

        Ok(RunOutput {
            regions,
            text,
            transcript,
            timings,
            input_bytes,
        })
    }

    /// Runs the pipeline `runs` times; timings are averaged, outputs of the
    /// last run are returned.
    pub fn time(&self, img: &ColorImage, runs: usize) -> Result<(StageTimings, RunOutput), PipelineError> {
        let mut all = Vec::with_capacity(runs.max(1));
        let mut last = None;
        for _ in 0..runs.max(1) {
            let out = self.run(img)?;
            all.push(out.timings);
            last = Some(out);
        }
        Ok((StageTimings::average(&all), last.expect("at least one run")))
    }

    /// Full-image foreground estimate: every text region binarized in place
    /// without skew correction.
    pub fn region_mask(&self, gray: &GrayImage, regions: &[Region]) -> BinaryImage {
        let mut mask = BinaryImage::new(gray.width(), gray.height());
        let bcfg = self.binarize_config();
        for r in regions.iter().filter(|r| r.kind == RegionKind::Text) {
            let crop = imaging::crop(gray, r.bbox).expect("region inside image");
            let b = binarize::binarize_region(&crop, &bcfg);
            for y in 0..b.height() {
                for x in 0..b.width() {
                    if b.get(x, y) {
                        mask.set(r.bbox.x + x, r.bbox.y + y, true);
                    }
                }
            }
        }
        mask
    }

    /// Runs the pipeline on a suite card and scores it.
    pub fn score_card(&self, card: &SuiteCard) -> Result<CardScore, PipelineError> {
        let out = self.run(&card.image)?;
        let gray = imaging::to_grayscale(&card.image);
        let mask = self.region_mask(&gray, &out.regions);
        let records: Vec<RegionRecord> = out
            .regions
            .iter()
            .map(|r| RegionRecord {
                bbox: r.bbox,
                kind: r.kind,
                features: r.features.clone(),
            })
            .collect();
        Ok(score_prediction(card, &records, &out.transcript, Some(&mask)))
    }
}

/// Scores of one card.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CardScore {
    pub regions: EvalCounts,
    pub pixels: EvalCounts,
    pub chars: CharTally,
    /// Truth NR regions on the card.
    pub decoys: u64,
}

impl std::ops::AddAssign for CardScore {
    fn add_assign(&mut self, o: Self) {
        self.regions += o.regions;
        self.pixels += o.pixels;
        self.chars += o.chars;
        self.decoys += o.decoys;
    }
}

fn text_blocks(records: &[RegionRecord], transcript: &str) -> Vec<(Rect, Vec<String>)> {
    let rects: Vec<Rect> = records
        .iter()
        .filter(|r| r.kind == RegionKind::Text)
        .map(|r| r.bbox)
        .collect();
    let mut blocks = evaluation::transcript_blocks(transcript, rects.len());
    blocks.resize(rects.len(), Vec::new());
    rects.into_iter().zip(blocks).collect()
}

/// Scores predicted regions, transcript and (optionally) a full-image
/// foreground mask against a suite card. Text blocks of a transcript pair
/// with text regions in listed order.
pub fn score_prediction(
    card: &SuiteCard,
    regions: &[RegionRecord],
    transcript: &str,
    mask: Option<&BinaryImage>,
) -> CardScore {
    let pairs = |rs: &[RegionRecord]| rs.iter().map(|r| (r.bbox, r.kind)).collect::<Vec<_>>();
    let region_counts = evaluation::region_eval(&pairs(regions), &pairs(&card.regions));
    let pixels = mask
        .and_then(|m| evaluation::pixel_eval(m, &card.mask).ok())
        .unwrap_or_default();
    let chars = evaluation::score_transcripts(
        &text_blocks(regions, transcript),
        &text_blocks(&card.regions, &card.transcript),
    );
    CardScore {
        regions: region_counts,
        pixels,
        chars,
        decoys: card.regions.iter().filter(|r| r.kind == RegionKind::NonText).count() as u64,
    }
}

/// Writes stage artifacts: `regions.txt`, per text region `region_<k>`
/// `.profile.txt`, `.binary.pgm`, `.bands.txt`, `.glyphs.txt`, and
/// `transcript.txt`.
pub fn write_dumps(out: &RunOutput, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("regions.txt"), region::dump_regions(&out.regions))?;
    for (k, r) in out.text.iter().enumerate() {
        let stem = format!("region_{k}");
        let profile = r
            .skew
            .as_ref()
            .map_or_else(|| "# no profile\n".to_owned(), SkewAnalysis::dump);
        fs::write(dir.join(format!("{stem}.profile.txt")), profile)?;
        fs::write(dir.join(format!("{stem}.binary.pgm")), imaging::save_pnm(&r.binary))?;
        fs::write(dir.join(format!("{stem}.bands.txt")), segment::dump_bands(&r.bands))?;
        fs::write(dir.join(format!("{stem}.glyphs.txt")), segment::dump_glyphs(&r.lines))?;
    }
    fs::write(dir.join("transcript.txt"), &out.transcript)?;
    Ok(())
}

/// Stage names in execution order, for reports.
pub fn stage_names() -> impl Iterator<Item = &'static str> {
    Stage::ALL.iter().map(|s| s.name())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meter_tracks_peak_per_stage() {
        let mut m = BufferMeter::default();
        m.alloc(10);
        m.alloc(5);
        m.free(12);
        assert_eq!((m.live(), m.peak()), (3, 15));
        m.start_stage();
        assert_eq!(m.peak(), 3);
        m.alloc(1);
        assert_eq!(m.peak(), 4);
        m.free(100);
        assert_eq!(m.live(), 0);
    }

    #[test]
    fn blank_image_has_no_text() {
        let p = Pipeline::new(PipelineConfig::default(), Vec::new());
        let out = p.run_gray(&GrayImage::new(64, 48, 200)).unwrap();
        assert!(out.regions.is_empty());
        assert_eq!(out.transcript, "");
        assert!(out.timings.ms.iter().all(|&t| t >= 0.0));
        assert_eq!(stage_names().count(), 5);
    }
}

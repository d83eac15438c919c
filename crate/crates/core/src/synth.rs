//! Synthetic business cards with exact ground truth.
//!
//! Text is drawn from the bundled font (see [`crate::font`]) directly at
//! the card's skew angle with supersampled coverage, so the pixel mask,
//! region rectangles and transcripts are known exactly. Noise is applied
//! after the ground truth is recorded.
//!
//! Every random draw comes from ChaCha8 (`rand_chacha`). A suite seeded
//! with `s` renders card `k` from stream `k` of the generator seeded with
//! `s`, so cards are independent of each other and of the suite size.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::binarize::{binarize_region, BinarizeConfig};
use crate::font::{self, FontError, CELL_H, FULL_COVERAGE};
use crate::imaging::{self, BinaryImage, ColorImage, GrayImage, ImageError, PnmImage, Rect};
use crate::recognition::{self, ClassLabel, RecognitionError, Template, CLASSES};
use crate::region::{self, RegionKind, RegionRecord};

/// Algorithm identifier written to suite manifests.
pub const GENERATOR_ID: &str = "chacha8";
/// Vertical distance between consecutive lines of a band, in font pixels.
pub const LINE_PITCH: usize = 19;
/// Blank font columns between glyphs of a word.
pub const CHAR_GAP: usize = 2;
/// Blank font columns between words.
pub const WORD_GAP: usize = 6;
/// Largest skew a card may carry, in degrees.
pub const MAX_SKEW: f64 = 20.0;
/// Seed of the glyph draws behind the bundled template store.
pub const STORE_SEED: u64 = 0x5EED_0001;
/// Rendered candidates per class for the bundled store.
pub const STORE_CANDIDATES: usize = 24;
/// Block side assumed when writing truth region records.
const TRUTH_BLOCK: usize = 16;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid card spec: {0}")]
    InvalidSpec(String),
    #[error("text band {0} does not fit on the canvas")]
    TextOutsideCanvas(usize),
    #[error(transparent)]
    Font(#[from] FontError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("suite I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid suite: {0}")]
    InvalidSuite(String),
}

/// A block of text lines, left-aligned, rotated about its centre by the
/// card skew.
#[derive(Debug, Clone, PartialEq)]
pub struct TextBand {
    pub lines: Vec<String>,
    pub center_x: f64,
    pub center_y: f64,
    /// Output pixels per font pixel.
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecoyShape {
    Rectangle,
    Ellipse,
}

/// A filled non-text shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decoy {
    pub shape: DecoyShape,
    pub rect: Rect,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct CardSpec {
    pub width: usize,
    pub height: usize,
    pub bands: Vec<TextBand>,
    pub decoys: Vec<Decoy>,
    /// Degrees, counter-clockwise positive.
    pub skew: f64,
    /// Per-pixel probability of an impulse (half black, half white).
    pub salt_pepper: f64,
    /// Standard deviation of additive Gaussian noise, in gray levels.
    pub gaussian_sigma: f64,
    pub background: [u8; 3],
    pub foreground: [u8; 3],
    pub noise_seed: u64,
}

impl CardSpec {
    /// A blank noiseless card.
    pub fn blank(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bands: Vec::new(),
            decoys: Vec::new(),
            skew: 0.0,
            salt_pepper: 0.0,
            gaussian_sigma: 0.0,
            background: [228, 226, 220],
            foreground: [30, 30, 40],
            noise_seed: 0,
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.width == 0 || self.height == 0 {
            return bad("empty canvas".into());
        }
        if !(self.skew.abs() <= MAX_SKEW) {
            return bad(format!("skew {} outside +/-{MAX_SKEW}", self.skew));
        }
        if !(0.0..=1.0).contains(&self.salt_pepper) {
            return bad(format!("salt-and-pepper probability {} outside [0, 1]", self.salt_pepper));
        }
        if !(self.gaussian_sigma >= 0.0) {
            return bad(format!("negative noise sigma {}", self.gaussian_sigma));
        }
        for (i, b) in self.bands.iter().enumerate() {
            if !(b.scale > 0.0) {
                return bad(format!("band {i} has scale {}", b.scale));
            }
            if b.lines.is_empty() {
                return bad(format!("band {i} has no lines"));
            }
        }
        for d in &self.decoys {
            if !d.rect.fits_in(self.width, self.height) {
                return bad(format!("decoy {} outside the canvas", d.rect));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthLine {
    /// Words separated by single spaces.
    pub text: String,
    pub labels: Vec<ClassLabel>,
    /// Tight ink box in card coordinates.
    pub rect: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruthRegion {
    pub rect: Rect,
    pub kind: RegionKind,
    /// Degrees; zero for non-text regions.
    pub skew: f64,
    pub lines: Vec<TruthLine>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// Text regions ordered top-to-bottom then left-to-right, then decoys.
    pub regions: Vec<TruthRegion>,
    /// Text pixels at least half covered by ink, before noise.
    pub mask: BinaryImage,
}

impl GroundTruth {
    pub fn text_regions(&self) -> impl Iterator<Item = &TruthRegion> {
        self.regions.iter().filter(|r| r.kind == RegionKind::Text)
    }

    /// Regions joined by blank lines, lines by newlines.
    pub fn transcript(&self) -> String {
        self.text_regions()
            .map(|r| r.lines.iter().map(|l| l.text.as_str()).collect::<Vec<_>>().join("\n"))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}

fn truth_records(truth: &GroundTruth, clean: &GrayImage) -> Vec<RegionRecord> {
    truth
        .regions
        .iter()
        .map(|r| {
            let crop = imaging::crop(clean, r.rect).expect("truth rect inside card");
            let (lo, hi) = crop.min_max().unwrap_or((0, 0));
            let dark = crop.pixels().iter().filter(|&&v| (v as u32) * 2 < lo as u32 + hi as u32).count();
            let blocks = r.rect.w.div_ceil(TRUTH_BLOCK) * r.rect.h.div_ceil(TRUTH_BLOCK);
            RegionRecord {
                bbox: r.rect,
                kind: r.kind,
                features: region::RegionFeatures {
                    width: r.rect.w,
                    height: r.rect.h,
                    aspect_ratio: r.rect.w as f64 / r.rect.h as f64,
                    info_pixel_density: dark as f64 / r.rect.area() as f64,
                    area: blocks,
                    coverage_ratio: 1.0,
                },
            }
        })
        .collect()
}

fn blend(bg: [u8; 3], fg: [u8; 3], cov: u8) -> [u8; 3] {
    let t = cov as f64 / FULL_COVERAGE as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        out[c] = (bg[c] as f64 + (fg[c] as f64 - bg[c] as f64) * t).round() as u8;
    }
    out
}

/// Size of the axis-aligned box holding a `w` x `h` box rotated by `deg`.
pub fn rotated_extent(w: f64, h: f64, deg: f64) -> (f64, f64) {
    let (s, c) = deg.to_radians().sin_cos();
    (w * c.abs() + h * s.abs(), w * s.abs() + h * c.abs())
}

/// Unrotated band size in font pixels.
fn band_font_size(layouts: &[font::LineLayout]) -> (usize, usize) {
    let w = layouts.iter().map(|l| l.bitmap.width()).max().unwrap_or(0);
    (w, (layouts.len() - 1) * LINE_PITCH + CELL_H)
}

/// Band size in output pixels before rotation.
pub fn band_extent(lines: &[String], scale: f64) -> Result<(f64, f64), FontError> {
    let layouts = lines
        .iter()
        .map(|l| font::layout_line(l, CHAR_GAP, WORD_GAP))
        .collect::<Result<Vec<_>, _>>()?;
    if layouts.is_empty() {
        return Err(FontError::EmptyLine);
    }
    let (w, h) = band_font_size(&layouts);
    Ok((w as f64 * scale, h as f64 * scale))
}

fn canonical_text(layout: &font::LineLayout) -> String {
    let mut s = String::new();
    for (i, g) in layout.glyphs.iter().enumerate() {
        if i > 0 && g.word != layout.glyphs[i - 1].word {
            s.push(' ');
        }
        s.push(g.label.to_char());
    }
    s
}

/// Adds the same Gaussian sample to every channel of each pixel.
fn add_gaussian(img: &mut ColorImage, sigma: f64, rng: &mut ChaCha8Rng) {
    if sigma <= 0.0 {
        return;
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    for px in img.pixels_mut() {
        let n: f64 = normal.sample(rng);
        for c in px.iter_mut() {
            *c = (*c as f64 + n).round().clamp(0.0, 255.0) as u8;
        }
    }
}

/// Sets each pixel of `area` to black or white with probability `p`.
fn add_salt_pepper(img: &mut GrayImage, p: f64, area: Rect, rng: &mut ChaCha8Rng) {
    if p <= 0.0 {
        return;
    }
    for y in area.y..area.bottom() {
        for x in area.x..area.right() {
            if rng.random_bool(p) {
                img.set(x, y, if rng.random_bool(0.5) { 255 } else { 0 });
            }
        }
    }
}

/// Renders a card and its ground truth.
pub fn render_card(spec: &CardSpec) -> Result<(ColorImage, GroundTruth), SynthError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut coverage = vec![0u8; w * h];
    let mut text_regions = Vec::with_capacity(spec.bands.len());
    for (bi, band) in spec.bands.iter().enumerate() {
        let layouts = band
            .lines
            .iter()
            .map(|l| font::layout_line(l, CHAR_GAP, WORD_GAP))
            .collect::<Result<Vec<_>, _>>()?;
        let (fw, fh) = band_font_size(&layouts);
        let mut lines = Vec::with_capacity(layouts.len());
        for (k, layout) in layouts.iter().enumerate() {
            let mut bitmap = BinaryImage::new(fw, fh);
            for y in 0..CELL_H {
                for x in 0..layout.bitmap.width() {
                    if layout.bitmap.get(x, y) {
                        bitmap.set(x, k * LINE_PITCH + y, true);
                    }
                }
            }
            let cov = font::render_coverage(&bitmap, band.scale, spec.skew);
            let ox = (band.center_x - cov.width as f64 / 2.0).round();
            let oy = (band.center_y - cov.height as f64 / 2.0).round();
            if ox < 0.0 || oy < 0.0 || ox as usize + cov.width > w || oy as usize + cov.height > h {
                return Err(SynthError::TextOutsideCanvas(bi));
            }
            let (ox, oy) = (ox as usize, oy as usize);
            let half = FULL_COVERAGE.div_ceil(2);
            let mut ink: Option<Rect> = None;
            for y in 0..cov.height {
                for x in 0..cov.width {
                    let v = cov.get(x, y);
                    if v == 0 {
                        continue;
                    }
                    let idx = (oy + y) * w + ox + x;
                    coverage[idx] = (coverage[idx] + v).min(FULL_COVERAGE);
                    if v >= half {
                        let px = Rect::new(ox + x, oy + y, 1, 1);
                        ink = Some(ink.map_or(px, |r| r.union(&px)));
                    }
                }
            }
            let rect = ink.ok_or_else(|| SynthError::InvalidSpec(format!("band {bi} line {k} renders no ink")))?;
            lines.push(TruthLine {
                text: canonical_text(layout),
                labels: layout.glyphs.iter().map(|g| g.label).collect(),
                rect,
            });
        }
        let ink = lines.iter().skip(1).fold(lines[0].rect, |a, l| a.union(&l.rect));
        let pad = (2.0 * band.scale).round() as usize;
        text_regions.push(TruthRegion {
            rect: ink.padded(pad, w, h),
            kind: RegionKind::Text,
            skew: spec.skew,
            lines,
        });
    }
    text_regions.sort_by_key(|r| (r.rect.y, r.rect.x));

    let half = FULL_COVERAGE.div_ceil(2);
    let mask = BinaryImage::from_pixels(w, h, coverage.iter().map(|&c| c >= half).collect())?;
    let mut img = ColorImage::from_pixels(
        w,
        h,
        coverage.iter().map(|&c| blend(spec.background, spec.foreground, c)).collect(),
    )?;
    let mut regions = text_regions;
    for d in &spec.decoys {
        let r = d.rect;
        let (cx, cy) = (r.x as f64 + r.w as f64 / 2.0, r.y as f64 + r.h as f64 / 2.0);
        let (rx, ry) = (r.w as f64 / 2.0, r.h as f64 / 2.0);
        for y in r.y..r.bottom() {
            for x in r.x..r.right() {
                let inside = match d.shape {
                    DecoyShape::Rectangle => true,
                    DecoyShape::Ellipse => {
                        let (dx, dy) = ((x as f64 + 0.5 - cx) / rx, (y as f64 + 0.5 - cy) / ry);
                        dx * dx + dy * dy <= 1.0
                    }
                };
                if inside {
                    img.set(x, y, d.color);
                }
            }
        }
        regions.push(TruthRegion {
            rect: r,
            kind: RegionKind::NonText,
            skew: 0.0,
            lines: Vec::new(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.noise_seed);
    add_gaussian(&mut img, spec.gaussian_sigma, &mut rng);
    if spec.salt_pepper > 0.0 {
        for px in img.pixels_mut() {
            if rng.random_bool(spec.salt_pepper) {
                *px = if rng.random_bool(0.5) { [255; 3] } else { [0; 3] };
            }
        }
    }
    Ok((img, GroundTruth { regions, mask }))
}

/// Ranges for random card generation. Pairs are inclusive `(min, max)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteParams {
    pub width: usize,
    pub height: usize,
    pub bands: (usize, usize),
    pub lines: (usize, usize),
    /// Glyphs per line, spaces excluded.
    pub line_chars: (usize, usize),
    pub scale: (f64, f64),
    pub skew: (f64, f64),
    pub gaussian_sigma: (f64, f64),
    pub salt_pepper: f64,
    pub decoys: (usize, usize),
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            width: 1200,
            height: 720,
            bands: (2, 4),
            lines: (1, 3),
            line_chars: (10, 20),
            scale: (2.0, 2.5),
            skew: (-5.0, 5.0),
            gaussian_sigma: (0.0, 4.0),
            salt_pepper: 0.0,
            decoys: (1, 2),
        }
    }
}

impl SuiteParams {
    /// A 2000 x 1500 card, about 3 MP, with proportionally more text.
    pub fn three_megapixel() -> Self {
        Self {
            width: 2000,
            height: 1500,
            bands: (6, 8),
            lines: (1, 3),
            line_chars: (16, 28),
            scale: (2.4, 3.0),
            decoys: (2, 3),
            ..Self::default()
        }
    }

    fn manifest_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "width {}", self.width);
        let _ = writeln!(s, "height {}", self.height);
        let _ = writeln!(s, "bands {} {}", self.bands.0, self.bands.1);
        let _ = writeln!(s, "lines {} {}", self.lines.0, self.lines.1);
        let _ = writeln!(s, "line_chars {} {}", self.line_chars.0, self.line_chars.1);
        let _ = writeln!(s, "scale {:.4} {:.4}", self.scale.0, self.scale.1);
        let _ = writeln!(s, "skew {:.4} {:.4}", self.skew.0, self.skew.1);
        let _ = writeln!(s, "gaussian_sigma {:.4} {:.4}", self.gaussian_sigma.0, self.gaussian_sigma.1);
        let _ = writeln!(s, "salt_pepper {:.4}", self.salt_pepper);
        let _ = writeln!(s, "decoys {} {}", self.decoys.0, self.decoys.1);
        s
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn uniform_usize(rng: &mut ChaCha8Rng, (lo, hi): (usize, usize)) -> usize {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn random_char(rng: &mut ChaCha8Rng) -> char {
    let pick = |rng: &mut ChaCha8Rng, set: &[char]| set[rng.random_range(0..set.len())];
    let roll: f64 = rng.random_range(0.0..1.0);
    if roll < 0.72 {
        let letters: Vec<char> = CLASSES.iter().copied().filter(char::is_ascii_alphabetic).collect();
        pick(rng, &letters)
    } else if roll < 0.92 {
        pick(rng, &['0', '1', '2', '3', '4', '5', '6', '7', '8', '9'])
    } else {
        let specials: Vec<char> = CLASSES.iter().copied().filter(|c| !c.is_ascii_alphanumeric()).collect();
        pick(rng, &specials)
    }
}

/// A random line of `n` glyphs that starts with a capital letter.
pub fn random_line(rng: &mut ChaCha8Rng, n: usize) -> String {
    let mut s = String::new();
    let mut placed = 0;
    let mut word_left = rng.random_range(2..=7usize);
    while placed < n {
        if word_left == 0 {
            s.push(' ');
            word_left = rng.random_range(1..=7usize);
        }
        let c = if placed == 0 {
            (b'A' + rng.random_range(0..26u8)) as char
        } else {
            random_char(rng)
        };
        s.push(c);
        placed += 1;
        word_left -= 1;
    }
    s
}

/// Draws a random card. Bands are stacked top to bottom with at least two
/// blocks of clearance; decoys are placed clear of all text.
pub fn generate_card(p: &SuiteParams, rng: &mut ChaCha8Rng) -> CardSpec {
    let margin = 24.0;
    let clearance = 40.0;
    let mut spec = CardSpec::blank(p.width, p.height);
    spec.skew = uniform(rng, p.skew);
    spec.gaussian_sigma = uniform(rng, p.gaussian_sigma);
    spec.salt_pepper = p.salt_pepper;
    spec.noise_seed = rng.random_range(0..u64::MAX);
    spec.background = [rng.random_range(200..=240), rng.random_range(200..=240), rng.random_range(200..=240)];
    spec.foreground = [rng.random_range(10..=60), rng.random_range(10..=60), rng.random_range(10..=60)];

    let mut occupied: Vec<(f64, f64, f64, f64)> = Vec::new();
    let n_bands = uniform_usize(rng, p.bands).max(1);
    let mut y = margin + rng.random_range(0.0..20.0);
    for _ in 0..n_bands {
        let scale = uniform(rng, p.scale);
        let n_lines = uniform_usize(rng, p.lines).max(1);
        let target = uniform_usize(rng, p.line_chars).max(1);
        let lines: Vec<String> = (0..n_lines)
            .map(|_| {
                let jitter = (target as f64 * rng.random_range(0.85..=1.0)).round() as usize;
                random_line(rng, jitter.max(1))
            })
            .collect();
        let (bw, bh) = band_extent(&lines, scale).expect("generated text uses the alphabet");
        let (rw, rh) = rotated_extent(bw, bh, spec.skew);
        if y + rh + margin > p.height as f64 || rw + 2.0 * margin > p.width as f64 {
            break;
        }
        let x_max = (p.width as f64 * 0.62 - rw).max(margin);
        let x = if x_max > margin { rng.random_range(margin..=x_max) } else { margin };
        spec.bands.push(TextBand {
            lines,
            center_x: x + rw / 2.0,
            center_y: y + rh / 2.0,
            scale,
        });
        occupied.push((x, y, rw, rh));
        y += rh + clearance + rng.random_range(0.0..30.0);
    }

    let n_decoys = uniform_usize(rng, p.decoys);
    for _ in 0..n_decoys {
        for _attempt in 0..100 {
            let h = rng.random_range(96..=150usize);
            let w = ((h as f64) * rng.random_range(0.6..=0.85)).round() as usize;
            if w + 2 * margin as usize >= p.width || h + 2 * margin as usize >= p.height {
                break;
            }
            let x = rng.random_range(margin as usize..=p.width - w - margin as usize);
            let yy = rng.random_range(margin as usize..=p.height - h - margin as usize);
            let clear = occupied.iter().all(|&(ox, oy, ow, oh)| {
                let (x, yy, w, h) = (x as f64, yy as f64, w as f64, h as f64);
                x + w + clearance <= ox || ox + ow + clearance <= x || yy + h + clearance <= oy || oy + oh + clearance <= yy
            });
            if !clear {
                continue;
            }
            let shape = if rng.random_bool(0.5) { DecoyShape::Rectangle } else { DecoyShape::Ellipse };
            let color = [rng.random_range(20..=140), rng.random_range(20..=140), rng.random_range(20..=140)];
            spec.decoys.push(Decoy {
                shape,
                rect: Rect::new(x, yy, w, h),
                color,
            });
            occupied.push((x as f64, yy as f64, w as f64, h as f64));
            break;
        }
    }
    spec
}

/// The generator for card `index` of a suite seeded with `seed`.
pub fn card_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Deterministic card specs for a suite.
pub fn generate_suite(seed: u64, count: usize, params: &SuiteParams) -> Vec<CardSpec> {
    (0..count)
        .map(|k| generate_card(params, &mut card_rng(seed, k)))
        .collect()
}

pub fn card_name(index: usize) -> String {
    format!("card_{index}")
}

/// Renders a suite into `dir`: per card an image, region records, text
/// mask and transcript, plus a manifest.
pub fn write_suite(dir: &Path, seed: u64, count: usize, params: &SuiteParams) -> Result<(), SynthError> {
    if count == 0 {
        return Err(SynthError::InvalidSpec("suite needs at least one card".into()));
    }
    fs::create_dir_all(dir)?;
    let mut manifest = format!("generator {GENERATOR_ID}\nseed {seed}\ncount {count}\n");
    manifest.push_str(&params.manifest_lines());
    for (k, spec) in generate_suite(seed, count, params).iter().enumerate() {
        let name = card_name(k);
        let (img, truth) = render_card(spec)?;
        let mut clean_spec = spec.clone();
        clean_spec.gaussian_sigma = 0.0;
        clean_spec.salt_pepper = 0.0;
        let clean = imaging::to_grayscale(&render_card(&clean_spec)?.0);
        fs::write(dir.join(format!("{name}.ppm")), imaging::save_pnm(&img))?;
        fs::write(
            dir.join(format!("{name}.regions.txt")),
            region::dump_records(&truth_records(&truth, &clean)),
        )?;
        fs::write(dir.join(format!("{name}.mask.pgm")), imaging::save_pnm(&truth.mask))?;
        fs::write(dir.join(format!("{name}.truth.txt")), truth.transcript())?;
        let _ = writeln!(manifest, "{name} skew {:.4}", spec.skew);
    }
    fs::write(dir.join("manifest.txt"), manifest)?;
    Ok(())
}

/// One card of a suite read back from disk.
#[derive(Debug, Clone)]
pub struct SuiteCard {
    pub name: String,
    pub image: ColorImage,
    pub regions: Vec<RegionRecord>,
    pub mask: BinaryImage,
    pub transcript: String,
    pub skew: f64,
}

fn read_color(path: &Path) -> Result<ColorImage, SynthError> {
    match imaging::load_pnm(&fs::read(path)?)? {
        PnmImage::Color(c) => Ok(c),
        PnmImage::Gray(_) => Err(SynthError::InvalidSuite(format!("{} is not a PPM", path.display()))),
    }
}

/// Reads a PGM as a binary image: dark (< 128) pixels are foreground.
pub fn read_mask(path: &Path) -> Result<BinaryImage, SynthError> {
    let g = imaging::load_pnm(&fs::read(path)?)?.into_gray();
    Ok(BinaryImage::from_pixels(
        g.width(),
        g.height(),
        g.pixels().iter().map(|&v| v < 128).collect(),
    )?)
}

pub fn load_suite(dir: &Path) -> Result<Vec<SuiteCard>, SynthError> {
    let manifest = fs::read_to_string(dir.join("manifest.txt"))?;
    let mut count = None;
    let mut skews = Vec::new();
    for line in manifest.lines() {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["count", n] => count = n.parse::<usize>().ok(),
            [name, "skew", v] if name.starts_with("card_") => {
                skews.push(v.parse::<f64>().map_err(|_| SynthError::InvalidSuite(format!("bad skew line {line:?}")))?)
            }
            _ => {}
        }
    }
    let count = count.ok_or_else(|| SynthError::InvalidSuite("manifest has no count".into()))?;
    if skews.len() != count {
        return Err(SynthError::InvalidSuite(format!("manifest lists {} cards, count is {count}", skews.len())));
    }
    (0..count)
        .map(|k| {
            let name = card_name(k);
            let file = |ext: &str| dir.join(format!("{name}.{ext}"));
            let regions = region::parse_region_dump(&fs::read_to_string(file("regions.txt"))?)
                .map_err(SynthError::InvalidSuite)?;
            Ok(SuiteCard {
                image: read_color(&file("ppm"))?,
                regions,
                mask: read_mask(&file("mask.pgm"))?,
                transcript: fs::read_to_string(file("truth.txt"))?,
                skew: skews[k],
                name,
            })
        })
        .collect()
}

/// Ranges for isolated glyph renders.
#[derive(Debug, Clone, PartialEq)]
pub struct GlyphParams {
    pub scale: (f64, f64),
    pub angle: (f64, f64),
    pub blur: (f64, f64),
    pub gaussian_sigma: f64,
    /// Impulse probability inside the glyph's ink box.
    pub salt_pepper: f64,
}

impl GlyphParams {
    /// Perturbations behind the bundled template store.
    pub fn store() -> Self {
        Self {
            scale: (1.6, 2.8),
            angle: (-2.0, 2.0),
            blur: (0.0, 0.7),
            gaussian_sigma: 3.0,
            salt_pepper: 0.0,
        }
    }

    /// Held-out test glyphs: +/-20% scale around 2.2, +/-2 degree residual
    /// skew and 2% impulse noise.
    pub fn test() -> Self {
        Self {
            scale: (1.76, 2.64),
            angle: (-2.0, 2.0),
            blur: (0.0, 0.5),
            gaussian_sigma: 4.0,
            salt_pepper: 0.02,
        }
    }
}

/// Renders one glyph with random perturbations and binarizes it.
pub fn render_glyph(label: ClassLabel, p: &GlyphParams, rng: &mut ChaCha8Rng) -> BinaryImage {
    let scale = uniform(rng, p.scale);
    let angle = uniform(rng, p.angle);
    let blur = uniform(rng, p.blur);
    let (bg, fg) = (rng.random_range(190..=235u8), rng.random_range(15..=70u8));
    let cov = font::render_coverage(font::glyph_cell(label), scale, angle);
    let margin = 4;
    let (w, h) = (cov.width + 2 * margin, cov.height + 2 * margin);
    let mut gray = GrayImage::new(w, h, bg);
    for y in 0..cov.height {
        for x in 0..cov.width {
            gray.set(x + margin, y + margin, blend([bg; 3], [fg; 3], cov.get(x, y))[0]);
        }
    }
    let ink = cov.mask().foreground_bbox().map(|r| Rect::new(r.x + margin, r.y + margin, r.w, r.h));
    let mut gray = imaging::gaussian_blur(&gray, blur);
    if p.gaussian_sigma > 0.0 {
        let normal = Normal::new(0.0, p.gaussian_sigma).expect("finite sigma");
        for v in gray.pixels_mut() {
            let n: f64 = normal.sample(rng);
            *v = (*v as f64 + n).round().clamp(0.0, 255.0) as u8;
        }
    }
    if let Some(ink) = ink {
        add_salt_pepper(&mut gray, p.salt_pepper, ink, rng);
    }
    binarize_region(&gray, &BinarizeConfig::default())
}

/// `per_class` perturbed renders of every class, in class order.
pub fn glyph_samples(seed: u64, per_class: usize, p: &GlyphParams) -> Vec<(ClassLabel, BinaryImage)> {
    let mut out = Vec::with_capacity(per_class * CLASSES.len());
    for label in ClassLabel::all() {
        let mut rng = card_rng(seed, label.index());
        for _ in 0..per_class {
            out.push((label, render_glyph(label, p, &mut rng)));
        }
    }
    out
}

/// The template store shipped with the pipeline: 10 representatives per
/// class chosen from perturbed renders of the bundled font.
pub fn bundled_store() -> Result<Vec<Template>, RecognitionError> {
    recognition::build_store(&glyph_samples(STORE_SEED, STORE_CANDIDATES, &GlyphParams::store()))
}

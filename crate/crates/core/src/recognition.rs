//! Template-matching character recognition.
//!
//! Glyphs are cropped to their foreground box and resampled to a 48x48
//! binary [`Pattern`]. A pattern is scored against every stored template by
//! counting disagreeing cells; the lowest count wins.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::imaging::{self, BinaryImage, PnmImage};

/// Side of a normalized pattern.
pub const PATTERN_SIZE: usize = 48;
/// Cells in a pattern.
pub const PATTERN_CELLS: usize = PATTERN_SIZE * PATTERN_SIZE;
const WORDS: usize = PATTERN_CELLS / 64;
/// Templates kept per class.
pub const TEMPLATES_PER_CLASS: usize = 10;
/// Manifest file inside a template store directory.
pub const MANIFEST_FILE: &str = "manifest.txt";

/// The recognised alphabet, in class-index order.
pub const CLASSES: [char; 73] = [
    '#', '&', '(', ')', '+', ',', '-', '.', '/', '0', '1', '2', '3', '4', '5', '6', '7', '8', '9',
    ':', '@', 'A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'I', 'J', 'K', 'L', 'M', 'N', 'O', 'P', 'Q',
    'R', 'S', 'T', 'U', 'V', 'W', 'X', 'Y', 'Z', 'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j',
    'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r', 's', 't', 'u', 'v', 'w', 'x', 'y', 'z',
];

/// Groups of look-alike classes and the label each collapses to.
pub const MERGED_GROUPS: [(&str, char); 8] = [
    ("Cc", 'C'),
    ("0Oo", 'O'),
    ("Ss", 'S'),
    ("Uu", 'U'),
    ("Vv", 'V'),
    ("Ww", 'W'),
    ("Zz", 'Z'),
    ("Il1", 'I'),
];

#[derive(Debug, Error)]
pub enum RecognitionError {
    #[error("glyph has no foreground pixel")]
    EmptyGlyph,
    #[error("template store is empty")]
    EmptyStore,
    #[error("class {label} has {count} usable samples, {needed} required")]
    InsufficientSamples {
        label: ClassLabel,
        count: usize,
        needed: usize,
    },
    #[error("invalid template store: {0}")]
    InvalidStore(String),
    #[error("template store I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// One of the 73 recognised characters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ClassLabel(u8);

impl ClassLabel {
    pub fn from_char(c: char) -> Option<Self> {
        CLASSES.iter().position(|&k| k == c).map(|i| ClassLabel(i as u8))
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < CLASSES.len()).then_some(ClassLabel(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn to_char(self) -> char {
        CLASSES[self.index()]
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..CLASSES.len()).map(|i| ClassLabel(i as u8))
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_char())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ClassScheme {
    /// All 73 classes kept distinct.
    Full,
    /// Look-alike classes collapsed per [`MERGED_GROUPS`].
    #[default]
    Merged,
}

impl ClassScheme {
    pub fn map(self, label: ClassLabel) -> ClassLabel {
        match self {
            ClassScheme::Full => label,
            ClassScheme::Merged => {
                let c = label.to_char();
                MERGED_GROUPS
                    .iter()
                    .find(|(members, _)| members.contains(c))
                    .map_or(label, |&(_, canon)| {
                        ClassLabel::from_char(canon).expect("canonical labels are classes")
                    })
            }
        }
    }

    /// Number of distinct labels after mapping.
    pub fn class_count(self) -> usize {
        let mut seen: Vec<ClassLabel> = ClassLabel::all().map(|l| self.map(l)).collect();
        seen.sort();
        seen.dedup();
        seen.len()
    }

    pub fn name(self) -> &'static str {
        match self {
            ClassScheme::Full => "full",
            ClassScheme::Merged => "merged",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(ClassScheme::Full),
            "merged" => Some(ClassScheme::Merged),
            _ => None,
        }
    }
}

/// 48x48 binary matrix, bit-packed row-major. 1 = foreground.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    bits: [u64; WORDS],
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({} set)", self.count_ones())
    }
}

impl Default for Pattern {
    fn default() -> Self {
        Self { bits: [0; WORDS] }
    }
}

impl Pattern {
    pub fn get(&self, x: usize, y: usize) -> bool {
        let i = y * PATTERN_SIZE + x;
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        let i = y * PATTERN_SIZE + x;
        if on {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }

    pub fn complement(&self) -> Pattern {
        let mut p = self.clone();
        for w in &mut p.bits {
            *w = !*w;
        }
        p
    }

    /// Requires an exactly 48x48 image with at least one foreground pixel.
    pub fn from_binary(img: &BinaryImage) -> Result<Pattern, RecognitionError> {
        if img.width() != PATTERN_SIZE || img.height() != PATTERN_SIZE {
            return Err(RecognitionError::InvalidStore(format!(
                "pattern must be {PATTERN_SIZE}x{PATTERN_SIZE}, got {}x{}",
                img.width(),
                img.height()
            )));
        }
        let mut p = Pattern::default();
        for y in 0..PATTERN_SIZE {
            for x in 0..PATTERN_SIZE {
                p.set(x, y, img.get(x, y));
            }
        }
        if p.count_ones() == 0 {
            return Err(RecognitionError::EmptyGlyph);
        }
        Ok(p)
    }

    pub fn to_binary(&self) -> BinaryImage {
        let mut img = BinaryImage::new(PATTERN_SIZE, PATTERN_SIZE);
        for y in 0..PATTERN_SIZE {
            for x in 0..PATTERN_SIZE {
                img.set(x, y, self.get(x, y));
            }
        }
        img
    }
}

/// Count of cells where the two patterns disagree.
pub fn dissimilarity(t: &Pattern, u: &Pattern) -> u32 {
    t.bits
        .iter()
        .zip(&u.bits)
        .map(|(a, b)| (a ^ b).count_ones())
        .sum()
}

/// Crops to the tight foreground box and resamples to 48x48 by nearest
/// neighbour. Aspect ratio is not preserved.
pub fn normalize_glyph(glyph: &BinaryImage) -> Result<Pattern, RecognitionError> {
    let bbox = glyph.foreground_bbox().ok_or(RecognitionError::EmptyGlyph)?;
    let mut p = Pattern::default();
    for y in 0..PATTERN_SIZE {
        let sy = bbox.y + y * bbox.h / PATTERN_SIZE;
        for x in 0..PATTERN_SIZE {
            let sx = bbox.x + x * bbox.w / PATTERN_SIZE;
            if glyph.get(sx, sy) {
                p.set(x, y, true);
            }
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub pattern: Pattern,
    pub label: ClassLabel,
    pub source_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    /// Winning label after the scheme mapping.
    pub label: ClassLabel,
    /// Dissimilarity of the best template.
    pub score: u32,
    /// Best template with a different (mapped) label.
    pub runner_up: Option<(ClassLabel, u32)>,
}

/// Exhaustive nearest-template search. Ties go to the earlier template.
pub fn classify(
    p: &Pattern,
    store: &[Template],
    scheme: ClassScheme,
) -> Result<Classification, RecognitionError> {
    let mut best: Option<(usize, u32)> = None;
    let scores: Vec<u32> = store.iter().map(|t| dissimilarity(&t.pattern, p)).collect();
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|(_, b)| s < b) {
            best = Some((i, s));
        }
    }
    let (winner, score) = best.ok_or(RecognitionError::EmptyStore)?;
    let label = scheme.map(store[winner].label);
    let mut runner_up: Option<(ClassLabel, u32)> = None;
    for (t, &s) in store.iter().zip(&scores) {
        let l = scheme.map(t.label);
        if l != label && runner_up.is_none_or(|(_, b)| s < b) {
            runner_up = Some((l, s));
        }
    }
    Ok(Classification {
        label,
        score,
        runner_up,
    })
}

/// Picks up to `per_class` representatives per class: the samples with the
/// smallest summed dissimilarity to the rest of their class. A candidate
/// identical to an already kept template of another class is skipped so
/// that every template matches its own label exactly. Output is in class
/// order, then by rank.
pub fn build_store_with(
    samples: &[(ClassLabel, BinaryImage)],
    per_class: usize,
) -> Result<Vec<Template>, RecognitionError> {
    let mut by_class: BTreeMap<ClassLabel, Vec<Pattern>> = BTreeMap::new();
    for (label, img) in samples {
        by_class.entry(*label).or_default().push(normalize_glyph(img)?);
    }
    let mut store: Vec<Template> = Vec::with_capacity(by_class.len() * per_class);
    for (label, patterns) in by_class {
        if patterns.len() < per_class {
            return Err(RecognitionError::InsufficientSamples {
                label,
                count: patterns.len(),
                needed: per_class,
            });
        }
        let mut ranked: Vec<(u64, usize)> = patterns
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let cost = patterns.iter().map(|q| dissimilarity(p, q) as u64).sum();
                (cost, i)
            })
            .collect();
        ranked.sort();
        let mut kept = 0;
        for (_, i) in ranked {
            if kept == per_class {
                break;
            }
            let p = &patterns[i];
            if store.iter().any(|t| t.label != label && t.pattern == *p) {
                continue;
            }
            store.push(Template {
                pattern: p.clone(),
                label,
                source_id: format!("{}#{i}", label.index()),
            });
            kept += 1;
        }
        if kept < per_class {
            return Err(RecognitionError::InsufficientSamples {
                label,
                count: kept,
                needed: per_class,
            });
        }
    }
    Ok(store)
}

pub fn build_store(samples: &[(ClassLabel, BinaryImage)]) -> Result<Vec<Template>, RecognitionError> {
    build_store_with(samples, TEMPLATES_PER_CLASS)
}

/// Writes `<class:02>_<sample>.pgm` files plus the manifest.
pub fn save_store(store: &[Template], dir: &Path) -> Result<(), RecognitionError> {
    fs::create_dir_all(dir)?;
    let mut per_class: BTreeMap<ClassLabel, usize> = BTreeMap::new();
    for t in store {
        let k = per_class.entry(t.label).or_default();
        let name = format!("{:02}_{}.pgm", t.label.index(), k);
        fs::write(dir.join(name), imaging::save_pnm(&t.pattern.to_binary()))?;
        *k += 1;
    }
    let manifest: String = per_class
        .keys()
        .map(|l| format!("{:02}\t{}\n", l.index(), l.to_char()))
        .collect();
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

fn parse_manifest(text: &str) -> Result<BTreeMap<usize, ClassLabel>, RecognitionError> {
    let bad = |msg: String| RecognitionError::InvalidStore(msg);
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (idx, ch) = line
            .split_once('\t')
            .ok_or_else(|| bad(format!("manifest line {}: expected 'index<TAB>char'", n + 1)))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| bad(format!("manifest line {}: bad class index", n + 1)))?;
        let mut chars = ch.chars();
        let (Some(c), None) = (chars.next(), chars.next()) else {
            return Err(bad(format!("manifest line {}: expected one character", n + 1)));
        };
        let label = ClassLabel::from_char(c)
            .ok_or_else(|| bad(format!("manifest line {}: {c:?} is not a known class", n + 1)))?;
        if map.insert(idx, label).is_some() {
            return Err(bad(format!("manifest lists class index {idx} twice")));
        }
    }
    Ok(map)
}

/// Loads a store directory, validating pattern size and that the manifest
/// and the template files cover the same classes.
pub fn load_store(dir: &Path) -> Result<Vec<Template>, RecognitionError> {
    let manifest_text = fs::read_to_string(dir.join(MANIFEST_FILE))
        .map_err(|e| RecognitionError::InvalidStore(format!("cannot read manifest: {e}")))?;
    let manifest = parse_manifest(&manifest_text)?;
    let mut entries: Vec<(usize, usize, String)> = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name().to_string_lossy().into_owned();
        let Some(stem) = name.strip_suffix(".pgm") else {
            continue;
        };
        let parsed = stem
            .split_once('_')
            .and_then(|(c, s)| Some((c.parse::<usize>().ok()?, s.parse::<usize>().ok()?)));
        let Some((class, sample)) = parsed else {
            return Err(RecognitionError::InvalidStore(format!("unexpected file name {name}")));
        };
        entries.push((class, sample, name));
    }
    entries.sort();
    let mut store = Vec::with_capacity(entries.len());
    for (class, _, name) in entries {
        let label = *manifest
            .get(&class)
            .ok_or_else(|| RecognitionError::InvalidStore(format!("{name}: class {class} missing from manifest")))?;
        let bytes = fs::read(dir.join(&name))?;
        let img = match imaging::load_pnm(&bytes) {
            Ok(PnmImage::Gray(g)) => g,
            Ok(PnmImage::Color(_)) => {
                return Err(RecognitionError::InvalidStore(format!("{name}: expected PGM")))
            }
            Err(e) => return Err(RecognitionError::InvalidStore(format!("{name}: {e}"))),
        };
        let bin = BinaryImage::from_pixels(
            img.width(),
            img.height(),
            img.pixels().iter().map(|&v| v < 128).collect(),
        )
        .expect("same dimensions");
        let pattern = Pattern::from_binary(&bin)
            .map_err(|e| RecognitionError::InvalidStore(format!("{name}: {e}")))?;
        store.push(Template {
            pattern,
            label,
            source_id: name,
        });
    }
    for (&idx, label) in &manifest {
        if !store.iter().any(|t| t.label == *label) {
            return Err(RecognitionError::InvalidStore(format!(
                "manifest class {idx} ({label}) has no template files"
            )));
        }
    }
    if store.is_empty() {
        return Err(RecognitionError::EmptyStore);
    }
    Ok(store)
}

/// A recognised glyph positioned within its line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TranscriptGlyph {
    pub word: usize,
    pub label: ClassLabel,
}

/// Regions -> lines -> glyphs. Words are separated by one space, lines by a
/// newline and regions by a blank line.
pub fn transcribe(regions: &[Vec<Vec<TranscriptGlyph>>]) -> String {
    regions
        .iter()
        .map(|lines| {
            lines
                .iter()
                .map(|glyphs| {
                    let mut s = String::new();
                    for (i, g) in glyphs.iter().enumerate() {
                        if i > 0 && g.word != glyphs[i - 1].word {
                            s.push(' ');
                        }
                        s.push(g.label.to_char());
                    }
                    s
                })
                .collect::<Vec<_>>()
                .join("\n")
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

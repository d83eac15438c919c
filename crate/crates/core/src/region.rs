//! Text region extraction.
//!
//! The gray image is tiled into fixed-size blocks. A block whose intensity
//! range (max - min) reaches `t_var` is an information block (IB), the rest
//! are background blocks (BB). 8-connected groups of IBs form regions, which
//! are then labelled text (TR) or non-text (NR) from a handful of shape and
//! density features.

use std::collections::VecDeque;
use std::fmt::Write as _;

use thiserror::Error;

use crate::imaging::{self, GrayImage, Rect};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegionError {
    #[error("block size {block_w}x{block_h} must be at least 4x4")]
    BlockTooSmall { block_w: usize, block_h: usize },
    #[error("block size {block_w}x{block_h} exceeds image size {width}x{height}")]
    BlockTooLarge {
        block_w: usize,
        block_h: usize,
        width: usize,
        height: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BlockKind {
    Information,
    Background,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKind {
    Text,
    NonText,
}

impl RegionKind {
    pub fn tag(self) -> &'static str {
        match self {
            RegionKind::Text => "TR",
            RegionKind::NonText => "NR",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        match s {
            "TR" => Some(RegionKind::Text),
            "NR" => Some(RegionKind::NonText),
            _ => None,
        }
    }
}

/// Tunables for block classification and TR/NR labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionConfig {
    pub block_h: usize,
    pub block_w: usize,
    /// Minimum intensity range for an information block.
    pub t_var: u8,
    pub min_area_blocks: usize,
    pub ar_min: f64,
    pub ar_max: f64,
    pub dens_min: f64,
    pub dens_max: f64,
    pub cov_min: f64,
}

impl Default for RegionConfig {
    fn default() -> Self {
        Self {
            block_h: 16,
            block_w: 16,
            t_var: 40,
            min_area_blocks: 4,
            ar_min: 1.2,
            ar_max: 40.0,
            dens_min: 0.03,
            dens_max: 0.6,
            cov_min: 0.5,
        }
    }
}

/// Tiling of an image into `block_h` x `block_w` blocks; edge blocks are
/// truncated to the image bounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGrid {
    pub block_h: usize,
    pub block_w: usize,
    pub rows: usize,
    pub cols: usize,
    pub width: usize,
    pub height: usize,
    pub labels: Vec<BlockKind>,
}

impl BlockGrid {
    pub fn block_rect(&self, row: usize, col: usize) -> Rect {
        let x = col * self.block_w;
        let y = row * self.block_h;
        Rect::new(
            x,
            y,
            self.block_w.min(self.width - x),
            self.block_h.min(self.height - y),
        )
    }

    pub fn label(&self, row: usize, col: usize) -> BlockKind {
        self.labels[row * self.cols + col]
    }

    pub fn set_label(&mut self, row: usize, col: usize, kind: BlockKind) {
        self.labels[row * self.cols + col] = kind;
    }

    pub fn block_count(&self) -> usize {
        self.rows * self.cols
    }
}

/// Tiles a `width` x `height` image. Labels start out as background.
pub fn partition_blocks(
    width: usize,
    height: usize,
    block_h: usize,
    block_w: usize,
) -> Result<BlockGrid, RegionError> {
    if block_h < 4 || block_w < 4 {
        return Err(RegionError::BlockTooSmall { block_w, block_h });
    }
    if block_h > height || block_w > width {
        return Err(RegionError::BlockTooLarge {
            block_w,
            block_h,
            width,
            height,
        });
    }
    let rows = height.div_ceil(block_h);
    let cols = width.div_ceil(block_w);
    Ok(BlockGrid {
        block_h,
        block_w,
        rows,
        cols,
        width,
        height,
        labels: vec![BlockKind::Background; rows * cols],
    })
}

/// IB iff the intensity range within the block reaches `t_var`.
pub fn classify_block(pixels: impl IntoIterator<Item = u8>, t_var: u8) -> BlockKind {
    match imaging::min_max(pixels.into_iter()) {
        Some((lo, hi)) if hi - lo >= t_var => BlockKind::Information,
        _ => BlockKind::Background,
    }
}

fn block_pixels<'a>(img: &'a GrayImage, r: Rect) -> impl Iterator<Item = u8> + 'a {
    (r.y..r.bottom()).flat_map(move |y| img.row(y)[r.x..r.right()].iter().copied())
}

pub fn classify_blocks(img: &GrayImage, cfg: &RegionConfig) -> Result<BlockGrid, RegionError> {
    let mut grid = partition_blocks(img.width(), img.height(), cfg.block_h, cfg.block_w)?;
    for row in 0..grid.rows {
        for col in 0..grid.cols {
            let r = grid.block_rect(row, col);
            grid.set_label(row, col, classify_block(block_pixels(img, r), cfg.t_var));
        }
    }
    Ok(grid)
}

/// One 8-connected group of information blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockComponent {
    /// (row, col) grid coordinates in discovery order.
    pub blocks: Vec<(usize, usize)>,
    pub bbox: Rect,
}

/// Maximal 8-connected IB components, discovered in row-major order.
pub fn assemble_regions(grid: &BlockGrid) -> Vec<BlockComponent> {
    let mut seen = vec![false; grid.block_count()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..grid.block_count() {
        if seen[start] || grid.labels[start] != BlockKind::Information {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut blocks = Vec::new();
        while let Some(idx) = queue.pop_front() {
            let (r, c) = (idx / grid.cols, idx % grid.cols);
            blocks.push((r, c));
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (nr, nc) = (r as isize + dr, c as isize + dc);
                    if nr < 0 || nc < 0 || nr >= grid.rows as isize || nc >= grid.cols as isize {
                        continue;
                    }
                    let n = nr as usize * grid.cols + nc as usize;
                    if !seen[n] && grid.labels[n] == BlockKind::Information {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        let bbox = blocks
            .iter()
            .map(|&(r, c)| grid.block_rect(r, c))
            .reduce(|a, b| a.union(&b))
            .expect("component has at least one block");
        out.push(BlockComponent { blocks, bbox });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionFeatures {
    pub width: usize,
    pub height: usize,
    pub aspect_ratio: f64,
    /// Fraction of member-block pixels darker than the region's mid-range.
    pub info_pixel_density: f64,
    /// Member block count.
    pub area: usize,
    /// Member-block pixel area over bounding-box area.
    pub coverage_ratio: f64,
}

pub fn region_features(img: &GrayImage, grid: &BlockGrid, comp: &BlockComponent) -> RegionFeatures {
    let rects: Vec<Rect> = comp.blocks.iter().map(|&(r, c)| grid.block_rect(r, c)).collect();
    let (lo, hi) = imaging::min_max(rects.iter().flat_map(|&r| block_pixels(img, r)))
        .expect("blocks are nonempty");
    let mid2 = lo as u32 + hi as u32;
    let mut dark = 0usize;
    let mut total = 0usize;
    for &r in &rects {
        for v in block_pixels(img, r) {
            total += 1;
            if 2 * (v as u32) < mid2 {
                dark += 1;
            }
        }
    }
    RegionFeatures {
        width: comp.bbox.w,
        height: comp.bbox.h,
        aspect_ratio: comp.bbox.w as f64 / comp.bbox.h as f64,
        info_pixel_density: dark as f64 / total as f64,
        area: comp.blocks.len(),
        coverage_ratio: total as f64 / comp.bbox.area() as f64,
    }
}

/// TR iff every feature falls inside its configured band.
pub fn classify_region(f: &RegionFeatures, cfg: &RegionConfig) -> RegionKind {
    let text = f.area >= cfg.min_area_blocks
        && (cfg.ar_min..=cfg.ar_max).contains(&f.aspect_ratio)
        && (cfg.dens_min..=cfg.dens_max).contains(&f.info_pixel_density)
        && f.coverage_ratio >= cfg.cov_min;
    if text {
        RegionKind::Text
    } else {
        RegionKind::NonText
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub blocks: Vec<(usize, usize)>,
    pub bbox: Rect,
    pub kind: RegionKind,
    pub features: RegionFeatures,
}

impl Region {
    /// One line of the region dump: `x y w h TR|NR area aspect density coverage`.
    pub fn dump_line(&self) -> String {
        format_region_line(self.bbox, self.kind, &self.features)
    }
}

pub fn format_region_line(bbox: Rect, kind: RegionKind, f: &RegionFeatures) -> String {
    format!(
        "{} {} {} {} {} {} {:.4} {:.4} {:.4}",
        bbox.x,
        bbox.y,
        bbox.w,
        bbox.h,
        kind.tag(),
        f.area,
        f.aspect_ratio,
        f.info_pixel_density,
        f.coverage_ratio
    )
}

/// Renders a full region dump, one region per line.
pub fn dump_regions(regions: &[Region]) -> String {
    let mut s = String::new();
    for r in regions {
        let _ = writeln!(s, "{}", r.dump_line());
    }
    s
}

/// A parsed region dump line.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionRecord {
    pub bbox: Rect,
    pub kind: RegionKind,
    pub features: RegionFeatures,
}

/// Renders parsed records back into the dump format.
pub fn dump_records(records: &[RegionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let _ = writeln!(s, "{}", format_region_line(r.bbox, r.kind, &r.features));
    }
    s
}

pub fn parse_region_dump(text: &str) -> Result<Vec<RegionRecord>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || format!("line {}: malformed region record {line:?}", n + 1);
        if f.len() != 9 {
            return Err(bad());
        }
        let int = |i: usize| f[i].parse::<usize>().map_err(|_| bad());
        let float = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
        let bbox = Rect::new(int(0)?, int(1)?, int(2)?, int(3)?);
        let kind = RegionKind::from_tag(f[4]).ok_or_else(bad)?;
        out.push(RegionRecord {
            bbox,
            kind,
            features: RegionFeatures {
                width: bbox.w,
                height: bbox.h,
                area: int(5)?,
                aspect_ratio: float(6)?,
                info_pixel_density: float(7)?,
                coverage_ratio: float(8)?,
            },
        });
    }
    Ok(out)
}

/// Every region (TR and NR), ordered top-to-bottom then left-to-right.
pub fn extract_regions(img: &GrayImage, cfg: &RegionConfig) -> Result<Vec<Region>, RegionError> {
    let grid = classify_blocks(img, cfg)?;
    let mut regions: Vec<Region> = assemble_regions(&grid)
        .into_iter()
        .map(|comp| {
            let features = region_features(img, &grid, &comp);
            Region {
                kind: classify_region(&features, cfg),
                bbox: comp.bbox,
                blocks: comp.blocks,
                features,
            }
        })
        .collect();
    regions.sort_by_key(|r| (r.bbox.y, r.bbox.x));
    Ok(regions)
}

/// Text regions with their gray crops, ordered top-to-bottom then
/// left-to-right.
pub fn extract_text_regions(
    img: &GrayImage,
    cfg: &RegionConfig,
) -> Result<Vec<(Region, GrayImage)>, RegionError> {
    Ok(extract_regions(img, cfg)?
        .into_iter()
        .filter(|r| r.kind == RegionKind::Text)
        .map(|r| {
            let crop = imaging::crop(img, r.bbox).expect("region bbox lies inside the image");
            (r, crop)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_from(rows: &[&str]) -> BlockGrid {
        let r = rows.len();
        let c = rows[0].len();
        let mut g = partition_blocks(c * 4, r * 4, 4, 4).unwrap();
        for (i, row) in rows.iter().enumerate() {
            for (j, ch) in row.chars().enumerate() {
                if ch == '#' {
                    g.set_label(i, j, BlockKind::Information);
                }
            }
        }
        g
    }

    #[test]
    fn partition_examples() {
        let g = partition_blocks(32, 32, 16, 16).unwrap();
        assert_eq!((g.rows, g.cols), (2, 2));
        let g = partition_blocks(33, 32, 16, 16).unwrap();
        assert_eq!((g.rows, g.cols), (2, 3));
        assert_eq!(g.block_rect(0, 2).w, 1);
        assert!(matches!(partition_blocks(8, 8, 16, 16), Err(RegionError::BlockTooLarge { .. })));
        assert!(matches!(partition_blocks(8, 8, 3, 4), Err(RegionError::BlockTooSmall { .. })));
    }

    #[test]
    fn partition_covers_every_pixel_once() {
        for w in 4..40 {
            for h in 4..40 {
                for &(bh, bw) in &[(4, 4), (4, 7), (5, 4), (16, 16)] {
                    let Ok(g) = partition_blocks(w, h, bh, bw) else { continue };
                    let mut hits = vec![0u8; w * h];
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            let rect = g.block_rect(r, c);
                            for y in rect.y..rect.bottom() {
                                for x in rect.x..rect.right() {
                                    hits[y * w + x] += 1;
                                }
                            }
                        }
                    }
                    assert!(hits.iter().all(|&n| n == 1), "{w}x{h} / {bw}x{bh}");
                }
            }
        }
    }

    #[test]
    fn block_rule_examples() {
        assert_eq!(classify_block([7u8; 16], 1), BlockKind::Background);
        assert_eq!(classify_block([0u8, 255], 255), BlockKind::Information);
        assert_eq!(classify_block([100u8, 120, 135], 40), BlockKind::Background);
        assert_eq!(classify_block([100u8, 140], 40), BlockKind::Information);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_creates_ib(px in proptest::collection::vec(any::<u8>(), 1..64), t in 0u8..255) {
            if classify_block(px.iter().copied(), t) == BlockKind::Background {
                prop_assert_eq!(classify_block(px.iter().copied(), t + 1), BlockKind::Background);
            }
        }
    }

    #[test]
    fn assembly_examples() {
        assert!(assemble_regions(&grid_from(&["...", "..."])).is_empty());
        let one = assemble_regions(&grid_from(&["...", ".#."]));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].blocks, vec![(1, 1)]);
        let diag = assemble_regions(&grid_from(&["#..", ".#.", "..."]));
        assert_eq!(diag.len(), 1);
        assert_eq!(diag[0].bbox, Rect::new(0, 0, 8, 8));
        let two = assemble_regions(&grid_from(&["#.#", "#.#"]));
        assert_eq!(two.len(), 2);
    }

    /// Recursive flood fill used as an independent labelling oracle.
    fn oracle_labels(cells: &[bool], rows: usize, cols: usize) -> Vec<Option<usize>> {
        fn fill(cells: &[bool], lab: &mut [Option<usize>], rows: usize, cols: usize, r: isize, c: isize, id: usize) {
            if r < 0 || c < 0 || r >= rows as isize || c >= cols as isize {
                return;
            }
            let i = r as usize * cols + c as usize;
            if !cells[i] || lab[i].is_some() {
                return;
            }
            lab[i] = Some(id);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    fill(cells, lab, rows, cols, r + dr, c + dc, id);
                }
            }
        }
        let mut lab = vec![None; cells.len()];
        let mut id = 0;
        for i in 0..cells.len() {
            if cells[i] && lab[i].is_none() {
                fill(cells, &mut lab, rows, cols, (i / cols) as isize, (i % cols) as isize, id);
                id += 1;
            }
        }
        lab
    }

    proptest! {
        #[test]
        fn assembly_matches_flood_fill(cells in proptest::collection::vec(any::<bool>(), 42)) {
            let (rows, cols) = (6, 7);
            let mut g = partition_blocks(cols * 4, rows * 4, 4, 4).unwrap();
            for (i, &on) in cells.iter().enumerate() {
                if on { g.labels[i] = BlockKind::Information; }
            }
            let comps = assemble_regions(&g);
            let oracle = oracle_labels(&cells, rows, cols);
            let n_oracle = oracle.iter().flatten().max().map_or(0, |m| m + 1);
            prop_assert_eq!(comps.len(), n_oracle);
            let mut owner = vec![None; cells.len()];
            for (k, comp) in comps.iter().enumerate() {
                for &(r, c) in &comp.blocks {
                    prop_assert!(owner[r * cols + c].is_none(), "block in two regions");
                    owner[r * cols + c] = Some(k);
                }
            }
            // Same partition up to relabelling.
            for i in 0..cells.len() {
                for j in 0..cells.len() {
                    prop_assert_eq!(owner[i].is_some() && owner[i] == owner[j], oracle[i].is_some() && oracle[i] == oracle[j]);
                }
            }
        }
    }

    fn features(area: usize, aspect: f64, density: f64, coverage: f64) -> RegionFeatures {
        RegionFeatures {
            width: 0,
            height: 0,
            aspect_ratio: aspect,
            info_pixel_density: density,
            area,
            coverage_ratio: coverage,
        }
    }

    #[test]
    fn region_rule_examples() {
        let cfg = RegionConfig::default();
        assert_eq!(classify_region(&features(1, 6.0, 0.15, 1.0), &cfg), RegionKind::NonText);
        assert_eq!(classify_region(&features(12, 6.0, 0.15, 0.9), &cfg), RegionKind::Text);
        assert_eq!(classify_region(&features(12, 1.0, 0.85, 0.9), &cfg), RegionKind::NonText);
        assert_eq!(classify_region(&features(12, 6.0, 0.15, 0.3), &cfg), RegionKind::NonText);
    }

    #[test]
    fn blank_image_has_no_regions() {
        let img = GrayImage::new(64, 48, 200);
        assert!(extract_text_regions(&img, &RegionConfig::default()).unwrap().is_empty());
    }

    #[test]
    fn dump_round_trip() {
        let r = Region {
            blocks: vec![(0, 0)],
            bbox: Rect::new(16, 32, 160, 48),
            kind: RegionKind::Text,
            features: RegionFeatures {
                width: 160,
                height: 48,
                aspect_ratio: 160.0 / 48.0,
                info_pixel_density: 0.25,
                area: 30,
                coverage_ratio: 1.0,
            },
        };
        let line = r.dump_line();
        assert_eq!(line, "16 32 160 48 TR 30 3.3333 0.2500 1.0000");
        let parsed = parse_region_dump(&dump_regions(&[r.clone()])).unwrap();
        assert_eq!(parsed[0].bbox, r.bbox);
        assert_eq!(parsed[0].kind, RegionKind::Text);
        assert!(parse_region_dump("1 2 3").is_err());
    }
}

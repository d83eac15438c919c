//! Mid-range thresholding with 8-neighbour promotion.
//!
//! Pass 1 marks a pixel foreground when its intensity is strictly below
//! `(G_min + G_max) / 2`, the extremes being taken over the whole region or
//! over a square window around the pixel. Pass 2 promotes any pass-1
//! background pixel with more than four foreground neighbours (pass-1
//! labels). Both passes read only the previous pass, so the result does not
//! depend on scan order.

use std::collections::VecDeque;

use log::warn;

use crate::imaging::{BinaryImage, GrayImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Extremes over the whole region.
    Global,
    /// Extremes over a `side` x `side` square centred on the pixel, clipped
    /// at the borders. `side` must be odd and at least 3.
    Local(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BinarizeConfig {
    pub window: Window,
    pub neighbor_promotion: bool,
}

impl Default for BinarizeConfig {
    fn default() -> Self {
        Self {
            window: Window::Global,
            neighbor_promotion: true,
        }
    }
}

impl BinarizeConfig {
    pub fn validate(&self) -> Result<(), String> {
        match self.window {
            Window::Local(side) if side < 3 || side % 2 == 0 => {
                Err(format!("local window side must be odd and >= 3, got {side}"))
            }
            _ => Ok(()),
        }
    }
}

/// Pass 1 with global extremes.
pub fn threshold_global(region: &GrayImage) -> BinaryImage {
    let Some((lo, hi)) = region.min_max() else {
        return BinaryImage::new(region.width(), region.height());
    };
    if lo == hi {
        warn!("constant region ({lo}); binarized as all background");
    }
    let mid2 = lo as u32 + hi as u32;
    let px = region.pixels().iter().map(|&v| 2 * (v as u32) < mid2).collect();
    BinaryImage::from_pixels(region.width(), region.height(), px).expect("same dimensions")
}

/// Sliding min and max over a 1-D signal with half-width `r` (clipped).
fn sliding_extremes(src: &[u8], r: usize, min_out: &mut [u8], max_out: &mut [u8]) {
    let n = src.len();
    let mut qmin: VecDeque<usize> = VecDeque::new();
    let mut qmax: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + r).min(n - 1);
        while next <= hi {
            while qmin.back().is_some_and(|&j| src[j] >= src[next]) {
                qmin.pop_back();
            }
            qmin.push_back(next);
            while qmax.back().is_some_and(|&j| src[j] <= src[next]) {
                qmax.pop_back();
            }
            qmax.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(r);
        while qmin.front().is_some_and(|&j| j < lo) {
            qmin.pop_front();
        }
        while qmax.front().is_some_and(|&j| j < lo) {
            qmax.pop_front();
        }
        min_out[i] = src[qmin[0]];
        max_out[i] = src[qmax[0]];
    }
}

/// Per-pixel (min, max) over a clipped `side` x `side` window, computed
/// separably: rows first, then columns of the row results.
pub fn local_extremes(region: &GrayImage, side: usize) -> (Vec<u8>, Vec<u8>) {
    let (w, h) = (region.width(), region.height());
    let r = side / 2;
    let mut row_min = vec![0u8; w * h];
    let mut row_max = vec![0u8; w * h];
    for y in 0..h {
        let span = y * w..(y + 1) * w;
        let (mn, mx) = (&mut row_min[span.clone()], &mut row_max[span]);
        sliding_extremes(region.row(y), r, mn, mx);
    }
    let mut out_min = vec![0u8; w * h];
    let mut out_max = vec![0u8; w * h];
    let mut col = vec![0u8; h];
    let mut a = vec![0u8; h];
    let mut b = vec![0u8; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = row_min[y * w + x];
        }
        sliding_extremes(&col, r, &mut a, &mut b);
        for y in 0..h {
            out_min[y * w + x] = a[y];
        }
        for y in 0..h {
            col[y] = row_max[y * w + x];
        }
        sliding_extremes(&col, r, &mut a, &mut b);
        for y in 0..h {
            out_max[y * w + x] = b[y];
        }
    }
    (out_min, out_max)
}

/// Pass 1 with windowed extremes.
pub fn threshold_local(region: &GrayImage, side: usize) -> BinaryImage {
    let (mins, maxs) = local_extremes(region, side);
    let px = region
        .pixels()
        .iter()
        .zip(mins.iter().zip(&maxs))
        .map(|(&v, (&lo, &hi))| 2 * (v as u32) < lo as u32 + hi as u32)
        .collect();
    BinaryImage::from_pixels(region.width(), region.height(), px).expect("same dimensions")
}

/// Number of foreground pixels among the existing 8 neighbours.
pub fn foreground_neighbors(img: &BinaryImage, x: usize, y: usize) -> usize {
    let mut n = 0;
    for ny in y.saturating_sub(1)..=(y + 1).min(img.height() - 1) {
        for nx in x.saturating_sub(1)..=(x + 1).min(img.width() - 1) {
            if (nx, ny) != (x, y) && img.get(nx, ny) {
                n += 1;
            }
        }
    }
    n
}

/// Pass 2: background pixels with more than four foreground neighbours in
/// `pass1` become foreground. Applied once.
pub fn promote(pass1: &BinaryImage) -> BinaryImage {
    let mut out = pass1.clone();
    for y in 0..pass1.height() {
        for x in 0..pass1.width() {
            if !pass1.get(x, y) && foreground_neighbors(pass1, x, y) > 4 {
                out.set(x, y, true);
            }
        }
    }
    out
}

pub fn binarize_region(region: &GrayImage, cfg: &BinarizeConfig) -> BinaryImage {
    let pass1 = match cfg.window {
        Window::Global => threshold_global(region),
        Window::Local(side) => threshold_local(region, side),
    };
    if cfg.neighbor_promotion && pass1.width() > 0 && pass1.height() > 0 {
        promote(&pass1)
    } else {
        pass1
    }
}

pub fn foreground_ratio(b: &BinaryImage) -> f64 {
    let total = b.width() * b.height();
    if total == 0 {
        0.0
    } else {
        b.foreground_count() as f64 / total as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(w: usize, h: usize, px: Vec<u8>) -> GrayImage {
        GrayImage::from_pixels(w, h, px).unwrap()
    }

    #[test]
    fn global_rule_example() {
        // G_min = 50, G_max = 150, threshold 100.
        let img = gray(5, 1, vec![50, 80, 120, 150, 100]);
        let b = binarize_region(&img, &BinarizeConfig::default());
        assert!(b.get(0, 0));
        assert!(b.get(1, 0));
        assert!(!b.get(2, 0));
        assert!(!b.get(3, 0));
        // exactly at the mid-range is not strictly below it
        assert!(!b.get(4, 0));
    }

    #[test]
    fn five_neighbours_promote() {
        let p1 = BinaryImage::from_ascii(&["##.", "#.#", "#.."]);
        assert_eq!(foreground_neighbors(&p1, 1, 1), 5);
        let p2 = promote(&p1);
        assert!(p2.get(1, 1));
        let p1 = BinaryImage::from_ascii(&["##.", "#..", "#.."]);
        assert_eq!(foreground_neighbors(&p1, 1, 1), 4);
        assert!(!promote(&p1).get(1, 1));
    }

    #[test]
    fn checkerboard_is_not_promoted() {
        let px: Vec<u8> = (0..25).map(|i| if (i / 5 + i % 5) % 2 == 0 { 0 } else { 255 }).collect();
        let img = gray(5, 5, px);
        let pass1 = threshold_global(&img);
        for y in 0..5 {
            for x in 0..5 {
                assert_eq!(pass1.get(x, y), (x + y) % 2 == 0);
            }
        }
        for y in 1..4 {
            for x in 1..4 {
                if (x + y) % 2 == 1 {
                    assert_eq!(foreground_neighbors(&pass1, x, y), 4);
                }
            }
        }
        assert_eq!(binarize_region(&img, &BinarizeConfig::default()), pass1);
    }

    #[test]
    fn constant_region_is_background() {
        let b = binarize_region(&GrayImage::new(4, 3, 77), &BinarizeConfig::default());
        assert_eq!(b.foreground_count(), 0);
    }

    #[test]
    fn ratio_examples() {
        assert_eq!(foreground_ratio(&BinaryImage::new(3, 4)), 0.0);
        let all = BinaryImage::from_pixels(2, 2, vec![true; 4]).unwrap();
        assert_eq!(foreground_ratio(&all), 1.0);
        let mut some = BinaryImage::new(4, 3);
        some.set(0, 0, true);
        some.set(1, 1, true);
        some.set(3, 2, true);
        assert_eq!(foreground_ratio(&some), 0.25);
    }

    /// Brute-force window extremes for checking the separable version.
    fn brute_extremes(img: &GrayImage, side: usize) -> (Vec<u8>, Vec<u8>) {
        let r = side as isize / 2;
        let (w, h) = (img.width() as isize, img.height() as isize);
        let mut mins = Vec::new();
        let mut maxs = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut lo = 255u8;
                let mut hi = 0u8;
                for yy in (y - r).max(0)..=(y + r).min(h - 1) {
                    for xx in (x - r).max(0)..=(x + r).min(w - 1) {
                        let v = img.get(xx as usize, yy as usize);
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                mins.push(lo);
                maxs.push(hi);
            }
        }
        (mins, maxs)
    }

    proptest! {
        #[test]
        fn separable_extremes_match_brute_force(
            w in 1usize..14, h in 1usize..14, side in (1usize..5).prop_map(|k| 2 * k + 1),
            seed in any::<u64>()
        ) {
            let mut s = seed | 1;
            let px = (0..w * h).map(|_| { s ^= s << 13; s ^= s >> 7; s ^= s << 17; s as u8 }).collect();
            let img = gray(w, h, px);
            prop_assert_eq!(local_extremes(&img, side), brute_extremes(&img, side));
        }

        #[test]
        fn promotion_only_adds(bits in proptest::collection::vec(any::<bool>(), 64)) {
            let p1 = BinaryImage::from_pixels(8, 8, bits).unwrap();
            let p2 = promote(&p1);
            for (a, b) in p1.pixels().iter().zip(p2.pixels()) {
                prop_assert!(!a || *b);
            }
        }

        #[test]
        fn global_pass1_inverts(px in proptest::collection::vec(any::<u8>(), 1..40)) {
            let n = px.len();
            let img = gray(n, 1, px.clone());
            let inv = gray(n, 1, px.iter().map(|v| 255 - v).collect());
            let (a, b) = (threshold_global(&img), threshold_global(&inv));
            let (lo, hi) = img.min_max().unwrap();
            for (i, &v) in px.iter().enumerate() {
                if 2 * v as u32 != lo as u32 + hi as u32 {
                    prop_assert_eq!(a.get(i, 0), !b.get(i, 0));
                }
            }
        }

        #[test]
        fn two_level_images_are_stable(bits in proptest::collection::vec(any::<bool>(), 36)) {
            let mut bits = bits;
            bits[0] = true;
            bits[1] = false;
            let img = gray(6, 6, bits.iter().map(|&b| if b { 0 } else { 255 }).collect());
            let once = binarize_region(&img, &BinarizeConfig::default());
            let again = binarize_region(&once.to_gray(), &BinarizeConfig::default());
            // Re-binarizing can only promote further; the spec'd fixed point
            // holds whenever the first pass promoted nothing new.
            if promote(&once) == once && once.foreground_count() < 36 {
                prop_assert_eq!(again, once);
            }
        }
    }

    #[test]
    fn local_mode_validation() {
        assert!(BinarizeConfig { window: Window::Local(4), neighbor_promotion: true }.validate().is_err());
        assert!(BinarizeConfig { window: Window::Local(1), neighbor_promotion: true }.validate().is_err());
        assert!(BinarizeConfig { window: Window::Local(31), neighbor_promotion: true }.validate().is_ok());
    }

    #[test]
    fn local_mode_tracks_illumination() {
        // Left half dim, right half bright; each half has its own stroke.
        let (w, h) = (40, 9);
        let mut img = GrayImage::new(w, h, 0);
        for y in 0..h {
            for x in 0..w {
                let bg = if x < 20 { 90 } else { 230 };
                let ink = if x < 20 { 40 } else { 150 };
                img.set(x, y, if y == 4 { ink } else { bg });
            }
        }
        let b = binarize_region(&img, &BinarizeConfig { window: Window::Local(9), neighbor_promotion: false });
        assert!(b.get(5, 4) && b.get(35, 4));
        assert!(!b.get(5, 0) && !b.get(35, 0));
        // The global threshold (40+230)/2 = 135 misses the bright-side stroke.
        let g = threshold_global(&img);
        assert!(!g.get(35, 4));
    }
}

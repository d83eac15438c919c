//! Per-region skew estimation from the bottom profile.
//!
//! For every column the distance from the bottom edge up to the first dark
//! pixel is recorded. Entries outside `mean ± mean-absolute-deviation` are
//! dropped, then the leftmost, rightmost and middle survivors give three
//! pairwise slopes whose mean angle is the estimate.

use std::fmt::Write as _;

use log::debug;
use thiserror::Error;

use crate::imaging::{self, GrayImage};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SkewError {
    #[error("region contains no dark pixel")]
    NoText,
    #[error("profile is empty")]
    EmptyProfile,
    #[error("degenerate profile: {0}")]
    Degenerate(&'static str),
}

/// Bottom profile: one entry per column, `None` where the column has no
/// dark pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Profile {
    pub values: Vec<Option<u32>>,
}

impl Profile {
    pub fn from_values(values: impl IntoIterator<Item = u32>) -> Self {
        Self {
            values: values.into_iter().map(Some).collect(),
        }
    }

    pub fn present(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|h| (i, h)))
    }

    pub fn present_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    /// Left-right mirror image.
    pub fn reversed(&self) -> Self {
        Self {
            values: self.values.iter().rev().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileStats {
    pub mu: f64,
    /// Mean absolute deviation from `mu`.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub col: usize,
    pub h: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewEstimate {
    /// Degrees; positive means the baseline rises to the right.
    pub angle: f64,
    /// Leftmost, rightmost and middle anchors (h1, h2, h3).
    pub points: [Anchor; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkewConfig {
    /// Estimates beyond this magnitude are treated as unreliable.
    pub max_angle: f64,
    /// Estimation passes. Pass `k > 1` re-estimates on the region corrected
    /// by the sum of earlier passes and adds the residual. Refinement helps
    /// single-line text and hurts multi-line text, so it is off by default.
    pub passes: usize,
    /// Refinement stops once a residual is at most this many degrees.
    pub settle: f64,
}

impl Default for SkewConfig {
    fn default() -> Self {
        Self {
            max_angle: 20.0,
            passes: 1,
            settle: 0.25,
        }
    }
}

/// Distance from the bottom edge to the first dark pixel, per column. Dark
/// means strictly below the region's mid-range `(min + max) / 2`.
pub fn bottom_profile(region: &GrayImage) -> Result<Profile, SkewError> {
    let (lo, hi) = region.min_max().ok_or(SkewError::NoText)?;
    let mid2 = lo as u32 + hi as u32;
    let (w, h) = (region.width(), region.height());
    let mut values = vec![None; w];
    for (x, slot) in values.iter_mut().enumerate() {
        *slot = (0..h)
            .rev()
            .find(|&y| 2 * (region.get(x, y) as u32) < mid2)
            .map(|y| (h - 1 - y) as u32);
    }
    if values.iter().all(Option::is_none) {
        return Err(SkewError::NoText);
    }
    Ok(Profile { values })
}

pub fn profile_stats(p: &Profile) -> Result<ProfileStats, SkewError> {
    let n = p.present_count();
    if n == 0 {
        return Err(SkewError::EmptyProfile);
    }
    let mu = p.present().map(|(_, h)| h as f64).sum::<f64>() / n as f64;
    let tau = p.present().map(|(_, h)| (mu - h as f64).abs()).sum::<f64>() / n as f64;
    Ok(ProfileStats { mu, tau })
}

/// Keeps entries with `mu - tau <= h <= mu + tau`; column positions are
/// preserved, dropped entries become `None`.
pub fn filter_profile(p: &Profile, s: &ProfileStats) -> Result<Profile, SkewError> {
    // Guard against rounding in tau when every entry is equal.
    let eps = 1e-9;
    let (lo, hi) = (s.mu - s.tau - eps, s.mu + s.tau + eps);
    let values: Vec<Option<u32>> = p
        .values
        .iter()
        .map(|v| v.filter(|&h| (lo..=hi).contains(&(h as f64))))
        .collect();
    let filtered = Profile { values };
    if filtered.present_count() < 3 {
        return Err(SkewError::Degenerate("fewer than three entries retained"));
    }
    Ok(filtered)
}

fn pair_angle(a: Anchor, b: Anchor) -> f64 {
    let dh = b.h as f64 - a.h as f64;
    let dc = b.col as f64 - a.col as f64;
    (dh / dc).atan().to_degrees()
}

/// Three-anchor skew estimate on a filtered profile.
pub fn estimate_skew(p: &Profile) -> Result<SkewEstimate, SkewError> {
    let retained: Vec<Anchor> = p.present().map(|(col, h)| Anchor { col, h }).collect();
    if retained.len() < 3 {
        return Err(SkewError::Degenerate("fewer than three entries retained"));
    }
    let h1 = retained[0];
    let h2 = retained[retained.len() - 1];
    let mid2 = h1.col + h2.col;
    // Interior entries only; ties go to the left one.
    let h3 = retained[1..retained.len() - 1]
        .iter()
        .copied()
        .min_by_key(|a| (2 * a.col).abs_diff(mid2))
        .expect("at least one interior entry");
    if h1.col == h3.col || h3.col == h2.col || h1.col == h2.col {
        return Err(SkewError::Degenerate("anchors share a column"));
    }
    let angle = (pair_angle(h1, h3) + pair_angle(h3, h2) + pair_angle(h1, h2)) / 3.0;
    Ok(SkewEstimate {
        angle,
        points: [h1, h2, h3],
    })
}

/// Everything computed while estimating one region's skew.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewAnalysis {
    pub profile: Profile,
    pub stats: ProfileStats,
    pub filtered: Profile,
    pub estimate: SkewEstimate,
}

pub fn analyze(region: &GrayImage) -> Result<SkewAnalysis, SkewError> {
    let profile = bottom_profile(region)?;
    let stats = profile_stats(&profile)?;
    let filtered = filter_profile(&profile, &stats)?;
    let estimate = estimate_skew(&filtered)?;
    Ok(SkewAnalysis {
        profile,
        stats,
        filtered,
        estimate,
    })
}

impl SkewAnalysis {
    /// `col h retained` rows for every present column, then a
    /// `mu tau angle` trailer.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (col, h) in self.profile.present() {
            let kept = self.filtered.values[col].is_some() as u8;
            let _ = writeln!(s, "{col} {h} {kept}");
        }
        let _ = writeln!(
            s,
            "{:.4} {:.4} {:.4}",
            self.stats.mu, self.stats.tau, self.estimate.angle
        );
        s
    }
}

/// Mean intensity of the pixels at or above the mid-range.
pub fn background_mean(region: &GrayImage) -> u8 {
    let Some((lo, hi)) = region.min_max() else {
        return 255;
    };
    let mid2 = lo as u32 + hi as u32;
    let (sum, n) = region
        .pixels()
        .iter()
        .filter(|&&v| 2 * v as u32 >= mid2)
        .fold((0u64, 0u64), |(s, n), &v| (s + v as u64, n + 1));
    if n == 0 {
        hi
    } else {
        ((sum + n / 2) / n) as u8
    }
}

#[derive(Debug, Clone)]
pub struct Deskewed {
    pub image: GrayImage,
    pub angle: f64,
    /// First-pass analysis; `None` when estimation failed and the region
    /// passed through.
    pub analysis: Option<SkewAnalysis>,
    /// Estimates made on the corrected region by later passes.
    pub residuals: Vec<f64>,
}

/// Estimates the region's skew and rotates it upright. Regions whose skew
/// cannot be estimated, or whose first estimate exceeds `cfg.max_angle`,
/// pass through unrotated with angle 0.
///
/// A single bottom-profile estimate undershoots on skewed text: at the low
/// end of the baseline the retained extreme columns are glyph features above
/// the baseline. Later passes re-estimate on the corrected region; the
/// original is rotated once by the accumulated angle.
pub fn deskew(region: &GrayImage, cfg: &SkewConfig) -> Deskewed {
    let pass_through = |analysis| Deskewed {
        image: region.clone(),
        angle: 0.0,
        analysis,
        residuals: Vec::new(),
    };
    let analysis = match analyze(region) {
        Ok(a) => a,
        Err(e) => {
            debug!("skew estimation skipped: {e}");
            return pass_through(None);
        }
    };
    let first = analysis.estimate.angle;
    if !first.is_finite() || first.abs() > cfg.max_angle {
        debug!("skew estimate {first:.2} outside +/-{}, passing through", cfg.max_angle);
        return pass_through(Some(analysis));
    }
    let fill = background_mean(region);
    let rotate = |angle: f64| imaging::rotate(region, -angle, fill).expect("angle bounded by max_angle");
    let mut angle = first;
    let mut image = rotate(angle);
    let mut residuals = Vec::new();
    for _ in 1..cfg.passes {
        let Ok(next) = analyze(&image) else { break };
        let r = next.estimate.angle;
        let total = angle + r;
        if !r.is_finite() || total.abs() > cfg.max_angle {
            break;
        }
        residuals.push(r);
        if r.abs() <= cfg.settle {
            break;
        }
        angle = total;
        image = rotate(angle);
    }
    Deskewed {
        image,
        angle,
        analysis: Some(analysis),
        residuals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn region_from_rows(rows: &[&str]) -> GrayImage {
        let h = rows.len();
        let w = rows[0].len();
        let px = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| if c == '#' { 0u8 } else { 255 }))
            .collect();
        GrayImage::from_pixels(w, h, px).unwrap()
    }

    #[test]
    fn profile_examples() {
        let p = bottom_profile(&region_from_rows(&["....", "....", "####"])).unwrap();
        assert_eq!(p, Profile::from_values([0, 0, 0, 0]));
        let p = bottom_profile(&region_from_rows(&["####", "....", "...."])).unwrap();
        assert_eq!(p, Profile::from_values([2, 2, 2, 2]));
        let p = bottom_profile(&region_from_rows(&["...#", "..#.", ".#..", "#..."])).unwrap();
        assert_eq!(p, Profile::from_values([0, 1, 2, 3]));
        let p = bottom_profile(&region_from_rows(&["#..", "..."])).unwrap();
        assert_eq!(p.values, vec![Some(1), None, None]);
        assert_eq!(bottom_profile(&GrayImage::new(5, 5, 90)), Err(SkewError::NoText));
    }

    #[test]
    fn stats_examples() {
        let s = profile_stats(&Profile::from_values([2, 2, 2, 10])).unwrap();
        assert_eq!((s.mu, s.tau), (4.0, 3.0));
        let s = profile_stats(&Profile::from_values([7, 7, 7])).unwrap();
        assert_eq!((s.mu, s.tau), (7.0, 0.0));
        let s = profile_stats(&Profile::from_values([0, 10])).unwrap();
        assert_eq!((s.mu, s.tau), (5.0, 5.0));
        assert_eq!(
            profile_stats(&Profile { values: vec![None, None] }),
            Err(SkewError::EmptyProfile)
        );
    }

    #[test]
    fn filter_examples() {
        let p = Profile::from_values([2, 2, 2, 10]);
        let f = filter_profile(&p, &profile_stats(&p).unwrap()).unwrap();
        assert_eq!(f.values, vec![Some(2), Some(2), Some(2), None]);

        let p = Profile::from_values([5; 6]);
        let s = profile_stats(&p).unwrap();
        let f = filter_profile(&p, &s).unwrap();
        assert_eq!(f, p);
        // Idempotent on constant profiles.
        assert_eq!(filter_profile(&f, &profile_stats(&f).unwrap()).unwrap(), f);

        let p = Profile::from_values([0, 10]);
        assert!(matches!(
            filter_profile(&p, &profile_stats(&p).unwrap()),
            Err(SkewError::Degenerate(_))
        ));
    }

    #[test]
    fn flat_profile_is_level() {
        let est = estimate_skew(&Profile::from_values([4; 50])).unwrap();
        assert_eq!(est.angle, 0.0);
    }

    #[test]
    fn ramp_recovers_angle() {
        let slope = 5f64.to_radians().tan();
        let p = Profile::from_values((0..400).map(|i| (i as f64 * slope).round() as u32));
        let est = estimate_skew(&p).unwrap();
        assert!((est.angle - 5.0).abs() <= 0.1, "{}", est.angle);
    }

    #[test]
    fn spike_is_filtered_out() {
        let slope = 5f64.to_radians().tan();
        let clean: Vec<u32> = (0..400).map(|i| 40 + (i as f64 * slope).round() as u32).collect();
        let mut spiked = clean.clone();
        spiked[0] = 400;
        let run = |v: &[u32]| {
            let p = Profile::from_values(v.iter().copied());
            let s = profile_stats(&p).unwrap();
            estimate_skew(&filter_profile(&p, &s).unwrap()).unwrap().angle
        };
        let spiked_p = Profile::from_values(spiked.iter().copied());
        let s = profile_stats(&spiked_p).unwrap();
        assert!(400.0 > s.mu + s.tau);
        assert!((run(&spiked) - run(&clean)).abs() < 0.15);
    }

    #[test]
    fn anchors_are_ordered() {
        let p = Profile {
            values: vec![Some(1), None, Some(2), Some(2), None, Some(3)],
        };
        let est = estimate_skew(&p).unwrap();
        assert_eq!(est.points[0].col, 0);
        assert_eq!(est.points[1].col, 5);
        // midpoint 2.5: columns 2 and 3 tie, left one wins
        assert_eq!(est.points[2].col, 2);
    }

    proptest! {
        #[test]
        fn shift_invariance(v in proptest::collection::vec(0u32..50, 3..40), d in 0u32..100) {
            let a = estimate_skew(&Profile::from_values(v.iter().copied()));
            let b = estimate_skew(&Profile::from_values(v.iter().map(|h| h + d)));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert!((a.angle - b.angle).abs() < 1e-9),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }

        #[test]
        fn reflection_negates(v in proptest::collection::vec(0u32..50, 3..40)) {
            let p = Profile::from_values(v.iter().copied());
            if let (Ok(a), Ok(b)) = (estimate_skew(&p), estimate_skew(&p.reversed())) {
                // Only exact when the middle anchor mirrors onto itself.
                if a.points[2].col + b.points[2].col == v.len() - 1 {
                    prop_assert!((a.angle + b.angle).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn linear_profiles_agree(start in 0u32..20, num in 0u32..5, den in 1u32..5, len in 3usize..60) {
            // h = start + i*num/den sampled only where exact.
            let values: Vec<Option<u32>> = (0..len)
                .map(|i| ((i as u32 * num) % den == 0).then(|| start + i as u32 * num / den))
                .collect();
            let p = Profile { values };
            if let Ok(est) = estimate_skew(&p) {
                let want = (num as f64 / den as f64).atan().to_degrees();
                prop_assert!((est.angle - want).abs() < 1e-9);
            }
        }

        #[test]
        fn filter_never_grows(v in proptest::collection::vec(0u32..100, 1..50)) {
            let p = Profile::from_values(v.iter().copied());
            let s = profile_stats(&p).unwrap();
            prop_assert!(s.tau >= 0.0);
            if let Ok(f) = filter_profile(&p, &s) {
                prop_assert!(f.present_count() <= p.present_count());
            }
        }
    }

    #[test]
    fn degenerate_regions_pass_through() {
        let flat = GrayImage::new(30, 10, 128);
        let out = deskew(&flat, &SkewConfig::default());
        assert_eq!(out.angle, 0.0);
        assert_eq!(out.image, flat);
    }

    #[test]
    fn steep_estimates_pass_through() {
        // A 30 degree staircase exceeds the default clamp.
        let (w, h) = (60usize, 40usize);
        let mut img = GrayImage::new(w, h, 255);
        for x in 0..w {
            let y = h - 1 - ((x as f64 * 30f64.to_radians().tan()) as usize).min(h - 1);
            img.set(x, y, 0);
        }
        let out = deskew(&img, &SkewConfig::default());
        assert_eq!(out.angle, 0.0);
        assert!(out.analysis.unwrap().estimate.angle > 20.0);
    }

    #[test]
    fn dump_has_trailer() {
        let a = analyze(&region_from_rows(&["....", "####"])).unwrap();
        let d = a.dump();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "0 0 1");
        assert_eq!(lines[4], "0.0000 0.0000 0.0000");
    }
}

#![allow(dead_code)]

use cardocr::imaging::{ColorImage, Rect};
use cardocr::synth::{render_card, CardSpec, Decoy, GroundTruth, TextBand};

pub fn band(lines: &[&str], center: (f64, f64), scale: f64) -> TextBand {
    TextBand {
        lines: lines.iter().map(|s| s.to_string()).collect(),
        center_x: center.0,
        center_y: center.1,
        scale,
    }
}

/// Renders a card holding the given bands and decoys.
pub fn card(width: usize, height: usize, bands: Vec<TextBand>, decoys: Vec<Decoy>, skew: f64, sigma: f64) -> (ColorImage, GroundTruth) {
    let mut spec = CardSpec::blank(width, height);
    spec.bands = bands;
    spec.decoys = decoys;
    spec.skew = skew;
    spec.gaussian_sigma = sigma;
    spec.noise_seed = 7;
    render_card(&spec).expect("valid card")
}

/// Largest edge displacement between two rectangles.
pub fn edge_error(a: Rect, b: Rect) -> usize {
    [
        a.x.abs_diff(b.x),
        a.y.abs_diff(b.y),
        a.right().abs_diff(b.right()),
        a.bottom().abs_diff(b.bottom()),
    ]
    .into_iter()
    .max()
    .unwrap()
}

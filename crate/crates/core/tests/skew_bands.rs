mod common;

use cardocr::imaging::{crop, to_grayscale, GrayImage};
use cardocr::skew::{analyze, deskew, SkewConfig};

/// Gray crop of the single text region of a one-band card.
fn band_region(text: &str, skew: f64) -> GrayImage {
    let (img, truth) = common::card(700, 260, vec![common::band(&[text], (350.0, 130.0), 2.5)], vec![], skew, 0.0);
    let rect = truth.text_regions().next().unwrap().rect;
    crop(&to_grayscale(&img), rect).unwrap()
}

const TEXT: &str = "Camera Based OCR 2010";

#[test]
fn upright_band_stays_level() {
    let out = deskew(&band_region(TEXT, 0.0), &SkewConfig::default());
    assert!(out.angle.abs() <= 0.5, "{}", out.angle);
}

#[test]
fn band_at_seven_degrees_is_recovered_within_three() {
    let out = deskew(&band_region(TEXT, 7.0), &SkewConfig::default());
    assert!((out.angle - 7.0).abs() <= 3.0, "{}", out.angle);
}

#[test]
fn correction_reduces_the_estimate() {
    for skew in [-7.0, -4.0, 4.0, 7.0] {
        let region = band_region(TEXT, skew);
        let before = analyze(&region).unwrap().estimate.angle;
        let out = deskew(&region, &SkewConfig::default());
        let after = analyze(&out.image).unwrap().estimate.angle;
        assert!(after.abs() < before.abs(), "{skew}: {before} then {after}");
    }
}


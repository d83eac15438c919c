mod common;

use cardocr::imaging::{to_grayscale, Rect};
use cardocr::region::{extract_regions, RegionConfig, RegionKind};
use cardocr::synth::{Decoy, DecoyShape};

const BLOCK: usize = 16;

fn two_band_bands() -> Vec<cardocr::synth::TextBand> {
    vec![
        common::band(&["Rahul Sen Gupta"], (260.0, 90.0), 2.4),
        common::band(&["Phone 033 2414 6765"], (300.0, 260.0), 2.2),
    ]
}

#[test]
fn two_text_bands_give_two_text_regions() {
    let (img, truth) = common::card(720, 400, two_band_bands(), vec![], 0.0, 0.0);
    let regions = extract_regions(&to_grayscale(&img), &RegionConfig::default()).unwrap();
    let text: Vec<Rect> = regions.iter().filter(|r| r.kind == RegionKind::Text).map(|r| r.bbox).collect();
    let want: Vec<Rect> = truth.text_regions().map(|r| r.rect).collect();
    assert_eq!(text.len(), 2, "{regions:?}");
    for (got, want) in text.iter().zip(&want) {
        assert!(common::edge_error(*got, *want) <= BLOCK, "{got} vs {want}");
    }
}

#[test]
fn filled_square_is_not_text() {
    let square = Decoy {
        shape: DecoyShape::Rectangle,
        rect: Rect::new(520, 40, 140, 140),
        color: [60, 40, 120],
    };
    let (img, _) = common::card(720, 400, two_band_bands(), vec![square], 0.0, 0.0);
    let regions = extract_regions(&to_grayscale(&img), &RegionConfig::default()).unwrap();
    let hit: Vec<_> = regions
        .iter()
        .filter(|r| r.bbox.overlap_over_union(&square.rect) > 0.5)
        .collect();
    assert_eq!(hit.len(), 1, "{regions:?}");
    assert_eq!(hit[0].kind, RegionKind::NonText);
    assert_eq!(regions.iter().filter(|r| r.kind == RegionKind::Text).count(), 2);
}

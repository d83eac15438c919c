mod common;

use cardocr::binarize::{binarize_region, BinarizeConfig};
use cardocr::imaging::{crop, to_grayscale};
use cardocr::segment::{segment_characters, segment_lines, SegmentConfig};

#[test]
fn three_rendered_lines_give_three_bands_at_their_rows() {
    let lines = ["Anita Roy Verma", "Harbour Design Studio", "Pune 411001 gpq"];
    let (img, truth) = common::card(640, 260, vec![common::band(&lines, (320.0, 130.0), 2.4)], vec![], 0.0, 0.0);
    let region = truth.text_regions().next().unwrap();
    let gray = crop(&to_grayscale(&img), region.rect).unwrap();
    let binary = binarize_region(&gray, &BinarizeConfig::default());
    let bands = segment_lines(&binary, &SegmentConfig::default()).unwrap();
    assert_eq!(bands.len(), 3);
    for ((band, line_img), want) in bands.iter().zip(&region.lines) {
        let top = want.rect.y - region.rect.y;
        let bottom = want.rect.bottom() - 1 - region.rect.y;
        assert!(band.top.abs_diff(top) <= 1 && band.bottom.abs_diff(bottom) <= 1, "{band:?} vs rows {top}..={bottom}");
        let glyphs = segment_characters(line_img, &SegmentConfig::default()).unwrap();
        assert_eq!(glyphs.len(), want.labels.len(), "{}", want.text);
        let words = glyphs.last().unwrap().word_index + 1;
        assert_eq!(words, want.text.split(' ').count(), "{}", want.text);
    }
}

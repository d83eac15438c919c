use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cardocr::evaluation::parse_report;
use cardocr::imaging::{save_pnm, ColorImage};
use cardocr::synth::{render_card, write_suite, CardSpec, SuiteParams, TextBand};

fn cardocr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cardocr")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn write_card(dir: &Path, name: &str, text: Option<&str>) -> String {
    let mut spec = CardSpec::blank(520, 200);
    if let Some(t) = text {
        spec.bands.push(TextBand {
            lines: vec![t.to_owned()],
            center_x: 200.0,
            center_y: 100.0,
            scale: 2.5,
        });
    }
    let (img, _): (ColorImage, _) = render_card(&spec).unwrap();
    let file = dir.join(name);
    fs::write(&file, save_pnm(&img)).unwrap();
    path(&file).to_owned()
}

fn value(out: &Output, key: &str) -> String {
    parse_report(&String::from_utf8_lossy(&out.stdout))
        .into_iter()
        .find(|(k, _)| k == key)
        .unwrap_or_else(|| panic!("no {key} in {}", String::from_utf8_lossy(&out.stdout)))
        .1
}

#[test]
fn run_prints_the_merged_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let card = write_card(dir.path(), "ocr.ppm", Some("OCR 2010"));
    let out = cardocr(&["run", &card]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout), "OCR 2OIO\n");
    let out = cardocr(&["run", &card, "--scheme", "full"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "OCR 2010\n");
}

#[test]
fn blank_card_exits_with_no_text() {
    let dir = tempfile::tempdir().unwrap();
    let card = write_card(dir.path(), "blank.ppm", None);
    let out = cardocr(&["run", &card]);
    assert_eq!(out.status.code(), Some(4));
    assert!(out.stdout.is_empty());
}

#[test]
fn failures_map_to_their_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let card = write_card(dir.path(), "ocr.ppm", Some("OCR 2010"));
    let missing = dir.path().join("missing.ppm");
    assert_eq!(cardocr(&["run", path(&missing)]).status.code(), Some(2));
    let garbage = dir.path().join("garbage.ppm");
    fs::write(&garbage, b"P9 not an image").unwrap();
    assert_eq!(cardocr(&["run", path(&garbage)]).status.code(), Some(2));

    let empty_store = dir.path().join("store");
    fs::create_dir(&empty_store).unwrap();
    assert_eq!(cardocr(&["run", &card, "--templates", path(&empty_store)]).status.code(), Some(3));

    let bad_config = dir.path().join("bad.conf");
    fs::write(&bad_config, "t_var = 40\nno_such_key = 1\n").unwrap();
    assert_eq!(cardocr(&["run", &card, "--config", path(&bad_config)]).status.code(), Some(5));
    fs::write(&bad_config, "r_min = 2.5\n").unwrap();
    assert_eq!(cardocr(&["run", &card, "--config", path(&bad_config)]).status.code(), Some(5));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let card = write_card(dir.path(), "ocr.ppm", Some("OCR 2010"));
    let conf = dir.path().join("full.conf");
    fs::write(&conf, "# full class set\nscheme = full\n").unwrap();
    let out = cardocr(&["run", &card, "--config", path(&conf)]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "OCR 2010\n");
    let out = cardocr(&["run", &card, "--config", path(&conf), "--scheme", "merged"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "OCR 2OIO\n");
}

#[test]
fn dump_stages_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let card = write_card(dir.path(), "ocr.ppm", Some("OCR 2010"));
    let dump = dir.path().join("dump");
    let out = cardocr(&["run", &card, "--dump-stages", path(&dump)]);
    assert_eq!(out.status.code(), Some(0));
    for name in [
        "regions.txt",
        "region_0.profile.txt",
        "region_0.binary.pgm",
        "region_0.bands.txt",
        "region_0.glyphs.txt",
        "transcript.txt",
    ] {
        assert!(dump.join(name).is_file(), "{name} missing");
    }
    assert_eq!(fs::read_to_string(dump.join("transcript.txt")).unwrap(), "OCR 2OIO");
}

#[test]
fn store_build_writes_730_loadable_templates() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let out = cardocr(&["store-build", "--out", path(&store)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(value(&out, "templates"), "730");
    let card = write_card(dir.path(), "ocr.ppm", Some("OCR 2010"));
    let out = cardocr(&["run", &card, "--templates", path(&store)]);
    assert_eq!(String::from_utf8_lossy(&out.stdout), "OCR 2OIO\n");
}

#[test]
fn eval_of_the_ground_truth_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    write_suite(&suite, 4, 3, &SuiteParams::default()).unwrap();
    let pred = dir.path().join("pred");
    for k in 0..3 {
        let card = pred.join(format!("card_{k}"));
        fs::create_dir_all(&card).unwrap();
        fs::copy(suite.join(format!("card_{k}.regions.txt")), card.join("regions.txt")).unwrap();
        fs::copy(suite.join(format!("card_{k}.truth.txt")), card.join("transcript.txt")).unwrap();
        fs::copy(suite.join(format!("card_{k}.mask.pgm")), card.join("mask.pgm")).unwrap();
    }
    let out = cardocr(&["eval", "--suite", path(&suite), "--pred", path(&pred)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for key in [
        "recall",
        "precision",
        "f_measure",
        "pixel_f_measure",
        "decoys_nr",
        "char_accuracy_merged",
        "char_accuracy_full",
    ] {
        assert_eq!(value(&out, key), "100.00", "{key}");
    }
}

#[test]
fn eval_runs_the_pipeline_without_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let out = cardocr(&["synth", "--out", path(&suite), "--seed", "2", "--count", "2"]);
    assert_eq!(value(&out, "cards"), "2");
    let out = cardocr(&["eval", "--suite", path(&suite)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(value(&out, "cards"), "2");
    let merged: f64 = value(&out, "char_accuracy_merged").parse().unwrap();
    let full: f64 = value(&out, "char_accuracy_full").parse().unwrap();
    assert!(merged >= full);
    assert_eq!(cardocr(&["eval", "--suite", path(&dir.path().join("nowhere"))]).status.code(), Some(2));
}

#[test]
fn bench_reports_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let card = write_card(dir.path(), "ocr.ppm", Some("OCR 2010"));
    let out = cardocr(&["bench", "--image", &card, "--runs", "2"]);
    assert_eq!(out.status.code(), Some(0));
    for stage in ["extraction", "skew", "binarize", "segment", "recognize"] {
        value(&out, &format!("{stage}_ms"));
        value(&out, &format!("{stage}_peak_bytes"));
    }
    assert_eq!(value(&out, "input_bytes"), (520 * 200 * 3).to_string());
}

#[test]
fn config_reference_lists_every_key() {
    let out = cardocr(&["config"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for key in cardocr::config::KEYS {
        assert!(text.contains(&format!("{} = {}", key.name, key.default)), "{}", key.name);
    }
}

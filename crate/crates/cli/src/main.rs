//! `cardocr` command-line front end.
//!
//! Exit codes: 0 success, 2 unreadable input, 3 invalid template store,
//! 4 no text found, 5 invalid configuration, 1 anything else.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context as _};
use clap::{Args, Parser, Subcommand};
use log::info;

use cardocr::config::{self, PipelineConfig};
use cardocr::evaluation::{f_measure, EvalCounts, Report};
use cardocr::imaging::{self, ColorImage, PnmImage};
use cardocr::pipeline::{self, CardScore, Pipeline};
use cardocr::recognition::{self, ClassScheme, Template};
use cardocr::region;
use cardocr::synth::{self, GlyphParams, SuiteParams};

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_STORE: u8 = 3;
const EXIT_NO_TEXT: u8 = 4;
const EXIT_CONFIG: u8 = 5;

#[derive(Parser)]
#[command(name = "cardocr", version, about = "Text recognition for camera-captured business cards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Template store directory; overrides the config file. Defaults to the
    /// bundled store.
    #[arg(long, value_name = "DIR")]
    templates: Option<PathBuf>,
    /// Class scheme; overrides the config file.
    #[arg(long, value_parser = ["merged", "full"])]
    scheme: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Recognize the text on a card image (binary PPM or PGM).
    Run {
        image: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Write per-stage artifacts into this directory.
        #[arg(long, value_name = "DIR")]
        dump_stages: Option<PathBuf>,
    },
    /// Render a synthetic card suite with ground truth.
    Synth {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Build a template store from rendered font samples.
    StoreBuild {
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Sample seed; the default reproduces the bundled store.
        #[arg(long, default_value_t = synth::STORE_SEED)]
        seed: u64,
    },
    /// Score a suite. With `--pred`, reads `<card>/regions.txt`,
    /// `<card>/transcript.txt` and optionally `<card>/mask.pgm` from that
    /// directory; otherwise runs the pipeline on every card.
    Eval {
        #[arg(long, value_name = "DIR")]
        suite: PathBuf,
        #[arg(long, value_name = "DIR")]
        pred: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Time each pipeline stage on an image or a synthetic 3 MP card.
    Bench {
        #[arg(long, value_name = "PATH")]
        image: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Seed of the synthetic card.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Print every configuration key with its default.
    Config,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait ExitWith<T> {
    fn exit_with(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ExitWith<T> for Result<T, E> {
    fn exit_with(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            code,
            error: e.into(),
        })
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            image,
            pipeline,
            dump_stages,
        } => cmd_run(&image, &pipeline, dump_stages.as_deref()),
        Command::Synth { out, seed, count } => cmd_synth(&out, seed, count),
        Command::StoreBuild { out, seed } => cmd_store_build(&out, seed),
        Command::Eval { suite, pred, pipeline } => cmd_eval(&suite, pred.as_deref(), &pipeline),
        Command::Bench {
            image,
            runs,
            seed,
            pipeline,
        } => cmd_bench(image.as_deref(), runs, seed, &pipeline),
        Command::Config => {
            emit(&config::reference())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e).exit_with(EXIT_FAILURE),
        _ => Ok(()),
    }
}

fn load_config(args: &PipelineArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))
                .exit_with(EXIT_CONFIG)?;
            PipelineConfig::parse(&text)
                .with_context(|| format!("config {}", path.display()))
                .exit_with(EXIT_CONFIG)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(dir) = &args.templates {
        cfg.templates = Some(dir.clone());
    }
    if let Some(s) = &args.scheme {
        cfg.scheme = ClassScheme::parse(s).ok_or_else(|| Failure {
            code: EXIT_CONFIG,
            error: anyhow!("unknown scheme {s}"),
        })?;
    }
    cfg.validate().exit_with(EXIT_CONFIG)?;
    Ok(cfg)
}

fn load_templates(cfg: &PipelineConfig) -> Result<Vec<Template>, Failure> {
    match &cfg.templates {
        Some(dir) => recognition::load_store(dir)
            .with_context(|| format!("template store {}", dir.display()))
            .exit_with(EXIT_STORE),
        None => synth::bundled_store().context("bundled template store").exit_with(EXIT_STORE),
    }
}

fn build_pipeline(args: &PipelineArgs) -> Result<Pipeline, Failure> {
    let cfg = load_config(args)?;
    let store = load_templates(&cfg)?;
    Ok(Pipeline::new(cfg, store))
}

fn read_image(path: &Path) -> Result<ColorImage, Failure> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading {}", path.display()))
        .exit_with(EXIT_INPUT)?;
    let img = imaging::load_pnm(&bytes)
        .with_context(|| format!("decoding {}", path.display()))
        .exit_with(EXIT_INPUT)?;
    Ok(match img {
        PnmImage::Color(c) => c,
        PnmImage::Gray(g) => {
            let px = g.pixels().iter().map(|&v| [v, v, v]).collect();
            ColorImage::from_pixels(g.width(), g.height(), px).expect("same dimensions")
        }
    })
}

fn cmd_run(image: &Path, args: &PipelineArgs, dump: Option<&Path>) -> Result<(), Failure> {
    let pipeline = build_pipeline(args)?;
    let img = read_image(image)?;
    let out = pipeline.run(&img).exit_with(EXIT_INPUT)?;
    if let Some(dir) = dump {
        pipeline::write_dumps(&out, dir)
            .with_context(|| format!("writing stage dumps to {}", dir.display()))
            .exit_with(EXIT_FAILURE)?;
    }
    if out.transcript.trim().is_empty() {
        return Err(Failure {
            code: EXIT_NO_TEXT,
            error: anyhow!("no text found in {}", image.display()),
        });
    }
    emit(&format!("{}\n", out.transcript))
}

fn cmd_synth(out: &Path, seed: u64, count: usize) -> Result<(), Failure> {
    synth::write_suite(out, seed, count, &SuiteParams::default())
        .with_context(|| format!("writing suite to {}", out.display()))
        .exit_with(EXIT_FAILURE)?;
    emit(&format!("cards={count}\n"))
}

fn cmd_store_build(out: &Path, seed: u64) -> Result<(), Failure> {
    let samples = synth::glyph_samples(seed, synth::STORE_CANDIDATES, &GlyphParams::store());
    let store = recognition::build_store(&samples).exit_with(EXIT_STORE)?;
    recognition::save_store(&store, out)
        .with_context(|| format!("writing store to {}", out.display()))
        .exit_with(EXIT_STORE)?;
    emit(&format!("templates={}\n", store.len()))
}

/// Score of one card and whether a foreground mask was scored.
fn read_prediction(dir: &Path, card: &synth::SuiteCard) -> anyhow::Result<(CardScore, bool)> {
    let card_dir = dir.join(&card.name);
    let regions_path = card_dir.join("regions.txt");
    let records = region::parse_region_dump(
        &fs::read_to_string(&regions_path).with_context(|| format!("reading {}", regions_path.display()))?,
    )
    .map_err(|e| anyhow!("{}: {e}", regions_path.display()))?;
    let transcript_path = card_dir.join("transcript.txt");
    let transcript =
        fs::read_to_string(&transcript_path).with_context(|| format!("reading {}", transcript_path.display()))?;
    let mask_path = card_dir.join("mask.pgm");
    let mask = if mask_path.exists() {
        Some(synth::read_mask(&mask_path)?)
    } else {
        None
    };
    Ok((
        pipeline::score_prediction(card, &records, &transcript, mask.as_ref()),
        mask.is_some(),
    ))
}

fn push_metrics(report: &mut Report, prefix: &str, counts: EvalCounts) {
    match f_measure(counts) {
        Ok(m) => {
            report.metrics(prefix, &m);
        }
        Err(e) => info!("{prefix}metrics undefined: {e}"),
    }
}

fn cmd_eval(suite: &Path, pred: Option<&Path>, args: &PipelineArgs) -> Result<(), Failure> {
    let cards = synth::load_suite(suite)
        .with_context(|| format!("loading suite {}", suite.display()))
        .exit_with(EXIT_INPUT)?;
    enum Source<'a> {
        Predictions(&'a Path),
        Pipeline(Pipeline),
    }
    let source = match pred {
        Some(dir) => Source::Predictions(dir),
        None => Source::Pipeline(build_pipeline(args)?),
    };
    let mut total = CardScore::default();
    let mut with_mask = true;
    for card in &cards {
        let (score, masked) = match &source {
            Source::Predictions(dir) => read_prediction(dir, card).exit_with(EXIT_INPUT)?,
            Source::Pipeline(p) => (p.score_card(card).exit_with(EXIT_INPUT)?, true),
        };
        with_mask &= masked;
        total += score;
    }
    let mut report = Report::new();
    report.int("cards", cards.len() as u64);
    push_metrics(&mut report, "", total.regions);
    report.int("decoys", total.decoys);
    if total.decoys > 0 {
        report.num("decoys_nr", 100.0 * total.regions.tn as f64 / total.decoys as f64);
    }
    if with_mask {
        push_metrics(&mut report, "pixel_", total.pixels);
    }
    report
        .int("chars", total.chars.total)
        .int("chars_aligned", total.chars.aligned)
        .num("char_accuracy_merged", total.chars.accuracy(ClassScheme::Merged))
        .num("char_accuracy_full", total.chars.accuracy(ClassScheme::Full));
    emit(&report.to_string())
}

fn cmd_bench(image: Option<&Path>, runs: usize, seed: u64, args: &PipelineArgs) -> Result<(), Failure> {
    let pipeline = build_pipeline(args)?;
    let img = match image {
        Some(path) => read_image(path)?,
        None => {
            let spec = synth::generate_card(&SuiteParams::three_megapixel(), &mut synth::card_rng(seed, 0));
            synth::render_card(&spec).exit_with(EXIT_FAILURE)?.0
        }
    };
    let (timings, out) = pipeline.time(&img, runs).exit_with(EXIT_INPUT)?;
    let mut report = Report::new();
    report
        .int("width", img.width() as u64)
        .int("height", img.height() as u64)
        .int("runs", runs.max(1) as u64)
        .timings(&timings)
        .int("peak_bytes", timings.peak() as u64)
        .int("input_bytes", out.input_bytes as u64)
        .num("peak_ratio", timings.peak() as f64 / out.input_bytes.max(1) as f64);
    emit(&report.to_string())
}

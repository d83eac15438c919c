//! Pipeline configuration: a flat `key = value` file format.
//!
//! [`KEYS`] is the single source of truth. Defaults, parsing and the
//! generated reference all read from it.

use std::fmt::Write as _;
use std::path::PathBuf;

use thiserror::Error;

use crate::binarize::{BinarizeConfig, Window};
use crate::recognition::ClassScheme;
use crate::region::RegionConfig;
use crate::segment::SegmentConfig;
use crate::skew::SkewConfig;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected 'key = value'")]
    Syntax { line: usize },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key '{key}' given twice")]
    DuplicateKey { line: usize, key: String },
    #[error("{key}: invalid value '{value}': {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub region: RegionConfig,
    pub skew: SkewConfig,
    pub binarize: BinarizeConfig,
    /// Window side used when `binarize.window` is local.
    pub local_side: usize,
    pub segment: SegmentConfig,
    pub scheme: ClassScheme,
    /// Template store directory; `None` selects the bundled store.
    pub templates: Option<PathBuf>,
}

/// One configuration key.
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
    apply: fn(&mut PipelineConfig, &str) -> Result<(), String>,
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| "not a number".to_owned())
}

fn boolean(v: &str) -> Result<bool, String> {
    match v {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        _ => Err("expected true or false".to_owned()),
    }
}

pub static KEYS: &[Key] = &[
    Key {
        name: "block_h",
        default: "16",
        doc: "Block height in pixels for information-block classification (>= 4).",
        apply: |c, v| Ok(c.region.block_h = num(v)?),
    },
    Key {
        name: "block_w",
        default: "16",
        doc: "Block width in pixels (>= 4).",
        apply: |c, v| Ok(c.region.block_w = num(v)?),
    },
    Key {
        name: "t_var",
        default: "40",
        doc: "Minimum max-min intensity range for an information block.",
        apply: |c, v| Ok(c.region.t_var = num(v)?),
    },
    Key {
        name: "min_area_blocks",
        default: "4",
        doc: "Smallest text region, in blocks.",
        apply: |c, v| Ok(c.region.min_area_blocks = num(v)?),
    },
    Key {
        name: "ar_min",
        default: "1.2",
        doc: "Lowest width/height ratio of a text region.",
        apply: |c, v| Ok(c.region.ar_min = num(v)?),
    },
    Key {
        name: "ar_max",
        default: "40",
        doc: "Highest width/height ratio of a text region.",
        apply: |c, v| Ok(c.region.ar_max = num(v)?),
    },
    Key {
        name: "dens_min",
        default: "0.03",
        doc: "Lowest fraction of dark pixels in a text region.",
        apply: |c, v| Ok(c.region.dens_min = num(v)?),
    },
    Key {
        name: "dens_max",
        default: "0.6",
        doc: "Highest fraction of dark pixels in a text region.",
        apply: |c, v| Ok(c.region.dens_max = num(v)?),
    },
    Key {
        name: "cov_min",
        default: "0.5",
        doc: "Lowest fraction of the bounding box covered by member blocks.",
        apply: |c, v| Ok(c.region.cov_min = num(v)?),
    },
    Key {
        name: "skew_max_angle",
        default: "20",
        doc: "Skew estimates beyond +/- this many degrees leave the region unrotated.",
        apply: |c, v| Ok(c.skew.max_angle = num(v)?),
    },
    Key {
        name: "skew_passes",
        default: "1",
        doc: "Skew estimation passes; 1 rotates by the first estimate only, more passes re-estimate on the corrected region.",
        apply: |c, v| Ok(c.skew.passes = num(v)?),
    },
    Key {
        name: "binarize_window",
        default: "global",
        doc: "Extent of the min/max threshold window: global or local.",
        apply: |c, v| {
            c.binarize.window = match v {
                "global" => Window::Global,
                "local" => Window::Local(c.local_side),
                _ => return Err("expected global or local".to_owned()),
            };
            Ok(())
        },
    },
    Key {
        name: "binarize_local_side",
        default: "31",
        doc: "Side of the local threshold window in pixels (odd, >= 3).",
        apply: |c, v| {
            c.local_side = num(v)?;
            if let Window::Local(_) = c.binarize.window {
                c.binarize.window = Window::Local(c.local_side);
            }
            Ok(())
        },
    },
    Key {
        name: "neighbor_promotion",
        default: "true",
        doc: "Promote background pixels with more than four foreground neighbours.",
        apply: |c, v| Ok(c.binarize.neighbor_promotion = boolean(v)?),
    },
    Key {
        name: "line_threshold",
        default: "0",
        doc: "Rows with at most this many foreground pixels separate lines.",
        apply: |c, v| Ok(c.segment.line_threshold = num(v)?),
    },
    Key {
        name: "r_min",
        default: "0.5",
        doc: "Line bands shorter than r_min x median band height are merged.",
        apply: |c, v| Ok(c.segment.r_min = num(v)?),
    },
    Key {
        name: "word_gap_factor",
        default: "2.0",
        doc: "Glyph gaps at least this multiple of the median gap split words.",
        apply: |c, v| Ok(c.segment.word_gap_factor = num(v)?),
    },
    Key {
        name: "scheme",
        default: "merged",
        doc: "Class scheme: merged (look-alike classes collapsed) or full.",
        apply: |c, v| {
            c.scheme = ClassScheme::parse(v).ok_or("expected merged or full")?;
            Ok(())
        },
    },
    Key {
        name: "templates",
        default: "",
        doc: "Template store directory; empty selects the bundled store.",
        apply: |c, v| {
            c.templates = (!v.is_empty()).then(|| PathBuf::from(v));
            Ok(())
        },
    },
];

impl Default for PipelineConfig {
    fn default() -> Self {
        let mut c = PipelineConfig {
            region: RegionConfig::default(),
            skew: SkewConfig::default(),
            binarize: BinarizeConfig::default(),
            local_side: 31,
            segment: SegmentConfig::default(),
            scheme: ClassScheme::default(),
            templates: None,
        };
        for k in KEYS {
            (k.apply)(&mut c, k.default).expect("table defaults parse");
        }
        c
    }
}

impl PipelineConfig {
    /// Sets one key. Values are checked by [`PipelineConfig::validate`].
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let k = KEYS
            .iter()
            .find(|k| k.name == key)
            .ok_or_else(|| ConfigError::UnknownKey {
                line: 0,
                key: key.to_owned(),
            })?;
        (k.apply)(self, value).map_err(|reason| ConfigError::InvalidValue {
            key: key.to_owned(),
            value: value.to_owned(),
            reason,
        })
    }

    /// Parses a config file on top of the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: n + 1 })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.contains(&key) {
                return Err(ConfigError::DuplicateKey {
                    line: n + 1,
                    key: key.to_owned(),
                });
            }
            seen.push(key);
            cfg.set(key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line: n + 1, key },
                other => other,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        let r = &self.region;
        if r.block_h < 4 || r.block_w < 4 {
            return bad(format!("block size {}x{} below 4", r.block_h, r.block_w));
        }
        if r.min_area_blocks == 0 {
            return bad("min_area_blocks must be at least 1".into());
        }
        if !(r.ar_min > 0.0 && r.ar_min <= r.ar_max) {
            return bad(format!("need 0 < ar_min <= ar_max, got {} and {}", r.ar_min, r.ar_max));
        }
        if !(0.0 <= r.dens_min && r.dens_min <= r.dens_max && r.dens_max <= 1.0) {
            return bad(format!("need 0 <= dens_min <= dens_max <= 1, got {} and {}", r.dens_min, r.dens_max));
        }
        if !(0.0..=1.0).contains(&r.cov_min) {
            return bad(format!("cov_min {} outside [0, 1]", r.cov_min));
        }
        if !(self.skew.max_angle > 0.0 && self.skew.max_angle <= crate::imaging::MAX_ROTATION_DEG) {
            return bad(format!("skew_max_angle {} outside (0, 45]", self.skew.max_angle));
        }
        if self.skew.passes == 0 {
            return bad("skew_passes must be at least 1".into());
        }
        if self.local_side < 3 || self.local_side % 2 == 0 {
            return bad(format!("binarize_local_side {} must be odd and >= 3", self.local_side));
        }
        self.binarize.validate().map_err(ConfigError::Invalid)?;
        let s = &self.segment;
        if !(s.r_min > 0.0 && s.r_min <= 1.0) {
            return bad(format!("r_min {} outside (0, 1]", s.r_min));
        }
        if !(s.word_gap_factor >= 1.0) {
            return bad(format!("word_gap_factor {} below 1", s.word_gap_factor));
        }
        Ok(())
    }
}

/// The configuration reference, generated from [`KEYS`].
pub fn reference() -> String {
    let mut s = String::from(
        "# Configuration reference. One 'key = value' per line; '#' starts a comment.\n\
         # Unknown keys are rejected. Command-line flags override file values.\n",
    );
    for k in KEYS {
        let _ = writeln!(s, "\n# {}\n{} = {}", k.doc, k.name, k.default);
    }
    s
}

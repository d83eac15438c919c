//! Low-memory OCR pipeline for camera-captured business cards.
//!
//! Stages run in order: text-region extraction, per-region skew correction,
//! binarization, line and character segmentation, and template-matching
//! recognition. [`synth`] renders cards with exact ground truth and
//! [`evaluation`] scores each stage against it.

pub mod binarize;
pub mod config;
pub mod evaluation;
pub mod font;
pub mod imaging;
pub mod pipeline;
pub mod recognition;
pub mod region;
pub mod segment;
pub mod skew;
pub mod synth;

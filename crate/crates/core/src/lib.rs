//! Stationary-noise on-line (SNO) acoustic event detection.
//!
//! The crate separates stationary Gaussian background noise from transient
//! sounds using closed-form thresholds on frame power and on the variance
//! of frame power, with the noise level tracked by morphological erosion.
//! Around the detector sit WAV ingest and filtering, a synthetic soundscape
//! generator, fuzzy-segmentation precision/recall evaluation and posterior
//! recalibration for downstream classifiers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod audio;
pub mod calibration;
pub mod cli;
pub mod config;
pub mod detector;
pub mod error;
pub mod eval;
pub mod noise_floor;
pub mod noise_stats;
pub mod synth;

pub use error::{Error, Result};

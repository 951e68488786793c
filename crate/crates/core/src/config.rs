//! Configuration file model.
//!
//! One TOML document carries every tunable. The built-in defaults live in
//! `config/default.toml` and are compiled in; a user file is merged over
//! them key by key, and command-line flags are applied last.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub audio: AudioConfig,
    pub detector: DetectorConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AudioConfig {
    pub target_rate: u32,
    pub bandpass_enabled: bool,
    pub decimation: DecimationConfig,
    pub bandpass: BandpassConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecimationConfig {
    pub num_taps: usize,
    pub cutoff_fraction: f64,
    /// Explicit taps; empty means "use the windowed-sinc default".
    #[serde(default)]
    pub taps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandpassConfig {
    pub design_rate: u32,
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    /// Second-order sections as `[b0, b1, b2, a0, a1, a2]`.
    pub sos: Vec<[f64; 6]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub frame_samples: usize,
    pub superblock_frames: usize,
    pub min_event_s: f64,
    pub merge_gap_s: f64,
    pub sliding_superblocks: bool,
    /// Test the raw frame power (instead of the superblock mean) against P_thr.
    #[serde(default)]
    pub frame_power_test: bool,
    pub floor: FloorConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FloorMode {
    Erosion,
    Dilation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorConfig {
    pub timeframe_s: f64,
    pub alpha_f_db: f64,
    pub n_std: f64,
    pub mode: FloorMode,
    pub dilation_divisor_db: f64,
    pub power_epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub ramp_s: f64,
    pub grid_start: f64,
    pub grid_stop: f64,
    pub grid_points: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config::from_toml_str(DEFAULT_CONFIG_TOML).expect("built-in config is valid")
    }
}

impl Config {
    /// Parses a complete document (every key present).
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults overlaid with a partial user document.
    pub fn with_overrides(text: &str) -> Result<Self> {
        let mut base: toml::Value =
            toml::from_str(DEFAULT_CONFIG_TOML).map_err(|e| Error::config(format!("built-in config: {e}")))?;
        let user: toml::Value = toml::from_str(text).map_err(|e| Error::config(format!("config parse: {e}")))?;
        merge_toml(&mut base, user);
        let cfg: Config = base.try_into().map_err(|e: toml::de::Error| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        Self::with_overrides(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.detector.validate()?;
        if self.audio.target_rate == 0 {
            return Err(Error::config("audio.target_rate must be positive"));
        }
        if self.eval.ramp_s < 0.0 || !self.eval.ramp_s.is_finite() {
            return Err(Error::config("eval.ramp_s must be >= 0"));
        }
        if self.eval.grid_points == 0 {
            return Err(Error::config("eval.grid_points must be >= 1"));
        }
        if !(self.eval.grid_stop >= self.eval.grid_start) {
            return Err(Error::config("eval.grid_stop must be >= grid_start"));
        }
        Ok(())
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_samples < 2 {
            return Err(Error::config("detector.frame_samples must be >= 2"));
        }
        if self.superblock_frames < 2 {
            return Err(Error::config("detector.superblock_frames must be >= 2"));
        }
        if !(self.min_event_s >= 0.0) || !self.min_event_s.is_finite() {
            return Err(Error::config("detector.min_event_s must be >= 0"));
        }
        if !(self.merge_gap_s >= 0.0) || !self.merge_gap_s.is_finite() {
            return Err(Error::config("detector.merge_gap_s must be >= 0"));
        }
        self.floor.validate()
    }
}

impl FloorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.timeframe_s > 0.0) || !self.timeframe_s.is_finite() {
            return Err(Error::config("detector.floor.timeframe_s must be > 0"));
        }
        if !(self.n_std >= 0.0) || self.n_std.is_nan() {
            return Err(Error::config("detector.floor.n_std must be >= 0"));
        }
        if !self.alpha_f_db.is_finite() || !self.dilation_divisor_db.is_finite() {
            return Err(Error::config("detector.floor dB values must be finite"));
        }
        if !(self.power_epsilon >= 0.0) {
            return Err(Error::config("detector.floor.power_epsilon must be >= 0"));
        }
        if !(1.0..=10.0).contains(&self.alpha_f_db) {
            log::warn!("alpha_f_db = {} dB is outside the recommended 1-10 dB range", self.alpha_f_db);
        }
        Ok(())
    }
}

fn merge_toml(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge_toml(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

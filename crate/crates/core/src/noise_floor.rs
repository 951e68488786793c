//! Noise-floor tracking by 1-D grey-scale erosion (or dilation) of the
//! frame-power sequence, and the detection thresholds derived from it.

use std::collections::VecDeque;

use crate::config::{FloorConfig, FloorMode};
use crate::error::{Error, Result};
use crate::noise_stats::{power_stats, var_stats, NoiseParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extremum {
    Min,
    Max,
}

/// Sliding minimum/maximum over indexed values using a monotonic deque.
/// Each value is pushed and popped at most once.
#[derive(Debug, Clone)]
pub struct SlidingExtremum {
    kind: Extremum,
    queue: VecDeque<(usize, f64)>,
}

impl SlidingExtremum {
    pub fn new(kind: Extremum) -> Self {
        Self { kind, queue: VecDeque::new() }
    }

    pub fn push(&mut self, index: usize, value: f64) {
        while let Some(&(_, back)) = self.queue.back() {
            let dominated = match self.kind {
                Extremum::Min => back >= value,
                Extremum::Max => back <= value,
            };
            if !dominated {
                break;
            }
            self.queue.pop_back();
        }
        self.queue.push_back((index, value));
    }

    /// Drops every entry with index below `first`.
    pub fn evict_before(&mut self, first: usize) {
        while self.queue.front().is_some_and(|&(i, _)| i < first) {
            self.queue.pop_front();
        }
    }

    pub fn current(&self) -> Option<f64> {
        self.queue.front().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

fn sliding(powers: &[f64], window_frames: usize, kind: Extremum) -> Result<Vec<f64>> {
    if powers.is_empty() {
        return Err(Error::invalid("morphological filter of an empty sequence"));
    }
    if window_frames == 0 || window_frames.is_multiple_of(2) {
        return Err(Error::invalid(format!("window must be odd and >= 1, got {window_frames}")));
    }
    let half = window_frames / 2;
    let n = powers.len();
    let mut ext = SlidingExtremum::new(kind);
    let mut next = 0;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            ext.push(next, powers[next]);
            next += 1;
        }
        ext.evict_before(i.saturating_sub(half));
        out.push(ext.current().expect("window is never empty"));
    }
    Ok(out)
}

/// Centred sliding minimum. Edges replicate the boundary value, which for a
/// minimum is the same as clipping the window to the sequence.
pub fn erode(powers: &[f64], window_frames: usize) -> Result<Vec<f64>> {
    sliding(powers, window_frames, Extremum::Min)
}

/// Centred sliding maximum.
pub fn dilate(powers: &[f64], window_frames: usize) -> Result<Vec<f64>> {
    sliding(powers, window_frames, Extremum::Max)
}

/// Erosion window in frames for timeframe `T`, forced odd.
pub fn window_frames(timeframe_s: f64, sample_rate: u32, frame_samples: usize) -> usize {
    let frames = (timeframe_s * sample_rate as f64 / frame_samples as f64).round() as usize;
    let frames = frames.max(1);
    if frames.is_multiple_of(2) {
        frames + 1
    } else {
        frames
    }
}

pub fn db_to_power_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Mean noise power estimate from one local extremum.
pub fn floor_from_extremum(extremum: f64, config: &FloorConfig) -> f64 {
    let est = match config.mode {
        FloorMode::Erosion => db_to_power_ratio(config.alpha_f_db) * extremum,
        FloorMode::Dilation => extremum / db_to_power_ratio(config.dilation_divisor_db),
    };
    est.max(config.power_epsilon)
}

pub fn estimate_floor(local_extrema: &[f64], config: &FloorConfig) -> Vec<f64> {
    local_extrema.iter().map(|&v| floor_from_extremum(v, config)).collect()
}

/// Power and variance thresholds with the floor they were computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub p_thr: f64,
    pub q_thr: f64,
    pub p_est_mean: f64,
}

/// Evaluates the Gaussian-noise closed forms at `σ² = p_est_mean` and adds
/// `n_std` standard deviations to each mean.
pub fn thresholds_from_floor(
    p_est_mean: f64,
    frame_samples: usize,
    superblock_frames: usize,
    n_std: f64,
) -> Result<Thresholds> {
    let params = NoiseParams::new(p_est_mean, frame_samples, superblock_frames)?;
    if !(n_std >= 0.0) {
        return Err(Error::invalid(format!("n_std must be >= 0, got {n_std}")));
    }
    let p = power_stats(&params);
    let q = var_stats(&params);
    Ok(Thresholds { p_thr: p.p_mean + n_std * p.p_var.sqrt(), q_thr: q.q_mean + n_std * q.q_var.sqrt(), p_est_mean })
}

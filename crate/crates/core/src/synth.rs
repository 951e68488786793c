//! Labelled synthetic soundscapes: stationary Gaussian noise (optionally
//! stepping in level), tonal and chirped "calls" at a set SNR, and short
//! wideband "snap" distractors.
//!
//! SNR is measured in the analysis band: an event's power is compared with
//! the power the background noise has after the band-pass filter, i.e.
//! `σ² · Σh²`.
//!
//! Randomness comes from PCG-64 (`Lcg128Xsl64`). Every scenario seed is
//! split into independent streams (see [`RngStream`]) so that, for
//! example, removing an event leaves the noise samples untouched.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioStream, BandpassSpec};
use crate::error::{Error, Result};
use crate::eval::{Annotation, Interval};

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngStream {
    Noise = 1,
    Events = 2,
    Snaps = 3,
    AddedNoise = 4,
    Layout = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// PCG-64 with a 128-bit state expanded from `seed` by SplitMix64 and the
/// stream id as the increment selector.
pub fn rng_stream(seed: u64, stream: RngStream) -> Pcg64 {
    let mut sm = seed;
    let hi = splitmix64(&mut sm) as u128;
    let lo = splitmix64(&mut sm) as u128;
    Pcg64::new((hi << 64) | lo, stream as u128)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Tone,
    Chirp,
    Snap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub start_s: f64,
    pub duration_s: f64,
    pub kind: EventKind,
    /// Tone: the midpoint is used. Chirp: linear sweep from first to second.
    /// Snap: ignored (wideband).
    #[serde(default = "default_band")]
    pub band_hz: [f64; 2],
    pub snr_db: f64,
}

fn default_band() -> [f64; 2] {
    [300.0, 300.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseStep {
    pub time_s: f64,
    pub sigma2: f64,
}

/// Poisson-arriving wideband bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnapConfig {
    pub rate_hz: f64,
    pub snr_db: [f64; 2],
    pub duration_ms: [f64; 2],
    /// Minimum clearance from tonal events.
    #[serde(default = "default_guard")]
    pub guard_s: f64,
}

fn default_guard() -> f64 {
    0.5
}

impl Default for SnapConfig {
    fn default() -> Self {
        Self { rate_hz: 0.1, snr_db: [25.0, 35.0], duration_ms: [2.0, 10.0], guard_s: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_s: f64,
    pub sample_rate: u32,
    pub noise_sigma2: f64,
    /// Level changes: from `time_s` on the noise variance is `sigma2`.
    #[serde(default)]
    pub noise_steps: Vec<NoiseStep>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub snaps: Option<SnapConfig>,
    pub seed: u64,
}

/// Raised-cosine onset/offset length for tonal events.
const TAPER_S: f64 = 0.02;

impl Scenario {
    /// Ten-minute, 8 kHz scene with twelve alternating tone/chirp calls of
    /// 1-3 s, one per 50 s slot, plus snap distractors.
    pub fn demo(seed: u64, snr_db: f64) -> Self {
        let mut rng = rng_stream(seed, RngStream::Layout);
        let slots = 12;
        let slot_s = 50.0;
        let events = (0..slots)
            .map(|i| {
                let duration_s = rng.gen_range(1.0..3.0);
                let start_s = i as f64 * slot_s + rng.gen_range(5.0..(slot_s - 5.0 - duration_s));
                if i % 2 == 0 {
                    let f = rng.gen_range(200.0..600.0);
                    EventSpec { start_s, duration_s, kind: EventKind::Tone, band_hz: [f, f], snr_db }
                } else {
                    let lo = rng.gen_range(150.0..250.0);
                    let hi = rng.gen_range(350.0..600.0);
                    EventSpec { start_s, duration_s, kind: EventKind::Chirp, band_hz: [lo, hi], snr_db }
                }
            })
            .collect();
        Scenario {
            duration_s: slots as f64 * slot_s,
            sample_rate: 8000,
            noise_sigma2: 1e-5,
            noise_steps: Vec::new(),
            events,
            snaps: Some(SnapConfig::default()),
            seed,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::config(format!("scenario: {e}")))?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s >= 0.0 && self.duration_s.is_finite()) {
            return Err(Error::config("scenario duration must be >= 0"));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("scenario sample rate must be positive"));
        }
        if !(self.noise_sigma2 > 0.0 && self.noise_sigma2.is_finite()) {
            return Err(Error::config("noise variance must be positive"));
        }
        let mut last_t = f64::NEG_INFINITY;
        for step in &self.noise_steps {
            if !(step.time_s > last_t) || step.time_s < 0.0 || !(step.sigma2 > 0.0) || !step.sigma2.is_finite() {
                return Err(Error::config(format!(
                    "noise schedule must have increasing non-negative times and positive variances ({step:?})"
                )));
            }
            last_t = step.time_s;
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        for e in &self.events {
            if !(e.start_s >= 0.0 && e.duration_s > 0.0 && e.start_s + e.duration_s <= self.duration_s) {
                return Err(Error::config(format!("event outside the scenario: {e:?}")));
            }
            if !e.snr_db.is_finite() {
                return Err(Error::config("event SNR must be finite"));
            }
            if e.band_hz.iter().any(|f| !(*f > 0.0 && *f < nyquist)) {
                return Err(Error::config(format!("event band {:?} outside (0, {nyquist})", e.band_hz)));
            }
        }
        let mut spans: Vec<(f64, f64)> = self.events.iter().map(|e| (e.start_s, e.start_s + e.duration_s)).collect();
        spans.sort_by(|a, b| a.0.total_cmp(&b.0));
        if spans.windows(2).any(|w| w[1].0 < w[0].1) {
            return Err(Error::config("scenario events overlap"));
        }
        if let Some(s) = &self.snaps {
            if !(s.rate_hz >= 0.0 && s.rate_hz.is_finite())
                || s.snr_db[0] > s.snr_db[1]
                || !(s.duration_ms[0] > 0.0 && s.duration_ms[0] <= s.duration_ms[1])
                || !(s.guard_s >= 0.0)
            {
                return Err(Error::config(format!("bad snap configuration {s:?}")));
            }
        }
        Ok(())
    }

    pub fn sigma2_at(&self, t: f64) -> f64 {
        self.noise_steps.iter().take_while(|s| s.time_s <= t).last().map_or(self.noise_sigma2, |s| s.sigma2)
    }
}

fn taper(i: usize, len: usize, ramp: usize) -> f64 {
    if ramp == 0 {
        return 1.0;
    }
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

fn scale_to_power(buf: &mut [f64], target_power: f64) {
    let p = buf.iter().map(|v| v * v).sum::<f64>() / buf.len() as f64;
    if p > 0.0 {
        let g = (target_power / p).sqrt();
        buf.iter_mut().for_each(|v| *v *= g);
    }
}

fn render_tonal(e: &EventSpec, rate: f64, len: usize, phase0: f64) -> Vec<f64> {
    let ramp = ((TAPER_S * rate) as usize).min(len / 2);
    let (f0, f1) = match e.kind {
        EventKind::Tone => {
            let f = 0.5 * (e.band_hz[0] + e.band_hz[1]);
            (f, f)
        }
        _ => (e.band_hz[0], e.band_hz[1]),
    };
    let dur = len as f64 / rate;
    let k = (f1 - f0) / dur;
    (0..len)
        .map(|i| {
            let t = i as f64 / rate;
            let phase = phase0 + 2.0 * PI * (f0 * t + 0.5 * k * t * t);
            phase.sin() * taper(i, len, ramp)
        })
        .collect()
}

fn render_snap(len: usize, rng: &mut Pcg64) -> Vec<f64> {
    // Exponentially decaying noise burst.
    let tau = len as f64 / 4.0;
    (0..len)
        .map(|i| {
            let g: f64 = StandardNormal.sample(rng);
            g * (-(i as f64) / tau).exp()
        })
        .collect()
}

fn add_event(out: &mut [f64], start: usize, wave: &[f64]) {
    for (o, w) in out.iter_mut().skip(start).zip(wave) {
        *o += w;
    }
}

/// Synthesises the scenario. The annotation lists tone and chirp events
/// only; snaps are distractors.
pub fn generate(scenario: &Scenario, band: &BandpassSpec) -> Result<(AudioStream, Annotation)> {
    scenario.validate()?;
    let rate = scenario.sample_rate as f64;
    let len = (scenario.duration_s * rate).round() as usize;
    let noise_gain = band.noise_gain();

    let mut noise_rng = rng_stream(scenario.seed, RngStream::Noise);
    let mut samples: Vec<f64> = Vec::with_capacity(len);
    let mut step_iter = scenario.noise_steps.iter().peekable();
    let mut sigma = scenario.noise_sigma2.sqrt();
    for i in 0..len {
        let t = i as f64 / rate;
        while let Some(step) = step_iter.next_if(|s| s.time_s <= t) {
            sigma = step.sigma2.sqrt();
        }
        let g: f64 = StandardNormal.sample(&mut noise_rng);
        samples.push(sigma * g);
    }

    let mut event_rng = rng_stream(scenario.seed, RngStream::Events);
    let mut truth = Vec::new();
    let mut occupied: Vec<(f64, f64)> = Vec::new();
    for e in &scenario.events {
        let start = (e.start_s * rate).round() as usize;
        let n = ((e.duration_s * rate).round() as usize).min(len.saturating_sub(start));
        if n == 0 {
            continue;
        }
        let band_noise = scenario.sigma2_at(e.start_s) * noise_gain;
        let target = band_noise * 10f64.powf(e.snr_db / 10.0);
        let mut wave = match e.kind {
            EventKind::Snap => render_snap(n, &mut event_rng),
            _ => render_tonal(e, rate, n, event_rng.gen_range(0.0..2.0 * PI)),
        };
        // Snaps are white: only Σh² of their power reaches the band.
        let target = if e.kind == EventKind::Snap { target / noise_gain } else { target };
        scale_to_power(&mut wave, target);
        add_event(&mut samples, start, &wave);
        occupied.push((e.start_s, e.start_s + e.duration_s));
        if e.kind != EventKind::Snap {
            truth.push(Interval::new(start as f64 / rate, (start + n) as f64 / rate));
        }
    }

    if let Some(cfg) = &scenario.snaps {
        let mut rng = rng_stream(scenario.seed, RngStream::Snaps);
        if cfg.rate_hz > 0.0 {
            let gaps = Exp::new(cfg.rate_hz).map_err(|e| Error::config(format!("snap rate: {e}")))?;
            let mut t = gaps.sample(&mut rng);
            while t < scenario.duration_s {
                let dur_s = rng.gen_range(cfg.duration_ms[0]..=cfg.duration_ms[1]) / 1000.0;
                let snr = rng.gen_range(cfg.snr_db[0]..=cfg.snr_db[1]);
                let wave_seed: u64 = rng.gen();
                let end = t + dur_s;
                let clear = end <= scenario.duration_s
                    && occupied.iter().all(|&(a, b)| end + cfg.guard_s <= a || t >= b + cfg.guard_s);
                if clear {
                    let start = (t * rate).round() as usize;
                    let n = ((dur_s * rate).round() as usize).max(1).min(len.saturating_sub(start));
                    if n > 0 {
                        let mut wrng = rng_stream(wave_seed, RngStream::Snaps);
                        let mut wave = render_snap(n, &mut wrng);
                        scale_to_power(&mut wave, scenario.sigma2_at(t) * 10f64.powf(snr / 10.0));
                        add_event(&mut samples, start, &wave);
                        occupied.push((t, end));
                    }
                }
                t += dur_s + gaps.sample(&mut rng);
            }
        }
    }

    let stream = AudioStream { sample_rate: scenario.sample_rate, samples };
    let annotation = Annotation::new(truth, format!("synth:{}", scenario.seed))?;
    Ok((stream, annotation))
}

fn in_annotation(mask_segments: &[Interval], rate: f64, len: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for s in mask_segments {
        let a = ((s.start_s * rate).round() as usize).min(len);
        let b = ((s.end_s * rate).round() as usize).min(len);
        mask[a..b].iter_mut().for_each(|m| *m = true);
    }
    mask
}

/// Mean power inside the annotated intervals and outside them, after the
/// optional band-pass.
pub fn segment_powers(
    stream: &AudioStream,
    annotation: &Annotation,
    band: Option<&BandpassSpec>,
) -> Result<(f64, f64)> {
    let filtered;
    let xs = match band {
        Some(b) => {
            filtered = crate::audio::bandpass(stream, b)?;
            &filtered.samples
        }
        None => &stream.samples,
    };
    let mask = in_annotation(&annotation.segments, stream.sample_rate as f64, xs.len());
    let (mut s_sum, mut s_n, mut b_sum, mut b_n) = (0.0, 0usize, 0.0, 0usize);
    for (x, m) in xs.iter().zip(&mask) {
        if *m {
            s_sum += x * x;
            s_n += 1;
        } else {
            b_sum += x * x;
            b_n += 1;
        }
    }
    if s_n == 0 || b_n == 0 {
        return Err(Error::invalid("SNR needs both annotated and background samples"));
    }
    Ok((s_sum / s_n as f64, b_sum / b_n as f64))
}

/// `(P_segments - P_background) / P_background` in dB.
pub fn measure_snr_db(stream: &AudioStream, annotation: &Annotation, band: Option<&BandpassSpec>) -> Result<f64> {
    let (ps, pb) = segment_powers(stream, annotation, band)?;
    Ok(10.0 * ((ps - pb) / pb).log10())
}

/// Adds white Gaussian noise so that the measured SNR drops to
/// `target_snr_db`. With a band the SNR is measured after filtering and the
/// added noise is scaled by the filter's noise gain.
pub fn add_noise(
    stream: &AudioStream,
    target_snr_db: f64,
    signal_segments: &Annotation,
    band: Option<&BandpassSpec>,
    seed: u64,
) -> Result<AudioStream> {
    if signal_segments.segments.is_empty() {
        return Err(Error::invalid("add_noise needs annotated signal segments"));
    }
    if !target_snr_db.is_finite() {
        return Err(Error::invalid("target SNR must be finite"));
    }
    let (ps, pb) = segment_powers(stream, signal_segments, band)?;
    let signal = ps - pb;
    if !(signal > 0.0) {
        return Err(Error::invalid("annotated segments carry no excess power"));
    }
    let gain = band.map_or(1.0, BandpassSpec::noise_gain);
    let needed_band = signal / 10f64.powf(target_snr_db / 10.0) - pb;
    if needed_band < -1e-9 * pb {
        return Err(Error::invalid(format!(
            "target {target_snr_db} dB is above the current SNR {:.3} dB; noise can only lower it",
            10.0 * (signal / pb).log10()
        )));
    }
    let variance = needed_band.max(0.0) / gain;
    if variance == 0.0 {
        return Ok(stream.clone());
    }
    let sd = variance.sqrt();
    let mut rng = rng_stream(seed, RngStream::AddedNoise);
    let samples = stream
        .samples
        .iter()
        .map(|&x| {
            let g: f64 = StandardNormal.sample(&mut rng);
            x + sd * g
        })
        .collect();
    Ok(AudioStream { sample_rate: stream.sample_rate, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::bandpass;
    use crate::config::Config;

    fn band() -> BandpassSpec {
        BandpassSpec::from_config(&Config::default().audio.bandpass).unwrap()
    }

    fn quiet(duration_s: f64, seed: u64) -> Scenario {
        Scenario {
            duration_s,
            sample_rate: 8000,
            noise_sigma2: 1e-4,
            noise_steps: vec![],
            events: vec![],
            snaps: None,
            seed,
        }
    }

    #[test]
    fn pure_noise_is_gaussian() {
        let (s, ann) = generate(&quiet(125.0, 1), &band()).unwrap();
        assert!(ann.segments.is_empty());
        let n = s.len() as f64;
        assert_eq!(s.len(), 1_000_000);
        let m = s.samples.iter().sum::<f64>() / n;
        let m2 = s.samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let m4 = s.samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
        let excess = m4 / (m2 * m2) - 3.0;
        assert!(excess.abs() < 0.05, "excess kurtosis {excess}");
        assert!((m2 / 1e-4 - 1.0).abs() < 0.01);
    }

    #[test]
    fn frame_power_moments_follow_noise_model() {
        let (s, _) = generate(&quiet(200.0, 2), &band()).unwrap();
        let n = 64;
        let powers = crate::detector::frame_stream(&s, n).unwrap();
        let t = powers.len() as f64;
        let mean = powers.iter().sum::<f64>() / t;
        let var = powers.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (t - 1.0);
        let params = crate::noise_stats::NoiseParams::new(1e-4, n, 2).unwrap();
        let expect = crate::noise_stats::power_stats(&params);
        let m4 = powers.iter().map(|p| (p - mean).powi(4)).sum::<f64>() / t;
        assert!((mean - expect.p_mean).abs() < 4.0 * (var / t).sqrt());
        assert!((var - expect.p_var).abs() < 4.0 * ((m4 - var * var) / t).sqrt());
    }

    #[test]
    fn deterministic_per_seed() {
        let sc = Scenario::demo(42, 20.0);
        let a = generate(&sc, &band()).unwrap();
        let b = generate(&sc, &band()).unwrap();
        assert_eq!(a.0.samples, b.0.samples);
        assert_eq!(a.1, b.1);
        let c = generate(&Scenario::demo(43, 20.0), &band()).unwrap();
        assert_ne!(a.0.samples[..100], c.0.samples[..100]);
    }

    #[test]
    fn demo_layout() {
        let sc = Scenario::demo(7, 20.0);
        sc.validate().unwrap();
        assert_eq!(sc.events.len(), 12);
        let (_, ann) = generate(&sc, &band()).unwrap();
        assert_eq!(ann.segments.len(), 12);
        for w in ann.segments.windows(2) {
            assert!(w[1].start_s - w[0].end_s > 3.0);
        }
    }

    #[test]
    fn tone_snr_in_band() {
        let mut sc = quiet(20.0, 3);
        let silent = generate(&sc, &band()).unwrap().0;
        sc.events.push(EventSpec {
            start_s: 5.0,
            duration_s: 8.0,
            kind: EventKind::Tone,
            band_hz: [400.0, 400.0],
            snr_db: 0.0,
        });
        let (loud, ann) = generate(&sc, &band()).unwrap();
        let tone: Vec<f64> = loud.samples.iter().zip(&silent.samples).map(|(a, b)| a - b).collect();
        let tone = bandpass(&AudioStream::new(8000, tone).unwrap(), &band()).unwrap();
        let noise = bandpass(&silent, &band()).unwrap();
        let a = (ann.segments[0].start_s * 8000.0) as usize;
        let b = (ann.segments[0].end_s * 8000.0) as usize;
        let pt = tone.samples[a..b].iter().map(|v| v * v).sum::<f64>() / (b - a) as f64;
        let pn = noise.samples[8000..].iter().map(|v| v * v).sum::<f64>() / (noise.len() - 8000) as f64;
        let ratio_db = 10.0 * (pt / pn).log10();
        assert!(ratio_db.abs() < 0.5, "{ratio_db}");
    }

    #[test]
    fn events_never_overlap() {
        let mut sc = quiet(10.0, 4);
        let ev = |start_s| EventSpec {
            start_s,
            duration_s: 2.0,
            kind: EventKind::Chirp,
            band_hz: [200.0, 500.0],
            snr_db: 10.0,
        };
        sc.events = vec![ev(1.0), ev(2.5)];
        assert!(matches!(generate(&sc, &band()), Err(Error::Config(_))));
        sc.events = vec![ev(9.0)];
        assert!(generate(&sc, &band()).is_err());
        sc.events = vec![];
        sc.noise_steps = vec![NoiseStep { time_s: 5.0, sigma2: 1.0 }, NoiseStep { time_s: 4.0, sigma2: 1.0 }];
        assert!(generate(&sc, &band()).is_err());
    }

    #[test]
    fn noise_steps_change_level() {
        let mut sc = quiet(20.0, 5);
        sc.noise_steps = vec![NoiseStep { time_s: 10.0, sigma2: 4e-4 }];
        let (s, _) = generate(&sc, &band()).unwrap();
        let p = |a: usize, b: usize| s.samples[a..b].iter().map(|v| v * v).sum::<f64>() / (b - a) as f64;
        assert!((p(0, 80_000) / 1e-4 - 1.0).abs() < 0.03);
        assert!((p(80_000, 160_000) / 4e-4 - 1.0).abs() < 0.03);
    }

    #[test]
    fn snaps_stay_clear_of_calls() {
        let mut sc = Scenario::demo(11, 20.0);
        sc.snaps = Some(SnapConfig { rate_hz: 2.0, ..SnapConfig::default() });
        sc.noise_sigma2 = 1e-6;
        let (s, ann) = generate(&sc, &band()).unwrap();
        let mut without = sc.clone();
        without.snaps = None;
        let (base, _) = generate(&without, &band()).unwrap();
        let rate = 8000.0;
        let mut snap_samples = 0;
        for (i, (a, b)) in s.samples.iter().zip(&base.samples).enumerate() {
            if a != b {
                snap_samples += 1;
                let t = i as f64 / rate;
                assert!(ann.segments.iter().all(|g| t < g.start_s - 0.4 || t > g.end_s + 0.4));
            }
        }
        assert!(snap_samples > 0);
    }

    #[test]
    fn add_noise_behaviour() {
        // Snaps count as background and would bias the measured SNR.
        let mut sc = Scenario::demo(21, 20.0);
        sc.snaps = None;
        let b = band();
        let (s, ann) = generate(&sc, &b).unwrap();
        let current = measure_snr_db(&s, &ann, Some(&b)).unwrap();
        assert!((current - 20.0).abs() < 0.5, "{current}");

        let same = add_noise(&s, current, &ann, Some(&b), 1).unwrap();
        let added: f64 = same.samples.iter().zip(&s.samples).map(|(a, c)| (a - c).powi(2)).sum();
        assert!(added <= 1e-12);

        assert!(add_noise(&s, current + 10.0, &ann, Some(&b), 1).is_err());
        let empty = Annotation::new(vec![], "x").unwrap();
        assert!(add_noise(&s, 10.0, &empty, Some(&b), 1).is_err());

        // Closed-form variance, then re-measure.
        let (ps, pb) = segment_powers(&s, &ann, Some(&b)).unwrap();
        let expect_var = ((ps - pb) / 10.0 - pb) / b.noise_gain();
        let low = add_noise(&s, 10.0, &ann, Some(&b), 2).unwrap();
        let diff: Vec<f64> = low.samples.iter().zip(&s.samples).map(|(a, c)| a - c).collect();
        let var = diff.iter().map(|d| d * d).sum::<f64>() / diff.len() as f64;
        assert!((var / expect_var - 1.0).abs() < 0.01, "{var} vs {expect_var}");
        let remeasured = measure_snr_db(&low, &ann, Some(&b)).unwrap();
        assert!((remeasured - 10.0).abs() < 0.3, "{remeasured}");
    }

    #[test]
    fn scenario_toml() {
        let text = r#"
            duration_s = 30.0
            sample_rate = 8000
            noise_sigma2 = 1e-5
            seed = 9
            [[events]]
            start_s = 3.0
            duration_s = 1.5
            kind = "chirp"
            band_hz = [200.0, 450.0]
            snr_db = 15.0
            [snaps]
            rate_hz = 0.2
            snr_db = [25.0, 35.0]
            duration_ms = [2.0, 10.0]
        "#;
        let sc = Scenario::from_toml_str(text).unwrap();
        assert_eq!(sc.events[0].kind, EventKind::Chirp);
        assert!(Scenario::from_toml_str("duration_s = 1.0").is_err());
    }
}

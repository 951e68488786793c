//! Audio ingest: WAV decoding, integer-ratio decimation and the analysis
//! band-pass filter.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::config::{AudioConfig, BandpassConfig, DecimationConfig};
use crate::error::{Error, Result};

/// Mono stream of samples normalised to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioStream {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioStream {
    pub fn new(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample {bad}")));
        }
        Ok(Self { sample_rate, samples })
    }

    pub fn channel_count(&self) -> u16 {
        1
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

const FORMAT_PCM: u16 = 1;
const FORMAT_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

pub fn read_wav(path: &Path) -> Result<AudioStream> {
    let bytes = fs::read(path)?;
    decode_wav(&bytes)
}

/// Decodes a RIFF/WAVE image. Accepts PCM16 and float32 with one or two
/// channels; stereo is averaged to mono.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioStream> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format("not a RIFF/WAVE file".into()));
    }
    let mut pos = 12;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start.checked_add(size).filter(|&end| end <= bytes.len()).ok_or_else(|| {
            Error::Corrupt(format!(
                "chunk '{}' declares {size} bytes but only {} remain",
                String::from_utf8_lossy(id),
                bytes.len() - body_start
            ))
        })?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if body.len() < 16 {
                    return Err(Error::Corrupt("fmt chunk too short".into()));
                }
                let mut tag = u16::from_le_bytes([body[0], body[1]]);
                let channels = u16::from_le_bytes([body[2], body[3]]);
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes([body[14], body[15]]);
                if tag == FORMAT_EXTENSIBLE {
                    if body.len() < 26 {
                        return Err(Error::Corrupt("extensible fmt chunk too short".into()));
                    }
                    tag = u16::from_le_bytes([body[24], body[25]]);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (size & 1);
    }
    let (tag, channels, rate, bits) = fmt.ok_or_else(|| Error::Corrupt("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::Corrupt("missing data chunk".into()))?;
    if !(1..=2).contains(&channels) {
        return Err(Error::Format(format!("{channels} channels (1 or 2 supported)")));
    }
    if rate == 0 {
        return Err(Error::Corrupt("sample rate of 0".into()));
    }
    let interleaved: Vec<f64> = match (tag, bits) {
        (FORMAT_PCM, 16) => data.chunks_exact(2).map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0).collect(),
        (FORMAT_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|b| {
                let v = f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
                if v.is_finite() {
                    Ok(v.clamp(-1.0, 1.0))
                } else {
                    Err(Error::Corrupt("non-finite float sample".into()))
                }
            })
            .collect::<Result<_>>()?,
        _ => return Err(Error::Format(format!("format tag {tag} with {bits} bits (PCM16 or float32 supported)"))),
    };
    let samples =
        if channels == 2 { interleaved.chunks_exact(2).map(|f| 0.5 * (f[0] + f[1])).collect() } else { interleaved };
    Ok(AudioStream { sample_rate: rate, samples })
}

/// PCM16 mono encoding. Samples are clipped to [-1, 1) and rounded.
pub fn encode_wav_pcm16(stream: &AudioStream) -> Vec<u8> {
    let data_len = stream.samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&stream.sample_rate.to_le_bytes());
    out.extend_from_slice(&(stream.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &s in &stream.samples {
        let q = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    out
}

pub fn write_wav_pcm16(path: &Path, stream: &AudioStream) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_wav_pcm16(stream))?;
    Ok(())
}

/// Hamming-windowed sinc low-pass, unit DC gain. `cutoff` is a fraction of
/// the sampling rate.
pub fn windowed_sinc_lowpass(num_taps: usize, cutoff: f64) -> Vec<f64> {
    let mid = (num_taps as f64 - 1.0) / 2.0;
    let mut taps: Vec<f64> = (0..num_taps)
        .map(|i| {
            let t = i as f64 - mid;
            let sinc = if t == 0.0 { 2.0 * cutoff } else { (2.0 * PI * cutoff * t).sin() / (PI * t) };
            let window =
                if num_taps > 1 { 0.54 - 0.46 * (2.0 * PI * i as f64 / (num_taps as f64 - 1.0)).cos() } else { 1.0 };
            sinc * window
        })
        .collect();
    let dc: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= dc);
    taps
}

/// Anti-alias taps for decimation by `ratio`.
pub fn decimation_taps(cfg: &DecimationConfig, ratio: u32) -> Vec<f64> {
    if !cfg.taps.is_empty() {
        return cfg.taps.clone();
    }
    windowed_sinc_lowpass(cfg.num_taps, cfg.cutoff_fraction / ratio as f64)
}

/// Low-pass filter and keep every M-th sample (M = source / target rate).
pub fn decimate(stream: &AudioStream, target_rate: u32, cfg: &DecimationConfig) -> Result<AudioStream> {
    if target_rate == 0 || !stream.sample_rate.is_multiple_of(target_rate) {
        return Err(Error::UnsupportedRate { from: stream.sample_rate, to: target_rate });
    }
    let ratio = stream.sample_rate / target_rate;
    if ratio == 1 {
        return Ok(stream.clone());
    }
    let taps = decimation_taps(cfg, ratio);
    let m = ratio as usize;
    let x = &stream.samples;
    let out_len = x.len() / m;
    // Causal FIR with zero initial state, evaluated only at kept indices.
    let samples = (0..out_len)
        .map(|k| {
            let n = k * m;
            let reach = taps.len().min(n + 1);
            (0..reach).map(|j| taps[j] * x[n - j]).sum()
        })
        .collect();
    Ok(AudioStream { sample_rate: target_rate, samples })
}

/// One normalised biquad section, `a0 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn from_row(row: &[f64; 6]) -> Result<Self> {
        let a0 = row[3];
        if a0 == 0.0 || !row.iter().all(|c| c.is_finite()) {
            return Err(Error::config("biquad row must be finite with a0 != 0"));
        }
        let s = Biquad { b: [row[0] / a0, row[1] / a0, row[2] / a0], a: [row[4] / a0, row[5] / a0] };
        if !s.is_stable() {
            return Err(Error::config(format!("unstable biquad section {row:?}")));
        }
        Ok(s)
    }

    /// Both roots of `z² + a1 z + a2` strictly inside the unit circle.
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }
}

/// Validated band-pass cascade bound to its design rate.
#[derive(Debug, Clone, PartialEq)]
pub struct BandpassSpec {
    pub design_rate: u32,
    pub low_cut_hz: f64,
    pub high_cut_hz: f64,
    pub sections: Vec<Biquad>,
}

impl BandpassSpec {
    pub fn from_config(cfg: &BandpassConfig) -> Result<Self> {
        let nyq = cfg.design_rate as f64 / 2.0;
        if !(0.0 < cfg.low_cut_hz && cfg.low_cut_hz < cfg.high_cut_hz && cfg.high_cut_hz < nyq) {
            return Err(Error::config(format!(
                "band edges must satisfy 0 < {} < {} < {nyq}",
                cfg.low_cut_hz, cfg.high_cut_hz
            )));
        }
        if cfg.sos.is_empty() {
            return Err(Error::config("band-pass needs at least one section"));
        }
        let sections = cfg.sos.iter().map(Biquad::from_row).collect::<Result<_>>()?;
        Ok(Self { design_rate: cfg.design_rate, low_cut_hz: cfg.low_cut_hz, high_cut_hz: cfg.high_cut_hz, sections })
    }

    pub fn filter(&self) -> SosFilter {
        SosFilter { sections: self.sections.clone(), state: vec![[0.0; 2]; self.sections.len()] }
    }

    /// Σ h[n]² of the impulse response: the fraction of white-noise power
    /// passed by the cascade.
    pub fn noise_gain(&self) -> f64 {
        let mut f = self.filter();
        let mut total = 0.0;
        let mut quiet = 0;
        let mut n = 0usize;
        while quiet < 4096 && n < 10_000_000 {
            let y = f.process(if n == 0 { 1.0 } else { 0.0 });
            let e = y * y;
            total += e;
            quiet = if e < 1e-30 * total.max(1e-300) { quiet + 1 } else { 0 };
            n += 1;
        }
        total
    }
}

/// Direct-form-II-transposed cascade with zero initial state.
#[derive(Debug, Clone)]
pub struct SosFilter {
    sections: Vec<Biquad>,
    state: Vec<[f64; 2]>,
}

impl SosFilter {
    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        let mut v = x;
        for (s, z) in self.sections.iter().zip(self.state.iter_mut()) {
            let y = s.b[0] * v + z[0];
            z[0] = s.b[1] * v - s.a[0] * y + z[1];
            z[1] = s.b[2] * v - s.a[1] * y;
            v = y;
        }
        v
    }

    pub fn process_in_place(&mut self, xs: &mut [f64]) {
        for x in xs {
            *x = self.process(*x);
        }
    }
}

pub fn bandpass(stream: &AudioStream, spec: &BandpassSpec) -> Result<AudioStream> {
    if stream.sample_rate != spec.design_rate {
        return Err(Error::config(format!(
            "stream rate {} Hz does not match band-pass design rate {} Hz",
            stream.sample_rate, spec.design_rate
        )));
    }
    let mut samples = stream.samples.clone();
    spec.filter().process_in_place(&mut samples);
    Ok(AudioStream { sample_rate: stream.sample_rate, samples })
}

/// Decimate to the working rate and, when enabled, band-limit.
pub fn preprocess(stream: &AudioStream, cfg: &AudioConfig) -> Result<AudioStream> {
    let s = if stream.sample_rate == cfg.target_rate {
        stream.clone()
    } else {
        decimate(stream, cfg.target_rate, &cfg.decimation)?
    };
    if cfg.bandpass_enabled {
        bandpass(&s, &BandpassSpec::from_config(&cfg.bandpass)?)
    } else {
        Ok(s)
    }
}

//! Segmentation scoring.
//!
//! Each segment is lifted to a trapezoidal membership function in time:
//! full membership inside, linear ramps of width `ramp_s` centred on both
//! boundaries. A segmentation's membership is the pointwise maximum over
//! its segments, and the fuzzy intersection of two segmentations is the
//! integral of the pointwise minimum of their memberships. With
//! `ramp_s = 0` everything reduces to plain interval arithmetic.
//!
//! Precision is `|S ∩ C| / |S|` and recall `|S ∩ C| / |C|`, where `S` is
//! the detected segmentation and `C` the reference.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio::AudioStream;
use crate::config::DetectorConfig;
use crate::detector::analyze;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start_s: f64,
    pub end_s: f64,
}

impl Interval {
    pub fn new(start_s: f64, end_s: f64) -> Self {
        Self { start_s, end_s }
    }

    pub fn duration(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Reference segmentation, sorted and with overlaps merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub segments: Vec<Interval>,
    pub source: String,
}

impl Annotation {
    pub fn new(segments: Vec<Interval>, source: impl Into<String>) -> Result<Self> {
        Ok(Self { segments: normalize(segments)?, source: source.into() })
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Interval::duration).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub n_std: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FuzzyConfig {
    pub ramp_s: f64,
}

/// Sorts, drops empty intervals and merges overlapping or touching ones.
pub fn normalize(mut segs: Vec<Interval>) -> Result<Vec<Interval>> {
    for s in &segs {
        if !s.start_s.is_finite() || !s.end_s.is_finite() || s.end_s < s.start_s {
            return Err(Error::invalid(format!("bad interval [{}, {}]", s.start_s, s.end_s)));
        }
    }
    segs.retain(|s| s.end_s > s.start_s);
    segs.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    let mut out: Vec<Interval> = Vec::with_capacity(segs.len());
    for s in segs {
        match out.last_mut() {
            Some(last) if s.start_s <= last.end_s => last.end_s = last.end_s.max(s.end_s),
            _ => out.push(s),
        }
    }
    Ok(out)
}

/// Piecewise-linear function, zero outside its first and last knot.
type Pl = Vec<(f64, f64)>;

fn trapezoid(seg: &Interval, ramp: f64) -> Pl {
    let h = ramp / 2.0;
    let (a, b, c, d) = (seg.start_s - h, seg.start_s + h, seg.end_s - h, seg.end_s + h);
    if b <= c {
        vec![(a, 0.0), (b, 1.0), (c, 1.0), (d, 0.0)]
    } else {
        let m = 0.5 * (seg.start_s + seg.end_s);
        vec![(a, 0.0), (m, (m - a) / ramp), (d, 0.0)]
    }
}

fn pl_eval(f: &Pl, t: f64) -> f64 {
    let (Some(first), Some(last)) = (f.first(), f.last()) else {
        return 0.0;
    };
    if t <= first.0 || t >= last.0 {
        return if t == first.0 {
            first.1
        } else if t == last.0 {
            last.1
        } else {
            0.0
        };
    }
    let i = f.partition_point(|k| k.0 <= t);
    let (t0, v0) = f[i - 1];
    let (t1, v1) = f[i];
    if t1 == t0 {
        return v1;
    }
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

fn pl_combine(f: &Pl, g: &Pl, op: fn(f64, f64) -> f64) -> Pl {
    let mut ts: Vec<f64> = f.iter().chain(g.iter()).map(|k| k.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut out = Vec::with_capacity(ts.len() * 2);
    for (i, &t0) in ts.iter().enumerate() {
        let (f0, g0) = (pl_eval(f, t0), pl_eval(g, t0));
        out.push((t0, op(f0, g0)));
        if let Some(&t1) = ts.get(i + 1) {
            let (f1, g1) = (pl_eval(f, t1), pl_eval(g, t1));
            let (d0, d1) = (f0 - g0, f1 - g1);
            if d0 * d1 < 0.0 {
                let frac = d0 / (d0 - d1);
                let tc = t0 + (t1 - t0) * frac;
                let vf = f0 + (f1 - f0) * frac;
                let vg = g0 + (g1 - g0) * frac;
                out.push((tc, 0.5 * (vf + vg)));
            }
        }
    }
    out
}

fn pl_integral(f: &Pl) -> f64 {
    f.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum()
}

fn membership(segs: &[Interval], ramp: f64) -> Pl {
    match segs.len() {
        0 => Vec::new(),
        1 => trapezoid(&segs[0], ramp),
        n => {
            let (l, r) = segs.split_at(n / 2);
            pl_combine(&membership(l, ramp), &membership(r, ramp), f64::max)
        }
    }
}

fn crisp_overlap(a: &[Interval], b: &[Interval]) -> f64 {
    let (mut i, mut j, mut total) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let lo = a[i].start_s.max(b[j].start_s);
        let hi = a[i].end_s.min(b[j].end_s);
        if hi > lo {
            total += hi - lo;
        }
        if a[i].end_s < b[j].end_s {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

/// Membership integral of one segmentation.
pub fn fuzzy_measure(segs: &[Interval], config: &FuzzyConfig) -> Result<f64> {
    let segs = normalize(segs.to_vec())?;
    if config.ramp_s == 0.0 {
        return Ok(segs.iter().map(Interval::duration).sum());
    }
    check_ramp(config)?;
    Ok(pl_integral(&membership(&segs, config.ramp_s)))
}

/// `|S ∩_μ C|` in seconds.
pub fn fuzzy_intersection(detected: &[Interval], truth: &[Interval], config: &FuzzyConfig) -> Result<f64> {
    let s = normalize(detected.to_vec())?;
    let c = normalize(truth.to_vec())?;
    if config.ramp_s == 0.0 {
        return Ok(crisp_overlap(&s, &c));
    }
    check_ramp(config)?;
    let both = pl_combine(&membership(&s, config.ramp_s), &membership(&c, config.ramp_s), f64::min);
    Ok(pl_integral(&both))
}

fn check_ramp(config: &FuzzyConfig) -> Result<()> {
    if config.ramp_s.is_finite() && config.ramp_s >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("ramp must be >= 0, got {}", config.ramp_s)))
    }
}

/// Fuzzy precision and recall. An empty detection list has precision 1
/// when the reference is also empty and 0 otherwise; recall of an empty
/// reference follows the same rule.
pub fn precision_recall(detected: &[Interval], truth: &[Interval], config: &FuzzyConfig) -> Result<(f64, f64)> {
    let s_len = fuzzy_measure(detected, config)?;
    let c_len = fuzzy_measure(truth, config)?;
    let both = fuzzy_intersection(detected, truth, config)?;
    let precision = if s_len > 0.0 {
        (both / s_len).clamp(0.0, 1.0)
    } else if c_len > 0.0 {
        0.0
    } else {
        1.0
    };
    let recall = if c_len > 0.0 {
        (both / c_len).clamp(0.0, 1.0)
    } else if s_len > 0.0 {
        0.0
    } else {
        1.0
    };
    Ok((precision, recall))
}

/// `points` values evenly spaced over `[start, stop]`.
pub fn uniform_grid(start: f64, stop: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points).map(|i| start + (stop - start) * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Precision/recall at each `n_std` in `grid`. Frame analysis runs once and
/// only the threshold test is repeated per grid point.
pub fn sweep(
    stream: &AudioStream,
    truth: &Annotation,
    config: &DetectorConfig,
    n_std_grid: &[f64],
    fuzzy: &FuzzyConfig,
) -> Result<Vec<EvalPoint>> {
    if n_std_grid.is_empty() {
        return Err(Error::invalid("empty n_std grid"));
    }
    if n_std_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("n_std grid must be ascending"));
    }
    let analysis = analyze(stream, config)?;
    n_std_grid
        .par_iter()
        .map(|&n_std| {
            let detected: Vec<Interval> =
                analysis.segments(n_std)?.iter().map(|s| Interval::new(s.start_s, s.end_s)).collect();
            let (precision, recall) = precision_recall(&detected, &truth.segments, fuzzy)?;
            Ok(EvalPoint { n_std, precision, recall })
        })
        .collect()
}

const RAVEN_BEGIN: &str = "Begin Time (s)";
const RAVEN_END: &str = "End Time (s)";

/// Reads either a CSV with `start_s,end_s` header columns or a
/// tab-separated selection table with `Begin Time (s)` / `End Time (s)`.
/// When a `label` column is present only `detection` rows are kept.
pub fn read_annotation(path: &Path) -> Result<Annotation> {
    let text = fs::read_to_string(path)?;
    parse_annotation(&text, &path.display().to_string())
}

pub fn parse_annotation(text: &str, source: &str) -> Result<Annotation> {
    let first = text.lines().next().unwrap_or("");
    let raven = first.contains('\t') && first.contains(RAVEN_BEGIN);
    let (delim, begin, end) = if raven { (b'\t', RAVEN_BEGIN, RAVEN_END) } else { (b',', "start_s", "end_s") };
    let mut rdr =
        csv::ReaderBuilder::new().delimiter(delim).trim(csv::Trim::All).flexible(raven).from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Table(format!("{source}: missing column '{name}'")))
    };
    let (bi, ei) = (col(begin)?, col(end)?);
    let label = headers.iter().position(|h| h == "label");
    let mut segs = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if let Some(li) = label {
            if rec.get(li).is_some_and(|l| l != "detection") {
                continue;
            }
        }
        let num = |i: usize| -> Result<f64> {
            let field = rec.get(i).unwrap_or("");
            field.parse::<f64>().map_err(|_| Error::Table(format!("{source}: row {}: bad number '{field}'", row + 2)))
        };
        segs.push(Interval::new(num(bi)?, num(ei)?));
    }
    Annotation::new(segs, source)
}

pub fn annotation_csv(ann: &Annotation) -> String {
    let mut s = String::from("start_s,end_s\n");
    for seg in &ann.segments {
        // `{}` prints the shortest round-tripping representation.
        s.push_str(&format!("{},{}\n", seg.start_s, seg.end_s));
    }
    s
}

pub fn write_annotation_csv(path: &Path, ann: &Annotation) -> Result<()> {
    fs::File::create(path)?.write_all(annotation_csv(ann).as_bytes())?;
    Ok(())
}

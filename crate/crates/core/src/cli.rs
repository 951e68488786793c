//! Command-line front end: argument model, config precedence, report
//! writers and the subcommand drivers behind the `sno` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::audio::{preprocess, read_wav, write_wav_pcm16, AudioStream, BandpassSpec};
use crate::calibration::{recalibrate, recalibrate_clamped, OddsSpec, DEFAULT_CLAMP_EPS};
use crate::config::Config;
use crate::detector::{Detector, Segment};
use crate::error::{Error, Result};
use crate::eval::{
    precision_recall, read_annotation, sweep, uniform_grid, write_annotation_csv, Annotation, EvalPoint, FuzzyConfig,
};
use crate::synth::{add_noise, generate, rng_stream, RngStream, Scenario};

#[derive(Debug, Parser)]
#[command(name = "sno", version, about = "Stationary-noise on-line acoustic event detector")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML file merged over the built-in defaults.
    #[arg(long, global = true, env = "SNO_CONFIG")]
    pub config: Option<PathBuf>,
    /// Seed for every random draw (default 1).
    #[arg(long, global = true, env = "SNO_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for file-level parallelism (default: all cores).
    #[arg(long, global = true, env = "SNO_JOBS")]
    pub jobs: Option<usize>,
    #[arg(long, global = true, env = "SNO_OUTPUT_FORMAT", value_enum, default_value_t = OutputFormat::Csv)]
    pub output_format: OutputFormat,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
    Raven,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect events in WAV files and write segment tables.
    Detect(DetectArgs),
    /// Precision and recall of a segment table against ground truth.
    Evaluate(EvaluateArgs),
    /// Precision/recall curve over a grid of n_std values.
    Sweep(SweepArgs),
    /// Write a synthetic soundscape and its annotation.
    Synth(SynthArgs),
    /// Recalibrate posteriors to new prior odds.
    Calibrate(CalibrateArgs),
    /// Time detection on in-memory noise.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct DetectorOverrides {
    #[arg(long, env = "SNO_N_STD")]
    pub n_std: Option<f64>,
    #[arg(long, env = "SNO_FRAME_SAMPLES")]
    pub frame_samples: Option<usize>,
    #[arg(long, env = "SNO_SUPERBLOCK_FRAMES")]
    pub superblock_frames: Option<usize>,
    #[arg(long, env = "SNO_TIMEFRAME_S")]
    pub timeframe_s: Option<f64>,
    #[arg(long, env = "SNO_ALPHA_DB")]
    pub alpha_db: Option<f64>,
    #[arg(long, env = "SNO_MIN_EVENT_S")]
    pub min_event_s: Option<f64>,
    #[arg(long, env = "SNO_MERGE_GAP_S")]
    pub merge_gap_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output file (one input) or directory (several inputs); stdout if absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: DetectorOverrides,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub detected: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, env = "SNO_RAMP_S")]
    pub ramp_s: Option<f64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Scenario TOML; the built-in demo scenario when absent.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Event SNR of the demo scenario.
    #[arg(long, default_value_t = 20.0)]
    pub snr_db: f64,
    /// Lower the generated stream to this SNR with added white noise.
    #[arg(long)]
    pub add_noise_snr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// WAV input; requires --truth. Without it a scenario is synthesised.
    #[arg(long, requires = "truth")]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub source: SourceArgs,
    #[command(flatten)]
    pub overrides: DetectorOverrides,
    #[arg(long, env = "SNO_RAMP_S")]
    pub ramp_s: Option<f64>,
    #[arg(long)]
    pub grid_start: Option<f64>,
    #[arg(long)]
    pub grid_stop: Option<f64>,
    #[arg(long)]
    pub grid_points: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long)]
    pub wav: PathBuf,
    #[arg(long)]
    pub annotation: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with a `posterior` column and optional `id` column.
    pub input: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub train_odds: f64,
    #[arg(long)]
    pub deploy_odds: f64,
    /// Pull posteriors of exactly 0 or 1 inside the open interval.
    #[arg(long)]
    pub clamp: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub duration_s: f64,
    #[command(flatten)]
    pub overrides: DetectorOverrides,
}

/// 0 success, 1 runtime failure, 2 usage or configuration problem.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => 2,
        Error::Io(e) if e.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let level = match cli.global.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).parse_env("SNO_LOG").try_init();
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("sno: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Detect(a) => cmd_detect(g, a),
        Command::Evaluate(a) => cmd_evaluate(g, a),
        Command::Sweep(a) => cmd_sweep(g, a),
        Command::Synth(a) => cmd_synth(g, a),
        Command::Calibrate(a) => cmd_calibrate(g, a),
        Command::Bench(a) => cmd_bench(g, a),
    }
}

/// Built-in defaults, then the config file, then flags.
pub fn load_config(path: Option<&Path>, overrides: &DetectorOverrides) -> Result<Config> {
    let mut cfg = match path {
        Some(p) => {
            info!("config: {} merged over built-in defaults", p.display());
            Config::load(p)?
        }
        None => {
            info!("config: built-in defaults");
            Config::default()
        }
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

impl DetectorOverrides {
    pub fn apply(&self, cfg: &mut Config) {
        let d = &mut cfg.detector;
        set(&mut d.floor.n_std, self.n_std, "detector.floor.n_std");
        set(&mut d.frame_samples, self.frame_samples, "detector.frame_samples");
        set(&mut d.superblock_frames, self.superblock_frames, "detector.superblock_frames");
        set(&mut d.floor.timeframe_s, self.timeframe_s, "detector.floor.timeframe_s");
        set(&mut d.floor.alpha_f_db, self.alpha_db, "detector.floor.alpha_f_db");
        set(&mut d.min_event_s, self.min_event_s, "detector.min_event_s");
        set(&mut d.merge_gap_s, self.merge_gap_s, "detector.merge_gap_s");
    }
}

fn set<T: Copy + std::fmt::Display>(slot: &mut T, value: Option<T>, key: &str) {
    if let Some(v) = value {
        info!("config: {key} = {v} (flag)");
        *slot = v;
    }
}

fn seed(g: &GlobalArgs) -> u64 {
    g.seed.unwrap_or(1)
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn segments_csv(segments: &[Segment]) -> String {
    let mut s = String::from("start_s,end_s,label,peak_power,mean_power\n");
    for seg in segments {
        let _ = writeln!(
            s,
            "{:.6},{:.6},{},{:.6},{:.6}",
            seg.start_s,
            seg.end_s,
            seg.label.as_str(),
            seg.peak_power,
            seg.mean_power
        );
    }
    s
}

pub fn segments_raven(segments: &[Segment]) -> String {
    let mut s = String::from("Selection\tBegin Time (s)\tEnd Time (s)\n");
    for (i, seg) in segments.iter().enumerate() {
        let _ = writeln!(s, "{}\t{:.6}\t{:.6}", i + 1, seg.start_s, seg.end_s);
    }
    s
}

pub fn segments_json(segments: &[Segment]) -> String {
    serde_json::to_string_pretty(segments).expect("segments serialise") + "\n"
}

pub fn format_segments(segments: &[Segment], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => segments_csv(segments),
        OutputFormat::Json => segments_json(segments),
        OutputFormat::Raven => segments_raven(segments),
    }
}

pub fn pr_csv(points: &[EvalPoint]) -> String {
    let mut s = String::from("n_std,precision,recall\n");
    for p in points {
        let _ = writeln!(s, "{:.6},{:.6},{:.6}", p.n_std, p.precision, p.recall);
    }
    s
}

fn report<T: Serialize>(value: &T, csv: impl FnOnce() -> String, format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => serde_json::to_string_pretty(value).expect("report serialises") + "\n",
        OutputFormat::Csv => csv(),
        OutputFormat::Raven => {
            warn!("raven format applies to segment tables only; writing csv");
            csv()
        }
    }
}

fn thread_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    if jobs == Some(0) {
        return Err(Error::config("--jobs must be >= 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

struct FileResult {
    segments: Vec<Segment>,
    audio_s: f64,
    wall_s: f64,
}

fn detect_file(path: &Path, cfg: &Config) -> Result<FileResult> {
    let raw = read_wav(path)?;
    let t0 = Instant::now();
    let stream = preprocess(&raw, &cfg.audio)?;
    let segments = crate::detector::detect(&stream, &cfg.detector)?;
    Ok(FileResult { segments, audio_s: raw.duration_s(), wall_s: t0.elapsed().as_secs_f64() })
}

fn extension(format: OutputFormat) -> &'static str {
    match format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
        OutputFormat::Raven => "selections.txt",
    }
}

fn cmd_detect(g: &GlobalArgs, a: &DetectArgs) -> Result<()> {
    let cfg = load_config(g.config.as_deref(), &a.overrides)?;
    for p in &a.inputs {
        if !p.is_file() {
            return Err(Error::config(format!("input not found: {}", p.display())));
        }
    }
    if a.inputs.len() > 1 && a.output.is_none() {
        return Err(Error::config("several inputs need --output DIR"));
    }
    let pool = thread_pool(g.jobs)?;
    let results: Vec<Result<FileResult>> = pool.install(|| a.inputs.par_iter().map(|p| detect_file(p, &cfg)).collect());
    if a.inputs.len() > 1 {
        std::fs::create_dir_all(a.output.as_deref().expect("checked above"))?;
    }
    for (path, res) in a.inputs.iter().zip(results) {
        let r = res?;
        let text = format_segments(&r.segments, g.output_format);
        let target = match (&a.output, a.inputs.len()) {
            (None, _) => None,
            (Some(o), 1) => Some(o.clone()),
            (Some(dir), _) => {
                let stem = path.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
                Some(dir.join(format!("{stem}.{}", extension(g.output_format))))
            }
        };
        emit(target.as_deref(), &text)?;
        let speed = if r.wall_s > 0.0 { r.audio_s / r.wall_s } else { f64::INFINITY };
        eprintln!(
            "{}: {} segments, {:.1} s audio in {:.3} s ({:.0} audio-s/s)",
            path.display(),
            r.segments.len(),
            r.audio_s,
            r.wall_s,
            speed
        );
    }
    Ok(())
}

fn required_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::config(format!("input not found: {}", p.display())))
    }
}

#[derive(Serialize)]
struct PrReport {
    precision: f64,
    recall: f64,
}

fn cmd_evaluate(g: &GlobalArgs, a: &EvaluateArgs) -> Result<()> {
    let cfg = load_config(g.config.as_deref(), &DetectorOverrides::default())?;
    required_file(&a.detected)?;
    required_file(&a.truth)?;
    let detected = read_annotation(&a.detected)?;
    let truth = read_annotation(&a.truth)?;
    let fuzzy = FuzzyConfig { ramp_s: a.ramp_s.unwrap_or(cfg.eval.ramp_s) };
    let (precision, recall) = precision_recall(&detected.segments, &truth.segments, &fuzzy)?;
    let r = PrReport { precision, recall };
    let text = report(&r, || format!("precision,recall\n{precision:.6},{recall:.6}\n"), g.output_format);
    emit(a.output.as_deref(), &text)
}

/// Generates the requested scenario (the demo one by default), optionally
/// lowered to a target SNR with added noise.
pub fn synth_source(src: &SourceArgs, cfg: &Config, seed: Option<u64>) -> Result<(AudioStream, Annotation)> {
    let scenario = match &src.scenario {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::config(format!("cannot read scenario {}: {e}", p.display())))?;
            let mut sc = Scenario::from_toml_str(&text)?;
            if let Some(s) = seed {
                sc.seed = s;
            }
            sc
        }
        None => Scenario::demo(seed.unwrap_or(1), src.snr_db),
    };
    let band = BandpassSpec::from_config(&cfg.audio.bandpass)?;
    let (stream, truth) = generate(&scenario, &band)?;
    let stream = match src.add_noise_snr {
        Some(snr) => add_noise(&stream, snr, &truth, Some(&band), scenario.seed)?,
        None => stream,
    };
    Ok((stream, truth))
}

fn cmd_sweep(g: &GlobalArgs, a: &SweepArgs) -> Result<()> {
    let mut cfg = load_config(g.config.as_deref(), &a.overrides)?;
    set(&mut cfg.eval.ramp_s, a.ramp_s, "eval.ramp_s");
    set(&mut cfg.eval.grid_start, a.grid_start, "eval.grid_start");
    set(&mut cfg.eval.grid_stop, a.grid_stop, "eval.grid_stop");
    set(&mut cfg.eval.grid_points, a.grid_points, "eval.grid_points");
    cfg.validate()?;
    let (raw, truth) = match (&a.input, &a.truth) {
        (Some(wav), Some(t)) => {
            required_file(wav)?;
            required_file(t)?;
            (read_wav(wav)?, read_annotation(t)?)
        }
        _ => synth_source(&a.source, &cfg, g.seed)?,
    };
    let stream = preprocess(&raw, &cfg.audio)?;
    let grid = uniform_grid(cfg.eval.grid_start, cfg.eval.grid_stop, cfg.eval.grid_points);
    let pool = thread_pool(g.jobs)?;
    let points =
        pool.install(|| sweep(&stream, &truth, &cfg.detector, &grid, &FuzzyConfig { ramp_s: cfg.eval.ramp_s }))?;
    let text = report(&points, || pr_csv(&points), g.output_format);
    emit(a.output.as_deref(), &text)
}

fn cmd_synth(g: &GlobalArgs, a: &SynthArgs) -> Result<()> {
    let cfg = load_config(g.config.as_deref(), &DetectorOverrides::default())?;
    let (stream, truth) = synth_source(&a.source, &cfg, g.seed)?;
    let duration_s = stream.duration_s();
    write_wav_pcm16(&a.wav, &normalise_for_pcm(stream))?;
    write_annotation_csv(&a.annotation, &truth)?;
    eprintln!("{}: {duration_s:.1} s, {} events", a.wav.display(), truth.segments.len());
    Ok(())
}

/// Scales to a 0.9 peak so 16-bit quantisation keeps the noise floor.
/// The detector is scale invariant, so nothing downstream changes.
fn normalise_for_pcm(mut stream: AudioStream) -> AudioStream {
    let peak = stream.samples.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if peak > 0.0 {
        let g = 0.9 / peak;
        stream.samples.iter_mut().for_each(|x| *x *= g);
    }
    stream
}

fn cmd_calibrate(g: &GlobalArgs, a: &CalibrateArgs) -> Result<()> {
    required_file(&a.input)?;
    let odds = OddsSpec::new(a.train_odds, a.deploy_odds)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&a.input)?;
    let headers = rdr.headers()?.clone();
    let pi = headers
        .iter()
        .position(|h| h == "posterior")
        .ok_or_else(|| Error::Table(format!("{}: missing column 'posterior'", a.input.display())))?;
    let ii = headers.iter().position(|h| h == "id");
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = rec.get(pi).unwrap_or("");
        let p: f64 = field.parse().map_err(|_| Error::Table(format!("row {}: bad posterior '{field}'", row + 2)))?;
        let q = if a.clamp { recalibrate_clamped(p, &odds, DEFAULT_CLAMP_EPS)? } else { recalibrate(p, &odds)? };
        let id = ii.and_then(|i| rec.get(i)).map_or_else(|| row.to_string(), str::to_owned);
        rows.push(Calibrated { id, posterior: q });
    }
    let text = report(
        &rows,
        || {
            let mut s = String::from("id,posterior\n");
            for r in &rows {
                let _ = writeln!(s, "{},{}", r.id, r.posterior);
            }
            s
        },
        g.output_format,
    );
    emit(a.output.as_deref(), &text)
}

#[derive(Serialize)]
struct Calibrated {
    id: String,
    posterior: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchReport {
    pub duration_s: f64,
    pub wall_s: f64,
    /// Audio seconds per wall-clock second; `None` for an empty run.
    pub realtime_factor: Option<f64>,
    pub segments: usize,
}

/// Detects on `duration_s` of white noise synthesised chunk by chunk.
/// Only filtering and detection are timed.
pub fn bench(cfg: &Config, duration_s: f64, seed: u64) -> Result<BenchReport> {
    if !(duration_s >= 0.0 && duration_s.is_finite()) {
        return Err(Error::config("bench duration must be >= 0"));
    }
    let rate = cfg.audio.target_rate;
    let total = (duration_s * rate as f64).round() as usize;
    if total == 0 {
        return Ok(BenchReport { duration_s: 0.0, wall_s: 0.0, realtime_factor: None, segments: 0 });
    }
    let mut filter = if cfg.audio.bandpass_enabled {
        let band = BandpassSpec::from_config(&cfg.audio.bandpass)?;
        if band.design_rate != rate {
            return Err(Error::config("band-pass design rate differs from target rate"));
        }
        Some(band.filter())
    } else {
        None
    };
    let mut det = Detector::new(&cfg.detector, rate)?;
    let mut rng = rng_stream(seed, RngStream::Noise);
    let mut buf = vec![0.0; 1 << 16];
    let mut out = Vec::new();
    let mut wall = 0.0;
    let mut done = 0;
    while done < total {
        let n = buf.len().min(total - done);
        let chunk = &mut buf[..n];
        chunk.iter_mut().for_each(|x| *x = StandardNormal.sample(&mut rng));
        let t0 = Instant::now();
        if let Some(f) = filter.as_mut() {
            f.process_in_place(chunk);
        }
        det.push_samples(chunk, &mut out)?;
        wall += t0.elapsed().as_secs_f64();
        done += n;
    }
    let t0 = Instant::now();
    det.finish(&mut out)?;
    wall += t0.elapsed().as_secs_f64();
    let audio_s = total as f64 / rate as f64;
    Ok(BenchReport {
        duration_s: audio_s,
        wall_s: wall,
        realtime_factor: Some(audio_s / wall.max(f64::MIN_POSITIVE)),
        segments: out.len(),
    })
}

fn cmd_bench(g: &GlobalArgs, a: &BenchArgs) -> Result<()> {
    let cfg = load_config(g.config.as_deref(), &a.overrides)?;
    let r = bench(&cfg, a.duration_s, seed(g))?;
    let csv = || {
        let rtf = r.realtime_factor.map_or(String::new(), |v| format!("{v:.1}"));
        format!(
            "duration_s,wall_s,realtime_factor,segments\n{:.3},{:.6},{rtf},{}\n",
            r.duration_s, r.wall_s, r.segments
        )
    };
    emit(None, &report(&r, csv, g.output_format))
}

use std::path::Path;
use std::process::{Command, Output};

use sno::eval::parse_annotation;

const ONE_EVENT: &str = r#"
duration_s = 60.0
sample_rate = 8000
noise_sigma2 = 1e-4
seed = 5

[[events]]
start_s = 30.0
duration_s = 2.0
kind = "tone"
band_hz = [400.0, 400.0]
snr_db = 20.0
"#;

fn sno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sno"))
        .args(args)
        .env_remove("SNO_N_STD")
        .env_remove("SNO_CONFIG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn one_event_wav(dir: &Path) -> (String, String) {
    let sc = dir.join("one.toml");
    std::fs::write(&sc, ONE_EVENT).unwrap();
    let wav = dir.join("one.wav");
    let ann = dir.join("one.csv");
    stdout(&sno(&["synth", "--scenario", p(&sc), "--wav", p(&wav), "--annotation", p(&ann)]));
    (p(&wav).to_owned(), p(&ann).to_owned())
}

#[test]
fn detect_finds_the_single_event() {
    let dir = tempfile::tempdir().unwrap();
    let (wav, _) = one_event_wav(dir.path());
    let out = stdout(&sno(&["detect", &wav]));
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("start_s,end_s,label,peak_power,mean_power"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 1, "{out}");
    let ann = parse_annotation(&out, "detect").unwrap();
    let s = ann.segments[0];
    assert!(s.start_s < 32.0 && s.end_s > 30.0, "{s:?}");
}

#[test]
fn huge_n_std_gives_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let (wav, _) = one_event_wav(dir.path());
    let out = stdout(&sno(&["detect", &wav, "--n-std", "1e9"]));
    assert_eq!(out, "start_s,end_s,label,peak_power,mean_power\n");
}

#[test]
fn missing_input_exits_2() {
    let o = sno(&["detect", "/definitely/not/here.wav"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sno(&["evaluate", "--detected", "/nope.csv", "--truth", "/nope.csv"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sno(&["detect"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_input_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.wav");
    std::fs::write(&bad, b"RIFF1234WAVEjunk").unwrap();
    assert_eq!(sno(&["detect", p(&bad)]).status.code(), Some(1));
}

#[test]
fn sweep_on_demo_emits_25_rows() {
    let out = stdout(&sno(&["sweep", "--seed", "3"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n_std,precision,recall");
    assert_eq!(lines.len(), 26);
    assert!(lines[1].starts_with("0.000000,"));
    assert!(lines[25].starts_with("12.000000,"));
    assert_eq!(out, stdout(&sno(&["sweep", "--seed", "3"])));
}

#[test]
fn evaluate_identical_tables() {
    let dir = tempfile::tempdir().unwrap();
    let (_, ann) = one_event_wav(dir.path());
    let out = stdout(&sno(&["evaluate", "--detected", &ann, "--truth", &ann]));
    assert_eq!(out, "precision,recall\n1.000000,1.000000\n");
    let json = stdout(&sno(&["evaluate", "--detected", &ann, "--truth", &ann, "--output-format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["precision"], 1.0);
}

#[test]
fn calibrate_lowers_posteriors() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("scores.csv");
    std::fs::write(&scores, "id,posterior\na,0.5\nb,0.9\nc,0.01\nd,0.999\n").unwrap();
    let out = stdout(&sno(&["calibrate", p(&scores), "--deploy-odds", "0.05263157894736842"]));
    let rows: Vec<(String, f64)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let (id, v) = l.split_once(',').unwrap();
            (id.to_owned(), v.parse().unwrap())
        })
        .collect();
    let before = [0.5, 0.9, 0.01, 0.999];
    assert_eq!(rows.len(), 4);
    for ((_, after), b) in rows.iter().zip(before) {
        assert!(*after < b);
    }
    assert!((rows[0].1 - 0.05).abs() < 1e-12);
    assert_eq!(sno(&["calibrate", p(&scores), "--deploy-odds", "0"]).status.code(), Some(1));
}

#[test]
fn detect_many_files_into_directory() {
    let dir = tempfile::tempdir().unwrap();
    let (wav, _) = one_event_wav(dir.path());
    let copy = dir.path().join("two.wav");
    std::fs::copy(&wav, &copy).unwrap();
    let out_dir = dir.path().join("out");
    stdout(&sno(&["detect", &wav, p(&copy), "-o", p(&out_dir), "--jobs", "2", "--output-format", "raven"]));
    let a = std::fs::read_to_string(out_dir.join("one.selections.txt")).unwrap();
    let b = std::fs::read_to_string(out_dir.join("two.selections.txt")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("Selection\tBegin Time (s)\tEnd Time (s)\n"));
}

#[test]
fn env_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let (wav, _) = one_event_wav(dir.path());
    let o = Command::new(env!("CARGO_BIN_EXE_sno")).args(["detect", &wav]).env("SNO_N_STD", "1e9").output().unwrap();
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn bench_zero_duration() {
    let out = stdout(&sno(&["bench", "--duration-s", "0"]));
    assert_eq!(out, "duration_s,wall_s,realtime_factor,segments\n0.000,0.000000,,0\n");
}

#[test]
fn bad_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[detector]\nframe_samples = 1\n").unwrap();
    assert_eq!(sno(&["bench", "--duration-s", "1", "--config", p(&cfg)]).status.code(), Some(2));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use voicing_cli::config::RunConfig;
use voicing_core::dsp::{write_wav, Waveform};
use voicing_core::labels::{format_labels, read_label_file, VoicingLabels};
use voicing_core::model::{save_checkpoint, DcCrn, ModelConfig};

fn voicing(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voicing"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn small_model() -> ModelConfig {
    ModelConfig {
        block_out_channels: vec![2, 2, 2, 2, 2, 2, 2],
        composite_layers: 1,
        composite_growth: 2,
        blstm_hidden: 4,
        groups: 2,
        ..ModelConfig::default()
    }
}

/// Three-utterance corpus in `dir/corp`.
fn corpus(dir: &Path) {
    let o = voicing(&["synth-corpus", "--out", "corp", "--n", "3", "--duration", "1.5", "--seed", "4"], dir);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

fn csv_row<'a>(csv: &'a str, key: &str, mode: &str) -> Vec<&'a str> {
    csv.lines()
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|c| c[0] == key && c[1] == mode)
        .unwrap_or_else(|| panic!("no {key},{mode} row"))
}

#[test]
fn extract_is_deterministic_and_compare_counts_flips() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d);
    for out in ["a", "b"] {
        let o = voicing(&["labels", "extract", "--manifest", "corp/manifest.tsv", "--out", out], d);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = files(&d.join("a"));
    assert_eq!(a.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "lab")).count(), 3);
    assert!(a.iter().any(|(p, _)| p == Path::new("summary.json")));
    assert_eq!(a, files(&d.join("b")));

    let o = voicing(&["labels", "compare", "a", "b", "--out", "same"], d);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.join("same/compare.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("#hop_ms=10"));
    for line in csv.lines().skip(2) {
        assert_eq!(line.split(',').nth(3), Some("0"), "{line}");
    }

    let victim = d.join("b/synthetic/spk01_0001.lab");
    let l = read_label_file(&victim).unwrap();
    let mut bits = l.labels().to_vec();
    bits[40] ^= 1;
    std::fs::write(&victim, format_labels(&VoicingLabels::new(bits).unwrap())).unwrap();
    let o = voicing(&["labels", "compare", "a", "b", "--out", "flip", "--unaligned"], d);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.join("flip/compare.csv")).unwrap();
    let pooled = csv_row(&csv, "pooled", "unaligned");
    assert_eq!(pooled[3], "1");
    let total: usize = pooled[2].parse().unwrap();
    let pct: f64 = pooled[4].parse().unwrap();
    assert!((pct - 100.0 / total as f64).abs() < 1e-6);
    assert!(!csv.contains(",aligned,"));
}

#[test]
fn compare_without_common_ids_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for (dir, name) in [("x", "one"), ("y", "two")] {
        std::fs::create_dir_all(d.join(dir)).unwrap();
        std::fs::write(d.join(dir).join(format!("{name}.lab")), format_labels(&VoicingLabels::unvoiced(20))).unwrap();
    }
    let o = voicing(&["labels", "compare", "x", "y", "--out", "c"], d);
    assert_eq!(code(&o), 3);
}

#[test]
fn strict_flags_skipped_records() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d);
    let m = std::fs::read_to_string(d.join("corp/manifest.tsv")).unwrap();
    let broken = m.replacen("corp/laryn/spk00/spk00_0000.wav", "corp/laryn/gone.wav", 1);
    assert_ne!(m, broken);
    std::fs::write(d.join("broken.tsv"), broken).unwrap();

    let o = voicing(&["labels", "extract", "--manifest", "broken.tsv", "--out", "lax"], d);
    assert_eq!(code(&o), 0);
    let summary = std::fs::read_to_string(d.join("lax/summary.json")).unwrap();
    assert!(summary.contains("synthetic:spk00_0000"));
    assert!(summary.contains("\"utterances\": 2"));

    let o = voicing(&["labels", "extract", "--manifest", "broken.tsv", "--out", "strict", "--strict"], d);
    assert_eq!(code(&o), 2);
}

#[test]
fn detect_rapt_on_tone_and_missing_input() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let tone: Vec<f64> = (0..16000).map(|i| 0.5 * (2.0 * (150.0 * i as f64 / 16000.0).fract() - 1.0)).collect();
    write_wav(d.join("tone.wav"), &Waveform::new(tone, 16000).unwrap()).unwrap();
    let o = voicing(&["detect", "--method", "rapt", "--out", "det", "tone.wav"], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(d.join("det/tone.lab")).unwrap();
    assert!(text.starts_with("#hop_ms=10\n"));
    let l = read_label_file(d.join("det/tone.lab")).unwrap();
    assert!(l.voiced_count() as f64 > 0.8 * l.len() as f64, "{} of {}", l.voiced_count(), l.len());

    let o = voicing(&["detect", "--method", "rapt", "--out", "det", "tone.wav", "absent.wav"], d);
    assert_ne!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.wav"));
}

#[test]
fn detect_dccrn_random_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d);
    save_checkpoint(&DcCrn::new(small_model(), 1).unwrap(), d.join("m.ckpt")).unwrap();
    let wav = "corp/mic/spk00/spk00_0000.wav";
    let o = voicing(&["detect", "--method", "dccrn", "--checkpoint", "m.ckpt", "--posteriors", "--out", "o", wav], d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let labels = read_label_file(d.join("o/spk00_0000.lab")).unwrap();
    let post = std::fs::read_to_string(d.join("o/spk00_0000.posteriors.csv")).unwrap();
    let probs: Vec<f64> = post.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(probs.len(), labels.len());
    for (t, p) in probs.iter().enumerate() {
        assert!(*p > 0.0 && *p < 1.0);
        assert_eq!(labels.is_voiced(t), *p >= 0.5);
    }

    let o = voicing(&["detect", "--method", "dccrn", "--out", "o", wav], d);
    assert_eq!(code(&o), 1);
    std::fs::write(d.join("other.json"), r#"{"model": {"blstm_hidden": 6}}"#).unwrap();
    let o = voicing(
        &["detect", "--config", "other.json", "--method", "dccrn", "--checkpoint", "m.ckpt", "--out", "p", wav],
        d,
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not match"));
}

#[test]
fn config_echo_and_rejection() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    std::fs::write(d.join("c.json"), r#"{"tracker": {"switch_cost": 0.4}, "synth": {"n_speakers": 2}}"#).unwrap();
    let o = voicing(&["synth-corpus", "--config", "c.json", "--seed", "12", "--n", "2", "--out", "s"], d);
    assert_eq!(code(&o), 0);
    let mut want = RunConfig::load(Some(&d.join("c.json"))).unwrap();
    want.apply_seed(Some(12));
    want.synth.n_utterances = 2;
    assert_eq!(std::fs::read_to_string(d.join("s/config.json")).unwrap(), want.to_json());

    std::fs::write(d.join("bad.json"), r#"{"tracker": {"switch_kost": 0.4}}"#).unwrap();
    let o = voicing(&["synth-corpus", "--config", "bad.json", "--out", "t"], d);
    assert_eq!(code(&o), 1);
    assert!(!d.join("t").exists());
}

#[test]
fn usage_and_help_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&voicing(&["--help"], tmp.path())), 0);
    assert_eq!(code(&voicing(&["--version"], tmp.path())), 0);
    assert_eq!(code(&voicing(&["frobnicate"], tmp.path())), 1);
    assert_eq!(code(&voicing(&["detect", "--method", "rapt"], tmp.path())), 1);
    assert_eq!(code(&voicing(&["train", "--out", "x"], tmp.path())), 1);
}

#[test]
fn folds_train_eval_round() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    corpus(d);
    let o = voicing(&["synth-corpus", "--out", "c2", "--n", "3", "--duration", "1.5", "--seed", "5"], d);
    assert_eq!(code(&o), 0);
    let o = voicing(&["manifest", "scan", "--root", "c2", "--corpus", "KEELE", "--out", "k.tsv"], d);
    assert_eq!(code(&o), 0);
    let o = voicing(&["folds", "--manifest", "corp/manifest.tsv", "k.tsv", "--out", "folds.json"], d);
    assert_eq!(code(&o), 0);

    let eval = ["eval", "--manifest", "corp/manifest.tsv", "k.tsv", "--folds", "folds.json", "--methods", "rapt"];
    let o = voicing(&[&eval[..], &["--out", "e1"]].concat(), d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = voicing(&[&eval[..], &["--out", "e2"]].concat(), d);
    assert_eq!(code(&o), 0);
    assert_eq!(files(&d.join("e1")), files(&d.join("e2")));
    let csv = std::fs::read_to_string(d.join("e1/eval.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 2);

    let cfg = RunConfig {
        model: small_model(),
        train: voicing_core::train::TrainConfig {
            max_epochs: 1,
            ..Default::default()
        },
        ..Default::default()
    };
    std::fs::write(d.join("cfg.json"), cfg.to_json()).unwrap();
    let train = ["train", "--config", "cfg.json", "--manifest", "corp/manifest.tsv", "k.tsv", "--folds", "folds.json"];
    let o = voicing(&[&train[..], &["--fold", "KEELE", "--out", "t"]].concat(), d);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("t/KEELE/model.ckpt").is_file());
    assert!(!d.join("t/synthetic").exists());
    assert_eq!(std::fs::read_to_string(d.join("t/config.json")).unwrap(), cfg.to_json());
    let hist = std::fs::read_to_string(d.join("t/KEELE/history.csv")).unwrap();
    assert_eq!(hist.lines().count(), 3);

    let o = voicing(
        &["eval", "--manifest", "corp/manifest.tsv", "k.tsv", "--folds", "folds.json", "--checkpoints", "t", "--out", "e3"],
        d,
    );
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(d.join("e3/eval.csv")).unwrap();
    assert!(csv.contains("synthetic,KEELE,dccrn,"));
    assert!(!csv.contains("KEELE,synthetic,dccrn,"));
    let o = voicing(
        &["eval", "--strict", "--manifest", "corp/manifest.tsv", "k.tsv", "--folds", "folds.json", "--checkpoints", "t", "--out", "e4"],
        d,
    );
    assert_eq!(code(&o), 2);
}

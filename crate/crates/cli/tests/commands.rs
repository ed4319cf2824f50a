//! Command contracts exercised through the real binary: outputs, exit codes
//! and byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::Command;

use headmotion::siamese::{backbone_param_count, BackboneSpec, HeadSpec};
use headmotion_cli::checkpoint::{Checkpoint, Model, ModelKind};
use headmotion_cli::commands::{parse_ablation_csv, EvalOutput};
use headmotion_cli::dataset::DatasetFile;
use tempfile::TempDir;

fn bin(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_headmotion")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = bin(args);
    assert_eq!(code, 0, "{args:?} failed: {stderr}");
    stdout
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

/// 25 samples per class: a 100-sample dataset whose validation split still
/// holds two samples of each class.
fn small_dataset(dir: &Path) -> String {
    let out = p(dir, "small.rhm");
    ok(&["simulate", "--counts", "25,25,25,25", "--seed", "3", "--out", &out, "--quiet"]);
    out
}

fn read(path: &str) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn simulate_one_per_class_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path(), "four.rhm");
    let stdout = ok(&["simulate", "--counts", "1,1,1,1", "--seed", "5", "--out", &out]);
    assert!(stdout.contains("4 samples"));
    for name in ["front=1", "nod=1", "shake=1", "lowered=1"] {
        assert!(stdout.contains(name), "{stdout}");
    }
    let bytes = read(&out);
    let d = DatasetFile::from_bytes(&bytes).unwrap();
    assert_eq!(d.header.samples, 4);
    assert_eq!(d.samples.iter().map(|m| m.label).collect::<Vec<_>>(), vec![0, 1, 2, 3]);
    assert_eq!(d.to_bytes().unwrap(), bytes);
}

#[test]
fn simulate_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let a = p(dir.path(), "a.rhm");
    let b = p(dir.path(), "b.rhm");
    let c = p(dir.path(), "c.rhm");
    for (out, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        ok(&["simulate", "--counts", "3,2,2,3", "--seed", seed, "--out", out, "--quiet"]);
    }
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn simulate_reports_config_and_io_errors() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path(), "x.rhm");
    let bad_json = write(dir.path(), "bad.json", "{ not json");
    assert_eq!(bin(&["simulate", "--config", &bad_json, "--out", &out]).0, 1);
    let bad_value = write(dir.path(), "neg.json", r#"{"scene": {"noise_std": -1.0}}"#);
    assert_eq!(bin(&["simulate", "--config", &bad_value, "--out", &out]).0, 1);
    let unknown = write(dir.path(), "unknown.json", r#"{"radar": {"carrier": 1}}"#);
    assert_eq!(bin(&["simulate", "--config", &unknown, "--out", &out]).0, 1);
    let missing = p(dir.path(), "missing.json");
    assert_eq!(bin(&["simulate", "--config", &missing, "--out", &out]).0, 2);
    let unwritable = p(dir.path(), "no/such/dir/x.rhm");
    let (code, _, stderr) = bin(&["simulate", "--counts", "1,1,1,1", "--out", &unwritable]);
    assert_eq!(code, 2);
    assert!(stderr.contains("i/o"), "{stderr}");
    assert!(!Path::new(&out).exists());
}

#[test]
fn train_with_zero_epochs_saves_initial_weights() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(dir.path());
    let ck_path = p(dir.path(), "init.ckpt");
    ok(&["train", "--data", &data, "--epochs", "0", "--seed", "4", "--out", &ck_path, "--quiet"]);
    let bytes = read(&ck_path);
    let ck = Checkpoint::from_bytes(&bytes).unwrap();
    assert_eq!(ck.to_bytes().unwrap(), bytes);
    let fresh = Model::new(BackboneSpec::default(), ck.manifest.head, 4).unwrap();
    assert_eq!(ck.model, fresh);
    assert_eq!(ck.manifest.param_count, 2_598_289);
    assert!(ck.manifest.history.epochs.is_empty());
    let hist: serde_json::Value = serde_json::from_slice(&read(&format!("{ck_path}.history.json"))).unwrap();
    assert_eq!(hist["split"]["train"], 72);
    assert_eq!(hist["split"]["val"], 8);
    assert_eq!(hist["split"]["test"], 20);
    assert!(hist["split_rule"].as_str().unwrap().contains("floored"));
}

#[test]
fn train_cnn_builds_the_softmax_baseline() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(dir.path());
    let ck_path = p(dir.path(), "cnn.ckpt");
    let hist_path = p(dir.path(), "cnn-history.json");
    ok(&[
        "train", "--data", &data, "--model", "cnn", "--epochs", "1", "--seed", "2", "--out", &ck_path, "--history",
        &hist_path, "--quiet",
    ]);
    let ck = Checkpoint::read(Path::new(&ck_path)).unwrap();
    assert_eq!(ck.manifest.model, ModelKind::Cnn);
    assert_eq!(ck.manifest.head, HeadSpec::Softmax { classes: 4 });
    assert_eq!(
        ck.manifest.param_count,
        backbone_param_count(&BackboneSpec::default(), HeadSpec::Softmax { classes: 4 }).unwrap()
    );
    let hist: serde_json::Value = serde_json::from_slice(&read(&hist_path)).unwrap();
    assert_eq!(hist["model"], "cnn");
    assert_eq!(hist["epochs"].as_array().unwrap().len(), 1);
}

#[test]
fn train_exit_codes() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(dir.path());
    let out = p(dir.path(), "t.ckpt");
    let mut corrupt = read(&data);
    corrupt.truncate(corrupt.len() - 10);
    let corrupt_path = p(dir.path(), "corrupt.rhm");
    std::fs::write(&corrupt_path, corrupt).unwrap();
    assert_eq!(bin(&["train", "--data", &corrupt_path, "--out", &out]).0, 1);
    assert_eq!(bin(&["train", "--data", &p(dir.path(), "absent.rhm"), "--out", &out]).0, 2);
    // an absurd step size drives the weights to overflow
    let blowup = write(dir.path(), "blowup.json", r#"{"train": {"learning_rate": 1e308, "epochs": 2}}"#);
    let (code, _, stderr) = bin(&["train", "--data", &data, "--config", &blowup, "--out", &out]);
    assert_eq!(code, 3, "{stderr}");
    assert!(!Path::new(&out).exists());
}

fn trained_checkpoint(dir: &Path, data: &str) -> String {
    let ck = p(dir, "s.ckpt");
    ok(&["train", "--data", data, "--epochs", "1", "--seed", "6", "--out", &ck, "--quiet"]);
    ck
}

#[test]
fn eval_reports_are_consistent_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(dir.path());
    let ck = trained_checkpoint(dir.path(), &data);
    let a = p(dir.path(), "a.json");
    let b = p(dir.path(), "b.json");
    ok(&["eval", "--checkpoint", &ck, "--data", &data, "--episodes", "5", "--seed", "8", "--out", &a, "--quiet"]);
    ok(&["eval", "--checkpoint", &ck, "--data", &data, "--episodes", "5", "--seed", "8", "--out", &b, "--quiet"]);
    assert_eq!(read(&a), read(&b));
    let r: EvalOutput = serde_json::from_slice(&read(&a)).unwrap();
    assert!((0.0..=1.0).contains(&r.accuracy));
    let trace: u64 = (0..4).map(|i| r.confusion[i][i]).sum();
    let total: u64 = r.confusion.iter().flatten().sum();
    assert_eq!(total, r.queries);
    // one support per class leaves 16 of the 20 test samples as queries
    assert_eq!(r.queries, 5 * 16);
    assert!((trace as f64 / total as f64 - r.accuracy).abs() < 1e-6);
    assert_eq!(r.test_samples, 20);
    assert_eq!(r.embeddings.dim, 32);
    assert_eq!(r.embeddings.vectors.len(), 20);
    assert_eq!(r.embeddings.labels.len(), 20);
    let text = String::from_utf8(read(&a)).unwrap();
    let keys: Vec<usize> = ["\"accuracy\"", "\"confusion\"", "\"embeddings\"", "\"model\"", "\"seed\""]
        .iter()
        .map(|k| text.find(k).unwrap())
        .collect();
    assert!(keys.windows(2).all(|w| w[0] < w[1]), "keys not sorted");
}

#[test]
fn eval_rejects_mismatched_architecture() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(dir.path());
    let ck = p(dir.path(), "init.ckpt");
    ok(&["train", "--data", &data, "--epochs", "0", "--out", &ck, "--quiet"]);
    let narrow_cfg = write(dir.path(), "narrow.json", r#"{"radar": {"used_bins": 32}}"#);
    let narrow = p(dir.path(), "narrow.rhm");
    ok(&["simulate", "--config", &narrow_cfg, "--counts", "25,25,25,25", "--out", &narrow, "--quiet"]);
    let (code, _, stderr) = bin(&["eval", "--checkpoint", &ck, "--data", &narrow, "--out", &p(dir.path(), "e.json")]);
    assert_eq!(code, 1, "{stderr}");
    assert_eq!(bin(&["train", "--data", &narrow, "--epochs", "0", "--out", &ck]).0, 1);
}

#[test]
fn ablation_csv_has_one_row_per_fraction_and_reparses() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(dir.path());
    let a = p(dir.path(), "a.csv");
    let b = p(dir.path(), "b.csv");
    for out in [&a, &b] {
        ok(&["ablation", "--data", &data, "--epochs", "1", "--seed", "2", "--out", out, "--quiet"]);
    }
    assert_eq!(read(&a), read(&b));
    let text = String::from_utf8(read(&a)).unwrap();
    assert_eq!(text.lines().next().unwrap(), "fraction,samples,siamese_acc,cnn_acc,seed");
    let report = parse_ablation_csv(&text).unwrap();
    assert_eq!(report.rows.len(), 4);
    assert_eq!(
        report.rows.iter().map(|r| r.fraction).collect::<Vec<_>>(),
        vec![0.1, 0.2, 0.3, 0.5]
    );
    assert!(report.rows.windows(2).all(|w| w[0].samples < w[1].samples));
    assert_eq!(headmotion_cli::commands::ablation_csv(&report).unwrap(), text);
    assert_eq!(bin(&["ablation", "--data", &data, "--fractions", "0.5,0.2", "--out", &a]).0, 1);
    // the training split holds 72% of each class
    assert_eq!(bin(&["ablation", "--data", &data, "--fractions", "0.5,0.9", "--out", &a]).0, 1);
}

#[test]
fn plot_writes_labelled_svgs() {
    let dir = TempDir::new().unwrap();
    let data = small_dataset(dir.path());
    let out: PathBuf = dir.path().join("plots");
    let out_s = out.to_string_lossy().into_owned();
    ok(&["plot", "--data", &data, "--indices", "0,30,99", "--out", &out_s, "--quiet"]);
    let mut names: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, vec!["sample00000_front.svg", "sample00030_nod.svg", "sample00099_lowered.svg"]);
    let svg = std::fs::read_to_string(out.join("sample00030_nod.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    assert_eq!(svg.matches("<rect").count(), 1200);
    assert_eq!(bin(&["plot", "--data", &data, "--indices", "100", "--out", &out_s]).0, 1);
}

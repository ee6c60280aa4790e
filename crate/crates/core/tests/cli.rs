use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use clup::features::{load_matrix, save_matrix};
use clup::network::load_classifier;
use clup::pipeline::{subset_from_features, KEYS};

fn clup(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clup")).args(args).output().unwrap()
}

fn ok(out: &Path, args: &[&str]) -> String {
    let mut full = vec!["--out", out.to_str().unwrap()];
    full.extend_from_slice(args);
    let o = clup(&full);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn value(text: &str, key: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(&format!("{key}="))).unwrap();
    line[key.len() + 1..].parse().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.conf");
    fs::write(
        &path,
        "seed = 3\nnum_classes = 3\ninput_dim = 4\nsource_counts = 40, 30, 30\n\
         target_counts = 30, 40, 30\nshift_rotation = 0.2\nshift_translation = 1.0\n\
         noise_sigma = 1.0\nhidden_dim = 8\nfeature_dim = 6\nclusters = 30\n\
         source_epochs = 5\nssl_epochs = 3\ntarget_epochs = 3\nssl_batch_size = 16\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn help_lists_every_config_key() {
    let o = clup(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for (key, _, _) in KEYS {
        assert!(text.contains(key), "{key} missing from --help");
    }
    assert!(text.contains("subset.clup"));
}

#[test]
fn missing_key_exits_2_and_names_it() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "seed = 1\nnum_classes = 2\n").unwrap();
    let o = clup(&["--config", conf.to_str().unwrap(), "--out", tmp.path().to_str().unwrap(), "make-synth"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("input_dim"));
}

#[test]
fn unknown_subcommand_exits_2() {
    assert_eq!(clup(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn unlabelled_source_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["make-synth"]);
    let src = tmp.path().join("source.clup");
    save_matrix(&load_matrix(&src).unwrap().without_labels(), &src).unwrap();
    let o = clup(&["--out", tmp.path().to_str().unwrap(), "train-source"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_of_unlabelled_data_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_config(tmp.path());
    ok(tmp.path(), &["--config", &conf, "make-synth"]);
    ok(tmp.path(), &["--config", &conf, "train-source"]);
    let data = tmp.path().join("plain.clup");
    save_matrix(&load_matrix(tmp.path().join("target.clup")).unwrap().without_labels(), &data).unwrap();
    let model = tmp.path().join("source_model.cmdl");
    let o = clup(&["eval", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupted_input_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["make-synth"]);
    let src = tmp.path().join("source.clup");
    let mut bytes = fs::read(&src).unwrap();
    bytes[0] = b'X';
    fs::write(&src, bytes).unwrap();
    let o = clup(&["--out", tmp.path().to_str().unwrap(), "train-source"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("magic"));
}

#[test]
fn default_benchmark_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    ok(out, &["make-synth"]);
    let src = ok(out, &["train-source"]);
    assert!(value(&src, "val_top1") >= 0.95, "{src}");

    let report = ok(out, &["pseudo-label"]);
    let subset = subset_from_features(&load_matrix(out.join("subset.clup")).unwrap()).unwrap();
    let target = load_matrix(out.join("target.clup")).unwrap();
    assert_eq!(value(&report, "retained_samples") as usize, subset.len());
    assert!((value(&report, "coverage") - subset.len() as f64 / target.rows() as f64).abs() < 1e-6);

    ok(out, &["ssl-pretrain"]);
    let loss_rows = fs::read_to_string(out.join("ssl_loss.csv")).unwrap().lines().count() - 1;
    assert_eq!(loss_rows, 100);

    let metrics = ok(out, &["train-target"]);
    assert_eq!(metrics, fs::read_to_string(out.join("metrics.txt")).unwrap());
    // The model fits its own refined subset.
    let model = load_classifier(out.join("target_model.cmdl")).unwrap();
    let sub = target.select(&subset.indices);
    let pred = model.predict(sub.to_f64().view()).unwrap();
    let fit = pred.iter().zip(&subset.labels).filter(|(p, l)| p == l).count() as f64 / subset.len() as f64;
    assert!(fit >= 0.9, "subset fit {fit}");

    let model = out.join("target_model.cmdl");
    let data = out.join("target.clup");
    let eval = ok(out, &["eval", "--model", model.to_str().unwrap(), "--data", data.to_str().unwrap()]);
    assert_eq!(value(&eval, "top1"), value(&metrics, "top1"));
}

#[test]
fn pseudo_label_coverage_non_increasing_in_q() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    ok(out, &["make-synth"]);
    ok(out, &["train-source"]);
    let mut last = f64::INFINITY;
    for q in ["0.5", "0.7", "0.9"] {
        let conf = out.join(format!("q{q}.conf"));
        let text = clup::pipeline::BENCHMARK_CONFIG.replace("purity_q = 0.8", &format!("purity_q = {q}"));
        fs::write(&conf, text).unwrap();
        let report = ok(out, &["--config", conf.to_str().unwrap(), "pseudo-label"]);
        let cov = value(&report, "coverage");
        assert!(cov <= last);
        last = cov;
    }
}

#[test]
fn sweep_layout_and_monotone_coverage() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_config(tmp.path());
    let out = tmp.path();
    for step in ["make-synth", "train-source", "ssl-pretrain"] {
        ok(out, &["--config", &conf, step]);
    }
    let csv = ok(out, &["--config", &conf, "sweep", "--thresholds", "0.5,0.7,0.9"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,value,coverage,subset_accuracy,top1");
    assert_eq!(lines.len(), 1 + 2 * 3);
    for method in ["confidence", "purity"] {
        let cov: Vec<f64> = lines[1..]
            .iter()
            .filter(|l| l.starts_with(method))
            .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
            .collect();
        assert_eq!(cov.len(), 3);
        assert!(cov.windows(2).all(|w| w[1] <= w[0]), "{method}: {cov:?}");
    }
}

#[test]
fn frozen_target_training_keeps_extractor_bits() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let conf = tmp.path().join("frozen.conf");
    fs::write(&conf, fs::read_to_string(small_config(out)).unwrap() + "freeze_extractor = true\n").unwrap();
    let conf = conf.to_str().unwrap();
    for step in ["make-synth", "train-source", "pseudo-label", "ssl-pretrain", "train-target"] {
        ok(out, &["--config", conf, step]);
    }
    let (extractor, _) = clup::network::load_extractor_bank(out.join("extractor.cmdl")).unwrap();
    let model = load_classifier(out.join("target_model.cmdl")).unwrap();
    assert_eq!(model.extractor, extractor);
}

#[test]
fn projection_csv_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_config(tmp.path());
    ok(tmp.path(), &["--config", &conf, "make-synth"]);
    let data = tmp.path().join("target.clup");
    ok(tmp.path(), &["project", "--data", data.to_str().unwrap()]);
    let csv = fs::read_to_string(tmp.path().join("projection.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,y,label"));
    assert_eq!(csv.lines().count(), 1 + 100);
}

#[test]
fn seed_flag_changes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let conf = small_config(tmp.path());
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&a, &["--config", &conf, "make-synth"]);
    ok(&b, &["--config", &conf, "--seed", "4", "make-synth"]);
    assert_ne!(fs::read(a.join("target.clup")).unwrap(), fs::read(b.join("target.clup")).unwrap());
}

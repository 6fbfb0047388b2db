use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use learngraph::training::TrainConfig;
use learngraph::{checkpoint, dataset, Architecture, ModelParams, Variant};

fn learngraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_learngraph"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A 40-node, 8-feature dataset written by `synth`.
fn smoke_set(dir: &Path) {
    let out = learngraph(&[
        "synth", "--out-dir", p(dir), "--n-per-class", "20", "--dim", "8",
        "--separation", "6", "--offset", "3", "--seed", "4",
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
}

fn data_flags(dir: &Path) -> Vec<String> {
    vec![
        "--features".into(),
        dir.join("features.csv").display().to_string(),
        "--labels".into(),
        dir.join("labels.csv").display().to_string(),
    ]
}

fn with(base: &[String], extra: &[&str]) -> Vec<String> {
    base.iter().cloned().chain(extra.iter().map(|s| s.to_string())).collect()
}

fn run(args: &[String]) -> Output {
    learngraph(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn synth_prints_shape_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [a.path(), b.path()] {
        let out = learngraph(&["synth", "--out-dir", p(dir), "--n-per-class", "3", "--dim", "2", "--seed", "9"]);
        assert!(out.status.success());
        assert_eq!(text(&out.stdout).trim(), "N=6 M=2 seed=9");
    }
    for name in ["features.csv", "labels.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    let f = dataset::read_features(&a.path().join("features.csv")).unwrap();
    assert_eq!(f.shape(), (6, 2));
}

#[test]
fn train_writes_artifacts_and_eval_reproduces_them() {
    let dir = tempfile::tempdir().unwrap();
    smoke_set(dir.path());
    let run_dir = dir.path().join("run");
    let mut args = vec!["train".to_string()];
    args.extend(with(
        &data_flags(dir.path()),
        &["--epochs", "5", "--budget", "10", "--learning-rate", "1e-3", "--out-dir", p(&run_dir)],
    ));
    let out = run(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    for name in ["checkpoint.json", "loss.csv", "eval.json", "roc.csv"] {
        assert!(run_dir.join(name).exists(), "{name} missing");
    }
    let loss = fs::read_to_string(run_dir.join("loss.csv")).unwrap();
    assert_eq!(loss.lines().count(), 6);

    let eval_dir = dir.path().join("eval");
    let mut args = vec!["eval".to_string()];
    args.extend(with(
        &data_flags(dir.path()),
        &["--checkpoint", p(&run_dir.join("checkpoint.json")), "--out-dir", p(&eval_dir)],
    ));
    let out = run(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(eval_dir.join("eval.json").exists());
    assert!(eval_dir.join("roc.csv").exists());
}

#[test]
fn zero_epochs_saves_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    smoke_set(dir.path());
    let mut args = vec!["train".to_string()];
    args.extend(with(
        &data_flags(dir.path()),
        &["--epochs", "0", "--budget", "10", "--seed", "11", "--out-dir", p(dir.path())],
    ));
    let out = run(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let saved = checkpoint::load(&dir.path().join("checkpoint.json")).unwrap();
    let config = TrainConfig {
        seed: 11,
        ..TrainConfig::default()
    };
    let init = ModelParams::init(&Architecture::for_variant(Variant::Learnable, 8), config.init_seed()).unwrap();
    assert_eq!(saved, init);
}

#[test]
fn malformed_cell_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    smoke_set(dir.path());
    let path = dir.path().join("features.csv");
    let mut lines: Vec<String> = fs::read_to_string(&path).unwrap().lines().map(String::from).collect();
    let mut cells: Vec<&str> = lines[2].split(',').collect();
    cells[4] = "abc";
    lines[2] = cells.join(",");
    fs::write(&path, lines.join("\n")).unwrap();

    let mut args = vec!["train".to_string()];
    args.extend(with(&data_flags(dir.path()), &["--epochs", "1", "--out-dir", p(dir.path())]));
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("row 3") && err.contains("column 5"), "{err}");
}

#[test]
fn unknown_config_key_lists_valid_keys() {
    let dir = tempfile::tempdir().unwrap();
    smoke_set(dir.path());
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "epochs = 3\nlearning_rat = 0.1\n").unwrap();
    let mut args = vec!["train".to_string()];
    args.extend(with(&data_flags(dir.path()), &["--config", p(&cfg), "--out-dir", p(dir.path())]));
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    let err = text(&out.stderr);
    assert!(err.contains("learning_rat") && err.contains("learning_rate"), "{err}");
}

#[test]
fn infeasible_plan_fails_before_training() {
    let dir = tempfile::tempdir().unwrap();
    smoke_set(dir.path());
    let out_dir = dir.path().join("exp");
    let mut args = vec!["experiment".to_string()];
    args.extend(with(
        &data_flags(dir.path()),
        &["--mode", "cv", "--budget", "39", "--folds", "5", "--out-dir", p(&out_dir)],
    ));
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("label budget 39"));
    assert!(!out_dir.join("report.json").exists());
}

#[test]
fn experiment_reports_are_byte_identical_across_reruns() {
    let dir = tempfile::tempdir().unwrap();
    smoke_set(dir.path());
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let mut args = vec!["experiment".to_string()];
        args.extend(with(
            &data_flags(dir.path()),
            &[
                "--mode", "ablation", "--budget", "10", "--folds", "2", "--repeats", "2",
                "--epochs", "3", "--seed", "5", "--out-dir", p(&out_dir),
            ],
        ));
        let out = run(&args);
        assert!(out.status.success(), "{}", text(&out.stderr));
        reports.push((
            fs::read(out_dir.join("report.json")).unwrap(),
            fs::read(out_dir.join("runs.csv")).unwrap(),
        ));
    }
    assert_eq!(reports[0], reports[1]);
    let csv = String::from_utf8(reports[0].1.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 2 * 2);
}

#[test]
fn sweep_has_one_row_per_budget_fold_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    smoke_set(dir.path());
    let out_dir = dir.path().join("sweep");
    let mut args = vec!["experiment".to_string()];
    args.extend(with(
        &data_flags(dir.path()),
        &[
            "--mode", "sweep", "--budgets", "4,8,12", "--folds", "4", "--repeats", "2",
            "--epochs", "1", "--out-dir", p(&out_dir),
        ],
    ));
    let out = run(&args);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 4 * 2);
}

#[test]
fn gradcheck_exit_codes() {
    assert_eq!(learngraph(&["gradcheck"]).status.code(), Some(0));
    assert_eq!(learngraph(&["gradcheck", "--gamma", "0.1", "--seed", "1"]).status.code(), Some(0));
    let broken = learngraph(&["gradcheck", "--break-backward"]);
    assert_eq!(broken.status.code(), Some(2));
    assert!(text(&broken.stdout).contains("FAIL"));
}

#[test]
fn bad_flags_exit_with_one() {
    assert_eq!(learngraph(&["train", "--nope"]).status.code(), Some(1));
    assert_eq!(learngraph(&["--help"]).status.code(), Some(0));
}

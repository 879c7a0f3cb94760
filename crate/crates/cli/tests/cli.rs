use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bargecast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bargecast"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn synth(dir: &Path) -> String {
    let scenario = dir.join("scenario.json");
    fs::write(&scenario, r#"{"vessels_per_location": 40, "n_locations": 3}"#).unwrap();
    let out = dir.join("synth");
    let o = bargecast(&["synth", "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap().trim().to_string()
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&bargecast(&["--help"])), 0);
    assert_eq!(code(&bargecast(&["train", "--help"])), 0);
    assert_eq!(code(&bargecast(&["frobnicate"])), 1);
    assert_eq!(code(&bargecast(&[])), 1);
}

#[test]
fn bad_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, "{ not json").unwrap();
    let o = bargecast(&["clean", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn missing_or_malformed_input_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bargecast(&[
        "evaluate",
        "--model",
        dir.path().join("missing.json").to_str().unwrap(),
        "--dataset",
        dir.path().join("missing.csv").to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);

    let config = synth(dir.path());
    let o = bargecast(&["clean", "--config", &config, "--out", dir.path().join("c").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("c/data/clean.csv").exists());
}

#[test]
fn synth_train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = synth(dir.path());
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();
    let o = bargecast(&["train", "--no-rfe", "--no-tune", "--config", &config, "--out", run_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for rel in ["artifacts/model.json", "reports/manifest.json", "reports/presence_eval.json", "data/labeled.csv"] {
        assert!(run.join(rel).exists(), "{rel}");
    }

    let model = run.join("artifacts/model.json");
    let o = bargecast(&["predict", "--config", &config, "--model", model.to_str().unwrap(), "--out", run_s]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let preds = fs::read_to_string(run.join("predictions.csv")).unwrap();
    let mut lines = preds.lines();
    assert!(lines.next().unwrap().starts_with("trip_id,mmsi,has_barge,class_bin"));
    assert!(lines.count() > 0);

    let ais = dir.path().join("broken.csv");
    fs::write(&ais, "this,is,not\nan,ais,file\n").unwrap();
    let o = bargecast(&["predict", "--config", &config, "--model", model.to_str().unwrap(), "--ais", ais.to_str().unwrap(), "--out", run_s]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));

    let dataset = run.join("data/labeled.csv");
    let o = bargecast(&[
        "evaluate",
        "--model",
        model.to_str().unwrap(),
        "--dataset",
        dataset.to_str().unwrap(),
        "--out",
        run_s,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(run.join("reports/evaluate_presence.json").exists());
}

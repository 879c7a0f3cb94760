use std::fs;
use std::path::Path;

use bargecast::dataprep::{kmeans_impute_fit, BargeClassMap, Provenance};
use bargecast::learners::{load_model, CartParams, LearnerSpec};
use bargecast::matching::read_dataset_file;
use bargecast::pipeline::{
    evaluate_dataset, grouping_sensitivity, prepare_presence, prepare_quantity, run_training, segment_sensitivity,
    transfer_run, write_synthetic, HierarchicalModel, Manifest, PipelineConfig, SensitivityConfig, SyntheticScenario,
};

fn small_scenario() -> SyntheticScenario {
    SyntheticScenario { vessels_per_location: 40, n_locations: 3, ..SyntheticScenario::default() }
}

fn quick(cfg: PipelineConfig) -> PipelineConfig {
    PipelineConfig { run_rfe: false, run_tuning: false, ..cfg }
}

fn setup(dir: &Path) -> PipelineConfig {
    let files = write_synthetic(&small_scenario(), dir, &PipelineConfig::default()).unwrap();
    quick(PipelineConfig::load(&files.config).unwrap())
}

#[test]
fn training_writes_layout_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let out = dir.path().join("run");
    let t = run_training(&cfg, &out).unwrap();
    for rel in ["artifacts/model.json", "reports/presence_eval.json", "reports/quantity_eval.json", "data/labeled.csv"] {
        assert!(out.join(rel).exists(), "{rel}");
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("reports/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest, t.manifest);
    assert_eq!(manifest.failed_stage, None);
    assert_eq!(manifest.counts["quantity_rows_without_barge"], 0);
    assert_eq!(manifest.completed.last().map(String::as_str), Some("save"));

    let loaded: HierarchicalModel = load_model(&out.join("artifacts/model.json")).unwrap();
    assert_eq!(loaded, t.model);
    let data = read_dataset_file(out.join("data/labeled.csv")).unwrap();
    let batch = loaded.predict_rows(&data.rows).unwrap();
    for (row, p) in data.rows.iter().zip(&batch).take(25) {
        assert_eq!(&loaded.predict_rows(std::slice::from_ref(row)).unwrap()[0], p);
    }
    let (presence, quantity) = evaluate_dataset(&loaded, &data).unwrap();
    assert_eq!(presence.n_rows as usize, data.len());
    assert_eq!(quantity.unwrap().n_rows as usize, data.barge_count.iter().filter(|&&b| b > 0).count());
}

#[test]
fn missing_input_names_stage_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = setup(dir.path());
    cfg.ais_csv = dir.path().join("nope.csv");
    let out = dir.path().join("run");
    let err = run_training(&cfg, &out).unwrap_err();
    assert_eq!(err.stage(), Some("input"));
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(out.join("reports/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.failed_stage.as_deref(), Some("input"));
}

fn imputed(cfg: &PipelineConfig, out: &Path) -> (Vec<Vec<f64>>, Vec<u32>, Vec<String>) {
    run_training(cfg, out).unwrap();
    let data = read_dataset_file(out.join("data/labeled.csv")).unwrap();
    let imp = kmeans_impute_fit(&data.rows, 7, 0).unwrap();
    let rows = data
        .rows
        .iter()
        .map(|r| {
            let mut v = r.clone();
            imp.apply(&mut v);
            v
        })
        .collect();
    (rows, data.barge_count, data.location_id)
}

#[test]
fn presence_split_is_thirty_percent_real() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    let (rows, counts, _) = imputed(&cfg, &dir.path().join("run"));
    let d = prepare_presence(&rows, &counts, &cfg, 3).unwrap();
    let n_real = d.n_real_train() + d.x_test.len();
    assert_eq!(d.x_test.len(), (n_real as f64 * 0.30).round() as usize);
    assert!(d.test_origin.iter().all(|&i| i < rows.len()));
    for (o, p) in d.train_origin.iter().zip(&d.provenance_train) {
        assert_eq!(o.is_none(), *p == Provenance::Synthetic);
    }
    // Minority weight 3, majority 1.
    let mut w: Vec<f64> = d.w_train.clone();
    w.sort_by(f64::total_cmp);
    w.dedup();
    assert_eq!(w, vec![1.0, 3.0]);

    let q = prepare_quantity(&rows, &counts, &BargeClassMap::default(), &cfg, 4).unwrap();
    assert!(q.train_origin.iter().flatten().chain(&q.test_origin).all(|&i| counts[i] > 0));
}

#[test]
fn single_segment_size_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = setup(dir.path());
    cfg.sensitivity.segment_sizes = vec![0.3];
    let (_, rows) = segment_sensitivity(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].mean_error_miles > 0.0);

    cfg.sensitivity.truth_geojson = None;
    let (_, held_out) = segment_sensitivity(&cfg).unwrap();
    assert_eq!(held_out.len(), 1);
}

#[test]
fn transfer_rejects_unknown_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = setup(dir.path());
    run_training(&cfg, &dir.path().join("run")).unwrap();
    let data = read_dataset_file(dir.path().join("run/data/labeled.csv")).unwrap();
    assert!(transfer_run(&data, "L9", &cfg.quantity_learner, &cfg).is_err());
    let t = transfer_run(&data, "L2", &LearnerSpec::Cart(CartParams::default()), &cfg).unwrap();
    assert_eq!(t.holdout_location, "L2");
    assert_eq!(t.source_locations, vec!["L1".to_string(), "L3".to_string()]);
    assert_eq!(t.holdout.n_rows as usize, t.n_holdout_rows);
}

#[test]
fn grouping_finds_three_level_signal() {
    // Counts 1..=12; the only signal separates 1-4, 5-8 and 9-12.
    let mut rows = Vec::new();
    let mut counts = Vec::new();
    for i in 0..240u32 {
        let c = i % 12 + 1;
        let level = ((c - 1) / 4) as f64;
        let jitter = ((i * 37) % 11) as f64 / 11.0;
        rows.push(vec![level * 10.0 + jitter, ((i * 53) % 17) as f64]);
        counts.push(c);
    }
    let cfg = PipelineConfig {
        sensitivity: SensitivityConfig {
            grouping_learner: LearnerSpec::Cart(CartParams { max_depth: Some(3), ..CartParams::default() }),
            ..SensitivityConfig::default()
        },
        ..PipelineConfig::default()
    };
    let r = grouping_sensitivity(&rows, &counts, &cfg, 1).unwrap();
    assert_eq!(r.curve.len(), 11);
    assert_eq!(r.curve.first().unwrap().groups.len(), 12);
    assert_eq!(r.curve.last().unwrap().groups.len(), 2);
    assert!(r.best_groups().len() <= 4, "{:?}", r.best_groups());
}

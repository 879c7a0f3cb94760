use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::hierarchical::{HierarchicalModel, StageModel, PRESENCE_CLASSES};
use super::stages::{build_labeled, DataSummary};
use super::{at_stage, PipelineConfig, PipelineError};
use crate::dataprep::{
    class_counts, downsample_majority, kmeans_impute_fit, presence_class_weights, smote_augment, stratified_kfold,
    stratified_split, BargeClassMap, Fold, ImputationModel, Provenance,
};
use crate::features::feature_names;
use crate::learners::{argmax, save_model, LearnerSpec, Matrix};
use crate::matching::{write_dataset, LabeledDataset};
use crate::metrics::{build_report, emit_report, EvalReport, ReportContext};
use crate::tuning::{rfe_select, tune_learner, RfeResult, StudyStatus, TuneOutcome, TuningConfig};

// Offsets that give every randomized step its own stream from the run seed.
const SEED_DOWNSAMPLE: u64 = 1;
const SEED_IMPUTE: u64 = 2;
const SEED_PRESENCE: u64 = 100;
const SEED_QUANTITY: u64 = 200;

/// One stage's training and test rows. Test rows are always real.
#[derive(Debug, Clone, PartialEq)]
pub struct StageData {
    pub name: String,
    pub class_names: Vec<String>,
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<usize>,
    pub w_train: Vec<f64>,
    pub provenance_train: Vec<Provenance>,
    pub x_test: Vec<Vec<f64>>,
    pub y_test: Vec<usize>,
    /// Input row behind each training row; `None` for synthetic rows.
    pub train_origin: Vec<Option<usize>>,
    pub test_origin: Vec<usize>,
}

impl StageData {
    pub fn k(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_real_train(&self) -> usize {
        self.provenance_train.iter().filter(|&&p| p == Provenance::Real).count()
    }

    /// SHA-256 over the test rows and labels.
    pub fn test_hash(&self) -> String {
        let json = serde_json::to_string(&(&self.x_test, &self.y_test)).expect("rows serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn smote_targets(labels: &[usize], k: usize, fraction: f64) -> Vec<usize> {
    let counts = class_counts(labels, k);
    let largest = (0..k).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
    (0..k)
        .map(|c| if c == largest { 0 } else { (counts[c] as f64 * fraction).round() as usize })
        .collect()
}

/// Splits real rows, then appends SMOTE rows generated from the training part only.
#[allow(clippy::too_many_arguments)]
fn split_and_augment(
    name: &str,
    class_names: Vec<String>,
    rows: &[Vec<f64>],
    labels: &[usize],
    origin: &[usize],
    test_fraction: f64,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<StageData, PipelineError> {
    let k = class_names.len();
    let (train, test) = at_stage(name, stratified_split(labels, &vec![false; labels.len()], k, test_fraction, seed))?;
    let mut x_train: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
    let mut y_train: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let targets = smote_targets(&y_train, k, cfg.smote_fraction);
    let synth = at_stage(name, smote_augment(&x_train, &y_train, &targets, cfg.smote_k_neighbors, seed + 1))?;
    let n_real = x_train.len();
    x_train.extend(synth.rows);
    y_train.extend(synth.labels);
    let mut provenance_train = vec![Provenance::Real; n_real];
    provenance_train.resize(x_train.len(), Provenance::Synthetic);
    let mut train_origin: Vec<Option<usize>> = train.iter().map(|&i| Some(origin[i])).collect();
    train_origin.resize(x_train.len(), None);
    Ok(StageData {
        name: name.to_string(),
        class_names,
        w_train: vec![1.0; x_train.len()],
        x_train,
        y_train,
        provenance_train,
        x_test: test.iter().map(|&i| rows[i].clone()).collect(),
        y_test: test.iter().map(|&i| labels[i]).collect(),
        train_origin,
        test_origin: test.iter().map(|&i| origin[i]).collect(),
    })
}

/// Presence rows: majority downsampling, split, SMOTE on the training part and 3:1 class weights.
pub fn prepare_presence(rows: &[Vec<f64>], barge_counts: &[u32], cfg: &PipelineConfig, seed: u64) -> Result<StageData, PipelineError> {
    let keep = downsample_majority(barge_counts, cfg.downsample_cap, seed + SEED_DOWNSAMPLE);
    let kept_rows: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();
    let labels: Vec<usize> = keep.iter().map(|&i| usize::from(barge_counts[i] > 0)).collect();
    let names = PRESENCE_CLASSES.map(String::from).to_vec();
    let mut data = split_and_augment("presence", names, &kept_rows, &labels, &keep, cfg.presence_test_fraction, cfg, seed)?;
    let real: Vec<usize> =
        data.y_train.iter().zip(&data.provenance_train).filter(|(_, &p)| p == Provenance::Real).map(|(&y, _)| y).collect();
    let weights = at_stage("presence", presence_class_weights(&real))?;
    data.w_train = weights.sample_weights(&data.y_train);
    Ok(data)
}

/// Quantity rows: every with-barge row binned by count, split, SMOTE on the training part.
pub fn prepare_quantity(
    rows: &[Vec<f64>],
    barge_counts: &[u32],
    map: &BargeClassMap,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<StageData, PipelineError> {
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| barge_counts[i] > 0).collect();
    let labels = at_stage("quantity", idx.iter().map(|&i| map.bin(barge_counts[i])).collect::<Result<Vec<_>, _>>())?;
    let q_rows: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
    split_and_augment("quantity", map.class_names(), &q_rows, &labels, &idx, cfg.quantity_test_fraction, cfg, seed)
}

/// Stratified folds over real rows; synthetic rows join every training part and no validation part.
fn augmented_folds(data: &StageData, k: usize, seed: u64) -> Result<Vec<Fold>, PipelineError> {
    let real: Vec<usize> = (0..data.y_train.len()).filter(|&i| data.provenance_train[i] == Provenance::Real).collect();
    let synthetic: Vec<usize> = (0..data.y_train.len()).filter(|&i| data.provenance_train[i] != Provenance::Real).collect();
    let labels: Vec<usize> = real.iter().map(|&i| data.y_train[i]).collect();
    let folds = at_stage(&data.name, stratified_kfold(&labels, k, seed))?;
    Ok(folds
        .into_iter()
        .map(|f| {
            let mut train: Vec<usize> = f.train.iter().map(|&j| real[j]).collect();
            train.extend(&synthetic);
            train.sort_unstable();
            Fold { train, validation: f.validation.iter().map(|&j| real[j]).collect() }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageOutcome {
    pub model: StageModel,
    pub spec: LearnerSpec,
    pub rfe: Option<RfeResult>,
    pub tuning: Option<TuneOutcome>,
    pub report: EvalReport,
}

/// Feature selection, tuning, final fit and held-out evaluation for one stage.
pub fn fit_stage(data: &StageData, spec: &LearnerSpec, cfg: &PipelineConfig, seed: u64) -> Result<StageOutcome, PipelineError> {
    let stage = data.name.as_str();
    let k = data.k();
    let x = Matrix::from_rows(&data.x_train);
    let folds = augmented_folds(data, cfg.cv_folds, seed + 2)?;
    let rfe = if cfg.run_rfe {
        let r = at_stage(stage, rfe_select(spec, &x, &data.y_train, &data.w_train, k, &folds, &cfg.rfe, seed + 3))?;
        log::info!("{stage}: rfe kept {} features, cv F1 {:.4}", r.best_subset.len(), r.best_score);
        Some(r)
    } else {
        None
    };
    let subset: Vec<usize> = rfe.as_ref().map_or_else(|| (0..x.n_cols()).collect(), |r| r.best_subset.clone());
    let xs = x.select_cols(&subset);
    let tuning = cfg.run_tuning.then(|| {
        let tcfg = TuningConfig { seed: cfg.tuning.seed.wrapping_add(seed + 4), ..cfg.tuning.clone() };
        let t = tune_learner(spec, &xs, &data.y_train, &data.w_train, k, &folds, &tcfg);
        for (name, s) in &t.studies {
            if s.status == StudyStatus::AllFailed {
                log::warn!("{stage}: every trial of study {name} failed; keeping defaults");
            }
        }
        t
    });
    let final_spec = tuning.as_ref().map_or_else(|| spec.clone(), |t| t.spec.clone());
    let model = at_stage(stage, final_spec.fit(&xs, &data.y_train, &data.w_train, k, seed + 5))?;
    let names = feature_names();
    let stage_model = StageModel {
        learner: final_spec.name(),
        feature_names: subset.iter().map(|&j| names[j].to_string()).collect(),
        feature_indices: subset.clone(),
        model,
    };
    let refs: Vec<&[f64]> = data.x_test.iter().map(Vec::as_slice).collect();
    let proba = at_stage(stage, stage_model.predict_proba(&refs))?;
    let pred: Vec<usize> = proba.iter().map(|p| argmax(p)).collect();
    let ctx = ReportContext {
        model_id: format!("{stage}:{}", final_spec.name()),
        feature_subset: stage_model.feature_names.clone(),
        seed,
        data_hash: data.test_hash(),
        provenance: "real".into(),
    };
    let report = at_stage(stage, build_report(&ctx, &data.class_names, &data.y_test, &pred, Some(&proba)))?;
    log::info!("{stage}: test weighted F1 {:.4} on {} rows", report.weighted.f1, data.y_test.len());
    Ok(StageOutcome { model: stage_model, spec: final_spec, rfe, tuning, report })
}

/// Stage rows as CSV: features, label, weight, provenance and split.
pub fn write_stage_csv<W: Write>(writer: W, data: &StageData) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = feature_names().into_iter().map(String::from).collect();
    header.extend(["label", "class", "weight", "provenance", "split"].map(String::from));
    w.write_record(&header)?;
    let mut put = |row: &[f64], y: usize, weight: f64, prov: Provenance, split: &str| {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.extend([y.to_string(), data.class_names[y].clone(), weight.to_string(), prov.as_str().into(), split.into()]);
        w.write_record(&rec)
    };
    for i in 0..data.x_train.len() {
        put(&data.x_train[i], data.y_train[i], data.w_train[i], data.provenance_train[i], "train")?;
    }
    for i in 0..data.x_test.len() {
        put(&data.x_test[i], data.y_test[i], 1.0, Provenance::Real, "test")?;
    }
    w.flush()?;
    Ok(())
}

/// Progress record written to `reports/manifest.json` after every step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub completed: Vec<String>,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub model: HierarchicalModel,
    pub presence: StageOutcome,
    pub quantity: StageOutcome,
    pub manifest: Manifest,
}

struct Run<'a> {
    out: &'a Path,
    manifest: Manifest,
}

impl Run<'_> {
    fn path(&mut self, rel: &str) -> Result<PathBuf, PipelineError> {
        let p = self.out.join(rel);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        if !self.manifest.artifacts.iter().any(|a| a == rel) {
            self.manifest.artifacts.push(rel.to_string());
        }
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), PipelineError> {
        let p = self.path(rel)?;
        fs::write(p, serde_json::to_string_pretty(value)? + "\n")?;
        Ok(())
    }

    fn done(&mut self, step: &str) -> Result<(), PipelineError> {
        self.manifest.completed.push(step.to_string());
        self.save_manifest()
    }

    fn save_manifest(&self) -> Result<(), PipelineError> {
        let p = self.out.join("reports/manifest.json");
        fs::create_dir_all(p.parent().expect("has parent"))?;
        fs::write(p, serde_json::to_string_pretty(&self.manifest)? + "\n")?;
        Ok(())
    }

    fn stage_outputs(&mut self, data: &StageData, outcome: &StageOutcome) -> Result<(), PipelineError> {
        let name = &data.name;
        let p = self.path(&format!("data/{name}_stage.csv"))?;
        write_stage_csv(fs::File::create(p)?, data)?;
        self.path(&format!("reports/{name}_eval.json"))?;
        self.path(&format!("reports/{name}_eval_confusion.csv"))?;
        emit_report(&outcome.report, &self.out.join("reports"), &format!("{name}_eval"))?;
        if let Some(rfe) = &outcome.rfe {
            let names = feature_names();
            let curve: Vec<serde_json::Value> = rfe
                .curve
                .iter()
                .map(|s| {
                    serde_json::json!({
                        "n_features": s.subset.len(),
                        "cv_mean": s.cv_mean,
                        "fold_scores": s.fold_scores,
                        "features": s.subset.iter().map(|&j| names[j]).collect::<Vec<_>>(),
                        "dropped": s.dropped.iter().map(|&j| names[j]).collect::<Vec<_>>(),
                    })
                })
                .collect();
            let best: Vec<&str> = rfe.best_subset.iter().map(|&j| names[j]).collect();
            self.json(&format!("reports/{name}_rfe.json"), &serde_json::json!({"best_subset": best, "best_score": rfe.best_score, "curve": curve}))?;
        }
        if let Some(t) = &outcome.tuning {
            let mut summary = serde_json::Map::new();
            for (study, s) in &t.studies {
                let best = s.best_trial();
                summary.insert(
                    study.clone(),
                    serde_json::json!({
                        "status": s.status,
                        "n_trials": s.trials.len(),
                        "best_trial": best.map(|b| b.number),
                        "best_objective": best.and_then(|b| b.objective),
                        "best_params": best.map(|b| &b.params),
                    }),
                );
                let log = self.path(&format!("logs/study_{name}_{}.jsonl", study.replace('#', "_")))?;
                fs::write(log, s.to_jsonl())?;
            }
            self.json(&format!("reports/{name}_tuning.json"), &serde_json::json!({"spec": t.spec, "studies": summary}))?;
        }
        Ok(())
    }
}

fn train_inner(
    run: &mut Run,
    cfg: &PipelineConfig,
    dataset: &LabeledDataset,
) -> Result<(HierarchicalModel, StageOutcome, StageOutcome), PipelineError> {
    if dataset.is_empty() {
        return Err(PipelineError::Stage { stage: "prep".into(), message: "labeled dataset is empty".into() });
    }
    let imputation: ImputationModel = at_stage("prep", kmeans_impute_fit(&dataset.rows, cfg.imputation_k, cfg.seed + SEED_IMPUTE))?;
    let rows: Vec<Vec<f64>> = dataset
        .rows
        .iter()
        .map(|r| {
            let mut v = r.clone();
            imputation.apply(&mut v);
            v
        })
        .collect();
    run.json("artifacts/imputation.json", &imputation)?;
    run.manifest.counts.insert("labeled_rows".into(), rows.len());
    run.manifest.counts.insert("with_barge_rows".into(), dataset.barge_count.iter().filter(|&&b| b > 0).count());
    run.done("prep")?;

    let map = BargeClassMap::default();
    let presence_data = prepare_presence(&rows, &dataset.barge_count, cfg, cfg.seed + SEED_PRESENCE)?;
    let quantity_data = prepare_quantity(&rows, &dataset.barge_count, &map, cfg, cfg.seed + SEED_QUANTITY)?;
    for d in [&presence_data, &quantity_data] {
        run.manifest.counts.insert(format!("{}_train_real", d.name), d.n_real_train());
        run.manifest.counts.insert(format!("{}_train_synthetic", d.name), d.x_train.len() - d.n_real_train());
        run.manifest.counts.insert(format!("{}_test", d.name), d.x_test.len());
    }
    let without = quantity_data
        .train_origin
        .iter()
        .flatten()
        .chain(&quantity_data.test_origin)
        .filter(|&&i| dataset.barge_count[i] == 0)
        .count();
    run.manifest.counts.insert("quantity_rows_without_barge".into(), without);
    run.done("split")?;

    let presence = fit_stage(&presence_data, &cfg.presence_learner, cfg, cfg.seed + SEED_PRESENCE)?;
    run.stage_outputs(&presence_data, &presence)?;
    run.done("presence")?;
    let quantity = fit_stage(&quantity_data, &cfg.quantity_learner, cfg, cfg.seed + SEED_QUANTITY)?;
    run.stage_outputs(&quantity_data, &quantity)?;
    run.done("quantity")?;

    let model = HierarchicalModel::new(cfg.seed, cfg.hash(), map, imputation, presence.model.clone(), quantity.model.clone());
    let p = run.path("artifacts/model.json")?;
    at_stage("save", save_model(&model, &p))?;
    run.done("save")?;
    Ok((model, presence, quantity))
}

/// Trains both stages from an already labeled dataset and writes artifacts under `out`.
pub fn train_from_dataset(cfg: &PipelineConfig, dataset: &LabeledDataset, out: &Path) -> Result<TrainingOutcome, PipelineError> {
    let mut run = Run { out, manifest: Manifest { config_hash: cfg.hash(), seed: cfg.seed, ..Manifest::default() } };
    train_with(&mut run, cfg, dataset)
}

fn train_with(run: &mut Run, cfg: &PipelineConfig, dataset: &LabeledDataset) -> Result<TrainingOutcome, PipelineError> {
    match train_inner(run, cfg, dataset) {
        Ok((model, presence, quantity)) => Ok(TrainingOutcome { model, presence, quantity, manifest: run.manifest.clone() }),
        Err(e) => Err(fail(run, e)),
    }
}

fn fail(run: &mut Run, e: PipelineError) -> PipelineError {
    run.manifest.failed_stage = Some(e.stage().unwrap_or("io").to_string());
    run.manifest.error = Some(e.to_string());
    if let Err(w) = run.save_manifest() {
        log::error!("could not write manifest: {w}");
    }
    e
}

/// Full run from raw inputs: labeled dataset, then both stages.
pub fn run_training(cfg: &PipelineConfig, out: &Path) -> Result<TrainingOutcome, PipelineError> {
    let mut run = Run { out, manifest: Manifest { config_hash: cfg.hash(), seed: cfg.seed, ..Manifest::default() } };
    let build = match build_labeled(cfg) {
        Ok(b) => b,
        Err(e) => return Err(fail(&mut run, e)),
    };
    let written = (|| -> Result<(), PipelineError> {
        let p = run.path("data/labeled.csv")?;
        write_dataset(fs::File::create(p)?, &build.dataset)?;
        run.json("reports/unmatched.json", &build.unmatched)?;
        run.json::<DataSummary>("reports/data_summary.json", &build.summary)?;
        run.manifest.counts.insert("trips".into(), build.summary.trips);
        run.manifest.counts.insert("matches".into(), build.summary.matches);
        run.done("data")
    })();
    if let Err(e) = written {
        return Err(fail(&mut run, e));
    }
    train_with(&mut run, cfg, &build.dataset)
}

/// Scores a saved model on a labeled dataset: presence over all rows, quantity over with-barge rows.
pub fn evaluate_dataset(model: &HierarchicalModel, dataset: &LabeledDataset) -> Result<(EvalReport, Option<EvalReport>), PipelineError> {
    let rows: Vec<Vec<f64>> = dataset.rows.iter().map(|r| model.complete(r)).collect();
    let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
    let hash = {
        let json = serde_json::to_string(&(&dataset.rows, &dataset.barge_count)).expect("rows serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    };
    let prov = if dataset.provenance.iter().all(|&p| p == Provenance::Real) { "real" } else { "mixed" };
    let ctx = |stage: &StageModel, name: &str| ReportContext {
        model_id: format!("{name}:{}", stage.learner),
        feature_subset: stage.feature_names.clone(),
        seed: model.seed,
        data_hash: hash.clone(),
        provenance: prov.into(),
    };
    let p_proba = model.presence.predict_proba(&refs)?;
    let p_pred: Vec<usize> = p_proba.iter().map(|p| argmax(p)).collect();
    let p_true: Vec<usize> = dataset.barge_count.iter().map(|&b| usize::from(b > 0)).collect();
    let names = PRESENCE_CLASSES.map(String::from).to_vec();
    let presence = build_report(&ctx(&model.presence, "presence"), &names, &p_true, &p_pred, Some(&p_proba))?;
    let with: Vec<usize> = (0..rows.len()).filter(|&i| dataset.barge_count[i] > 0).collect();
    if with.is_empty() {
        return Ok((presence, None));
    }
    let q_true = with.iter().map(|&i| model.class_map.bin(dataset.barge_count[i])).collect::<Result<Vec<_>, _>>()?;
    let q_proba = model.quantity.predict_proba(&with.iter().map(|&i| refs[i]).collect::<Vec<_>>())?;
    let q_pred: Vec<usize> = q_proba.iter().map(|p| argmax(p)).collect();
    let quantity =
        build_report(&ctx(&model.quantity, "quantity"), &model.class_map.class_names(), &q_true, &q_pred, Some(&q_proba))?;
    Ok((presence, Some(quantity)))
}

use serde::{Deserialize, Serialize};

use super::hierarchical::StageModel;
use super::train::prepare_quantity;
use super::{at_stage, PipelineConfig, PipelineError};
use crate::dataprep::{kmeans_impute_fit, BargeClassMap};
use crate::features::feature_names;
use crate::learners::{argmax, LearnerSpec, Matrix};
use crate::matching::LabeledDataset;
use crate::metrics::{build_report, EvalReport, ReportContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub holdout_location: String,
    pub source_locations: Vec<String>,
    pub n_source_rows: usize,
    pub n_holdout_rows: usize,
    /// Held-out part of the source locations.
    pub in_domain: EvalReport,
    pub holdout: EvalReport,
}

/// Trains the quantity stage on every location but `holdout` and scores it on the held-out location.
///
/// Imputation is fitted on source rows only, so nothing from the held-out location reaches training.
pub fn transfer_run(dataset: &LabeledDataset, holdout: &str, spec: &LearnerSpec, cfg: &PipelineConfig) -> Result<TransferOutcome, PipelineError> {
    let stage = "transfer";
    let is_hold: Vec<bool> = dataset.location_id.iter().map(|l| l == holdout).collect();
    if !is_hold.iter().any(|&h| h) {
        return Err(PipelineError::Config(format!("location {holdout:?} has no labeled rows")));
    }
    let source_idx: Vec<usize> = (0..dataset.len()).filter(|&i| !is_hold[i]).collect();
    if source_idx.is_empty() {
        return Err(PipelineError::Config("transfer needs at least one source location".into()));
    }
    let source = dataset.select(&source_idx);
    let imputation = at_stage(stage, kmeans_impute_fit(&source.rows, cfg.imputation_k, cfg.seed + 2))?;
    let fill = |r: &Vec<f64>| {
        let mut v = r.clone();
        imputation.apply(&mut v);
        v
    };
    let map = BargeClassMap::default();
    let data = prepare_quantity(&source.rows.iter().map(fill).collect::<Vec<_>>(), &source.barge_count, &map, cfg, cfg.seed + 300)?;
    let x = Matrix::from_rows(&data.x_train);
    let model = at_stage(stage, spec.fit(&x, &data.y_train, &data.w_train, data.k(), cfg.seed + 301))?;
    let names = feature_names();
    let stage_model = StageModel {
        learner: spec.name(),
        feature_names: names.iter().map(|n| n.to_string()).collect(),
        feature_indices: (0..names.len()).collect(),
        model,
    };
    let score = |rows: &[Vec<f64>], y: &[usize], hash: String| -> Result<EvalReport, PipelineError> {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let proba = stage_model.predict_proba(&refs)?;
        let pred: Vec<usize> = proba.iter().map(|p| argmax(p)).collect();
        let ctx = ReportContext {
            model_id: format!("quantity:{}", spec.name()),
            feature_subset: stage_model.feature_names.clone(),
            seed: cfg.seed,
            data_hash: hash,
            provenance: "real".into(),
        };
        Ok(build_report(&ctx, &data.class_names, y, &pred, Some(&proba))?)
    };
    let in_domain = score(&data.x_test, &data.y_test, data.test_hash())?;

    let hold_idx: Vec<usize> = (0..dataset.len()).filter(|&i| is_hold[i] && dataset.barge_count[i] > 0).collect();
    if hold_idx.is_empty() {
        return Err(PipelineError::Config(format!("location {holdout:?} has no with-barge rows")));
    }
    let hold_rows: Vec<Vec<f64>> = hold_idx.iter().map(|&i| fill(&dataset.rows[i])).collect();
    let hold_y = at_stage(stage, hold_idx.iter().map(|&i| map.bin(dataset.barge_count[i])).collect::<Result<Vec<_>, _>>())?;
    let hold_hash = {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(serde_json::to_string(&(&hold_rows, &hold_y)).expect("rows serialize").as_bytes()))
    };
    let holdout_report = score(&hold_rows, &hold_y, hold_hash)?;
    let mut sources: Vec<String> = source.location_id.clone();
    sources.sort();
    sources.dedup();
    Ok(TransferOutcome {
        holdout_location: holdout.to_string(),
        source_locations: sources,
        n_source_rows: data.x_train.len(),
        n_holdout_rows: hold_rows.len(),
        in_domain,
        holdout: holdout_report,
    })
}

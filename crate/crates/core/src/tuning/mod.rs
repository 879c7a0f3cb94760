//! Cross-validation, recursive feature elimination and TPE hyperparameter search.

mod rfe;
mod space;
mod tpe;

pub use rfe::{permutation_importance, rfe_select, RfeConfig, RfeFailure, RfeResult, RfeStep};
pub use space::{apply_params, HyperparameterSpace, ParamDef, ParamKind, ParamValue, Params};
pub use tpe::{tpe_optimize, Evaluation, StudyResult, StudyStatus, TpeConfig, Trial, TrialStatus};

use serde::{Deserialize, Serialize};

use crate::dataprep::Fold;
use crate::learners::{LearnError, LearnerSpec, Matrix};
use crate::metrics::weighted_f1;

/// Scores predictions against truth for `k` classes.
pub type Metric = fn(&[usize], &[usize], usize) -> f64;

pub fn weighted_f1_metric(y_true: &[usize], y_pred: &[usize], k: usize) -> f64 {
    weighted_f1(y_true, y_pred, k).unwrap_or(0.0)
}

pub fn accuracy_metric(y_true: &[usize], y_pred: &[usize], _k: usize) -> f64 {
    if y_true.is_empty() {
        return 0.0;
    }
    y_true.iter().zip(y_pred).filter(|(a, b)| a == b).count() as f64 / y_true.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub mean: f64,
    pub fold_scores: Vec<f64>,
}

/// Runs `predict` on every fold and scores its validation predictions.
pub fn cross_validate_by<F>(folds: &[Fold], y: &[usize], k: usize, metric: Metric, mut predict: F) -> Result<CvResult, LearnError>
where
    F: FnMut(usize, &Fold) -> Result<Vec<usize>, LearnError>,
{
    let mut fold_scores = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let pred = predict(f, fold).map_err(|e| LearnError::Fold { fold: f, message: e.to_string() })?;
        let truth: Vec<usize> = fold.validation.iter().map(|&i| y[i]).collect();
        fold_scores.push(metric(&truth, &pred, k));
    }
    let mean = fold_scores.iter().sum::<f64>() / fold_scores.len().max(1) as f64;
    Ok(CvResult { mean, fold_scores })
}

/// Fits `spec` on each fold's training rows; fold `f` trains with seed `seed + f`.
#[allow(clippy::too_many_arguments)]
pub fn cross_validate(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    k: usize,
    folds: &[Fold],
    seed: u64,
    metric: Metric,
) -> Result<CvResult, LearnError> {
    cross_validate_by(folds, y, k, metric, |f, fold| {
        let yt: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
        let wt: Vec<f64> = fold.train.iter().map(|&i| w[i]).collect();
        let model = spec.fit(&x.select_rows(&fold.train), &yt, &wt, k, seed.wrapping_add(f as u64))?;
        model.predict(&x.select_rows(&fold.validation))
    })
}

/// Tuning settings as read from a JSON config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningConfig {
    pub tpe: TpeConfig,
    /// Replacements for the default parameter ranges, matched by name.
    pub space_overrides: Vec<ParamDef>,
    pub seed: u64,
}

/// Outcome of tuning one learner; stacks carry one study per tunable base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub spec: LearnerSpec,
    pub studies: Vec<(String, StudyResult)>,
}

fn tune_single(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    k: usize,
    folds: &[Fold],
    cfg: &TuningConfig,
) -> (LearnerSpec, Option<StudyResult>) {
    let Some(space) = HyperparameterSpace::for_learner(spec) else {
        return (spec.clone(), None);
    };
    let space = space.with_overrides(&cfg.space_overrides);
    let study = tpe_optimize(
        &space,
        |params| {
            let candidate = apply_params(spec, params);
            cross_validate(&candidate, x, y, w, k, folds, cfg.seed, weighted_f1_metric)
                .map(|cv| Evaluation { objective: 1.0 - cv.mean, fold_scores: cv.fold_scores })
                .map_err(|e| e.to_string())
        },
        &cfg.tpe,
        cfg.seed,
    );
    let tuned = study.best_trial().map_or_else(|| spec.clone(), |t| apply_params(spec, &t.params));
    (tuned, Some(study))
}

/// Minimizes 1 - mean CV weighted F1. Stack bases are tuned one at a time as standalone models.
pub fn tune_learner(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    k: usize,
    folds: &[Fold],
    cfg: &TuningConfig,
) -> TuneOutcome {
    match spec {
        LearnerSpec::Stacked { bases, folds: n_folds } => {
            let mut studies = Vec::new();
            let mut tuned = Vec::with_capacity(bases.len());
            for (b, base) in bases.iter().enumerate() {
                let (t, study) = tune_single(base, x, y, w, k, folds, cfg);
                if let Some(s) = study {
                    studies.push((format!("{}#{b}", base.name()), s));
                }
                tuned.push(t);
            }
            TuneOutcome { spec: LearnerSpec::Stacked { bases: tuned, folds: *n_folds }, studies }
        }
        _ => {
            let (t, study) = tune_single(spec, x, y, w, k, folds, cfg);
            TuneOutcome { spec: t, studies: study.map(|s| vec![(spec.name(), s)]).unwrap_or_default() }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataprep::stratified_kfold;
    use crate::learners::CartParams;

    #[test]
    fn constant_and_oracle_models() {
        let y: Vec<usize> = (0..20).map(|i| i % 2).collect();
        let folds = stratified_kfold(&y, 5, 1).unwrap();
        let constant = cross_validate_by(&folds, &y, 2, accuracy_metric, |_, f| Ok(vec![0; f.validation.len()])).unwrap();
        assert_eq!(constant.fold_scores.len(), 5);
        assert!((constant.mean - 0.5).abs() <= 0.25);
        let oracle =
            cross_validate_by(&folds, &y, 2, weighted_f1_metric, |_, f| Ok(f.validation.iter().map(|&i| y[i]).collect()))
                .unwrap();
        assert_eq!(oracle.mean, 1.0);
    }

    #[test]
    fn fold_failure_is_reported() {
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let folds = stratified_kfold(&y, 5, 1).unwrap();
        let r = cross_validate_by(&folds, &y, 2, accuracy_metric, |_, _| Err(LearnError::SingleClass));
        assert!(matches!(r, Err(LearnError::Fold { fold: 0, .. })));
    }

    #[test]
    fn cart_cv_on_separable_data() {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64]).collect();
        let y: Vec<usize> = (0..30).map(|i| usize::from(i >= 15)).collect();
        let folds = stratified_kfold(&y, 5, 0).unwrap();
        let cv = cross_validate(
            &LearnerSpec::Cart(CartParams::default()),
            &Matrix::from_rows(&rows),
            &y,
            &[1.0; 30],
            2,
            &folds,
            0,
            weighted_f1_metric,
        )
        .unwrap();
        assert!(cv.mean > 0.9);
    }
}

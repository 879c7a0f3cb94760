use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{cross_validate, weighted_f1_metric};
use crate::dataprep::Fold;
use crate::learners::{LearnError, LearnerSpec, Matrix, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfeConfig {
    pub min_features: usize,
    /// Features removed per iteration.
    pub step: usize,
    pub permutation_repeats: usize,
}

impl Default for RfeConfig {
    fn default() -> Self {
        Self { min_features: 1, step: 1, permutation_repeats: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    /// Column indices of the input matrix still in play.
    pub subset: Vec<usize>,
    pub cv_mean: f64,
    pub fold_scores: Vec<f64>,
    /// Columns removed after scoring this size.
    pub dropped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    pub best_subset: Vec<usize>,
    pub best_score: f64,
    pub curve: Vec<RfeStep>,
}

#[derive(Debug, Error)]
#[error("feature elimination stopped at {} features: {source}", .partial.last().map_or(0, |s| s.subset.len()))]
pub struct RfeFailure {
    pub source: LearnError,
    pub partial: Vec<RfeStep>,
}

/// Mean drop in weighted F1 on `(x, y)` when each column is shuffled, `repeats` times per column.
pub fn permutation_importance(
    model: &Model,
    x: &Matrix,
    y: &[usize],
    k: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<f64>, LearnError> {
    let base = weighted_f1_metric(y, &model.predict(x)?, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let original = x.column(j);
        let mut shuffled = x.clone();
        let mut drop = 0.0;
        for _ in 0..repeats.max(1) {
            let mut col = original.clone();
            col.shuffle(&mut rng);
            for (i, v) in col.iter().enumerate() {
                shuffled.set(i, j, *v);
            }
            drop += base - weighted_f1_metric(y, &model.predict(&shuffled)?, k);
        }
        out.push(drop / repeats.max(1) as f64);
    }
    Ok(out)
}

/// Backward elimination scored by mean CV weighted F1. The best size wins; ties go to fewer features.
#[allow(clippy::too_many_arguments)]
pub fn rfe_select(
    spec: &LearnerSpec,
    x: &Matrix,
    y: &[usize],
    w: &[f64],
    k: usize,
    folds: &[Fold],
    cfg: &RfeConfig,
    seed: u64,
) -> Result<RfeResult, RfeFailure> {
    let min = cfg.min_features.clamp(1, x.n_cols().max(1));
    let mut subset: Vec<usize> = (0..x.n_cols()).collect();
    let mut curve: Vec<RfeStep> = Vec::new();
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(source) => return Err(RfeFailure { source, partial: curve }),
            }
        };
    }
    loop {
        let xs = x.select_cols(&subset);
        let cv = attempt!(cross_validate(spec, &xs, y, w, k, folds, seed, weighted_f1_metric));
        log::debug!("rfe: {} features, cv {:.4}", subset.len(), cv.mean);
        if subset.len() <= min {
            curve.push(RfeStep { subset: subset.clone(), cv_mean: cv.mean, fold_scores: cv.fold_scores, dropped: vec![] });
            break;
        }
        let model = attempt!(spec.fit(&xs, y, w, k, seed));
        let importance = match model.feature_importances() {
            Some(imp) => imp,
            None => attempt!(permutation_importance(&model, &xs, y, k, cfg.permutation_repeats, seed)),
        };
        // Least important first; equal scores drop the higher column index first.
        let mut order: Vec<usize> = (0..subset.len()).collect();
        order.sort_by(|&a, &b| importance[a].total_cmp(&importance[b]).then(b.cmp(&a)));
        let n_drop = cfg.step.max(1).min(subset.len() - min);
        let mut drop_pos: Vec<usize> = order[..n_drop].to_vec();
        let dropped: Vec<usize> = drop_pos.iter().map(|&p| subset[p]).collect();
        curve.push(RfeStep { subset: subset.clone(), cv_mean: cv.mean, fold_scores: cv.fold_scores, dropped });
        drop_pos.sort_unstable_by(|a, b| b.cmp(a));
        for p in drop_pos {
            subset.remove(p);
        }
    }
    let best = curve
        .iter()
        .enumerate()
        .fold(0, |bi, (i, s)| if s.cv_mean >= curve[bi].cv_mean { i } else { bi });
    Ok(RfeResult { best_subset: curve[best].subset.clone(), best_score: curve[best].cv_mean, curve })
}

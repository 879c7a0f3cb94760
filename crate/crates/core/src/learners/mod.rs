//! Weighted classifiers: CART, random forest, SAMME AdaBoost, histogram GBDT,
//! KNN and stacked ensembles, plus JSON model artifacts.

mod adaboost;
mod artifact;
mod forest;
mod gbdt;
mod knn;
mod stack;
mod tree;

pub use adaboost::{AdaBoost, AdaBoostParams};
pub use artifact::{from_json, load_model, save_model, to_json, ArtifactError, ModelArtifact, ARTIFACT_FORMAT_VERSION};
pub use forest::{RandomForest, RandomForestParams};
pub use gbdt::{Gbdt, GbdtParams, GbdtTree, RegNode};
pub use knn::{Knn, KnnParams};
pub use stack::{LogisticMeta, Stacked};
pub use tree::{gini, CartParams, DecisionTree, TreeNode};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    Empty,
    #[error("sample weights are all zero")]
    ZeroWeights,
    #[error("negative or non-finite sample weight at row {0}")]
    BadWeight(usize),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("feature width mismatch: model expects {expected}, input has {got}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("label {0} out of range for {1} classes")]
    LabelOutOfRange(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("fold {fold} failed: {message}")]
    Fold { fold: usize, message: String },
}

/// Dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix::new(idx.len(), self.cols, data)
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix::new(self.rows, cols.len(), data)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }
}

/// Validates shapes, weights and labels shared by every learner.
pub(crate) fn check_training(x: &Matrix, y: &[usize], w: &[f64], k: usize) -> Result<(), LearnError> {
    if x.n_rows() == 0 {
        return Err(LearnError::Empty);
    }
    if y.len() != x.n_rows() || w.len() != x.n_rows() {
        return Err(LearnError::LengthMismatch(format!(
            "{} rows, {} labels, {} weights",
            x.n_rows(),
            y.len(),
            w.len()
        )));
    }
    if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(LearnError::BadWeight(i));
    }
    if w.iter().all(|&v| v == 0.0) {
        return Err(LearnError::ZeroWeights);
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= k) {
        return Err(LearnError::LabelOutOfRange(bad, k));
    }
    Ok(())
}

pub(crate) fn check_width(expected: usize, x: &Matrix) -> Result<(), LearnError> {
    if x.n_cols() != expected {
        return Err(LearnError::WidthMismatch { expected, got: x.n_cols() });
    }
    Ok(())
}

/// Independent random stream for ensemble member `member`.
pub(crate) fn member_rng(seed: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// A learner kind plus its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearnerSpec {
    Cart(CartParams),
    RandomForest(RandomForestParams),
    AdaBoost(AdaBoostParams),
    Gbdt(GbdtParams),
    Knn(KnnParams),
    Stacked { bases: Vec<LearnerSpec>, folds: usize },
}

impl LearnerSpec {
    pub fn name(&self) -> String {
        match self {
            LearnerSpec::Cart(_) => "cart".into(),
            LearnerSpec::RandomForest(_) => "rf".into(),
            LearnerSpec::AdaBoost(_) => "adaboost".into(),
            LearnerSpec::Gbdt(_) => "gbdt".into(),
            LearnerSpec::Knn(_) => "knn".into(),
            LearnerSpec::Stacked { bases, .. } => {
                bases.iter().map(LearnerSpec::name).collect::<Vec<_>>().join("+")
            }
        }
    }

    /// Whether fitted models expose native impurity-based importances.
    pub fn has_native_importance(&self) -> bool {
        !matches!(self, LearnerSpec::Knn(_) | LearnerSpec::Stacked { .. })
    }

    pub fn fit(&self, x: &Matrix, y: &[usize], w: &[f64], k: usize, seed: u64) -> Result<Model, LearnError> {
        check_training(x, y, w, k)?;
        Ok(match self {
            LearnerSpec::Cart(p) => Model::Cart(DecisionTree::fit(x, y, w, k, p)?),
            LearnerSpec::RandomForest(p) => Model::RandomForest(RandomForest::fit(x, y, w, k, p, seed)?),
            LearnerSpec::AdaBoost(p) => Model::AdaBoost(AdaBoost::fit(x, y, w, k, p)?),
            LearnerSpec::Gbdt(p) => Model::Gbdt(Gbdt::fit(x, y, w, k, p)?),
            LearnerSpec::Knn(p) => Model::Knn(Knn::fit(x, y, k, p)?),
            LearnerSpec::Stacked { bases, folds } => {
                Model::Stacked(Stacked::fit(bases, x, y, w, k, *folds, seed)?)
            }
        })
    }
}

/// A fitted learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Cart(DecisionTree),
    RandomForest(RandomForest),
    AdaBoost(AdaBoost),
    Gbdt(Gbdt),
    Knn(Knn),
    Stacked(Stacked),
}

impl Model {
    pub fn n_classes(&self) -> usize {
        match self {
            Model::Cart(m) => m.n_classes,
            Model::RandomForest(m) => m.n_classes,
            Model::AdaBoost(m) => m.n_classes,
            Model::Gbdt(m) => m.n_classes,
            Model::Knn(m) => m.n_classes,
            Model::Stacked(m) => m.n_classes,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Model::Cart(m) => m.n_features,
            Model::RandomForest(m) => m.n_features,
            Model::AdaBoost(m) => m.n_features,
            Model::Gbdt(m) => m.n_features,
            Model::Knn(m) => m.n_features(),
            Model::Stacked(m) => m.n_features,
        }
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>, LearnError> {
        check_width(self.n_features(), x)?;
        Ok(match self {
            Model::Cart(m) => (0..x.n_rows()).map(|i| m.predict_row(x.row(i)).to_vec()).collect(),
            Model::RandomForest(m) => m.predict_proba(x),
            Model::AdaBoost(m) => m.predict_proba(x),
            Model::Gbdt(m) => m.predict_proba(x),
            Model::Knn(m) => m.predict_proba(x),
            Model::Stacked(m) => m.predict_proba(x)?,
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, LearnError> {
        Ok(self.predict_proba(x)?.iter().map(|p| argmax(p)).collect())
    }

    /// Impurity-based importances for tree models; `None` otherwise.
    pub fn feature_importances(&self) -> Option<Vec<f64>> {
        match self {
            Model::Cart(m) => Some(m.importances.clone()),
            Model::RandomForest(m) => Some(m.importances()),
            Model::AdaBoost(m) => Some(m.importances()),
            Model::Gbdt(m) => Some(m.importances.clone()),
            Model::Knn(_) | Model::Stacked(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_selection() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(m.select_cols(&[2, 0]).row(1), &[6.0, 4.0]);
        assert_eq!(m.select_rows(&[1]).row(0), &[4.0, 5.0, 6.0]);
        assert_eq!(m.column(1), vec![2.0, 5.0]);
    }

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.5, 0.5]), 0);
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
    }

    #[test]
    fn training_checks() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert_eq!(check_training(&x, &[0, 1], &[0.0, 0.0], 2), Err(LearnError::ZeroWeights));
        assert_eq!(check_training(&x, &[0, 2], &[1.0, 1.0], 2), Err(LearnError::LabelOutOfRange(2, 2)));
        assert!(matches!(check_training(&x, &[0], &[1.0], 2), Err(LearnError::LengthMismatch(_))));
        let empty = Matrix::new(0, 1, vec![]);
        assert_eq!(check_training(&empty, &[], &[], 2), Err(LearnError::Empty));
    }

    #[test]
    fn spec_serde_tags() {
        let s = LearnerSpec::Stacked {
            bases: vec![
                LearnerSpec::RandomForest(RandomForestParams::default()),
                LearnerSpec::AdaBoost(AdaBoostParams::default()),
            ],
            folds: 5,
        };
        let json = serde_json::to_string(&s).unwrap();
        assert!(json.contains("\"kind\":\"stacked\""));
        assert_eq!(serde_json::from_str::<LearnerSpec>(&json).unwrap(), s);
        assert_eq!(s.name(), "rf+adaboost");
    }
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{member_rng, CartParams, DecisionTree, LearnError, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for RandomForestParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_classes: usize,
    pub n_features: usize,
    pub params: RandomForestParams,
}

impl RandomForest {
    pub fn fit(
        x: &Matrix,
        y: &[usize],
        w: &[f64],
        k: usize,
        params: &RandomForestParams,
        seed: u64,
    ) -> Result<Self, LearnError> {
        if params.n_estimators == 0 {
            return Err(LearnError::InvalidParam("n_estimators must be positive".into()));
        }
        let n = x.n_rows();
        let d = x.n_cols();
        let cart = CartParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            min_samples_leaf: params.min_samples_leaf,
            max_features: Some(((d as f64).sqrt().floor() as usize).max(1)),
        };
        let mut trees = Vec::with_capacity(params.n_estimators);
        let mut bw = vec![0.0; n];
        for m in 0..params.n_estimators {
            let mut rng = member_rng(seed, m as u64);
            let mut mult = vec![0u32; n];
            for _ in 0..n {
                mult[rng.random_range(0..n)] += 1;
            }
            for i in 0..n {
                bw[i] = mult[i] as f64 * w[i];
            }
            let mut rows: Vec<usize> = (0..n).filter(|&i| mult[i] > 0).collect();
            if rows.iter().all(|&i| bw[i] == 0.0) {
                // Every drawn row had zero weight; fall back to the full sample.
                rows = (0..n).collect();
                bw.copy_from_slice(w);
            }
            trees.push(DecisionTree::grow(x, y, &bw, k, &cart, rows, Some(&mut rng), None));
        }
        Ok(Self {
            trees,
            n_classes: k,
            n_features: d,
            params: params.clone(),
        })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let scale = 1.0 / self.trees.len() as f64;
        (0..x.n_rows())
            .map(|i| {
                let mut acc = vec![0.0; self.n_classes];
                for t in &self.trees {
                    for (a, p) in acc.iter_mut().zip(t.predict_row(x.row(i))) {
                        *a += p;
                    }
                }
                acc.iter_mut().for_each(|a| *a *= scale);
                acc
            })
            .collect()
    }

    /// Impurity decrease summed over members.
    pub fn importances(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, b) in imp.iter_mut().zip(&t.importances) {
                *a += b;
            }
        }
        imp
    }
}

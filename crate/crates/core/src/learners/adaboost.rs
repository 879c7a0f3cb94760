use serde::{Deserialize, Serialize};

use super::{argmax, CartParams, DecisionTree, LearnError, Matrix};

/// Floor applied to a zero training error so the member weight stays finite.
const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
}

impl Default for AdaBoostParams {
    fn default() -> Self {
        Self {
            n_estimators: 50,
            learning_rate: 1.0,
        }
    }
}

/// Multiclass SAMME over depth-1 trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<DecisionTree>,
    pub alphas: Vec<f64>,
    /// Weighted training error of each kept member.
    pub errors: Vec<f64>,
    pub n_classes: usize,
    pub n_features: usize,
    pub params: AdaBoostParams,
}

impl AdaBoost {
    pub fn fit(x: &Matrix, y: &[usize], w: &[f64], k: usize, params: &AdaBoostParams) -> Result<Self, LearnError> {
        if params.n_estimators == 0 || !(params.learning_rate > 0.0) {
            return Err(LearnError::InvalidParam(format!("{params:?}")));
        }
        let present = (0..k)
            .filter(|&c| y.iter().zip(w).any(|(&yi, &wi)| yi == c && wi > 0.0))
            .count();
        if k < 2 || present < 2 {
            return Err(LearnError::SingleClass);
        }
        let n = x.n_rows();
        let order: Vec<Vec<usize>> = (0..x.n_cols())
            .map(|f| {
                let mut o: Vec<usize> = (0..n).collect();
                o.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
                o
            })
            .collect();
        let total: f64 = w.iter().sum();
        let mut weights: Vec<f64> = w.iter().map(|v| v / total).collect();
        let stump_params = CartParams::stump();
        let chance = 1.0 - 1.0 / k as f64;
        let mut model = AdaBoost {
            stumps: Vec::new(),
            alphas: Vec::new(),
            errors: Vec::new(),
            n_classes: k,
            n_features: x.n_cols(),
            params: params.clone(),
        };
        for _ in 0..params.n_estimators {
            let stump =
                DecisionTree::grow(x, y, &weights, k, &stump_params, (0..n).collect(), None, Some(&order));
            let miss: Vec<bool> = (0..n).map(|i| argmax(stump.predict_row(x.row(i))) != y[i]).collect();
            let wsum: f64 = weights.iter().sum();
            let err: f64 = weights.iter().zip(&miss).filter(|(_, &m)| m).map(|(v, _)| v).sum::<f64>() / wsum;
            if err >= chance {
                break;
            }
            let perfect = err <= 0.0;
            let e = err.max(MIN_ERROR);
            let alpha = params.learning_rate * (((1.0 - e) / e).ln() + ((k - 1) as f64).ln());
            model.stumps.push(stump);
            model.alphas.push(alpha);
            model.errors.push(err);
            if perfect {
                break;
            }
            let boost = alpha.exp();
            for (v, &m) in weights.iter_mut().zip(&miss) {
                if m {
                    *v *= boost;
                }
            }
            let s: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|v| *v /= s);
        }
        Ok(model)
    }

    /// Weighted vote per class.
    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        let mut m = vec![0.0; self.n_classes];
        for (s, a) in self.stumps.iter().zip(&self.alphas) {
            m[argmax(s.predict_row(row))] += a;
        }
        m
    }

    /// Softmax of the vote margins scaled by the total member weight.
    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let total: f64 = self.alphas.iter().sum();
        (0..x.n_rows())
            .map(|i| {
                if self.stumps.is_empty() || total <= 0.0 {
                    return vec![1.0 / self.n_classes as f64; self.n_classes];
                }
                let m = self.margins(x.row(i));
                let top = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = m.iter().map(|v| ((v - top) / total).exp()).collect();
                let z: f64 = e.iter().sum();
                e.iter().map(|v| v / z).collect()
            })
            .collect()
    }

    /// Member-weighted sum of each stump's normalized importances.
    pub fn importances(&self) -> Vec<f64> {
        let mut imp = vec![0.0; self.n_features];
        for (s, a) in self.stumps.iter().zip(&self.alphas) {
            let t: f64 = s.importances.iter().sum();
            if t > 0.0 {
                for (acc, v) in imp.iter_mut().zip(&s.importances) {
                    *acc += a * v / t;
                }
            }
        }
        imp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_formula() {
        let err: f64 = 0.25;
        let alpha = ((1.0 - err) / err).ln() + 1f64.ln();
        assert!((alpha - 3f64.ln()).abs() < 1e-15);
        assert!((alpha - 1.0986).abs() < 1e-4);
    }

    #[test]
    fn separable_reaches_zero_error() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 - 9.5]).collect();
        let y: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let x = Matrix::from_rows(&rows);
        let m = AdaBoost::fit(&x, &y, &[1.0; 20], 2, &AdaBoostParams::default()).unwrap();
        assert!(m.stumps.len() <= 10);
        let proba = m.predict_proba(&x);
        assert!(proba.iter().zip(&y).all(|(p, &t)| argmax(p) == t));
    }

    #[test]
    fn first_member_weight_from_error() {
        // A single stump can only get 3 of the 4 outer points right: err = 0.25.
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let y = [0, 1, 1, 0];
        let m = AdaBoost::fit(&x, &y, &[1.0; 4], 2, &AdaBoostParams { n_estimators: 1, learning_rate: 1.0 }).unwrap();
        assert_eq!(m.errors[0], 0.25);
        assert!((m.alphas[0] - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert_eq!(AdaBoost::fit(&x, &[1, 1], &[1.0; 2], 2, &AdaBoostParams::default()), Err(LearnError::SingleClass));
    }

    #[test]
    fn duplicate_row_matches_doubled_weight() {
        let rows = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![2.0, 3.0], vec![3.0, 2.0], vec![4.0, 4.0]];
        let y = [0, 1, 0, 1, 1];
        let p = AdaBoostParams { n_estimators: 5, learning_rate: 0.5 };
        let a = AdaBoost::fit(&Matrix::from_rows(&rows), &y, &[1.0, 2.0, 1.0, 1.0, 1.0], 2, &p).unwrap();
        let mut rd = rows.clone();
        rd.push(rows[1].clone());
        let mut yd = y.to_vec();
        yd.push(1);
        let b = AdaBoost::fit(&Matrix::from_rows(&rd), &yd, &[1.0; 6], 2, &p).unwrap();
        assert_eq!(a.alphas.len(), b.alphas.len());
        for (x, z) in a.alphas.iter().zip(&b.alphas) {
            assert!((x - z).abs() < 1e-12);
        }
        let q = Matrix::from_rows(&rows);
        assert_eq!(a.predict_proba(&q).len(), 5);
    }
}

use serde::{Deserialize, Serialize};

use super::{LearnError, LearnerSpec, Matrix, Model};
use crate::dataprep::{stratified_kfold, Fold};

const META_LAMBDA: f64 = 1.0;
const META_TOL: f64 = 1e-6;
const META_MAX_STEPS: usize = 5000;

/// Multinomial logistic regression with an L2 penalty on the coefficients (not the intercepts).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticMeta {
    /// `coef[c]` holds the input weights of class `c`.
    pub coef: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub steps: usize,
    pub grad_norm: f64,
}

fn softmax_into(z: &mut [f64]) {
    let top = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - top).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

impl LogisticMeta {
    /// Accelerated full-batch gradient descent on the weighted mean cross-entropy
    /// plus `lambda / (2N) * ||coef||^2`.
    pub fn fit(x: &Matrix, y: &[usize], w: &[f64], k: usize, lambda: f64) -> Self {
        let (n, m) = (x.n_rows(), x.n_cols());
        let stride = m + 1;
        let wsum: f64 = w.iter().sum();
        let wn: Vec<f64> = w.iter().map(|v| v / wsum).collect();
        let reg = lambda / n as f64;
        let max_sq = (0..n).map(|i| x.row(i).iter().map(|v| v * v).sum::<f64>() + 1.0).fold(0.0, f64::max);
        let step = 1.0 / (0.5 * max_sq + reg);

        let grad = |theta: &[f64], g: &mut [f64]| {
            g.iter_mut().for_each(|v| *v = 0.0);
            let mut z = vec![0.0; k];
            for i in 0..n {
                let row = x.row(i);
                for c in 0..k {
                    let t = &theta[c * stride..(c + 1) * stride];
                    z[c] = t[m] + row.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
                }
                softmax_into(&mut z);
                for c in 0..k {
                    let r = wn[i] * (z[c] - f64::from(y[i] == c));
                    let gc = &mut g[c * stride..(c + 1) * stride];
                    for (gv, xv) in gc.iter_mut().zip(row) {
                        *gv += r * xv;
                    }
                    gc[m] += r;
                }
            }
            for c in 0..k {
                for j in 0..m {
                    g[c * stride + j] += reg * theta[c * stride + j];
                }
            }
            g.iter().map(|v| v * v).sum::<f64>().sqrt()
        };

        let size = k * stride;
        let mut theta = vec![0.0; size];
        let mut look = theta.clone();
        let mut next = vec![0.0; size];
        let mut g = vec![0.0; size];
        let mut t = 1.0f64;
        let mut steps = 0;
        let mut gnorm = f64::INFINITY;
        while steps < META_MAX_STEPS {
            gnorm = grad(&look, &mut g);
            if gnorm < META_TOL {
                theta.copy_from_slice(&look);
                break;
            }
            for j in 0..size {
                next[j] = look[j] - step * g[j];
            }
            // Momentum restart when the step opposes the previous direction.
            let restart: f64 = (0..size).map(|j| g[j] * (next[j] - theta[j])).sum();
            let t_next = if restart > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
            let beta = if restart > 0.0 { 0.0 } else { (t - 1.0) / t_next };
            for j in 0..size {
                look[j] = next[j] + beta * (next[j] - theta[j]);
            }
            theta.copy_from_slice(&next);
            t = t_next;
            steps += 1;
        }
        LogisticMeta {
            coef: (0..k).map(|c| theta[c * stride..c * stride + m].to_vec()).collect(),
            intercept: (0..k).map(|c| theta[c * stride + m]).collect(),
            steps,
            grad_norm: gnorm,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self
            .coef
            .iter()
            .zip(&self.intercept)
            .map(|(c, b)| b + c.iter().zip(row).map(|(a, v)| a * v).sum::<f64>())
            .collect();
        softmax_into(&mut z);
        z
    }
}

/// Base learners refit on all rows plus a meta-model trained on their out-of-fold probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stacked {
    pub bases: Vec<Model>,
    pub meta: LogisticMeta,
    /// Fold scheme used for the out-of-fold meta-features.
    pub folds: Vec<Fold>,
    pub n_classes: usize,
    pub n_features: usize,
}

fn base_seed(seed: u64, base: usize, fold: usize) -> u64 {
    seed.wrapping_add(((base as u64) << 32) | fold as u64)
}

impl Stacked {
    pub fn fit(
        bases: &[LearnerSpec],
        x: &Matrix,
        y: &[usize],
        w: &[f64],
        k: usize,
        n_folds: usize,
        seed: u64,
    ) -> Result<Self, LearnError> {
        if bases.len() < 2 {
            return Err(LearnError::InvalidParam("a stack needs at least two bases".into()));
        }
        let folds = stratified_kfold(y, n_folds, seed)
            .map_err(|e| LearnError::Fold { fold: 0, message: e.to_string() })?;
        let meta_x = Self::out_of_fold(bases, x, y, w, k, &folds, seed)?;
        let meta = LogisticMeta::fit(&meta_x, y, w, k, META_LAMBDA);
        let fitted = bases
            .iter()
            .enumerate()
            .map(|(b, spec)| spec.fit(x, y, w, k, base_seed(seed, b, 0)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { bases: fitted, meta, folds, n_classes: k, n_features: x.n_cols() })
    }

    /// Meta-feature matrix: row `i` holds each base's probabilities from the fold that held `i` out.
    pub fn out_of_fold(
        bases: &[LearnerSpec],
        x: &Matrix,
        y: &[usize],
        w: &[f64],
        k: usize,
        folds: &[Fold],
        seed: u64,
    ) -> Result<Matrix, LearnError> {
        let width = bases.len() * k;
        let mut meta = Matrix::new(x.n_rows(), width, vec![0.0; x.n_rows() * width]);
        for (f, fold) in folds.iter().enumerate() {
            let xt = x.select_rows(&fold.train);
            let yt: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
            let wt: Vec<f64> = fold.train.iter().map(|&i| w[i]).collect();
            let xv = x.select_rows(&fold.validation);
            for (b, spec) in bases.iter().enumerate() {
                let model = spec
                    .fit(&xt, &yt, &wt, k, base_seed(seed, b, f + 1))
                    .map_err(|e| LearnError::Fold { fold: f, message: e.to_string() })?;
                let proba = model.predict_proba(&xv)?;
                for (p, &i) in proba.iter().zip(&fold.validation) {
                    for (c, v) in p.iter().enumerate() {
                        meta.set(i, b * k + c, *v);
                    }
                }
            }
        }
        Ok(meta)
    }

    pub fn meta_features(&self, x: &Matrix) -> Result<Matrix, LearnError> {
        let k = self.n_classes;
        let width = self.bases.len() * k;
        let mut meta = Matrix::new(x.n_rows(), width, vec![0.0; x.n_rows() * width]);
        for (b, model) in self.bases.iter().enumerate() {
            for (i, p) in model.predict_proba(x)?.iter().enumerate() {
                for (c, v) in p.iter().enumerate() {
                    meta.set(i, b * k + c, *v);
                }
            }
        }
        Ok(meta)
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<Vec<f64>>, LearnError> {
        let meta = self.meta_features(x)?;
        Ok((0..meta.n_rows()).map(|i| self.meta.predict_row(meta.row(i))).collect())
    }
}

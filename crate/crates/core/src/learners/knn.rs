use serde::{Deserialize, Serialize};

use super::{LearnError, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

/// Stores the standardized training matrix; prediction is the neighbor class frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub train: Matrix,
    pub labels: Vec<usize>,
    pub n_classes: usize,
    pub params: KnnParams,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[usize], k: usize, params: &KnnParams) -> Result<Self, LearnError> {
        if params.k == 0 || params.k > x.n_rows() {
            return Err(LearnError::InvalidParam(format!("k = {} with {} rows", params.k, x.n_rows())));
        }
        let n = x.n_rows() as f64;
        let d = x.n_cols();
        let mut mean = vec![0.0; d];
        let mut sd = vec![0.0; d];
        for j in 0..d {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n;
            let v = col.iter().map(|c| (c - m).powi(2)).sum::<f64>() / n;
            mean[j] = m;
            sd[j] = if v > 0.0 { v.sqrt() } else { 1.0 };
        }
        let mut train = x.clone();
        for i in 0..x.n_rows() {
            for j in 0..d {
                train.set(i, j, (x.get(i, j) - mean[j]) / sd[j]);
            }
        }
        Ok(Self { mean, sd, train, labels: y.to_vec(), n_classes: k, params: params.clone() })
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let n = self.train.n_rows();
        let mut dist: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut q = vec![0.0; self.n_features()];
        (0..x.n_rows())
            .map(|i| {
                for (j, v) in q.iter_mut().enumerate() {
                    *v = (x.get(i, j) - self.mean[j]) / self.sd[j];
                }
                dist.clear();
                dist.extend((0..n).map(|r| {
                    let d2: f64 = self.train.row(r).iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, r)
                }));
                let k = self.params.k;
                if k < n {
                    dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                }
                let mut p = vec![0.0; self.n_classes];
                for &(_, r) in &dist[..k] {
                    p[self.labels[r]] += 1.0 / k as f64;
                }
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_with_k1() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![5.0, 2.0]]);
        let m = Knn::fit(&x, &[0, 1, 2], 3, &KnnParams { k: 1 }).unwrap();
        assert_eq!(m.predict_proba(&x.select_rows(&[2]))[0], vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn k_equals_n_gives_global_distribution() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0], vec![3.0]]);
        let m = Knn::fit(&x, &[0, 1, 1, 1], 2, &KnnParams { k: 4 }).unwrap();
        for p in m.predict_proba(&Matrix::from_rows(&[vec![-9.0], vec![99.0]])) {
            assert_eq!(p, vec![0.25, 0.75]);
        }
    }

    #[test]
    fn distance_ties_go_to_lower_row() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![1.0]]);
        let m = Knn::fit(&x, &[1, 0], 2, &KnnParams { k: 1 }).unwrap();
        assert_eq!(m.predict_proba(&Matrix::from_rows(&[vec![0.0]]))[0], vec![0.0, 1.0]);
    }

    #[test]
    fn k_above_rows_rejected() {
        let x = Matrix::from_rows(&[vec![0.0]]);
        assert!(Knn::fit(&x, &[0], 2, &KnnParams { k: 2 }).is_err());
    }
}

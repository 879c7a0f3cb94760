use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{recompute_derived, Feature, N_FEATURES, ONE_HOT_GROUPS};

const MAX_ITERATIONS: usize = 300;
const DIM_SLOTS: [Feature; 3] = [Feature::Len, Feature::Wid, Feature::Draft];

#[derive(Debug, Error, PartialEq)]
pub enum ImputeError {
    #[error("need at least k = {k} rows, got {rows}")]
    TooFewRows { k: usize, rows: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("no row has an observed {0}")]
    NoObservedValue(&'static str),
    #[error("row has {0} slots, expected {N_FEATURES}")]
    BadWidth(usize),
}

/// Slots the clustering runs on: speed quartiles, the one-hot groups, PTST,
/// SOG_SD and Acc_SD.
pub fn clustering_slots() -> Vec<usize> {
    use Feature::*;
    let mut slots: Vec<usize> = [SogQ1, SogQ2, SogQ3].map(Feature::index).to_vec();
    for g in ONE_HOT_GROUPS {
        slots.extend(g);
    }
    slots.extend([PtstLow, PtstMid, PtstHigh, SogSd, AccSd].map(Feature::index));
    slots
}

/// K-means model over standardized motion/category features, carrying the
/// mean length, width and draft of each cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub k: usize,
    pub slots: Vec<usize>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub centroids: Vec<Vec<f64>>,
    /// Per cluster: (length, width, draft) means over members that report them.
    pub cluster_dims: Vec<[f64; 3]>,
    pub global_dims: [f64; 3],
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], z: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(centroid, z);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

pub fn kmeans_impute_fit(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<ImputationModel, ImputeError> {
    if k == 0 {
        return Err(ImputeError::ZeroK);
    }
    if rows.len() < k {
        return Err(ImputeError::TooFewRows { k, rows: rows.len() });
    }
    if let Some(r) = rows.iter().find(|r| r.len() != N_FEATURES) {
        return Err(ImputeError::BadWidth(r.len()));
    }
    let slots = clustering_slots();
    let n = rows.len() as f64;
    let mut mean = vec![0.0; slots.len()];
    let mut sd = vec![0.0; slots.len()];
    for (j, &s) in slots.iter().enumerate() {
        mean[j] = rows.iter().map(|r| r[s]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[s] - mean[j]).powi(2)).sum::<f64>() / n;
        sd[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| slots.iter().enumerate().map(|(j, &s)| (r[s] - mean[j]) / sd[j]).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![z[rng.random_range(0..z.len())].clone()];
    let mut d2: Vec<f64> = z.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut chosen = z.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if u < d {
                    chosen = i;
                    break;
                }
                u -= d;
            }
            chosen
        } else {
            rng.random_range(0..z.len())
        };
        centroids.push(z[pick].clone());
        for (i, p) in z.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &centroids[centroids.len() - 1]));
        }
    }

    let mut assign: Vec<usize> = z.iter().map(|p| nearest(&centroids, p)).collect();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; slots.len()]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in z.iter().zip(&assign) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            // An emptied cluster keeps its previous centroid.
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
        let next: Vec<usize> = z.iter().map(|p| nearest(&centroids, p)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }

    let mut global_dims = [0.0; 3];
    for (d, slot) in DIM_SLOTS.iter().enumerate() {
        let observed: Vec<f64> = rows.iter().map(|r| r[slot.index()]).filter(|x| !x.is_nan()).collect();
        if observed.is_empty() {
            return Err(ImputeError::NoObservedValue(slot.name()));
        }
        global_dims[d] = observed.iter().sum::<f64>() / observed.len() as f64;
    }
    let mut cluster_dims = vec![global_dims; k];
    for (c, dims) in cluster_dims.iter_mut().enumerate() {
        for (d, slot) in DIM_SLOTS.iter().enumerate() {
            let (sum, cnt) = rows
                .iter()
                .zip(&assign)
                .filter(|(r, &a)| a == c && !r[slot.index()].is_nan())
                .fold((0.0, 0usize), |(s, n), (r, _)| (s + r[slot.index()], n + 1));
            if cnt > 0 {
                dims[d] = sum / cnt as f64;
            }
        }
    }
    Ok(ImputationModel {
        k,
        slots,
        mean,
        sd,
        centroids,
        cluster_dims,
        global_dims,
        iterations,
    })
}

impl ImputationModel {
    /// Nearest centroid in the standardized clustering space.
    pub fn assign(&self, row: &[f64]) -> usize {
        let z: Vec<f64> = self
            .slots
            .iter()
            .enumerate()
            .map(|(j, &s)| (row[s] - self.mean[j]) / self.sd[j])
            .collect();
        nearest(&self.centroids, &z)
    }

    /// Fills missing length/width/draft from the row's cluster and refreshes
    /// the derived slots. Returns whether anything was filled.
    pub fn apply(&self, row: &mut [f64]) -> bool {
        let missing: Vec<usize> = (0..3).filter(|&d| row[DIM_SLOTS[d].index()].is_nan()).collect();
        if missing.is_empty() {
            return false;
        }
        let c = self.assign(row);
        for d in missing {
            row[DIM_SLOTS[d].index()] = self.cluster_dims[c][d];
        }
        recompute_derived(row);
        true
    }
}

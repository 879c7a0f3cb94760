use serde::{Deserialize, Serialize};

use super::{LearnError, Matrix};

/// Smallest hessian mass a child may carry.
const MIN_CHILD_HESSIAN: f64 = 1e-3;
const PROB_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtParams {
    pub n_estimators: usize,
    /// `-1` means no depth limit.
    pub max_depth: i32,
    pub learning_rate: f64,
    pub num_leaves: usize,
    pub min_child_samples: usize,
    /// L2 penalty on leaf values.
    pub lambda: f64,
    pub max_bins: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_estimators: 100,
            max_depth: -1,
            learning_rate: 0.1,
            num_leaves: 31,
            min_child_samples: 20,
            lambda: 1.0,
            max_bins: 255,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RegNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtTree {
    pub nodes: Vec<RegNode>,
}

impl GbdtTree {
    pub fn apply(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                RegNode::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
                RegNode::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        match self.nodes[self.apply(row)] {
            RegNode::Leaf { value } => value,
            RegNode::Split { .. } => unreachable!("apply returns a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, RegNode::Leaf { .. })).count()
    }
}

/// One-vs-rest logistic boosting with histogram splits and leaf-wise growth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    pub n_classes: usize,
    pub n_features: usize,
    /// Per-class starting score: the logit of the weighted class prior.
    pub init_scores: Vec<f64>,
    /// `trees[round][class]`; leaf values already include the learning rate.
    pub trees: Vec<Vec<GbdtTree>>,
    /// Summed per-class weighted logistic loss before round 1 and after each round.
    pub loss_trace: Vec<f64>,
    pub importances: Vec<f64>,
    pub params: GbdtParams,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Binary logistic loss of score `f` against target `t` in {0, 1}.
pub(crate) fn logistic_loss(f: f64, t: f64) -> f64 {
    let p = sigmoid(f).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

struct Binned {
    /// Per feature: ascending cut values; bin b holds `cuts[b-1] < x <= cuts[b]`.
    cuts: Vec<Vec<f64>>,
    /// Column-major bin index per row.
    bins: Vec<Vec<u8>>,
}

fn bin_features(x: &Matrix, max_bins: usize) -> Binned {
    let max_bins = max_bins.clamp(2, 255);
    let n = x.n_rows();
    let mut cuts = Vec::with_capacity(x.n_cols());
    let mut bins = Vec::with_capacity(x.n_cols());
    for f in 0..x.n_cols() {
        let mut v = x.column(f);
        v.sort_by(f64::total_cmp);
        let mut distinct = v.clone();
        distinct.dedup();
        let c: Vec<f64> = if distinct.len() <= max_bins {
            distinct[..distinct.len() - 1].to_vec()
        } else {
            let top = *distinct.last().expect("non-empty");
            let mut q: Vec<f64> = (1..max_bins).map(|i| v[i * n / max_bins]).filter(|&t| t < top).collect();
            q.dedup();
            q
        };
        bins.push((0..n).map(|i| c.partition_point(|&t| t < x.get(i, f)) as u8).collect());
        cuts.push(c);
    }
    Binned { cuts, bins }
}

struct Hist {
    g: Vec<f64>,
    h: Vec<f64>,
    n: Vec<u32>,
}

struct SplitCand {
    gain: f64,
    feature: usize,
    bin: usize,
}

struct LeafState {
    node: usize,
    rows: Vec<u32>,
    depth: usize,
    grad: f64,
    hess: f64,
    best: Option<SplitCand>,
}

struct Grower<'a> {
    binned: &'a Binned,
    offsets: Vec<usize>,
    g: &'a [f64],
    h: &'a [f64],
    p: &'a GbdtParams,
}

impl Grower<'_> {
    fn hist(&self, rows: &[u32]) -> Hist {
        let total = *self.offsets.last().expect("offsets");
        let mut hist = Hist { g: vec![0.0; total], h: vec![0.0; total], n: vec![0; total] };
        for (f, col) in self.binned.bins.iter().enumerate() {
            let off = self.offsets[f];
            for &r in rows {
                let b = off + col[r as usize] as usize;
                hist.g[b] += self.g[r as usize];
                hist.h[b] += self.h[r as usize];
                hist.n[b] += 1;
            }
        }
        hist
    }

    fn leaf_score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.p.lambda)
    }

    fn best_split(&self, leaf: &LeafState) -> Option<SplitCand> {
        if self.p.max_depth > 0 && leaf.depth >= self.p.max_depth as usize {
            return None;
        }
        let n = leaf.rows.len() as u32;
        let mcs = self.p.min_child_samples.max(1) as u32;
        if n < 2 * mcs {
            return None;
        }
        let hist = self.hist(&leaf.rows);
        let parent = self.leaf_score(leaf.grad, leaf.hess);
        let mut best: Option<SplitCand> = None;
        for f in 0..self.binned.cuts.len() {
            let nb = self.binned.cuts[f].len() + 1;
            if nb < 2 {
                continue;
            }
            let off = self.offsets[f];
            let (mut gl, mut hl, mut nl) = (0.0, 0.0, 0u32);
            for b in 0..nb - 1 {
                gl += hist.g[off + b];
                hl += hist.h[off + b];
                nl += hist.n[off + b];
                let nr = n - nl;
                if nl < mcs {
                    continue;
                }
                if nr < mcs {
                    break;
                }
                let (gr, hr) = (leaf.grad - gl, leaf.hess - hl);
                if hl < MIN_CHILD_HESSIAN || hr < MIN_CHILD_HESSIAN {
                    continue;
                }
                let gain = self.leaf_score(gl, hl) + self.leaf_score(gr, hr) - parent;
                if gain > 1e-12 && best.as_ref().is_none_or(|c| gain > c.gain) {
                    best = Some(SplitCand { gain, feature: f, bin: b });
                }
            }
        }
        best
    }

    /// Grows one tree; returns it with each training row's leaf value.
    fn grow(&self, n_rows: usize, importances: &mut [f64]) -> (GbdtTree, Vec<f64>) {
        let rows: Vec<u32> = (0..n_rows as u32).collect();
        let (grad, hess) = rows
            .iter()
            .fold((0.0, 0.0), |(a, b), &r| (a + self.g[r as usize], b + self.h[r as usize]));
        let mut nodes = vec![RegNode::Leaf { value: 0.0 }];
        let mut root = LeafState { node: 0, rows, depth: 0, grad, hess, best: None };
        root.best = self.best_split(&root);
        let mut leaves = vec![root];
        while leaves.len() < self.p.num_leaves.max(2) {
            // Largest gain first; earlier leaves win ties.
            let pick = leaves
                .iter()
                .enumerate()
                .filter_map(|(i, l)| l.best.as_ref().map(|b| (i, b.gain)))
                .fold(None, |acc: Option<(usize, f64)>, (i, g)| match acc {
                    Some((_, bg)) if bg >= g => acc,
                    _ => Some((i, g)),
                });
            let Some((li, _)) = pick else { break };
            let leaf = leaves.swap_remove(li);
            let split = leaf.best.expect("picked leaf has a split");
            importances[split.feature] += split.gain;
            let col = &self.binned.bins[split.feature];
            let (lr, rr): (Vec<u32>, Vec<u32>) =
                leaf.rows.iter().partition(|&&r| (col[r as usize] as usize) <= split.bin);
            let sum = |rows: &[u32]| {
                rows.iter().fold((0.0, 0.0), |(a, b), &r| (a + self.g[r as usize], b + self.h[r as usize]))
            };
            let left_id = nodes.len();
            nodes.push(RegNode::Leaf { value: 0.0 });
            nodes.push(RegNode::Leaf { value: 0.0 });
            nodes[leaf.node] = RegNode::Split {
                feature: split.feature,
                threshold: self.binned.cuts[split.feature][split.bin],
                left: left_id,
                right: left_id + 1,
            };
            // Keep leaves ordered by node id so tie-breaking is stable.
            for (node, rows) in [(left_id, lr), (left_id + 1, rr)] {
                let (grad, hess) = sum(&rows);
                let mut child = LeafState { node, rows, depth: leaf.depth + 1, grad, hess, best: None };
                child.best = self.best_split(&child);
                leaves.push(child);
            }
            leaves.sort_by_key(|l| l.node);
        }
        let mut row_values = vec![0.0; n_rows];
        for leaf in &leaves {
            let value = -leaf.grad / (leaf.hess + self.p.lambda) * self.p.learning_rate;
            nodes[leaf.node] = RegNode::Leaf { value };
            for &r in &leaf.rows {
                row_values[r as usize] = value;
            }
        }
        (GbdtTree { nodes }, row_values)
    }
}

impl Gbdt {
    pub fn fit(x: &Matrix, y: &[usize], w: &[f64], k: usize, params: &GbdtParams) -> Result<Self, LearnError> {
        if params.n_estimators == 0 || !(params.learning_rate > 0.0) || params.num_leaves < 2 {
            return Err(LearnError::InvalidParam(format!("{params:?}")));
        }
        if params.max_depth == 0 || params.max_depth < -1 {
            return Err(LearnError::InvalidParam(format!("max_depth {}", params.max_depth)));
        }
        let n = x.n_rows();
        let binned = bin_features(x, params.max_bins);
        let mut offsets = vec![0];
        for c in &binned.cuts {
            offsets.push(offsets.last().expect("offsets") + c.len() + 1);
        }
        let wsum: f64 = w.iter().sum();
        let init_scores: Vec<f64> = (0..k)
            .map(|c| {
                let pc: f64 = y.iter().zip(w).filter(|(&yi, _)| yi == c).map(|(_, v)| v).sum::<f64>() / wsum;
                let pc = pc.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
                (pc / (1.0 - pc)).ln()
            })
            .collect();
        let targets: Vec<Vec<f64>> = (0..k).map(|c| y.iter().map(|&yi| f64::from(yi == c)).collect()).collect();
        let mut scores: Vec<Vec<f64>> = init_scores.iter().map(|&s| vec![s; n]).collect();
        let loss = |scores: &[Vec<f64>]| -> f64 {
            (0..k)
                .map(|c| (0..n).map(|i| w[i] * logistic_loss(scores[c][i], targets[c][i])).sum::<f64>())
                .sum()
        };
        let mut model = Gbdt {
            n_classes: k,
            n_features: x.n_cols(),
            init_scores,
            trees: Vec::with_capacity(params.n_estimators),
            loss_trace: vec![loss(&scores)],
            importances: vec![0.0; x.n_cols()],
            params: params.clone(),
        };
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n];
        for _ in 0..params.n_estimators {
            let mut round = Vec::with_capacity(k);
            for c in 0..k {
                for i in 0..n {
                    let p = sigmoid(scores[c][i]);
                    g[i] = w[i] * (p - targets[c][i]);
                    h[i] = w[i] * p * (1.0 - p);
                }
                let grower = Grower { binned: &binned, offsets: offsets.clone(), g: &g, h: &h, p: params };
                let (tree, values) = grower.grow(n, &mut model.importances);
                for i in 0..n {
                    scores[c][i] += values[i];
                }
                round.push(tree);
            }
            model.trees.push(round);
            model.loss_trace.push(loss(&scores));
        }
        Ok(model)
    }

    pub fn raw_scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.init_scores.clone();
        for round in &self.trees {
            for (c, t) in round.iter().enumerate() {
                s[c] += t.predict(row);
            }
        }
        s
    }

    pub fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        (0..x.n_rows())
            .map(|i| {
                let p: Vec<f64> = self.raw_scores(x.row(i)).into_iter().map(sigmoid).collect();
                let z: f64 = p.iter().sum();
                if z > 0.0 {
                    p.iter().map(|v| v / z).collect()
                } else {
                    vec![1.0 / self.n_classes as f64; self.n_classes]
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..60 {
            let t = i as f64 / 60.0;
            let c = i % 2;
            let shift = if c == 0 { -1.0 } else { 1.0 };
            rows.push(vec![shift + 0.5 * (t * 17.0).sin(), shift + 0.5 * (t * 29.0).cos()]);
            y.push(c);
        }
        (Matrix::from_rows(&rows), y)
    }

    #[test]
    fn constant_features_give_prior() {
        let x = Matrix::from_rows(&vec![vec![1.0, 1.0]; 10]);
        let y: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let p = GbdtParams { n_estimators: 1, ..GbdtParams::default() };
        let m = Gbdt::fit(&x, &y, &[1.0; 10], 2, &p).unwrap();
        for row in m.predict_proba(&x) {
            assert!((row[0] - 0.5).abs() < 1e-12 && (row[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_trace_is_monotone() {
        let (x, y) = blobs();
        let p = GbdtParams { n_estimators: 50, min_child_samples: 5, ..GbdtParams::default() };
        let m = Gbdt::fit(&x, &y, &vec![1.0; 60], 2, &p).unwrap();
        assert_eq!(m.loss_trace.len(), 51);
        assert!(m.loss_trace.windows(2).all(|w| w[1] <= w[0]), "{:?}", m.loss_trace);
        assert!(m.loss_trace[50] < 0.5 * m.loss_trace[0]);
    }

    #[test]
    fn leaf_limits() {
        let (x, y) = blobs();
        let p = GbdtParams { n_estimators: 3, num_leaves: 4, min_child_samples: 2, max_depth: 1, ..GbdtParams::default() };
        let m = Gbdt::fit(&x, &y, &vec![1.0; 60], 2, &p).unwrap();
        for t in m.trees.iter().flatten() {
            assert!(t.n_leaves() <= 2);
        }
        let p = GbdtParams { num_leaves: 4, min_child_samples: 2, ..p };
        let p = GbdtParams { max_depth: -1, ..p };
        let m = Gbdt::fit(&x, &y, &vec![1.0; 60], 2, &p).unwrap();
        assert!(m.trees.iter().flatten().all(|t| t.n_leaves() <= 4));
    }

    #[test]
    fn binning_respects_cap() {
        let x = Matrix::from_rows(&(0..1000).map(|i| vec![i as f64]).collect::<Vec<_>>());
        let b = bin_features(&x, 255);
        assert!(b.cuts[0].len() < 255);
        assert!(b.bins[0].windows(2).all(|w| w[0] <= w[1]));
        for (i, &bin) in b.bins[0].iter().enumerate() {
            let v = i as f64;
            if (bin as usize) < b.cuts[0].len() {
                assert!(v <= b.cuts[0][bin as usize]);
            }
            if bin > 0 {
                assert!(v > b.cuts[0][bin as usize - 1]);
            }
        }
    }
}

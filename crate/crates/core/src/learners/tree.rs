use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_training, LearnError, Matrix};

/// Relative tolerance under which two split gains count as tied.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    /// `None` grows until another stopping rule applies.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    /// Random feature candidates per split; `None` tries every feature.
    pub max_features: Option<usize>,
}

impl Default for CartParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

impl CartParams {
    pub fn stump() -> Self {
        Self {
            max_depth: Some(1),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        proba: Vec<f64>,
        n_samples: usize,
    },
}

/// Weighted Gini impurity of a class-weight vector.
pub fn gini(class_weights: &[f64]) -> f64 {
    let total: f64 = class_weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    1.0 - class_weights.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

/// Classification tree stored as a flat preorder node array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<TreeNode>,
    pub n_classes: usize,
    pub n_features: usize,
    /// Total weighted impurity decrease credited to each feature.
    pub importances: Vec<f64>,
}

impl DecisionTree {
    pub fn fit(x: &Matrix, y: &[usize], w: &[f64], k: usize, params: &CartParams) -> Result<Self, LearnError> {
        check_training(x, y, w, k)?;
        let rows: Vec<usize> = (0..x.n_rows()).collect();
        Ok(Self::grow(x, y, w, k, params, rows, None, None))
    }

    /// Grows a tree on `rows`. `root_order` may supply each feature's rows
    /// presorted by value so the root skips its sort.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn grow(
        x: &Matrix,
        y: &[usize],
        w: &[f64],
        k: usize,
        params: &CartParams,
        rows: Vec<usize>,
        rng: Option<&mut ChaCha8Rng>,
        root_order: Option<&[Vec<usize>]>,
    ) -> Self {
        let mut b = Builder {
            x,
            y,
            w,
            k,
            params,
            rng,
            nodes: Vec::new(),
            importances: vec![0.0; x.n_cols()],
        };
        b.node(rows, 0, root_order);
        DecisionTree {
            nodes: b.nodes,
            n_classes: k,
            n_features: x.n_cols(),
            importances: b.importances,
        }
    }

    /// Index of the leaf `row` falls into.
    pub fn apply(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Split { feature, threshold, left, right } => {
                    i = if row[*feature] <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { .. } => return i,
            }
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> &[f64] {
        match &self.nodes[self.apply(row)] {
            TreeNode::Leaf { proba, .. } => proba,
            TreeNode::Split { .. } => unreachable!("apply returns a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                TreeNode::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }
}

struct Builder<'a, 'r> {
    x: &'a Matrix,
    y: &'a [usize],
    w: &'a [f64],
    k: usize,
    params: &'a CartParams,
    rng: Option<&'r mut ChaCha8Rng>,
    nodes: Vec<TreeNode>,
    importances: Vec<f64>,
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_, '_> {
    fn node(&mut self, rows: Vec<usize>, depth: usize, root_order: Option<&[Vec<usize>]>) -> usize {
        let mut totals = vec![0.0; self.k];
        for &r in &rows {
            totals[self.y[r]] += self.w[r];
        }
        let weight: f64 = totals.iter().sum();
        let id = self.nodes.len();
        let leaf = |totals: &[f64], n: usize| TreeNode::Leaf {
            proba: if weight > 0.0 {
                totals.iter().map(|c| c / weight).collect()
            } else {
                vec![1.0 / totals.len() as f64; totals.len()]
            },
            n_samples: n,
        };
        let n = rows.len();
        let pure = totals.iter().filter(|&&c| c > 0.0).count() <= 1;
        let p = self.params;
        if pure
            || p.max_depth.is_some_and(|d| depth >= d)
            || n < p.min_samples_split.max(2)
            || n < 2 * p.min_samples_leaf.max(1)
        {
            self.nodes.push(leaf(&totals, n));
            return id;
        }
        let Some(best) = self.best_split(&rows, &totals, weight, root_order) else {
            self.nodes.push(leaf(&totals, n));
            return id;
        };
        self.importances[best.feature] += best.gain;
        self.nodes.push(TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: 0,
            right: 0,
        });
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x.get(i, best.feature) <= best.threshold);
        let left = self.node(l, depth + 1, None);
        let right = self.node(r, depth + 1, None);
        if let TreeNode::Split { left: lp, right: rp, .. } = &mut self.nodes[id] {
            *lp = left;
            *rp = right;
        }
        id
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.x.n_cols();
        match (self.params.max_features, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < d => {
                let mut f = sample(rng, d, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        }
    }

    fn best_split(
        &mut self,
        rows: &[usize],
        totals: &[f64],
        weight: f64,
        root_order: Option<&[Vec<usize>]>,
    ) -> Option<Candidate> {
        let (x, y, w) = (self.x, self.y, self.w);
        let parent_score = totals.iter().map(|c| c * c).sum::<f64>() / weight;
        let msl = self.params.min_samples_leaf.max(1);
        let n = rows.len();
        let mut best: Option<Candidate> = None;
        let mut left = vec![0.0; self.k];
        let mut sorted = Vec::with_capacity(n);
        for f in self.candidate_features() {
            let order: &[usize] = match root_order {
                Some(o) => &o[f],
                None => {
                    sorted.clear();
                    sorted.extend_from_slice(rows);
                    sorted.sort_unstable_by(|&a, &b| {
                        x.get(a, f)
                            .total_cmp(&x.get(b, f))
                            .then(y[a].cmp(&y[b]))
                            .then(w[a].total_cmp(&w[b]))
                    });
                    &sorted
                }
            };
            left.iter_mut().for_each(|c| *c = 0.0);
            let mut wl = 0.0;
            for i in 0..n - 1 {
                let r = order[i];
                left[y[r]] += w[r];
                wl += w[r];
                let (v, vn) = (x.get(r, f), x.get(order[i + 1], f));
                if v == vn || i + 1 < msl || n - i - 1 < msl {
                    continue;
                }
                let wr = weight - wl;
                let mut sq_l = 0.0;
                let mut sq_r = 0.0;
                for c in 0..self.k {
                    sq_l += left[c] * left[c];
                    let rc = totals[c] - left[c];
                    sq_r += rc * rc;
                }
                let score = if wl > 0.0 { sq_l / wl } else { 0.0 } + if wr > 0.0 { sq_r / wr } else { 0.0 };
                let gain = score - parent_score;
                if gain <= TIE_TOL * weight.max(1.0) {
                    continue;
                }
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain + TIE_TOL * b.gain.abs().max(1.0),
                };
                if better {
                    let mut threshold = v + (vn - v) / 2.0;
                    if threshold >= vn {
                        threshold = v;
                    }
                    best = Some(Candidate { gain, feature: f, threshold });
                }
            }
        }
        best
    }
}

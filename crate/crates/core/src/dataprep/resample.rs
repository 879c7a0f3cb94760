use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::class_counts;
use crate::features::{continuous_base_slots, recompute_derived, Feature, ONE_HOT_GROUPS};

/// Keeps at most `cap` rows per exact barge count in the majority presence
/// class. Returns surviving row indices in input order.
pub fn downsample_majority(barge_counts: &[u32], cap: usize, seed: u64) -> Vec<usize> {
    let with = barge_counts.iter().filter(|&&b| b > 0).count();
    let without = barge_counts.len() - with;
    // On a tie the with-barge class (id 1) counts as the majority.
    let majority_has_barge = with >= without;
    let mut by_count: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &b) in barge_counts.iter().enumerate() {
        if (b > 0) == majority_has_barge {
            by_count.entry(b).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![true; barge_counts.len()];
    for idx in by_count.values() {
        if idx.len() > cap {
            let mut shuffled = idx.clone();
            shuffled.shuffle(&mut rng);
            for &i in &shuffled[cap..] {
                keep[i] = false;
            }
        }
    }
    (0..barge_counts.len()).filter(|&i| keep[i]).collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum SmoteError {
    #[error("class {0} needs at least 2 rows to augment, has {1}")]
    TooFewRows(usize, usize),
    #[error("presence weights need both classes present")]
    SingleClass,
    #[error("target list has {0} entries for {1} classes")]
    TargetShape(usize, usize),
}

/// Per-class synthetic counts: +50% (rounded) for every class except the
/// largest one (lowest id among equals).
pub fn default_smote_targets(labels: &[usize], k: usize) -> Vec<usize> {
    let counts = class_counts(labels, k);
    let largest = (0..k).fold(0, |best, c| if counts[c] > counts[best] { c } else { best });
    (0..k)
        .map(|c| if c == largest { 0 } else { (counts[c] as f64 * 0.5).round() as usize })
        .collect()
}

/// How one synthetic row was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoteTrace {
    pub class: usize,
    pub seed_row: usize,
    pub neighbor_row: usize,
    /// The drawn vector before quartile sorting, PTST renormalization and
    /// derived-slot recomputation.
    pub raw: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub trace: Vec<SmoteTrace>,
}

/// Slot-aware SMOTE over full registry-order vectors.
///
/// Seeds and neighbours come from the same class; neighbours are found by
/// standardized Euclidean distance on the continuous base slots. Only the
/// synthetic rows are returned.
pub fn smote_augment(
    rows: &[Vec<f64>],
    labels: &[usize],
    targets: &[usize],
    k_neighbors: usize,
    seed: u64,
) -> Result<SmoteOutput, SmoteError> {
    let k = targets.len();
    let counts = class_counts(labels, k.max(labels.iter().map(|&l| l + 1).max().unwrap_or(0)));
    if counts.len() != k {
        return Err(SmoteError::TargetShape(k, counts.len()));
    }
    for c in 0..k {
        if targets[c] > 0 && counts[c] < 2 {
            return Err(SmoteError::TooFewRows(c, counts[c]));
        }
    }
    let cont = continuous_base_slots();
    let free_slots: Vec<usize> = (0..rows.first().map_or(0, Vec::len))
        .filter(|s| !ONE_HOT_GROUPS.iter().any(|g| g.contains(s)))
        .collect();
    let n = rows.len() as f64;
    let scale: Vec<(f64, f64)> = cont
        .iter()
        .map(|&s| {
            let mean = rows.iter().map(|r| r[s]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[s] - mean).powi(2)).sum::<f64>() / n;
            (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
        })
        .collect();
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        cont.iter()
            .zip(&scale)
            .map(|(&s, &(_, sd))| ((a[s] - b[s]) / sd).powi(2))
            .sum()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SmoteOutput {
        rows: Vec::new(),
        labels: Vec::new(),
        trace: Vec::new(),
    };
    for (c, &target) in targets.iter().enumerate() {
        if target == 0 {
            continue;
        }
        let members: Vec<usize> = (0..rows.len()).filter(|&i| labels[i] == c).collect();
        let kk = k_neighbors.min(members.len() - 1).max(1);
        // Neighbour lists, nearest first, ties to the lower row index.
        let neighbors: Vec<Vec<usize>> = members
            .iter()
            .map(|&i| {
                let mut others: Vec<(f64, usize)> = members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| (dist(&rows[i], &rows[j]), j))
                    .collect();
                others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                others.into_iter().take(kk).map(|(_, j)| j).collect()
            })
            .collect();
        for _ in 0..target {
            let m = rng.random_range(0..members.len());
            let seed_row = members[m];
            let nbrs = &neighbors[m];
            let neighbor_row = nbrs[rng.random_range(0..nbrs.len())];
            let (a, b) = (&rows[seed_row], &rows[neighbor_row]);
            let mut v = a.clone();
            for &s in &free_slots {
                let (lo, hi) = if a[s] <= b[s] { (a[s], b[s]) } else { (b[s], a[s]) };
                let u: f64 = rng.random();
                v[s] = if hi > lo { (lo + u * (hi - lo)).min(hi) } else { lo };
            }
            for g in ONE_HOT_GROUPS {
                let cat = modal_category(&g, a, nbrs.iter().map(|&j| rows[j].as_slice()));
                for s in g.clone() {
                    v[s] = if s == cat { 1.0 } else { 0.0 };
                }
            }
            let raw = v.clone();
            repair(&mut v, a);
            out.rows.push(v);
            out.labels.push(c);
            out.trace.push(SmoteTrace {
                class: c,
                seed_row,
                neighbor_row,
                raw,
            });
        }
    }
    Ok(out)
}

fn active(group: &std::ops::Range<usize>, row: &[f64]) -> usize {
    group.clone().find(|&s| row[s] > 0.5).unwrap_or(group.start)
}

/// Modal active slot among the neighbours; ties go to the seed's slot when
/// it is among the tied, else to the lowest tied slot.
fn modal_category<'a>(
    group: &std::ops::Range<usize>,
    seed: &[f64],
    neighbors: impl Iterator<Item = &'a [f64]>,
) -> usize {
    let mut votes = vec![0usize; group.len()];
    for r in neighbors {
        votes[active(group, r) - group.start] += 1;
    }
    let best = *votes.iter().max().expect("non-empty group");
    let seed_cat = active(group, seed);
    if votes[seed_cat - group.start] == best {
        return seed_cat;
    }
    group.start + votes.iter().position(|&v| v == best).expect("max exists")
}

/// Sorts quartiles, renormalizes PTST and recomputes derived slots.
fn repair(v: &mut [f64], seed: &[f64]) {
    use Feature::*;
    let mut q = [v[SogQ1.index()], v[SogQ2.index()], v[SogQ3.index()]];
    q.sort_by(f64::total_cmp);
    v[SogQ1.index()] = q[0];
    v[SogQ2.index()] = q[1];
    v[SogQ3.index()] = q[2];
    let p = [PtstLow.index(), PtstMid.index(), PtstHigh.index()];
    let sum: f64 = p.iter().map(|&s| v[s]).sum();
    let src: &[f64] = if sum > 0.0 { v } else { seed };
    let src_sum: f64 = p.iter().map(|&s| src[s]).sum();
    let scaled = p.map(|s| src[s] / src_sum);
    for (s, x) in p.into_iter().zip(scaled) {
        v[s] = x;
    }
    recompute_derived(v);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub minority: usize,
    /// Indexed by class id.
    pub weights: [f64; 2],
}

impl ClassWeights {
    pub fn sample_weights(&self, labels: &[usize]) -> Vec<f64> {
        labels.iter().map(|&y| self.weights[y]).collect()
    }
}

/// 3:1 weights favouring the smaller presence class.
pub fn presence_class_weights(labels: &[usize]) -> Result<ClassWeights, SmoteError> {
    let counts = class_counts(labels, 2);
    if counts[0] == 0 || counts[1] == 0 {
        return Err(SmoteError::SingleClass);
    }
    if counts[0] == counts[1] {
        log::warn!("presence classes are balanced; treating class 0 as the minority");
    }
    let minority = if counts[1] < counts[0] { 1 } else { 0 };
    let mut weights = [1.0; 2];
    weights[minority] = 3.0;
    Ok(ClassWeights { minority, weights })
}

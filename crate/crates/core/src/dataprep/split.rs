use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplitError {
    #[error("class {0} has no real rows")]
    EmptyClass(usize),
    #[error("test fraction must be in [0, 1), got {0}")]
    BadFraction(f64),
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("{rows} rows cannot fill {k} folds")]
    TooFewRows { rows: usize, k: usize },
}

/// Stratified train/test split over real rows; synthetic rows always train.
///
/// Per-class test sizes start at `floor(n_c * f)` and the remaining slots up
/// to `round(n_real * f)` go to the largest fractional remainders (lower
/// class id first on ties). Both index lists are returned ascending.
pub fn stratified_split(
    labels: &[usize],
    synthetic: &[bool],
    k: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), SplitError> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(SplitError::BadFraction(test_fraction));
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        if !synthetic[i] {
            members[y].push(i);
        }
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(SplitError::EmptyClass(c));
    }
    let n_real: usize = members.iter().map(Vec::len).sum();
    let target = (n_real as f64 * test_fraction).round() as usize;
    let quotas: Vec<f64> = members.iter().map(|m| m.len() as f64 * test_fraction).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut short = target.saturating_sub(sizes.iter().sum());
    for &c in order.iter().cycle().take(k * 2) {
        if short == 0 {
            break;
        }
        if sizes[c] < members[c].len() {
            sizes[c] += 1;
            short -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; labels.len()];
    for (c, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng);
        for &i in &m[..sizes[c]] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| is_test[i]);
    Ok((train, test))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Stratified k-fold assignment.
///
/// Each class is shuffled and dealt round-robin; the dealing position carries
/// over from one class to the next so fold sizes stay balanced too.
pub fn stratified_kfold(labels: &[usize], k: usize, seed: u64) -> Result<Vec<Fold>, SplitError> {
    if k < 2 {
        return Err(SplitError::TooFewFolds(k));
    }
    if labels.len() < k {
        return Err(SplitError::TooFewRows { rows: labels.len(), k });
    }
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0usize; labels.len()];
    let mut next = 0;
    for c in 0..n_classes {
        let mut m: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if !m.is_empty() && m.len() < k {
            log::warn!("class {c} has {} rows, fewer than {k} folds", m.len());
        }
        m.shuffle(&mut rng);
        for i in m {
            fold_of[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (validation, train): (Vec<usize>, Vec<usize>) =
                (0..labels.len()).partition(|&i| fold_of[i] == f);
            Fold { train, validation }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn proportional_split() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i >= 60)).collect();
        let synth = vec![false; 100];
        let (train, test) = stratified_split(&labels, &synth, 2, 0.3, 1).unwrap();
        assert_eq!(test.iter().filter(|&&i| labels[i] == 0).count(), 18);
        assert_eq!(test.iter().filter(|&&i| labels[i] == 1).count(), 12);
        assert_eq!(train.len(), 70);
        let (_, test) = stratified_split(&labels, &synth, 2, 0.0, 1).unwrap();
        assert!(test.is_empty());
    }

    #[test]
    fn synthetic_rows_never_tested() {
        let labels: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let synth: Vec<bool> = (0..50).map(|i| i % 5 == 0).collect();
        for f in [0.1, 0.5, 0.9] {
            let (train, test) = stratified_split(&labels, &synth, 2, f, 3).unwrap();
            assert!(test.iter().all(|&i| !synth[i]));
            assert_eq!(train.len() + test.len(), 50);
        }
    }

    #[test]
    fn largest_remainder_hits_global_total() {
        // Three classes of 5 at 0.3: quotas 1.5 each, global round(4.5) = 5.
        let labels: Vec<usize> = (0..15).map(|i| i / 5).collect();
        let (_, test) = stratified_split(&labels, &[false; 15], 3, 0.3, 0).unwrap();
        assert_eq!(test.len(), 5);
    }

    #[test]
    fn empty_class_rejected() {
        assert_eq!(stratified_split(&[0, 0], &[false; 2], 2, 0.3, 0), Err(SplitError::EmptyClass(1)));
    }

    #[test]
    fn kfold_exact_division() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let folds = stratified_kfold(&labels, 5, 0).unwrap();
        for f in &folds {
            assert_eq!(f.validation.iter().filter(|&&i| labels[i] == 0).count(), 1);
            assert_eq!(f.validation.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
    }

    #[test]
    fn kfold_partition_and_balance() {
        let labels: Vec<usize> = (0..11).map(|i| usize::from(i >= 6)).collect();
        let folds = stratified_kfold(&labels, 5, 2).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.validation.clone()).collect();
        all.sort();
        assert_eq!(all, (0..11).collect::<Vec<_>>());
        for f in &folds {
            for (c, n) in [(0, 6.0), (1, 5.0)] {
                let got = f.validation.iter().filter(|&&i| labels[i] == c).count() as f64;
                assert!((got - n / 5.0).abs() <= 1.0);
            }
            assert_eq!(f.train.len() + f.validation.len(), 11);
        }
        assert!(stratified_kfold(&labels, 1, 0).is_err());
    }
}

//! Dimension imputation, barge-count binning, resampling and stratified splits.

mod binning;
mod impute;
mod resample;
mod split;

pub use binning::{BargeClassMap, BinError};
pub use impute::{clustering_slots, kmeans_impute_fit, ImputationModel, ImputeError};
pub use resample::{
    default_smote_targets, downsample_majority, presence_class_weights, smote_augment, ClassWeights,
    SmoteError, SmoteOutput, SmoteTrace,
};
pub use split::{stratified_kfold, stratified_split, Fold, SplitError};

use serde::{Deserialize, Serialize};

/// Whether a row was observed or produced by augmentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    #[default]
    Real,
    Synthetic,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::Synthetic => "synthetic",
        }
    }
}

/// Number of rows per class id in `0..k`.
pub fn class_counts(labels: &[usize], k: usize) -> Vec<usize> {
    let mut counts = vec![0; k];
    for &y in labels {
        counts[y] += 1;
    }
    counts
}

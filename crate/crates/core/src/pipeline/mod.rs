//! End-to-end orchestration: data building, two-stage training, sensitivity
//! studies, transfer runs and the synthetic scenario generator.

mod config;
mod hierarchical;
mod sensitivity;
mod stages;
mod synth;
mod train;
mod transfer;

pub use config::{default_presence_learner, default_quantity_learner, PipelineConfig, SensitivityConfig};
pub use hierarchical::{
    write_predictions, HierarchicalModel, HierarchicalPrediction, StageModel, NO_BARGES, PRESENCE_CLASSES,
};
pub use sensitivity::{
    grouping_sensitivity, segment_sensitivity, segment_sensitivity_with, write_segment_table, GroupingReport, GroupingStep,
    SegmentReference, SegmentRow,
};
pub use stages::{
    build_labeled, build_path, impute_trips, load_clean_records, prepared_trips, DataSummary, LabeledBuild, PathBuild,
    TripBuild,
};
pub use synth::{write_synthetic, SyntheticFiles, SyntheticOutput, SyntheticScenario, TruthPairing};
pub use train::{
    evaluate_dataset, fit_stage, prepare_presence, prepare_quantity, run_training, train_from_dataset, write_stage_csv, Manifest, StageData,
    StageOutcome, TrainingOutcome,
};
pub use transfer::{transfer_run, TransferOutcome};

use thiserror::Error;

use crate::ais::AisError;
use crate::dataprep::{BinError, ImputeError, SmoteError, SplitError};
use crate::features::FeatureError;
use crate::geo::GeoError;
use crate::learners::{ArtifactError, LearnError};
use crate::matching::MatchError;
use crate::metrics::MetricsError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error("stage {stage}: {message}")]
    Stage { stage: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("ais: {0}")]
    Ais(#[from] AisError),
    #[error("geometry: {0}")]
    Geo(#[from] GeoError),
    #[error("matching: {0}")]
    Match(#[from] MatchError),
    #[error("features: {0}")]
    Feature(#[from] FeatureError),
    #[error("learner: {0}")]
    Learn(#[from] LearnError),
    #[error("artifact: {0}")]
    Artifact(#[from] ArtifactError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
    #[error("split: {0}")]
    Split(#[from] SplitError),
    #[error("resampling: {0}")]
    Smote(#[from] SmoteError),
    #[error("imputation: {0}")]
    Impute(#[from] ImputeError),
    #[error("binning: {0}")]
    Bin(#[from] BinError),
}

impl PipelineError {
    /// Stage name if the error came from a named pipeline stage.
    pub fn stage(&self) -> Option<&str> {
        match self {
            PipelineError::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }

    /// True for errors caused by input data rather than usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, PipelineError::Config(_) | PipelineError::Scenario(_))
    }
}

/// Tags any error with the stage it happened in.
pub(crate) fn at_stage<T, E: std::fmt::Display>(stage: &str, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::Stage { stage: stage.to_string(), message: e.to_string() })
}

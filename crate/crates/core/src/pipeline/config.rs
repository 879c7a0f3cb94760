use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::geo::GeoPoint;
use crate::learners::{AdaBoostParams, LearnerSpec, RandomForestParams};
use crate::matching::DEFAULT_TOLERANCE_S;
use crate::tuning::{RfeConfig, TuningConfig};

/// Default presence learner: AdaBoost with 50 rounds at learning rate 1.0.
pub fn default_presence_learner() -> LearnerSpec {
    LearnerSpec::AdaBoost(AdaBoostParams { n_estimators: 50, learning_rate: 1.0 })
}

/// Default quantity learner: a random forest and AdaBoost stacked under a logistic meta-model.
pub fn default_quantity_learner() -> LearnerSpec {
    LearnerSpec::Stacked {
        bases: vec![
            LearnerSpec::RandomForest(RandomForestParams {
                n_estimators: 100,
                max_depth: Some(10),
                min_samples_split: 2,
                min_samples_leaf: 1,
            }),
            LearnerSpec::AdaBoost(AdaBoostParams { n_estimators: 200, learning_rate: 0.5 }),
        ],
        folds: 5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensitivityConfig {
    pub segment_sizes: Vec<f64>,
    /// Reference centerline for path error; without it, held-out AIS positions are the reference.
    pub truth_geojson: Option<PathBuf>,
    /// Share of trips held out of path building when AIS positions are the reference.
    pub holdout_fraction: f64,
    /// Learner scored at each class count of the grouping search.
    pub grouping_learner: LearnerSpec,
    /// A grouping within this F1 of the best keeps more classes.
    pub grouping_f1_slack: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            segment_sizes: vec![0.1, 0.3, 0.5, 1.0, 2.0],
            truth_geojson: None,
            holdout_fraction: 0.2,
            grouping_learner: LearnerSpec::RandomForest(RandomForestParams { n_estimators: 50, ..Default::default() }),
            grouping_f1_slack: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub ais_csv: PathBuf,
    pub river_geojson: PathBuf,
    pub observations_csv: PathBuf,
    /// Bridge point of every camera location.
    pub locations: BTreeMap<String, GeoPoint>,
    pub segment_length_miles: f64,
    pub buffer_miles: f64,
    pub trip_gap_minutes: f64,
    pub match_tolerance_s: f64,
    pub match_max_distance_miles: f64,
    pub seed: u64,
    pub presence_test_fraction: f64,
    pub quantity_test_fraction: f64,
    pub downsample_cap: usize,
    pub smote_k_neighbors: usize,
    /// Synthetic rows per non-largest class, as a fraction of its size.
    pub smote_fraction: f64,
    pub imputation_k: usize,
    pub cv_folds: usize,
    pub presence_learner: LearnerSpec,
    pub quantity_learner: LearnerSpec,
    pub rfe: RfeConfig,
    pub run_rfe: bool,
    pub tuning: TuningConfig,
    pub run_tuning: bool,
    pub sensitivity: SensitivityConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ais_csv: PathBuf::from("data/ais.csv"),
            river_geojson: PathBuf::from("data/river.geojson"),
            observations_csv: PathBuf::from("data/observations.csv"),
            locations: BTreeMap::new(),
            segment_length_miles: 0.3,
            buffer_miles: 1.0,
            trip_gap_minutes: 30.0,
            match_tolerance_s: DEFAULT_TOLERANCE_S,
            match_max_distance_miles: 2.0,
            seed: 42,
            presence_test_fraction: 0.30,
            quantity_test_fraction: 0.15,
            downsample_cap: 3,
            smote_k_neighbors: 5,
            smote_fraction: 0.5,
            imputation_k: 7,
            cv_folds: 5,
            presence_learner: default_presence_learner(),
            quantity_learner: default_quantity_learner(),
            rfe: RfeConfig::default(),
            run_rfe: true,
            tuning: TuningConfig::default(),
            run_tuning: true,
            sensitivity: SensitivityConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON config; relative input paths resolve against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.ais_csv);
        fix(&mut self.river_geojson);
        fix(&mut self.observations_csv);
        if let Some(t) = self.sensitivity.truth_geojson.as_mut() {
            fix(t);
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let frac = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(PipelineError::Config(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        frac("presence_test_fraction", self.presence_test_fraction)?;
        frac("quantity_test_fraction", self.quantity_test_fraction)?;
        frac("sensitivity.holdout_fraction", self.sensitivity.holdout_fraction)?;
        for (name, v) in [
            ("segment_length_miles", self.segment_length_miles),
            ("buffer_miles", self.buffer_miles),
            ("trip_gap_minutes", self.trip_gap_minutes),
            ("match_tolerance_s", self.match_tolerance_s),
        ] {
            if !(v > 0.0) {
                return Err(PipelineError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.cv_folds < 2 {
            return Err(PipelineError::Config("cv_folds must be at least 2".into()));
        }
        Ok(())
    }

    /// Checks that every input file exists.
    pub fn check_inputs(&self) -> Result<(), PipelineError> {
        for p in [&self.ais_csv, &self.river_geojson, &self.observations_csv] {
            if !p.exists() {
                return Err(PipelineError::Stage { stage: "input".into(), message: format!("not found: {}", p.display()) });
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

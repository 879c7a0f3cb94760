use std::io::Write;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::ais::Trip;
use crate::dataprep::{BargeClassMap, ImputationModel};
use crate::features::{extract_features, VesselDims};
use crate::learners::{argmax, LearnError, Matrix, Model, ARTIFACT_FORMAT_VERSION};

pub const PRESENCE_CLASSES: [&str; 2] = ["without barges", "with barges"];
pub const NO_BARGES: &str = "0 barges";

/// One stage's fitted learner and the registry slots it reads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageModel {
    pub learner: String,
    pub feature_names: Vec<String>,
    pub feature_indices: Vec<usize>,
    pub model: Model,
}

impl StageModel {
    pub fn predict_proba(&self, rows: &[&[f64]]) -> Result<Vec<Vec<f64>>, LearnError> {
        let data: Vec<Vec<f64>> = rows.iter().map(|r| self.feature_indices.iter().map(|&j| r[j]).collect()).collect();
        if data.is_empty() {
            return Ok(Vec::new());
        }
        self.model.predict_proba(&Matrix::from_rows(&data))
    }
}

/// Presence gate followed by a quantity classifier over barge-count bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalModel {
    pub format_version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub class_map: BargeClassMap,
    pub imputation: ImputationModel,
    pub presence: StageModel,
    pub quantity: StageModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalPrediction {
    pub has_barge: bool,
    /// Quantity class name, or "0 barges" when the presence gate says no.
    pub class_bin: String,
    pub quantity_class: Option<usize>,
    pub presence_proba: Vec<f64>,
    pub quantity_proba: Option<Vec<f64>>,
    /// Both presence probabilities were equal; class 0 was taken.
    pub presence_tie: bool,
}

impl HierarchicalModel {
    pub fn new(
        seed: u64,
        config_hash: String,
        class_map: BargeClassMap,
        imputation: ImputationModel,
        presence: StageModel,
        quantity: StageModel,
    ) -> Self {
        Self { format_version: ARTIFACT_FORMAT_VERSION, seed, config_hash, class_map, imputation, presence, quantity }
    }

    /// Imputes missing dimensions with the stored model.
    pub fn complete(&self, row: &[f64]) -> Vec<f64> {
        let mut v = row.to_vec();
        self.imputation.apply(&mut v);
        v
    }

    /// Predicts full registry-order rows; missing dimensions are imputed first.
    pub fn predict_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<HierarchicalPrediction>, LearnError> {
        let filled: Vec<Vec<f64>> = rows.iter().map(|r| self.complete(r)).collect();
        let refs: Vec<&[f64]> = filled.iter().map(Vec::as_slice).collect();
        let presence = self.presence.predict_proba(&refs)?;
        let gated: Vec<usize> = (0..rows.len()).filter(|&i| argmax(&presence[i]) == 1).collect();
        let quantity = self.quantity.predict_proba(&gated.iter().map(|&i| refs[i]).collect::<Vec<_>>())?;
        let names = self.class_map.class_names();
        let mut q = gated.iter().zip(quantity).peekable();
        Ok(presence
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let tie = p.len() == 2 && p[0] == p[1];
                match q.peek() {
                    Some(&(&gi, _)) if gi == i => {
                        let (_, qp) = q.next().expect("peeked");
                        let c = argmax(&qp);
                        HierarchicalPrediction {
                            has_barge: true,
                            class_bin: names[c].clone(),
                            quantity_class: Some(c),
                            presence_proba: p,
                            quantity_proba: Some(qp),
                            presence_tie: tie,
                        }
                    }
                    _ => HierarchicalPrediction {
                        has_barge: false,
                        class_bin: NO_BARGES.to_string(),
                        quantity_class: None,
                        presence_proba: p,
                        quantity_proba: None,
                        presence_tie: tie,
                    },
                }
            })
            .collect())
    }

    pub fn predict_trip(&self, trip: &Trip) -> Result<HierarchicalPrediction, PipelineError> {
        let (fv, _) = extract_features(trip, VesselDims::from_trip(trip))?;
        Ok(self.predict_rows(&[fv.0])?.remove(0))
    }
}

/// Writes one prediction per trip.
pub fn write_predictions<W: Write>(
    writer: W,
    trips: &[(String, u32)],
    preds: &[HierarchicalPrediction],
    n_quantity: usize,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> =
        ["trip_id", "mmsi", "has_barge", "class_bin", "presence_p_without", "presence_p_with"].map(String::from).to_vec();
    header.extend((0..n_quantity).map(|c| format!("quantity_p{c}")));
    w.write_record(&header)?;
    for ((id, mmsi), p) in trips.iter().zip(preds) {
        let mut rec = vec![id.clone(), mmsi.to_string(), p.has_barge.to_string(), p.class_bin.clone()];
        rec.extend(p.presence_proba.iter().map(|v| v.to_string()));
        match &p.quantity_proba {
            Some(q) => rec.extend(q.iter().map(|v| v.to_string())),
            None => rec.extend(std::iter::repeat_n(String::new(), n_quantity)),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

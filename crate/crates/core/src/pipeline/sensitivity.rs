use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::stages::{build_path, load_clean_records};
use super::{at_stage, PipelineConfig, PipelineError};
use crate::ais::{split_trips, AisRecord};
use crate::dataprep::stratified_kfold;
use crate::geo::{read_linestring_geojson, GeoPoint, Polyline};
use crate::learners::Matrix;
use crate::metrics::confusion;
use crate::tuning::{cross_validate_by, weighted_f1_metric};

const REGION_BIN_MILES: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRow {
    pub segment_miles: f64,
    /// Mean distance from the reference points to the average path.
    pub mean_error_miles: f64,
    pub n_reference: usize,
    pub n_segments: usize,
    pub n_segments_with_points: usize,
}

/// Where the path error is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentReference {
    /// Vertices of a reference centerline inside the region the AIS data covers.
    Centerline,
    /// Positions of trips held out of path building.
    HeldOutPositions,
}

/// Average-path error for each segment length, in the order given.
pub fn segment_sensitivity_with(
    centerline: &Polyline,
    records: &[AisRecord],
    reference: &[GeoPoint],
    sizes: &[f64],
) -> Result<Vec<SegmentRow>, PipelineError> {
    if reference.is_empty() {
        return Err(PipelineError::Stage { stage: "sensitivity".into(), message: "no reference points".into() });
    }
    sizes
        .iter()
        .map(|&size| {
            let built = build_path(centerline, records, size)?;
            let total: f64 = reference.iter().map(|&p| built.avg_path.distance_miles(p)).sum();
            Ok(SegmentRow {
                segment_miles: size,
                mean_error_miles: total / reference.len() as f64,
                n_reference: reference.len(),
                n_segments: built.river.segments.len(),
                n_segments_with_points: built.river.segments.iter().filter(|s| s.cog.is_some()).count(),
            })
        })
        .collect()
}

/// Reference-line vertices whose along-river bin, and both neighbouring bins, hold AIS records.
fn covered_vertices(centerline: &Polyline, records: &[AisRecord], reference: &Polyline) -> Vec<GeoPoint> {
    let bin = |p: GeoPoint| (centerline.project(p).arclength_miles / REGION_BIN_MILES).floor() as i64;
    let occupied: BTreeSet<i64> = records.iter().map(|r| bin(r.position())).collect();
    reference
        .points()
        .iter()
        .copied()
        .filter(|&p| {
            let b = bin(p);
            (b - 1..=b + 1).all(|x| occupied.contains(&x))
        })
        .collect()
}

/// Path error per configured segment size, measured on the reference centerline when one is configured.
pub fn segment_sensitivity(cfg: &PipelineConfig) -> Result<(SegmentReference, Vec<SegmentRow>), PipelineError> {
    let (centerline, records, ..) = load_clean_records(cfg)?;
    let sizes = &cfg.sensitivity.segment_sizes;
    if let Some(truth) = &cfg.sensitivity.truth_geojson {
        let reference = at_stage("sensitivity", read_linestring_geojson(truth))?;
        let points = covered_vertices(&centerline, &records, &reference);
        return Ok((SegmentReference::Centerline, segment_sensitivity_with(&centerline, &records, &points, sizes)?));
    }
    let mut trips = split_trips(records, cfg.trip_gap_minutes);
    trips.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let n_hold = ((trips.len() as f64 * cfg.sensitivity.holdout_fraction).round() as usize).clamp(1, trips.len().saturating_sub(1));
    if trips.len() < 2 {
        return Err(PipelineError::Stage { stage: "sensitivity".into(), message: "need at least two trips".into() });
    }
    let reference: Vec<GeoPoint> = trips[..n_hold].iter().flat_map(|t| t.records.iter().map(|r| r.position())).collect();
    let build: Vec<AisRecord> = trips[n_hold..].iter().flat_map(|t| t.records.iter().cloned()).collect();
    Ok((SegmentReference::HeldOutPositions, segment_sensitivity_with(&centerline, &build, &reference, sizes)?))
}

pub fn write_segment_table<W: Write>(writer: W, rows: &[SegmentRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["segment_miles", "mean_error_miles", "n_reference", "n_segments", "n_segments_with_points"])?;
    for r in rows {
        w.write_record([
            r.segment_miles.to_string(),
            r.mean_error_miles.to_string(),
            r.n_reference.to_string(),
            r.n_segments.to_string(),
            r.n_segments_with_points.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingStep {
    /// Inclusive barge-count ranges, one per class.
    pub groups: Vec<(u32, u32)>,
    pub cv_weighted_f1: f64,
    pub fold_scores: Vec<f64>,
    /// Index of the left group merged with its right neighbour to reach the next step.
    pub merged: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupingReport {
    pub curve: Vec<GroupingStep>,
    /// Index into `curve` of the chosen grouping.
    pub best: usize,
}

impl GroupingReport {
    pub fn best_groups(&self) -> &[(u32, u32)] {
        &self.curve[self.best].groups
    }
}

/// Greedy merging of adjacent barge-count classes, starting from one class per observed count.
///
/// At each step the pair of neighbours most often confused in pooled CV predictions, relative to
/// their combined size, is merged; ties merge the lowest pair. The chosen grouping is the one
/// with the most classes whose score is within the configured slack of the best.
pub fn grouping_sensitivity(rows: &[Vec<f64>], barge_counts: &[u32], cfg: &PipelineConfig, seed: u64) -> Result<GroupingReport, PipelineError> {
    let idx: Vec<usize> = (0..rows.len()).filter(|&i| barge_counts[i] > 0).collect();
    let counts: Vec<u32> = idx.iter().map(|&i| barge_counts[i]).collect();
    let distinct: Vec<u32> = counts.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if distinct.len() < 2 {
        return Err(PipelineError::Stage { stage: "sensitivity".into(), message: "need at least two distinct barge counts".into() });
    }
    let x = Matrix::from_rows(&idx.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>());
    let w = vec![1.0; idx.len()];
    let spec = &cfg.sensitivity.grouping_learner;
    let mut groups: Vec<(u32, u32)> = (0..distinct.len())
        .map(|g| (distinct[g], if g + 1 < distinct.len() { distinct[g + 1] - 1 } else { distinct[g] }))
        .collect();
    groups[0].0 = 1;
    let mut curve: Vec<GroupingStep> = Vec::new();
    loop {
        let k = groups.len();
        let y: Vec<usize> = counts.iter().map(|&c| groups.iter().position(|&(lo, hi)| c >= lo && c <= hi).expect("covered")).collect();
        let folds = at_stage("sensitivity", stratified_kfold(&y, cfg.cv_folds, seed))?;
        let mut pooled_true = Vec::new();
        let mut pooled_pred = Vec::new();
        let cv = at_stage(
            "sensitivity",
            cross_validate_by(&folds, &y, k, weighted_f1_metric, |f, fold| {
                let yt: Vec<usize> = fold.train.iter().map(|&i| y[i]).collect();
                let wt: Vec<f64> = fold.train.iter().map(|&i| w[i]).collect();
                let m = spec.fit(&x.select_rows(&fold.train), &yt, &wt, k, seed.wrapping_add(f as u64))?;
                let pred = m.predict(&x.select_rows(&fold.validation))?;
                pooled_true.extend(fold.validation.iter().map(|&i| y[i]));
                pooled_pred.extend(pred.iter().copied());
                Ok(pred)
            }),
        )?;
        log::info!("grouping: {k} classes, cv F1 {:.4}", cv.mean);
        curve.push(GroupingStep { groups: groups.clone(), cv_weighted_f1: cv.mean, fold_scores: cv.fold_scores, merged: None });
        if k == 2 {
            break;
        }
        let cm = at_stage("sensitivity", confusion(&pooled_true, &pooled_pred, k))?;
        let size = |c: usize| cm.counts[c].iter().sum::<u64>();
        let mut pick = (0, f64::NEG_INFINITY);
        for i in 0..k - 1 {
            let n = (size(i) + size(i + 1)).max(1) as f64;
            let rate = (cm.counts[i][i + 1] + cm.counts[i + 1][i]) as f64 / n;
            if rate > pick.1 {
                pick = (i, rate);
            }
        }
        curve.last_mut().expect("pushed").merged = Some(pick.0);
        groups[pick.0].1 = groups[pick.0 + 1].1;
        groups.remove(pick.0 + 1);
    }
    let top = curve.iter().map(|s| s.cv_weighted_f1).fold(f64::NEG_INFINITY, f64::max);
    let best = curve
        .iter()
        .position(|s| s.cv_weighted_f1 >= top - cfg.sensitivity.grouping_f1_slack)
        .expect("the top step qualifies");
    Ok(GroupingReport { curve, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::AisRecord;
    use crate::learners::{CartParams, LearnerSpec};

    #[test]
    fn covered_vertices_need_neighbours() {
        let line = Polyline::new(vec![GeoPoint::new(37.0, -89.0), GeoPoint::new(37.0, -88.9)]).unwrap();
        let recs: Vec<AisRecord> =
            (0..20).map(|i| AisRecord::at(1, i, GeoPoint::new(37.0, -89.0 + 0.0005 * i as f64), 5.0)).collect();
        let reference = Polyline::new((0..50).map(|i| GeoPoint::new(37.0, -89.0 + 0.002 * i as f64)).collect()).unwrap();
        let kept = covered_vertices(&line, &recs, &reference);
        assert!(!kept.is_empty());
        assert!(kept.len() < reference.points().len());
        assert!(kept.iter().all(|p| p.lon < -88.985));
    }

    #[test]
    fn merges_confused_neighbours_first() {
        // Counts 1 and 2 share a feature value; 3 and 4 are each distinct.
        let mut rows = Vec::new();
        let mut counts = Vec::new();
        for i in 0..80 {
            let c = (i % 4) as u32 + 1;
            let f = match c {
                1 | 2 => 0.0,
                3 => 10.0,
                _ => 20.0,
            };
            rows.push(vec![f + (i % 3) as f64 * 0.1]);
            counts.push(c);
        }
        let cfg = PipelineConfig {
            sensitivity: super::super::SensitivityConfig {
                grouping_learner: LearnerSpec::Cart(CartParams::default()),
                ..Default::default()
            },
            ..PipelineConfig::default()
        };
        let r = grouping_sensitivity(&rows, &counts, &cfg, 0).unwrap();
        assert_eq!(r.curve.len(), 3);
        assert_eq!(r.curve[0].merged, Some(0));
        assert_eq!(r.curve[1].groups, vec![(1, 2), (3, 3), (4, 4)]);
        assert_eq!(r.best_groups(), &[(1, 2), (3, 3), (4, 4)]);
    }
}

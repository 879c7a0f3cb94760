use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{at_stage, PipelineConfig, PipelineError};
use crate::ais::{
    buffer_filter_polyline, clean_records, parse_ais_csv, split_trips, AisRecord, AisSchema, CleaningReport, ParseReport,
    Trip,
};
use crate::dataprep::Provenance;
use crate::features::{extract_features, FeatureVector, VesselDims};
use crate::geo::{assign_and_cog, average_path, build_segments, impute_trajectory, read_linestring_geojson, Polyline, RiverPath};
use crate::matching::{match_observations, parse_observations, LabeledDataset, LabeledSample, MatchConfig, ObservationReport, UnmatchedReport};

/// Cleaned, buffered records grouped into trips.
#[derive(Debug, Clone)]
pub struct TripBuild {
    pub centerline: Polyline,
    pub records: Vec<AisRecord>,
    pub trips: Vec<Trip>,
    pub parse: ParseReport,
    pub cleaning: CleaningReport,
    /// Records dropped for lying outside the buffer.
    pub outside_buffer: usize,
}

/// Parses, cleans and buffer-filters the AIS input.
pub fn load_clean_records(cfg: &PipelineConfig) -> Result<(Polyline, Vec<AisRecord>, ParseReport, CleaningReport, usize), PipelineError> {
    let centerline = at_stage("path", read_linestring_geojson(&cfg.river_geojson))?;
    let (raw, parse) = at_stage("clean", parse_ais_csv(&cfg.ais_csv, &AisSchema::default()))?;
    let (kept, mut cleaning) = clean_records(raw);
    cleaning.parse_skipped = parse.skipped;
    let before = kept.len();
    let buffered = at_stage("clean", buffer_filter_polyline(kept, &centerline, cfg.buffer_miles))?;
    let outside = before - buffered.len();
    log::info!(
        "clean: {} parsed, {} kept after cleaning, {} inside the {} mi buffer",
        parse.parsed,
        before,
        buffered.len(),
        cfg.buffer_miles
    );
    Ok((centerline, buffered, parse, cleaning, outside))
}

pub fn prepared_trips(cfg: &PipelineConfig) -> Result<TripBuild, PipelineError> {
    let (centerline, records, parse, cleaning, outside_buffer) = load_clean_records(cfg)?;
    let trips = split_trips(records.clone(), cfg.trip_gap_minutes);
    log::info!("trips: {} from {} records", trips.len(), records.len());
    Ok(TripBuild { centerline, records, trips, parse, cleaning, outside_buffer })
}

/// Segmented centerline with per-segment centers of gravity, and the average path through them.
#[derive(Debug, Clone)]
pub struct PathBuild {
    pub river: RiverPath,
    pub avg_path: Polyline,
}

pub fn build_path(centerline: &Polyline, records: &[AisRecord], segment_length_miles: f64) -> Result<PathBuild, PipelineError> {
    let segs = at_stage("path", build_segments(centerline, segment_length_miles))?;
    let river = assign_and_cog(&segs, records);
    let avg_path = at_stage("path", average_path(&river))?;
    Ok(PathBuild { river, avg_path })
}

/// Fills gaps in every trip along the average path. Trips too short to impute pass through.
pub fn impute_trips(trips: &[Trip], avg_path: &Polyline, segment_length_miles: f64) -> (Vec<Trip>, usize) {
    let mut inserted = 0;
    let out = trips
        .iter()
        .map(|t| match impute_trajectory(t, avg_path, segment_length_miles) {
            Ok((filled, rep)) => {
                inserted += rep.inserted;
                filled
            }
            Err(_) => t.clone(),
        })
        .collect();
    (out, inserted)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub parse: ParseReport,
    pub cleaning: CleaningReport,
    pub outside_buffer: usize,
    pub trips: usize,
    pub imputed_records: usize,
    pub segments: usize,
    pub segments_with_points: usize,
    pub observations: ObservationReport,
    pub matches: usize,
    /// Matched trips whose features could not be computed.
    pub dropped_no_features: Vec<String>,
}

/// Everything needed to train, starting from the raw inputs.
#[derive(Debug, Clone)]
pub struct LabeledBuild {
    pub trips: TripBuild,
    pub path: PathBuild,
    pub imputed: Vec<Trip>,
    pub matches: Vec<LabeledSample>,
    pub unmatched: UnmatchedReport,
    pub features: BTreeMap<String, FeatureVector>,
    /// Registry-order rows with missing dimensions left as NaN.
    pub dataset: LabeledDataset,
    pub summary: DataSummary,
}

/// Runs cleaning, path building, imputation, matching and feature extraction.
pub fn build_labeled(cfg: &PipelineConfig) -> Result<LabeledBuild, PipelineError> {
    cfg.check_inputs()?;
    if cfg.locations.is_empty() {
        return Err(PipelineError::Config("no camera locations configured".into()));
    }
    let trips = prepared_trips(cfg)?;
    let path = build_path(&trips.centerline, &trips.records, cfg.segment_length_miles)?;
    let (imputed, imputed_records) = impute_trips(&trips.trips, &path.avg_path, cfg.segment_length_miles);
    let (obs, obs_report) = at_stage("match", parse_observations(&cfg.observations_csv))?;
    let mcfg = MatchConfig {
        tolerance_s: cfg.match_tolerance_s,
        epsilon_miles: cfg.segment_length_miles,
        max_distance_miles: cfg.match_max_distance_miles,
    };
    let (all_matches, unmatched) = at_stage("match", match_observations(&imputed, &obs, &cfg.locations, &path.avg_path, &mcfg))?;
    log::info!("match: {} of {} observations matched", all_matches.len(), obs.len());

    let by_id: BTreeMap<&str, &Trip> = imputed.iter().map(|t| (t.trip_id.as_str(), t)).collect();
    let mut features = BTreeMap::new();
    let mut matches = Vec::with_capacity(all_matches.len());
    let mut dropped = Vec::new();
    for m in all_matches {
        let trip = by_id[m.trip_id.as_str()];
        match extract_features(trip, VesselDims::from_trip(trip)) {
            Ok((fv, _)) => {
                features.insert(m.trip_id.clone(), fv);
                matches.push(m);
            }
            Err(e) => {
                log::warn!("features: dropping {}: {e}", m.trip_id);
                dropped.push(m.trip_id);
            }
        }
    }
    let dataset = LabeledDataset {
        rows: matches.iter().map(|m| features[&m.trip_id].0.clone()).collect(),
        barge_count: matches.iter().map(|m| m.barge_count).collect(),
        provenance: vec![Provenance::Real; matches.len()],
        location_id: matches.iter().map(|m| m.location_id.clone()).collect(),
    };
    let summary = DataSummary {
        parse: trips.parse.clone(),
        cleaning: trips.cleaning.clone(),
        outside_buffer: trips.outside_buffer,
        trips: trips.trips.len(),
        imputed_records,
        segments: path.river.segments.len(),
        segments_with_points: path.river.segments.iter().filter(|s| s.cog.is_some()).count(),
        observations: obs_report,
        matches: matches.len(),
        dropped_no_features: dropped,
    };
    Ok(LabeledBuild { trips, path, imputed, matches, unmatched, features, dataset, summary })
}

//! Camera observations, trip direction, and one-to-one observation/trip matching.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{format_timestamp, parse_timestamp, Trip};
use crate::dataprep::Provenance;
use crate::features::{feature_names, FeatureVector, N_FEATURES};
use crate::geo::{estimate_arrival, ArrivalMode, GeoError, GeoPoint, Polyline};

pub const MAX_BARGE_COUNT: u32 = 42;
pub const DEFAULT_TOLERANCE_S: f64 = 900.0;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("unknown location id {0:?}")]
    UnknownLocation(String),
    #[error("trip {0} has no feature vector")]
    MissingFeatures(String),
    #[error("geometry: {0}")]
    Geo(#[from] GeoError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {message}")]
    BadRow { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Upstream,
    Downstream,
}

impl Direction {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "upstream" => Some(Direction::Upstream),
            "downstream" => Some(Direction::Downstream),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Upstream => "upstream",
            Direction::Downstream => "downstream",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripDirection {
    Upstream,
    Downstream,
    Ambiguous,
}

impl TripDirection {
    pub fn direction(self) -> Option<Direction> {
        match self {
            TripDirection::Upstream => Some(Direction::Upstream),
            TripDirection::Downstream => Some(Direction::Downstream),
            TripDirection::Ambiguous => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraObservation {
    pub location_id: String,
    pub bridge_point: GeoPoint,
    pub observed_at: i64,
    pub direction: Direction,
    pub barge_count: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservationReport {
    pub rows: usize,
    pub parsed: usize,
    pub rejected: Vec<String>,
}

pub fn parse_observations(path: impl AsRef<Path>) -> Result<(Vec<CameraObservation>, ObservationReport), MatchError> {
    parse_observations_reader(std::fs::File::open(path)?)
}

pub fn parse_observations_reader<R: Read>(reader: R) -> Result<(Vec<CameraObservation>, ObservationReport), MatchError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let names = ["location_id", "lat", "lon", "observed_at", "direction", "barge_count"];
    let mut idx = [0usize; 6];
    for (slot, name) in idx.iter_mut().zip(names) {
        *slot = col(name).ok_or_else(|| MatchError::BadRow { line: 0, message: format!("missing column {name}") })?;
    }
    let mut report = ObservationReport::default();
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        report.rows += 1;
        let row = row?;
        let get = |i: usize| row.get(idx[i]).unwrap_or("");
        let parsed = (|| -> Result<CameraObservation, String> {
            let lat: f64 = get(1).parse().map_err(|_| format!("bad lat {:?}", get(1)))?;
            let lon: f64 = get(2).parse().map_err(|_| format!("bad lon {:?}", get(2)))?;
            let observed_at = parse_timestamp(get(3)).ok_or_else(|| format!("bad timestamp {:?}", get(3)))?;
            let direction = Direction::parse(get(4)).ok_or_else(|| format!("bad direction {:?}", get(4)))?;
            let count: i64 = get(5).parse().map_err(|_| format!("bad barge_count {:?}", get(5)))?;
            if !(0..=i64::from(MAX_BARGE_COUNT)).contains(&count) {
                return Err(format!("barge_count {count} outside [0, {MAX_BARGE_COUNT}]"));
            }
            Ok(CameraObservation {
                location_id: get(0).to_string(),
                bridge_point: GeoPoint { lat, lon },
                observed_at,
                direction,
                barge_count: count as u32,
            })
        })();
        match parsed {
            Ok(o) => out.push(o),
            Err(msg) => report.rejected.push(format!("line {}: {msg}", line + 1)),
        }
    }
    report.parsed = out.len();
    Ok((out, report))
}

pub fn write_observations<W: Write>(writer: W, obs: &[CameraObservation]) -> Result<(), MatchError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["location_id", "lat", "lon", "observed_at", "direction", "barge_count"])?;
    for o in obs {
        w.write_record([
            o.location_id.clone(),
            o.bridge_point.lat.to_string(),
            o.bridge_point.lon.to_string(),
            format_timestamp(o.observed_at),
            o.direction.as_str().to_string(),
            o.barge_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Sign of the net along-path displacement between the first and last record.
/// Increasing arclength is downstream.
pub fn trip_direction(trip: &Trip, path: &Polyline, epsilon_miles: f64) -> TripDirection {
    let first = trip.records.iter().min_by_key(|r| r.timestamp);
    let last = trip.records.iter().max_by_key(|r| r.timestamp);
    let (Some(a), Some(b)) = (first, last) else {
        return TripDirection::Ambiguous;
    };
    let net = path.project(b.position()).arclength_miles - path.project(a.position()).arclength_miles;
    if net > epsilon_miles {
        TripDirection::Downstream
    } else if net < -epsilon_miles {
        TripDirection::Upstream
    } else {
        TripDirection::Ambiguous
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub trip_id: String,
    pub mmsi: u32,
    pub location_id: String,
    pub barge_count: u32,
    pub has_barge: bool,
    pub estimated_arrival: i64,
    /// Estimated arrival minus observation time.
    pub match_delta_s: i64,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocationUnmatched {
    pub trips_unmatched: usize,
    pub obs_unmatched: usize,
    /// Observations with a trip in time but none travelling the same way.
    pub dropped_direction: usize,
    /// Observations with no trip inside the tolerance.
    pub dropped_tolerance: usize,
    /// Greedy pairs removed by the order-consistency filter.
    pub dropped_order: usize,
}

pub type UnmatchedReport = BTreeMap<String, LocationUnmatched>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub tolerance_s: f64,
    /// Direction threshold; one segment length.
    pub epsilon_miles: f64,
    /// A trip is a candidate for a bridge only if some record lies this close.
    pub max_distance_miles: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { tolerance_s: DEFAULT_TOLERANCE_S, epsilon_miles: 0.3, max_distance_miles: 2.0 }
    }
}

/// A candidate or accepted (trip, observation) pairing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair {
    pub trip: usize,
    pub obs: usize,
    pub arrival: i64,
    pub observed: i64,
}

impl Pair {
    pub fn delta(&self) -> i64 {
        self.arrival - self.observed
    }
}

/// Largest subset in which arrival order equals observation order; ties prefer the smallest total |Δt|,
/// then the earliest pairs.
pub fn order_consistent(pairs: &[Pair]) -> Vec<Pair> {
    let mut p = pairs.to_vec();
    p.sort_by_key(|q| (q.arrival, q.observed, q.trip, q.obs));
    let n = p.len();
    // best[j] = (count, total |Δt|, predecessor) of the best chain ending at j.
    let mut best: Vec<(usize, i64, Option<usize>)> = Vec::with_capacity(n);
    for j in 0..n {
        let mut b = (1, p[j].delta().abs(), None);
        for i in 0..j {
            let arr_ok = p[i].arrival < p[j].arrival || (p[i].arrival == p[j].arrival && p[i].observed <= p[j].observed);
            if arr_ok && p[i].observed <= p[j].observed {
                let cand = (best[i].0 + 1, best[i].1 + p[j].delta().abs());
                if cand.0 > b.0 || (cand.0 == b.0 && cand.1 < b.1) {
                    b = (cand.0, cand.1, Some(i));
                }
            }
        }
        best.push(b);
    }
    let Some(end) = (0..n).fold(None, |acc: Option<usize>, j| match acc {
        Some(a) if best[a].0 > best[j].0 || (best[a].0 == best[j].0 && best[a].1 <= best[j].1) => Some(a),
        _ => Some(j),
    }) else {
        return Vec::new();
    };
    let mut chain = vec![p[end]];
    let mut cur = best[end].2;
    while let Some(i) = cur {
        chain.push(p[i]);
        cur = best[i].2;
    }
    chain.reverse();
    chain
}

/// Greedy one-to-one assignment by smallest |Δt|; ties go to the lower observation, then trip index.
pub fn greedy_assign(candidates: &[Pair]) -> Vec<Pair> {
    let mut c = candidates.to_vec();
    c.sort_by_key(|p| (p.delta().abs(), p.obs, p.trip));
    let mut used_t = BTreeSet::new();
    let mut used_o = BTreeSet::new();
    let mut out = Vec::new();
    for p in c {
        if !used_t.contains(&p.trip) && !used_o.contains(&p.obs) {
            used_t.insert(p.trip);
            used_o.insert(p.obs);
            out.push(p);
        }
    }
    out
}

/// Matches observations to trips per location, in location-id order. A trip matched at one
/// location is not offered to later ones.
pub fn match_observations(
    trips: &[Trip],
    observations: &[CameraObservation],
    locations: &BTreeMap<String, GeoPoint>,
    path: &Polyline,
    cfg: &MatchConfig,
) -> Result<(Vec<LabeledSample>, UnmatchedReport), MatchError> {
    if let Some(o) = observations.iter().find(|o| !locations.contains_key(&o.location_id)) {
        return Err(MatchError::UnknownLocation(o.location_id.clone()));
    }
    let directions: Vec<TripDirection> = trips.iter().map(|t| trip_direction(t, path, cfg.epsilon_miles)).collect();
    let mut taken = vec![false; trips.len()];
    let mut matches = Vec::new();
    let mut report = UnmatchedReport::new();
    for (loc, &bridge) in locations {
        let obs: Vec<usize> = (0..observations.len()).filter(|&i| &observations[i].location_id == loc).collect();
        let mut arrivals: Vec<(usize, i64)> = Vec::new();
        for (t, trip) in trips.iter().enumerate() {
            if taken[t] || trip.records.is_empty() {
                continue;
            }
            let est = estimate_arrival(trip, bridge, ArrivalMode::Nearest, path)?;
            if est.nearest_distance_miles <= cfg.max_distance_miles {
                arrivals.push((t, est.arrival_s.round() as i64));
            }
        }
        let mut entry = LocationUnmatched::default();
        let mut candidates = Vec::new();
        for &o in &obs {
            let ob = &observations[o];
            let in_time: Vec<&(usize, i64)> =
                arrivals.iter().filter(|(_, a)| ((a - ob.observed_at) as f64).abs() <= cfg.tolerance_s).collect();
            let before = candidates.len();
            for &&(t, arrival) in &in_time {
                if directions[t].direction() == Some(ob.direction) {
                    candidates.push(Pair { trip: t, obs: o, arrival, observed: ob.observed_at });
                }
            }
            if in_time.is_empty() {
                entry.dropped_tolerance += 1;
            } else if candidates.len() == before {
                entry.dropped_direction += 1;
            }
        }
        let greedy = greedy_assign(&candidates);
        let kept = order_consistent(&greedy);
        entry.dropped_order = greedy.len() - kept.len();
        entry.obs_unmatched = obs.len() - kept.len();
        entry.trips_unmatched = arrivals.len() - kept.len();
        let mut kept = kept;
        kept.sort_by_key(|p| (p.observed, p.obs));
        for p in kept {
            taken[p.trip] = true;
            let ob = &observations[p.obs];
            matches.push(LabeledSample {
                trip_id: trips[p.trip].trip_id.clone(),
                mmsi: trips[p.trip].mmsi,
                location_id: loc.clone(),
                barge_count: ob.barge_count,
                has_barge: ob.barge_count > 0,
                estimated_arrival: p.arrival,
                match_delta_s: p.delta(),
                provenance: Provenance::Real,
            });
        }
        report.insert(loc.clone(), entry);
    }
    Ok((matches, report))
}

/// Labeled rows as read back from a dataset CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    /// Registry-ordered features; missing values are NaN.
    pub rows: Vec<Vec<f64>>,
    pub barge_count: Vec<u32>,
    pub provenance: Vec<Provenance>,
    pub location_id: Vec<String>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn has_barge(&self) -> Vec<bool> {
        self.barge_count.iter().map(|&b| b > 0).collect()
    }

    pub fn select(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            barge_count: idx.iter().map(|&i| self.barge_count[i]).collect(),
            provenance: idx.iter().map(|&i| self.provenance[i]).collect(),
            location_id: idx.iter().map(|&i| self.location_id[i].clone()).collect(),
        }
    }
}

fn dataset_header() -> Vec<String> {
    let mut h: Vec<String> = feature_names().into_iter().map(str::to_string).collect();
    h.extend(["barge_count", "has_barge", "provenance", "location_id"].map(String::from));
    h
}

fn fmt_feature(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Writes one row per match with its trip's features.
pub fn emit_labeled_dataset<W: Write>(
    writer: W,
    matches: &[LabeledSample],
    features: &BTreeMap<String, FeatureVector>,
) -> Result<(), MatchError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header())?;
    for m in matches {
        let fv = features.get(&m.trip_id).ok_or_else(|| MatchError::MissingFeatures(m.trip_id.clone()))?;
        let mut rec: Vec<String> = fv.as_slice().iter().map(|&v| fmt_feature(v)).collect();
        rec.push(m.barge_count.to_string());
        rec.push(m.has_barge.to_string());
        rec.push(m.provenance.as_str().to_string());
        rec.push(m.location_id.clone());
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset<W: Write>(writer: W, data: &LabeledDataset) -> Result<(), MatchError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(dataset_header())?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.rows[i].iter().map(|&v| fmt_feature(v)).collect();
        rec.push(data.barge_count[i].to_string());
        rec.push((data.barge_count[i] > 0).to_string());
        rec.push(data.provenance[i].as_str().to_string());
        rec.push(data.location_id[i].clone());
        w.write_record(rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(reader: R) -> Result<LabeledDataset, MatchError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let expected = dataset_header();
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != expected {
        return Err(MatchError::BadRow { line: 0, message: "unexpected dataset header".into() });
    }
    let mut out = LabeledDataset::default();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |message: String| MatchError::BadRow { line: line + 1, message };
        let mut v = Vec::with_capacity(N_FEATURES);
        for j in 0..N_FEATURES {
            let s = &row[j];
            v.push(if s.is_empty() { f64::NAN } else { s.parse().map_err(|_| bad(format!("bad value {s:?}")))? });
        }
        let count: u32 = row[N_FEATURES].parse().map_err(|_| bad("bad barge_count".into()))?;
        let provenance = match &row[N_FEATURES + 2] {
            "real" => Provenance::Real,
            "synthetic" => Provenance::Synthetic,
            other => return Err(bad(format!("bad provenance {other:?}"))),
        };
        out.rows.push(v);
        out.barge_count.push(count);
        out.provenance.push(provenance);
        out.location_id.push(row[N_FEATURES + 3].to_string());
    }
    Ok(out)
}

pub fn read_dataset_file(path: impl AsRef<Path>) -> Result<LabeledDataset, MatchError> {
    read_dataset(std::fs::File::open(path)?)
}

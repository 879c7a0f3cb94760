use serde::{Deserialize, Serialize};

use super::{haversine_miles, GeoError, GeoPoint, Polyline, MPH_PER_KNOT};
use crate::ais::{AisRecord, Trip, SOG_UNAVAILABLE};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImputeReport {
    pub inserted: usize,
    /// Consecutive pairs skipped because a record projects past either path end.
    pub skipped_outside: usize,
}

/// Fills trajectory gaps along the average path.
///
/// Between consecutive records whose along-path positions differ by more than
/// one segment length, a synthetic record is placed at every path vertex
/// strictly between them, timestamped by constant-speed interpolation.
/// Original records are never modified.
pub fn impute_trajectory(
    trip: &Trip,
    avg_path: &Polyline,
    segment_length_miles: f64,
) -> Result<(Trip, ImputeReport), GeoError> {
    if trip.records.len() < 2 {
        return Err(GeoError::ShortTrip(trip.records.len()));
    }
    let positions: Vec<_> = trip
        .records
        .iter()
        .map(|r| avg_path.project(r.position()))
        .collect();
    let vertex_s = avg_path.vertex_arclengths();
    let mut report = ImputeReport::default();
    let mut out = Vec::with_capacity(trip.records.len());
    for i in 0..trip.records.len() {
        let r1 = &trip.records[i];
        out.push(r1.clone());
        let Some(r2) = trip.records.get(i + 1) else {
            break;
        };
        let (p1, p2) = (positions[i], positions[i + 1]);
        if p1.beyond_ends || p2.beyond_ends {
            report.skipped_outside += 1;
            continue;
        }
        let (s1, s2) = (p1.arclength_miles, p2.arclength_miles);
        if (s2 - s1).abs() <= segment_length_miles {
            continue;
        }
        let (lo, hi) = if s1 < s2 { (s1, s2) } else { (s2, s1) };
        let mut crossed: Vec<usize> = (0..vertex_s.len())
            .filter(|&v| vertex_s[v] > lo && vertex_s[v] < hi)
            .collect();
        if s2 < s1 {
            crossed.reverse();
        }
        let dt = (r2.timestamp - r1.timestamp) as f64;
        let mut last_t = r1.timestamp;
        for v in crossed {
            let frac = (vertex_s[v] - s1) / (s2 - s1);
            let t = r1.timestamp + (frac * dt).round() as i64;
            if t <= last_t || t >= r2.timestamp {
                continue;
            }
            out.push(synthetic_from(r1, t, avg_path.points()[v]));
            last_t = t;
            report.inserted += 1;
        }
    }
    Ok((
        Trip {
            trip_id: trip.trip_id.clone(),
            mmsi: trip.mmsi,
            records: out,
        },
        report,
    ))
}

fn synthetic_from(template: &AisRecord, timestamp: i64, p: GeoPoint) -> AisRecord {
    AisRecord {
        timestamp,
        lat: p.lat,
        lon: p.lon,
        sog: SOG_UNAVAILABLE,
        course: None,
        heading: None,
        synthetic: true,
        ..template.clone()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrivalMode {
    #[default]
    Nearest,
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalEstimate {
    /// Estimated UTC seconds at which the vessel passes the landmark.
    pub arrival_s: f64,
    /// Index of the nearest record in the trip.
    pub nearest_index: usize,
    pub nearest_distance_miles: f64,
    pub mode_used: ArrivalMode,
    /// Weighted mode lacked a record on one side and fell back to nearest.
    pub fell_back: bool,
    /// The nearest record's timestamp was extrapolated by its speed.
    pub shifted: bool,
}

/// Estimates when a trip passes `landmark`.
pub fn estimate_arrival(
    trip: &Trip,
    landmark: GeoPoint,
    mode: ArrivalMode,
    path: &Polyline,
) -> Result<ArrivalEstimate, GeoError> {
    if trip.records.is_empty() {
        return Err(GeoError::EmptyTrip);
    }
    let dists: Vec<f64> = trip
        .records
        .iter()
        .map(|r| haversine_miles(r.position(), landmark))
        .collect();
    let nearest = argmin(dists.iter().copied().enumerate()).expect("non-empty");
    if dists[nearest] == 0.0 {
        return Ok(ArrivalEstimate {
            arrival_s: trip.records[nearest].timestamp as f64,
            nearest_index: nearest,
            nearest_distance_miles: 0.0,
            mode_used: mode,
            fell_back: false,
            shifted: false,
        });
    }
    let landmark_s = path.project(landmark).arclength_miles;
    let arclengths: Vec<f64> = trip
        .records
        .iter()
        .map(|r| path.project(r.position()).arclength_miles)
        .collect();

    if mode == ArrivalMode::Weighted {
        let before = argmin(
            dists
                .iter()
                .copied()
                .enumerate()
                .filter(|&(i, _)| arclengths[i] < landmark_s),
        );
        let after = argmin(
            dists
                .iter()
                .copied()
                .enumerate()
                .filter(|&(i, _)| arclengths[i] >= landmark_s),
        );
        if let (Some(a), Some(b)) = (before, after) {
            let (t1, d1) = (trip.records[a].timestamp as f64, dists[a]);
            let (t2, d2) = (trip.records[b].timestamp as f64, dists[b]);
            return Ok(ArrivalEstimate {
                arrival_s: (t1 / d1 + t2 / d2) / (1.0 / d1 + 1.0 / d2),
                nearest_index: nearest,
                nearest_distance_miles: dists[nearest],
                mode_used: ArrivalMode::Weighted,
                fell_back: false,
                shifted: false,
            });
        }
    }

    let rec = &trip.records[nearest];
    let t = rec.timestamp as f64;
    let net = arclengths.last().expect("non-empty") - arclengths[0];
    let (arrival_s, shifted) = match rec.valid_sog() {
        Some(sog) if sog > 0.0 && net != 0.0 => {
            let remaining = (landmark_s - arclengths[nearest]) * net.signum();
            (t + remaining / (sog * MPH_PER_KNOT) * 3600.0, true)
        }
        _ => (t, false),
    };
    Ok(ArrivalEstimate {
        arrival_s,
        nearest_index: nearest,
        nearest_distance_miles: dists[nearest],
        mode_used: ArrivalMode::Nearest,
        fell_back: mode == ArrivalMode::Weighted,
        shifted,
    })
}

/// Index of the smallest value; ties go to the lowest index.
fn argmin(values: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values {
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

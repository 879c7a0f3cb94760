use serde::{Deserialize, Serialize};

use super::{haversine_km, GeoError, GeoPoint, Polyline};
use crate::ais::AisRecord;

/// One equal-length slice of the centerline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: usize,
    pub start_miles: f64,
    pub end_miles: f64,
    /// Center of gravity (mean position) of the AIS points assigned here.
    pub cog: Option<GeoPoint>,
    pub n_points: usize,
}

/// A centerline cut into equal segments, each optionally carrying a COG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiverPath {
    pub centerline: Polyline,
    pub segment_length_miles: f64,
    pub segments: Vec<Segment>,
}

impl RiverPath {
    /// Segment index for an arclength along the centerline.
    pub fn segment_index(&self, arclength_miles: f64) -> usize {
        let raw = (arclength_miles / self.segment_length_miles).floor();
        (raw.max(0.0) as usize).min(self.segments.len() - 1)
    }
}

pub fn build_segments(
    centerline: &Polyline,
    segment_length_miles: f64,
) -> Result<RiverPath, GeoError> {
    if !(segment_length_miles > 0.0) {
        return Err(GeoError::NonPositiveSegmentLength(segment_length_miles));
    }
    let total = centerline.total_length_miles();
    // Lengths that are an exact multiple up to rounding must not spawn a sliver.
    let ratio = total / segment_length_miles;
    let mut count = ratio.ceil();
    if count - ratio > 1.0 - 1e-9 {
        count -= 1.0;
    }
    let count = (count as usize).max(1);
    let segments = (0..count)
        .map(|i| Segment {
            index: i,
            start_miles: i as f64 * segment_length_miles,
            end_miles: if i + 1 == count {
                total
            } else {
                (i + 1) as f64 * segment_length_miles
            },
            cog: None,
            n_points: 0,
        })
        .collect();
    Ok(RiverPath {
        centerline: centerline.clone(),
        segment_length_miles,
        segments,
    })
}

/// Assigns each record to the segment holding its projected arclength and
/// sets every segment's COG to the mean of its points.
pub fn assign_and_cog(path: &RiverPath, records: &[AisRecord]) -> RiverPath {
    let n = path.segments.len();
    let mut sum_lat = vec![0.0; n];
    let mut sum_lon = vec![0.0; n];
    let mut counts = vec![0usize; n];
    // Accumulated in record order so the result does not depend on scheduling.
    for r in records {
        let idx = path.segment_index(path.centerline.project(r.position()).arclength_miles);
        sum_lat[idx] += r.lat;
        sum_lon[idx] += r.lon;
        counts[idx] += 1;
    }
    let mut out = path.clone();
    for (i, seg) in out.segments.iter_mut().enumerate() {
        seg.n_points = counts[i];
        seg.cog = (counts[i] > 0).then(|| {
            GeoPoint::new(sum_lat[i] / counts[i] as f64, sum_lon[i] / counts[i] as f64)
        });
    }
    out
}

/// Mean pairwise haversine distance among the points of each segment.
///
/// Diagnostic only; it plays no part in the COG.
pub fn segment_pairwise_mean_km(path: &RiverPath, records: &[AisRecord]) -> Vec<Option<f64>> {
    let mut buckets: Vec<Vec<GeoPoint>> = vec![Vec::new(); path.segments.len()];
    for r in records {
        let idx = path.segment_index(path.centerline.project(r.position()).arclength_miles);
        buckets[idx].push(r.position());
    }
    buckets
        .iter()
        .map(|pts| {
            if pts.len() < 2 {
                return None;
            }
            let mut total = 0.0;
            let mut pairs = 0usize;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    total += haversine_km(pts[i], pts[j]);
                    pairs += 1;
                }
            }
            Some(total / pairs as f64)
        })
        .collect()
}

/// Polyline through the non-empty COGs in segment order; empty segments are
/// bridged by joining their neighbours directly.
pub fn average_path(path: &RiverPath) -> Result<Polyline, GeoError> {
    let cogs: Vec<GeoPoint> = path.segments.iter().filter_map(|s| s.cog).collect();
    if cogs.len() < 2 {
        return Err(GeoError::TooFewCogs(cogs.len()));
    }
    Polyline::new(cogs)
}

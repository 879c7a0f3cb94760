//! AIS CSV ingestion, record cleaning, channel buffering and trip splitting.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{GeoError, GeoPoint, Polyline};

/// SOG value meaning "speed not available".
pub const SOG_UNAVAILABLE: f64 = 102.3;
/// Heading value meaning "not available".
pub const HEADING_UNAVAILABLE: f64 = 511.0;
/// COG value meaning "not available".
pub const COURSE_UNAVAILABLE: f64 = 360.0;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum AisError {
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),
    #[error("buffer width must be positive, got {0}")]
    NonPositiveBuffer(f64),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub fn is_sog_unavailable(sog: f64) -> bool {
    (sog - SOG_UNAVAILABLE).abs() < 1e-6
}

/// One decoded position report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AisRecord {
    pub mmsi: u32,
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
    /// Knots; [`SOG_UNAVAILABLE`] when the transponder reports no speed.
    pub sog: f64,
    pub course: Option<f64>,
    pub heading: Option<f64>,
    pub vessel_type: Option<u16>,
    pub status: Option<u8>,
    pub length: Option<f64>,
    pub width: Option<f64>,
    pub draft: Option<f64>,
    pub cargo: Option<u16>,
    /// Inserted by trajectory imputation rather than received.
    #[serde(default)]
    pub synthetic: bool,
}

impl AisRecord {
    /// A bare record with only the mandatory fields set.
    pub fn at(mmsi: u32, timestamp: i64, position: GeoPoint, sog: f64) -> Self {
        Self {
            mmsi,
            timestamp,
            lat: position.lat,
            lon: position.lon,
            sog,
            course: None,
            heading: None,
            vessel_type: None,
            status: None,
            length: None,
            width: None,
            draft: None,
            cargo: None,
            synthetic: false,
        }
    }

    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.lat, self.lon)
    }

    /// Speed usable for statistics: received and not the sentinel.
    pub fn valid_sog(&self) -> Option<f64> {
        (!self.synthetic && !is_sog_unavailable(self.sog)).then_some(self.sog)
    }

    pub fn valid_heading(&self) -> Option<f64> {
        if self.synthetic {
            return None;
        }
        self.heading.filter(|h| (0.0..360.0).contains(h))
    }
}

/// An ordered run of one vessel's records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub trip_id: String,
    pub mmsi: u32,
    pub records: Vec<AisRecord>,
}

impl Trip {
    /// Received (non-imputed) records.
    pub fn real_records(&self) -> impl Iterator<Item = &AisRecord> {
        self.records.iter().filter(|r| !r.synthetic)
    }
}

/// Column names for each AIS field; defaults follow the MarineCadastre export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AisSchema {
    pub mmsi: String,
    pub timestamp: String,
    pub lat: String,
    pub lon: String,
    pub sog: String,
    pub course: String,
    pub heading: String,
    pub vessel_type: String,
    pub status: String,
    pub length: String,
    pub width: String,
    pub draft: String,
    pub cargo: String,
}

impl Default for AisSchema {
    fn default() -> Self {
        Self {
            mmsi: "MMSI".into(),
            timestamp: "BaseDateTime".into(),
            lat: "LAT".into(),
            lon: "LON".into(),
            sog: "SOG".into(),
            course: "COG".into(),
            heading: "Heading".into(),
            vessel_type: "VesselType".into(),
            status: "Status".into(),
            length: "Length".into(),
            width: "Width".into(),
            draft: "Draft".into(),
            cargo: "Cargo".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub rows: usize,
    pub parsed: usize,
    pub skipped: usize,
    /// First few skip reasons, prefixed by 1-based data line.
    pub skip_reasons: Vec<String>,
}

const MAX_SKIP_REASONS: usize = 20;

pub fn parse_timestamp(s: &str) -> Option<i64> {
    let s = s.trim();
    NaiveDateTime::parse_from_str(s, TIMESTAMP_FORMAT)
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S"))
        .ok()
        .map(|t| t.and_utc().timestamp())
}

pub fn format_timestamp(ts: i64) -> String {
    DateTime::from_timestamp(ts, 0)
        .map(|t| t.format(TIMESTAMP_FORMAT).to_string())
        .unwrap_or_else(|| ts.to_string())
}

struct Columns {
    mmsi: usize,
    timestamp: usize,
    lat: usize,
    lon: usize,
    sog: usize,
    course: Option<usize>,
    heading: Option<usize>,
    vessel_type: Option<usize>,
    status: Option<usize>,
    length: Option<usize>,
    width: Option<usize>,
    draft: Option<usize>,
    cargo: Option<usize>,
}

impl Columns {
    fn resolve(headers: &csv::StringRecord, schema: &AisSchema) -> Result<Self, AisError> {
        let find = |name: &str| headers.iter().position(|h| h.trim() == name);
        let need = |name: &str| find(name).ok_or_else(|| AisError::MissingColumn(name.to_string()));
        Ok(Self {
            mmsi: need(&schema.mmsi)?,
            timestamp: need(&schema.timestamp)?,
            lat: need(&schema.lat)?,
            lon: need(&schema.lon)?,
            sog: need(&schema.sog)?,
            course: find(&schema.course),
            heading: find(&schema.heading),
            vessel_type: find(&schema.vessel_type),
            status: find(&schema.status),
            length: find(&schema.length),
            width: find(&schema.width),
            draft: find(&schema.draft),
            cargo: find(&schema.cargo),
        })
    }
}

fn cell(row: &csv::StringRecord, idx: usize) -> Option<&str> {
    row.get(idx).map(str::trim).filter(|s| !s.is_empty())
}

fn required_f64(row: &csv::StringRecord, idx: usize, name: &str) -> Result<f64, String> {
    let raw = cell(row, idx).ok_or_else(|| format!("empty {name}"))?;
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("non-numeric {name} `{raw}`"))
}

fn optional_f64(row: &csv::StringRecord, idx: Option<usize>, name: &str) -> Result<Option<f64>, String> {
    match idx.and_then(|i| cell(row, i)) {
        None => Ok(None),
        Some(raw) => raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Some)
            .ok_or_else(|| format!("non-numeric {name} `{raw}`")),
    }
}

fn optional_code<T: TryFrom<i64>>(
    row: &csv::StringRecord,
    idx: Option<usize>,
    name: &str,
) -> Result<Option<T>, String> {
    match optional_f64(row, idx, name)? {
        None => Ok(None),
        Some(v) if v.fract() == 0.0 => T::try_from(v as i64)
            .map(Some)
            .map_err(|_| format!("{name} out of range `{v}`")),
        Some(v) => Err(format!("non-integer {name} `{v}`")),
    }
}

fn parse_row(row: &csv::StringRecord, cols: &Columns) -> Result<AisRecord, String> {
    let mmsi_raw = cell(row, cols.mmsi).ok_or("empty mmsi")?;
    let mmsi: u32 = mmsi_raw
        .parse()
        .map_err(|_| format!("bad mmsi `{mmsi_raw}`"))?;
    let ts_raw = cell(row, cols.timestamp).ok_or("empty timestamp")?;
    let timestamp = parse_timestamp(ts_raw).ok_or_else(|| format!("bad timestamp `{ts_raw}`"))?;
    let lat = required_f64(row, cols.lat, "lat")?;
    let lon = required_f64(row, cols.lon, "lon")?;
    if !GeoPoint::new(lat, lon).is_valid() {
        return Err(format!("position out of range ({lat}, {lon})"));
    }
    let sog = required_f64(row, cols.sog, "sog")?;
    if sog < 0.0 {
        return Err(format!("negative sog {sog}"));
    }
    let status: Option<u8> = optional_code(row, cols.status, "status")?;
    if status.is_some_and(|s| s > 15) {
        return Err(format!("status out of range {status:?}"));
    }
    Ok(AisRecord {
        mmsi,
        timestamp,
        lat,
        lon,
        sog,
        course: optional_f64(row, cols.course, "course")?,
        heading: optional_f64(row, cols.heading, "heading")?,
        vessel_type: optional_code(row, cols.vessel_type, "vessel_type")?,
        status,
        length: optional_f64(row, cols.length, "length")?,
        width: optional_f64(row, cols.width, "width")?,
        draft: optional_f64(row, cols.draft, "draft")?,
        cargo: optional_code(row, cols.cargo, "cargo")?,
        synthetic: false,
    })
}

/// Parses an AIS CSV export. Malformed rows are skipped and counted.
pub fn parse_ais_csv(
    path: impl AsRef<Path>,
    schema: &AisSchema,
) -> Result<(Vec<AisRecord>, ParseReport), AisError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AisError::Unreadable {
        path: path.display().to_string(),
        source,
    })?;
    parse_ais_reader(file, schema)
}

pub fn parse_ais_reader<R: std::io::Read>(
    reader: R,
    schema: &AisSchema,
) -> Result<(Vec<AisRecord>, ParseReport), AisError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = Columns::resolve(&headers, schema)?;
    let mut report = ParseReport::default();
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        report.rows += 1;
        let parsed = row.map_err(|e| e.to_string()).and_then(|r| parse_row(&r, &cols));
        match parsed {
            Ok(rec) => out.push(rec),
            Err(reason) => {
                report.skipped += 1;
                if report.skip_reasons.len() < MAX_SKIP_REASONS {
                    report.skip_reasons.push(format!("line {}: {reason}", line + 1));
                }
            }
        }
    }
    report.parsed = out.len();
    Ok((out, report))
}

fn fmt_opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records with the default (MarineCadastre) header. Imputed records are not written.
pub fn write_ais_csv<W: std::io::Write>(writer: W, records: &[AisRecord]) -> Result<(), AisError> {
    let s = AisSchema::default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        &s.mmsi, &s.timestamp, &s.lat, &s.lon, &s.sog, &s.course, &s.heading, &s.vessel_type,
        &s.status, &s.length, &s.width, &s.draft, &s.cargo,
    ])?;
    for r in records.iter().filter(|r| !r.synthetic) {
        w.write_record([
            r.mmsi.to_string(),
            format_timestamp(r.timestamp),
            r.lat.to_string(),
            r.lon.to_string(),
            r.sog.to_string(),
            fmt_opt(r.course),
            fmt_opt(r.heading),
            fmt_opt(r.vessel_type),
            fmt_opt(r.status),
            fmt_opt(r.length),
            fmt_opt(r.width),
            fmt_opt(r.draft),
            fmt_opt(r.cargo),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub input: usize,
    pub kept: usize,
    pub removed_slow: usize,
    pub removed_fast: usize,
    pub removed_status: usize,
    pub parse_skipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Removal {
    Slow,
    Fast,
    Status,
}

fn removal_reason(r: &AisRecord) -> Option<Removal> {
    if r.sog < 1.0 {
        Some(Removal::Slow)
    } else if r.sog > 25.0 && !is_sog_unavailable(r.sog) {
        Some(Removal::Fast)
    } else if matches!(r.status, Some(1) | Some(2)) {
        Some(Removal::Status)
    } else {
        None
    }
}

/// Drops stationary (< 1 kn), implausibly fast (> 25 kn, sentinel excepted),
/// at-anchor and not-under-command records. Each removal is counted under the
/// first matching reason in that order.
pub fn clean_records(records: Vec<AisRecord>) -> (Vec<AisRecord>, CleaningReport) {
    let mut report = CleaningReport {
        input: records.len(),
        ..Default::default()
    };
    let kept: Vec<AisRecord> = records
        .into_iter()
        .filter(|r| match removal_reason(r) {
            None => true,
            Some(Removal::Slow) => {
                report.removed_slow += 1;
                false
            }
            Some(Removal::Fast) => {
                report.removed_fast += 1;
                false
            }
            Some(Removal::Status) => {
                report.removed_status += 1;
                false
            }
        })
        .collect();
    report.kept = kept.len();
    (kept, report)
}

/// Keeps records within `buffer_miles` of the centerline.
pub fn buffer_filter(
    records: Vec<AisRecord>,
    centerline: &[GeoPoint],
    buffer_miles: f64,
) -> Result<Vec<AisRecord>, AisError> {
    let line = Polyline::new(centerline.to_vec())?;
    buffer_filter_polyline(records, &line, buffer_miles)
}

pub fn buffer_filter_polyline(
    records: Vec<AisRecord>,
    centerline: &Polyline,
    buffer_miles: f64,
) -> Result<Vec<AisRecord>, AisError> {
    if !(buffer_miles > 0.0) {
        return Err(AisError::NonPositiveBuffer(buffer_miles));
    }
    Ok(records
        .into_iter()
        .filter(|r| centerline.distance_miles(r.position()) <= buffer_miles)
        .collect())
}

/// Groups records by vessel, orders them in time and splits wherever
/// consecutive reports are more than `gap_minutes` apart.
///
/// A record repeating an earlier (mmsi, timestamp) pair is discarded so that
/// trip timestamps stay strictly increasing.
pub fn split_trips(records: Vec<AisRecord>, gap_minutes: f64) -> Vec<Trip> {
    let gap_s = gap_minutes * 60.0;
    let mut by_vessel: BTreeMap<u32, Vec<AisRecord>> = BTreeMap::new();
    for r in records {
        by_vessel.entry(r.mmsi).or_default().push(r);
    }
    let mut trips = Vec::new();
    for (mmsi, mut recs) in by_vessel {
        recs.sort_by_key(|r| r.timestamp);
        recs.dedup_by_key(|r| r.timestamp);
        let mut current: Vec<AisRecord> = Vec::new();
        let mut seq = 0usize;
        for r in recs {
            if let Some(prev) = current.last() {
                if (r.timestamp - prev.timestamp) as f64 > gap_s {
                    trips.push(Trip {
                        trip_id: format!("{mmsi}-{seq}"),
                        mmsi,
                        records: std::mem::take(&mut current),
                    });
                    seq += 1;
                }
            }
            current.push(r);
        }
        if !current.is_empty() {
            trips.push(Trip {
                trip_id: format!("{mmsi}-{seq}"),
                mmsi,
                records: current,
            });
        }
    }
    trips
}

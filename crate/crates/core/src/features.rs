//! The 36-slot per-trip feature vector.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{AisRecord, Trip};

pub const N_FEATURES: usize = 36;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("quartiles of an empty list")]
    EmptyValues,
    #[error("trip {0} has no record with a valid speed")]
    NoValidSpeed(String),
    #[error("unknown feature name `{0}`")]
    UnknownFeature(String),
}

macro_rules! registry {
    ($($variant:ident => $name:literal, $unit:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Feature { $($variant),* }

        impl Feature {
            pub const ALL: [Feature; N_FEATURES] = [$(Feature::$variant),*];

            pub fn name(self) -> &'static str {
                match self { $(Feature::$variant => $name),* }
            }

            pub fn unit(self) -> &'static str {
                match self { $(Feature::$variant => $unit),* }
            }
        }
    };
}

registry! {
    SogQ1 => "SOG_Q1", "knots";
    SogQ2 => "SOG_Q2", "knots";
    SogQ3 => "SOG_Q3", "knots";
    PtstLow => "PTST_SOG_<5.4", "fraction";
    PtstMid => "PTST_SOG_5.4_to_6.9", "fraction";
    PtstHigh => "PTST_SOG_>6.9", "fraction";
    SogSd => "SOG_SD", "knots";
    SogQ2SqA => "(SOG_Q2)^2_a", "knots^2";
    SogSdSq => "(SOG_SD)^2", "knots^2";
    SogQ2SqB => "(SOG_Q2)^2_b", "knots^2";
    SogQ2Cube => "(SOG_Q2)^3", "knots^3";
    Nrot => "NROT", "degrees/minute";
    Vt31 => "VT_31_Towing", "indicator";
    Vt52 => "VT_52_Tug", "indicator";
    VtOther => "VT_Other", "indicator";
    Ct31 => "CT_31", "indicator";
    Ct32 => "CT_32", "indicator";
    Ct52 => "CT_52", "indicator";
    Ct57 => "CT_57", "indicator";
    CtOther => "CT_Other", "indicator";
    Len => "Len", "m";
    Wid => "Wid", "m";
    LenWid => "Len*Wid", "m^2";
    LenSog => "Len*SOG_Q2", "m*knots";
    WidSog => "Wid*SOG_Q2", "m*knots";
    LenWidSog => "Len*Wid*SOG_Q2", "m^2*knots";
    LenSq => "(Len)^2", "m^2";
    WidSq => "(Wid)^2", "m^2";
    LenCube => "(Len)^3", "m^3";
    Draft => "VDraft", "m";
    AccSd => "Acc_SD", "knots/minute";
    AccSdSogSd => "Acc_SD*SOG_SD", "knots^2/minute";
    Status0 => "Status_0", "indicator";
    Status12 => "Status_12", "indicator";
    Status15 => "Status_15", "indicator";
    StatusOther => "Status_Other", "indicator";
}

impl Feature {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Result<Feature, FeatureError> {
        Feature::ALL
            .into_iter()
            .find(|f| f.name() == name)
            .ok_or_else(|| FeatureError::UnknownFeature(name.to_string()))
    }
}

/// Slot index ranges of the one-hot groups (vessel type, cargo type, status).
pub const ONE_HOT_GROUPS: [std::ops::Range<usize>; 3] = [12..15, 15..20, 32..36];

pub fn is_derived(f: Feature) -> bool {
    use Feature::*;
    matches!(
        f,
        SogQ2SqA
            | SogSdSq
            | SogQ2SqB
            | SogQ2Cube
            | LenWid
            | LenSog
            | WidSog
            | LenWidSog
            | LenSq
            | WidSq
            | LenCube
            | AccSdSogSd
    )
}

pub fn is_one_hot(f: Feature) -> bool {
    ONE_HOT_GROUPS.iter().any(|g| g.contains(&f.index()))
}

/// Every slot that is neither derived nor part of a one-hot group.
pub fn continuous_base_slots() -> Vec<usize> {
    Feature::ALL
        .into_iter()
        .filter(|&f| !is_derived(f) && !is_one_hot(f))
        .map(Feature::index)
        .collect()
}

/// Recomputes every product and power slot from its base slots.
pub fn recompute_derived(v: &mut [f64]) {
    use Feature::*;
    let g = |f: Feature| v[f.index()];
    let (q2, sd, len, wid, acc) = (g(SogQ2), g(SogSd), g(Len), g(Wid), g(AccSd));
    let set = |v: &mut [f64], f: Feature, x: f64| v[f.index()] = x;
    set(v, SogQ2SqA, q2 * q2);
    set(v, SogSdSq, sd * sd);
    set(v, SogQ2SqB, q2 * q2);
    set(v, SogQ2Cube, q2 * q2 * q2);
    set(v, LenWid, len * wid);
    set(v, LenSog, len * q2);
    set(v, WidSog, wid * q2);
    set(v, LenWidSog, len * wid * q2);
    set(v, LenSq, len * len);
    set(v, WidSq, wid * wid);
    set(v, LenCube, len * len * len);
    set(v, AccSdSogSd, acc * sd);
}

/// A trip's features in registry order. Missing vessel dimensions are NaN
/// until imputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn has_missing(&self) -> bool {
        self.0.iter().any(|x| x.is_nan())
    }
}

/// Static vessel dimensions in meters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct VesselDims {
    pub length: Option<f64>,
    pub width: Option<f64>,
    pub draft: Option<f64>,
}

impl VesselDims {
    pub fn known(length: f64, width: f64, draft: f64) -> Self {
        Self {
            length: Some(length),
            width: Some(width),
            draft: Some(draft),
        }
    }

    /// First reported value of each dimension over the trip's records.
    pub fn from_trip(trip: &Trip) -> Self {
        let first = |f: fn(&AisRecord) -> Option<f64>| trip.records.iter().find_map(f);
        Self {
            length: first(|r| r.length.filter(|x| *x > 0.0)),
            width: first(|r| r.width.filter(|x| *x > 0.0)),
            draft: first(|r| r.draft.filter(|x| *x > 0.0)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureDiagnostics {
    pub valid_speed_records: usize,
    pub synthetic_excluded: usize,
    /// Fewer than 2 valid headings; NROT set to 0.
    pub nrot_insufficient: bool,
    /// Fewer than 3 valid speeds; Acc_SD set to 0.
    pub acc_insufficient: bool,
    /// Only one valid speed; SOG_SD set to 0.
    pub sog_sd_insufficient: bool,
    pub missing_dims: Vec<String>,
}

/// Linear-interpolation quartiles of `values`.
pub fn quartiles(values: &[f64]) -> Result<(f64, f64, f64), FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::EmptyValues);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&v, 0.25), quantile_sorted(&v, 0.5), quantile_sorted(&v, 0.75)))
}

fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    match v.get(lo + 1) {
        Some(&next) => v[lo] + (h - lo as f64) * (next - v[lo]),
        None => v[lo],
    }
}

fn sorted_real(trip: &Trip) -> Vec<&AisRecord> {
    let mut recs: Vec<&AisRecord> = trip.real_records().collect();
    recs.sort_by_key(|r| r.timestamp);
    recs
}

fn band(sog: f64) -> usize {
    if sog < 5.4 {
        0
    } else if sog <= 6.9 {
        1
    } else {
        2
    }
}

/// Fraction of time spent below 5.4 kn, in [5.4, 6.9] kn and above 6.9 kn.
pub fn ptst(trip: &Trip) -> Result<[f64; 3], FeatureError> {
    let valid: Vec<(i64, f64)> = sorted_real(trip)
        .iter()
        .filter_map(|r| r.valid_sog().map(|s| (r.timestamp, s)))
        .collect();
    if valid.is_empty() {
        return Err(FeatureError::NoValidSpeed(trip.trip_id.clone()));
    }
    let mut time = [0.0; 3];
    for w in valid.windows(2) {
        time[band(w[0].1)] += (w[1].0 - w[0].0) as f64;
    }
    let total: f64 = time.iter().sum();
    if total <= 0.0 {
        // Single record or all at one instant: count weighting.
        let mut counts = [0.0; 3];
        for &(_, s) in &valid {
            counts[band(s)] += 1.0;
        }
        let n = valid.len() as f64;
        return Ok(counts.map(|c| c / n));
    }
    Ok(time.map(|t| t / total))
}

/// Maps a heading difference into (-180, 180].
fn wrap_degrees(d: f64) -> f64 {
    let r = d.rem_euclid(360.0);
    if r > 180.0 {
        r - 360.0
    } else {
        r
    }
}

/// Mean absolute heading change per minute. `None` when fewer than two
/// usable heading pairs exist.
pub fn nrot(trip: &Trip) -> Option<f64> {
    let hs: Vec<(i64, f64)> = sorted_real(trip)
        .iter()
        .filter_map(|r| r.valid_heading().map(|h| (r.timestamp, h)))
        .collect();
    let rates: Vec<f64> = hs
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| wrap_degrees(w[1].1 - w[0].1).abs() / ((w[1].0 - w[0].0) as f64 / 60.0))
        .collect();
    (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64)
}

fn sample_sd(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    Some((ss / (n - 1.0)).sqrt())
}

/// Sample SD of per-minute speed changes. `None` with fewer than 3 valid speeds.
pub fn acc_sd(trip: &Trip) -> Option<f64> {
    let s: Vec<(i64, f64)> = sorted_real(trip)
        .iter()
        .filter_map(|r| r.valid_sog().map(|v| (r.timestamp, v)))
        .collect();
    if s.len() < 3 {
        return None;
    }
    let acc: Vec<f64> = s
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| (w[1].1 - w[0].1) / ((w[1].0 - w[0].0) as f64 / 60.0))
        .collect();
    sample_sd(&acc)
}

fn modal<T: Copy + Ord>(values: impl Iterator<Item = T>) -> Option<T> {
    let mut counts = std::collections::BTreeMap::new();
    for v in values {
        *counts.entry(v).or_insert(0usize) += 1;
    }
    // BTreeMap iterates ascending, and only a strictly larger count replaces,
    // so ties resolve to the smaller value.
    let mut best: Option<(T, usize)> = None;
    for (v, c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((v, c));
        }
    }
    best.map(|(v, _)| v)
}

/// Computes all 36 slots from the trip's received records.
pub fn extract_features(
    trip: &Trip,
    dims: VesselDims,
) -> Result<(FeatureVector, FeatureDiagnostics), FeatureError> {
    use Feature::*;
    let recs = sorted_real(trip);
    let speeds: Vec<f64> = recs.iter().filter_map(|r| r.valid_sog()).collect();
    if speeds.is_empty() {
        return Err(FeatureError::NoValidSpeed(trip.trip_id.clone()));
    }
    let mut diag = FeatureDiagnostics {
        valid_speed_records: speeds.len(),
        synthetic_excluded: trip.records.len() - recs.len(),
        ..Default::default()
    };
    let mut v = vec![0.0; N_FEATURES];
    let (q1, q2, q3) = quartiles(&speeds)?;
    v[SogQ1.index()] = q1;
    v[SogQ2.index()] = q2;
    v[SogQ3.index()] = q3;
    let p = ptst(trip)?;
    v[PtstLow.index()] = p[0];
    v[PtstMid.index()] = p[1];
    v[PtstHigh.index()] = p[2];
    v[SogSd.index()] = sample_sd(&speeds).unwrap_or_else(|| {
        diag.sog_sd_insufficient = true;
        0.0
    });
    v[Nrot.index()] = nrot(trip).unwrap_or_else(|| {
        diag.nrot_insufficient = true;
        0.0
    });
    v[AccSd.index()] = acc_sd(trip).unwrap_or_else(|| {
        diag.acc_insufficient = true;
        0.0
    });

    let vessel_type = recs.iter().find_map(|r| r.vessel_type);
    let vt = match vessel_type {
        Some(31) => Vt31,
        Some(52) => Vt52,
        _ => VtOther,
    };
    v[vt.index()] = 1.0;
    let ct = match recs.iter().find_map(|r| r.cargo) {
        Some(31) => Ct31,
        Some(32) => Ct32,
        Some(52) => Ct52,
        Some(57) => Ct57,
        _ => CtOther,
    };
    v[ct.index()] = 1.0;
    let st = match modal(recs.iter().filter_map(|r| r.status)) {
        Some(0) => Status0,
        Some(12) => Status12,
        Some(15) => Status15,
        _ => StatusOther,
    };
    v[st.index()] = 1.0;

    for (slot, value, name) in [
        (Len, dims.length, "length"),
        (Wid, dims.width, "width"),
        (Draft, dims.draft, "draft"),
    ] {
        v[slot.index()] = value.unwrap_or_else(|| {
            diag.missing_dims.push(name.to_string());
            f64::NAN
        });
    }
    recompute_derived(&mut v);
    Ok((FeatureVector(v), diag))
}

#[derive(Serialize)]
struct RegistryEntry {
    index: usize,
    name: &'static str,
    unit: &'static str,
}

/// Ordered feature names and units as JSON.
pub fn registry_json() -> String {
    let entries: Vec<RegistryEntry> = Feature::ALL
        .into_iter()
        .map(|f| RegistryEntry {
            index: f.index(),
            name: f.name(),
            unit: f.unit(),
        })
        .collect();
    serde_json::to_string_pretty(&entries).expect("registry serializes")
}

pub fn feature_names() -> Vec<&'static str> {
    Feature::ALL.into_iter().map(Feature::name).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn trip(pings: &[(i64, f64, Option<f64>)]) -> Trip {
        Trip {
            trip_id: "t".into(),
            mmsi: 1,
            records: pings
                .iter()
                .map(|&(t, sog, heading)| {
                    let mut r = AisRecord::at(1, t, GeoPoint::new(30.0, -90.0), sog);
                    r.heading = heading;
                    r
                })
                .collect(),
        }
    }

    #[test]
    fn registry_has_36_unique_ordered_names() {
        let names = feature_names();
        assert_eq!(names.len(), 36);
        assert_eq!(names[0], "SOG_Q1");
        assert_eq!(names[35], "Status_Other");
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), 36);
        assert_eq!(Feature::from_name("(Len)^3").unwrap(), Feature::LenCube);
        assert_eq!(Feature::ALL[Feature::AccSd.index()], Feature::AccSd);
        let parsed: serde_json::Value = serde_json::from_str(&registry_json()).unwrap();
        assert_eq!(parsed[20]["name"], "Len");
    }

    #[test]
    fn quartile_examples() {
        assert_eq!(quartiles(&[2.0, 4.0, 6.0, 8.0]).unwrap(), (3.5, 5.0, 6.5));
        assert_eq!(quartiles(&[5.0]).unwrap(), (5.0, 5.0, 5.0));
        assert_eq!(quartiles(&[1.0; 4]).unwrap(), (1.0, 1.0, 1.0));
        assert_eq!(quartiles(&[]), Err(FeatureError::EmptyValues));
    }

    #[test]
    fn ptst_examples() {
        assert_eq!(ptst(&trip(&[(0, 6.0, None), (60, 6.0, None)])).unwrap(), [0.0, 1.0, 0.0]);
        let t = trip(&[(0, 4.0, None), (60, 10.0, None), (120, 10.0, None)]);
        assert_eq!(ptst(&t).unwrap(), [0.5, 0.0, 0.5]);
        assert_eq!(ptst(&trip(&[(0, 5.4, None)])).unwrap(), [0.0, 1.0, 0.0]);
        assert_eq!(ptst(&trip(&[(0, 6.9, None)])).unwrap(), [0.0, 1.0, 0.0]);
        assert!(ptst(&trip(&[(0, 102.3, None)])).is_err());
    }

    #[test]
    fn nrot_examples() {
        assert_eq!(nrot(&trip(&[(0, 6.0, Some(45.0)), (60, 6.0, Some(45.0))])), Some(0.0));
        assert_eq!(nrot(&trip(&[(0, 6.0, Some(10.0)), (60, 6.0, Some(350.0))])), Some(20.0));
        let t = trip(&[(0, 6.0, Some(0.0)), (120, 6.0, Some(30.0)), (180, 6.0, Some(30.0))]);
        assert_eq!(nrot(&t), Some(7.5));
        let sentinel = trip(&[(0, 6.0, Some(0.0)), (60, 6.0, Some(511.0))]);
        assert_eq!(nrot(&sentinel), None);
    }

    #[test]
    fn acc_sd_examples() {
        assert_eq!(acc_sd(&trip(&[(0, 5.0, None), (60, 5.0, None), (120, 5.0, None)])), Some(0.0));
        assert_eq!(acc_sd(&trip(&[(0, 4.0, None), (60, 6.0, None), (120, 8.0, None)])), Some(0.0));
        let sd = acc_sd(&trip(&[(0, 4.0, None), (60, 6.0, None), (120, 4.0, None)])).unwrap();
        assert!((sd - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(acc_sd(&trip(&[(0, 4.0, None), (60, 6.0, None)])), None);
    }

    #[test]
    fn full_vector_example() {
        let mut t = trip(&[(0, 6.0, Some(90.0)), (60, 6.0, Some(90.0)), (120, 6.0, Some(90.0))]);
        for r in &mut t.records {
            r.vessel_type = Some(31);
            r.status = Some(0);
        }
        let (v, diag) = extract_features(&t, VesselDims::known(30.0, 10.0, 2.7)).unwrap();
        use Feature::*;
        assert_eq!((v.get(SogQ1), v.get(SogQ2), v.get(SogQ3)), (6.0, 6.0, 6.0));
        assert_eq!(v.get(SogSd), 0.0);
        assert_eq!((v.get(PtstLow), v.get(PtstMid), v.get(PtstHigh)), (0.0, 1.0, 0.0));
        assert_eq!(v.get(Nrot), 0.0);
        assert_eq!(v.get(Vt31), 1.0);
        assert_eq!(v.get(Status0), 1.0);
        assert_eq!(v.get(CtOther), 1.0);
        assert_eq!(v.get(LenWid), 300.0);
        assert_eq!(v.get(SogQ2Cube), 216.0);
        assert_eq!(v.get(LenSog), 180.0);
        assert_eq!(v.get(SogQ2SqA), 36.0);
        assert_eq!(v.get(SogQ2SqB), 36.0);
        assert_eq!(v.get(Draft), 2.7);
        assert!(!diag.nrot_insufficient && !diag.acc_insufficient);
        assert!(diag.missing_dims.is_empty());
    }

    #[test]
    fn categorical_codes() {
        let mut t = trip(&[(0, 6.0, None), (60, 6.0, None)]);
        t.records[0].vessel_type = Some(70);
        t.records[0].cargo = Some(57);
        t.records[0].status = Some(12);
        t.records[1].status = Some(0);
        let (v, _) = extract_features(&t, VesselDims::known(1.0, 1.0, 1.0)).unwrap();
        use Feature::*;
        assert_eq!((v.get(Vt31), v.get(Vt52), v.get(VtOther)), (0.0, 0.0, 1.0));
        assert_eq!(v.get(Ct57), 1.0);
        // Tie between statuses 0 and 12 goes to 0.
        assert_eq!(v.get(Status0), 1.0);
    }

    #[test]
    fn synthetic_records_are_ignored() {
        let mut t = trip(&[(0, 6.0, None), (60, 6.0, None), (120, 6.0, None)]);
        let mut s = AisRecord::at(1, 90, GeoPoint::new(30.0, -90.0), 20.0);
        s.synthetic = true;
        t.records.insert(2, s);
        let (v, diag) = extract_features(&t, VesselDims::known(1.0, 1.0, 1.0)).unwrap();
        assert_eq!(v.get(Feature::SogQ3), 6.0);
        assert_eq!(diag.synthetic_excluded, 1);
    }

    #[test]
    fn missing_dims_become_nan() {
        let t = trip(&[(0, 6.0, None), (60, 6.0, None)]);
        let dims = VesselDims { length: Some(20.0), width: None, draft: None };
        let (v, diag) = extract_features(&t, dims).unwrap();
        assert!(v.get(Feature::Wid).is_nan() && v.get(Feature::LenWid).is_nan());
        assert_eq!(v.get(Feature::LenSq), 400.0);
        assert_eq!(diag.missing_dims, ["width", "draft"]);
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_degrees(-20.0), -20.0);
        assert_eq!(wrap_degrees(340.0), -20.0);
        assert_eq!(wrap_degrees(180.0), 180.0);
        assert_eq!(wrap_degrees(-180.0), 180.0);
    }
}

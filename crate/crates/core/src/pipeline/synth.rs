use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{PipelineConfig, PipelineError};
use crate::ais::{write_ais_csv, AisRecord};
use crate::dataprep::BargeClassMap;
use crate::geo::{offset_point, write_linestring_geojson, GeoPoint, Polyline, MPH_PER_KNOT};
use crate::matching::{write_observations, CameraObservation, Direction};

/// 2023-06-01T00:00:00Z.
const EPOCH: i64 = 1_685_577_600;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenario {
    pub seed: u64,
    pub n_locations: usize,
    pub vessels_per_location: usize,
    /// Along-river (north) distance between consecutive bridges.
    pub location_spacing_miles: f64,
    pub origin: GeoPoint,
    /// East-west swing of the sinusoidal centerline.
    pub river_amplitude_miles: f64,
    pub river_wavelength_miles: f64,
    /// Vertex spacing of the coarse centerline handed to the pipeline.
    pub digitized_spacing_miles: f64,
    pub p_no_barge: f64,
    /// Relative frequency of each quantity bin; a count is then uniform inside its bin.
    pub bin_weights: Vec<f64>,
    /// Mean speed with one barge is `speed_intercept_kn - speed_per_barge_kn`.
    pub speed_intercept_kn: f64,
    pub speed_per_barge_kn: f64,
    /// Extra speed of vessels running without barges.
    pub light_bonus_kn: f64,
    pub trip_speed_sd_kn: f64,
    pub ping_speed_sd_kn: f64,
    pub heading_sd_deg: f64,
    pub heading_sd_per_barge_deg: f64,
    pub lane_sd_miles: f64,
    pub position_sd_miles: f64,
    pub ping_interval_s: f64,
    pub ping_jitter_s: f64,
    /// Chance that a ping starts a reporting gap of 3 to 8 pings.
    pub gap_rate: f64,
    /// Chance that a vessel never reports each static dimension.
    pub missing_dims_rate: f64,
    pub clock_skew_s: f64,
    pub headway_s: f64,
    /// Distance sailed before and after the bridge.
    pub approach_miles: f64,
    /// Per-location speed offset step; location `l` is shifted by `(l - mid) * step`.
    pub location_speed_shift_kn: f64,
    /// Per-location length offset step in meters.
    pub location_length_shift_m: f64,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        Self {
            seed: 7,
            n_locations: 4,
            vessels_per_location: 150,
            location_spacing_miles: 15.0,
            origin: GeoPoint::new(37.0, -89.5),
            river_amplitude_miles: 0.8,
            river_wavelength_miles: 5.0,
            digitized_spacing_miles: 0.5,
            p_no_barge: 0.3,
            bin_weights: vec![0.2, 0.2, 0.2, 0.15, 0.13, 0.12],
            speed_intercept_kn: 9.5,
            speed_per_barge_kn: 0.15,
            light_bonus_kn: 1.5,
            trip_speed_sd_kn: 0.08,
            ping_speed_sd_kn: 0.3,
            heading_sd_deg: 1.0,
            heading_sd_per_barge_deg: 0.05,
            lane_sd_miles: 0.02,
            position_sd_miles: 0.003,
            ping_interval_s: 60.0,
            ping_jitter_s: 10.0,
            gap_rate: 0.02,
            missing_dims_rate: 0.1,
            clock_skew_s: 120.0,
            headway_s: 2400.0,
            approach_miles: 4.0,
            location_speed_shift_kn: 0.0,
            location_length_shift_m: 0.0,
        }
    }
}

/// A generated passage and the observation it produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthPairing {
    pub mmsi: u32,
    pub location_id: String,
    pub barge_count: u32,
    pub direction: Direction,
    pub true_arrival: i64,
    pub observed_at: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOutput {
    pub records: Vec<AisRecord>,
    pub observations: Vec<CameraObservation>,
    pub truth: Vec<TruthPairing>,
    pub locations: BTreeMap<String, GeoPoint>,
    /// Densely sampled true centerline.
    pub true_centerline: Vec<GeoPoint>,
    /// Coarse centerline as a digitizer would provide it.
    pub river: Vec<GeoPoint>,
}

fn location_id(l: usize) -> String {
    format!("L{}", l + 1)
}

impl SyntheticScenario {
    pub fn mean_speed(&self, barges: u32) -> f64 {
        if barges == 0 {
            self.speed_intercept_kn + self.light_bonus_kn
        } else {
            self.speed_intercept_kn - self.speed_per_barge_kn * barges as f64
        }
    }

    fn location_shift(&self, l: usize) -> f64 {
        l as f64 - (self.n_locations as f64 - 1.0) / 2.0
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Scenario(m));
        if self.n_locations == 0 || self.vessels_per_location == 0 {
            return bad("need at least one location and one vessel".into());
        }
        if self.bin_weights.len() != 6 || self.bin_weights.iter().any(|w| !(*w >= 0.0)) || self.bin_weights.iter().sum::<f64>() <= 0.0 {
            return bad("bin_weights must hold 6 non-negative weights".into());
        }
        if !(0.0..=1.0).contains(&self.p_no_barge) || !(0.0..1.0).contains(&self.gap_rate) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if !(self.light_bonus_kn >= 0.0) || !(self.speed_per_barge_kn > 0.0) {
            return bad("speed must strictly decrease with barge count".into());
        }
        let max_shift = self.location_speed_shift_kn.abs() * self.location_shift(0).abs();
        let slowest = self.mean_speed(42) - max_shift - 4.0 * (self.trip_speed_sd_kn + self.ping_speed_sd_kn);
        if slowest < 1.5 {
            return bad(format!("slowest vessels would fall below cleaning speed ({slowest:.2} kn)"));
        }
        let fastest = self.mean_speed(0) + max_shift + 4.0 * (self.trip_speed_sd_kn + self.ping_speed_sd_kn);
        if fastest > 24.0 {
            return bad(format!("fastest vessels would exceed the speed cap ({fastest:.2} kn)"));
        }
        if !(self.ping_interval_s > self.ping_jitter_s) || self.ping_jitter_s < 0.0 {
            return bad("ping interval must exceed its jitter".into());
        }
        if self.headway_s * 0.75 <= 2.0 * self.clock_skew_s {
            return bad("headway too small for the clock skew".into());
        }
        if !(self.approach_miles > 0.0) || self.approach_miles * 2.0 >= self.location_spacing_miles {
            return bad("approach must be positive and shorter than half the bridge spacing".into());
        }
        Ok(())
    }

    fn centerline_point(&self, north: f64) -> GeoPoint {
        let east = self.river_amplitude_miles * (std::f64::consts::TAU * north / self.river_wavelength_miles).sin();
        offset_point(self.origin, east, north)
    }

    fn sample_count<R: Rng>(&self, rng: &mut R) -> u32 {
        if rng.random::<f64>() < self.p_no_barge {
            return 0;
        }
        let total: f64 = self.bin_weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let map = BargeClassMap::default();
        let bins = map.bins();
        let mut chosen = bins.len() - 1;
        for (i, w) in self.bin_weights.iter().enumerate() {
            if u < *w {
                chosen = i;
                break;
            }
            u -= w;
        }
        let (lo, hi) = bins[chosen];
        rng.random_range(lo..=hi)
    }

    pub fn generate(&self) -> Result<SyntheticOutput, PipelineError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let north_total = self.location_spacing_miles * self.n_locations as f64;
        let fine_step = 0.02;
        let n_fine = (north_total / fine_step).round() as usize;
        let true_centerline: Vec<GeoPoint> = (0..=n_fine).map(|i| self.centerline_point(i as f64 * fine_step)).collect();
        let n_coarse = (north_total / self.digitized_spacing_miles).round().max(1.0) as usize;
        let river: Vec<GeoPoint> = (0..=n_coarse)
            .map(|i| self.centerline_point(i as f64 * north_total / n_coarse as f64))
            .collect();
        let line = Polyline::new(true_centerline.clone())?;

        let std = |sd: f64| Normal::new(0.0, sd.max(0.0)).expect("finite sd");
        let mut records = Vec::new();
        let mut observations = Vec::new();
        let mut truth = Vec::new();
        let mut locations = BTreeMap::new();
        for l in 0..self.n_locations {
            let loc = location_id(l);
            let bridge_north = self.location_spacing_miles * (l as f64 + 0.5);
            let bridge = self.centerline_point(bridge_north);
            let bridge_s = line.project(bridge).arclength_miles;
            locations.insert(loc.clone(), bridge);
            let speed_shift = self.location_speed_shift_kn * self.location_shift(l);
            let length_shift = self.location_length_shift_m * self.location_shift(l);
            for v in 0..self.vessels_per_location {
                let mmsi = 366_000_000 + (l as u32) * 10_000 + v as u32;
                let barges = self.sample_count(&mut rng);
                let downstream = rng.random::<bool>();
                let dir = if downstream { 1.0 } else { -1.0 };
                let speed_kn = self.mean_speed(barges) + speed_shift + std(self.trip_speed_sd_kn).sample(&mut rng);
                let mph = speed_kn * MPH_PER_KNOT;
                let arrival = EPOCH + (v as f64 * self.headway_s + rng.random::<f64>() * 0.25 * self.headway_s).round() as i64;
                let b = barges as f64;
                let vessel_type = if rng.random::<f64>() < 0.7 { 31 } else { 52 };
                let cargo = [0u16, 31, 32, 52, 57][rng.random_range(0..5)];
                let status = if rng.random::<f64>() < 0.85 { 0u8 } else if rng.random::<bool>() { 12 } else { 15 };
                let mut dim = |mean: f64, sd: f64| -> Option<f64> {
                    let value = (mean + std(sd).sample(&mut rng)).max(1.0);
                    (rng.random::<f64>() >= self.missing_dims_rate).then_some((value * 10.0).round() / 10.0)
                };
                let (length, width, draft) = if barges == 0 {
                    (dim(18.0 + length_shift, 2.0), dim(6.5, 0.5), dim(1.8, 0.3))
                } else {
                    (dim(20.0 + 0.4 * b + length_shift, 2.0), dim(7.0 + 0.05 * b, 0.5), dim(2.0 + 0.03 * b, 0.3))
                };
                let lane = std(self.lane_sd_miles).sample(&mut rng);
                let heading_sd = self.heading_sd_deg + self.heading_sd_per_barge_deg * b;
                let travel_s = 2.0 * self.approach_miles / mph * 3600.0;
                let start = arrival as f64 - self.approach_miles / mph * 3600.0;
                let mut t = 0.0;
                let mut skip = 0usize;
                while t <= travel_s {
                    let ts = (start + t).round() as i64;
                    t += self.ping_interval_s + (rng.random::<f64>() * 2.0 - 1.0) * self.ping_jitter_s;
                    if skip > 0 {
                        skip -= 1;
                        continue;
                    }
                    if rng.random::<f64>() < self.gap_rate {
                        skip = rng.random_range(3..=8);
                    }
                    let s = bridge_s + dir * (((ts as f64 - arrival as f64) / 3600.0) * mph);
                    let (te, tn) = line.direction_at(s);
                    let offset = lane + std(self.position_sd_miles).sample(&mut rng);
                    let pos = offset_point(line.point_at(s), -tn * offset, te * offset);
                    let bearing = (te * dir).atan2(tn * dir).to_degrees().rem_euclid(360.0);
                    let heading = (bearing + std(heading_sd).sample(&mut rng)).rem_euclid(360.0);
                    let sog = (speed_kn + std(self.ping_speed_sd_kn).sample(&mut rng)).max(0.0);
                    let mut r = AisRecord::at(mmsi, ts, GeoPoint::new(round6(pos.lat), round6(pos.lon)), (sog * 10.0).round() / 10.0);
                    r.course = Some((bearing * 10.0).round() / 10.0);
                    r.heading = Some(heading.round().rem_euclid(360.0));
                    r.vessel_type = Some(vessel_type);
                    r.status = Some(status);
                    r.length = length;
                    r.width = width;
                    r.draft = draft;
                    r.cargo = Some(cargo);
                    records.push(r);
                }
                let skew = (rng.random::<f64>() * 2.0 - 1.0) * self.clock_skew_s;
                let observed_at = arrival + skew.round() as i64;
                let direction = if downstream { Direction::Downstream } else { Direction::Upstream };
                observations.push(CameraObservation {
                    location_id: loc.clone(),
                    bridge_point: bridge,
                    observed_at,
                    direction,
                    barge_count: barges,
                });
                truth.push(TruthPairing {
                    mmsi,
                    location_id: loc.clone(),
                    barge_count: barges,
                    direction,
                    true_arrival: arrival,
                    observed_at,
                });
            }
        }
        records.sort_by_key(|r| (r.timestamp, r.mmsi));
        Ok(SyntheticOutput { records, observations, truth, locations, true_centerline, river })
    }
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// Paths written by [`write_synthetic`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFiles {
    pub config: PathBuf,
    pub ais: PathBuf,
    pub river: PathBuf,
    pub truth_centerline: PathBuf,
    pub observations: PathBuf,
    pub truth: PathBuf,
}

/// Writes the scenario's data files under `out/data/` and a ready-to-train `out/config.json`.
pub fn write_synthetic(scenario: &SyntheticScenario, out: &Path, base: &PipelineConfig) -> Result<SyntheticFiles, PipelineError> {
    let data = scenario.generate()?;
    let dir = out.join("data");
    fs::create_dir_all(&dir)?;
    let files = SyntheticFiles {
        config: out.join("config.json"),
        ais: dir.join("ais.csv"),
        river: dir.join("river.geojson"),
        truth_centerline: dir.join("river_truth.geojson"),
        observations: dir.join("observations.csv"),
        truth: dir.join("truth.json"),
    };
    write_ais_csv(fs::File::create(&files.ais)?, &data.records)?;
    write_linestring_geojson(&files.river, &Polyline::new(data.river.clone())?)?;
    write_linestring_geojson(&files.truth_centerline, &Polyline::new(data.true_centerline.clone())?)?;
    write_observations(fs::File::create(&files.observations)?, &data.observations)?;
    fs::write(&files.truth, serde_json::to_string_pretty(&data.truth).expect("truth serializes") + "\n")?;
    let mut cfg = base.clone();
    cfg.ais_csv = PathBuf::from("data/ais.csv");
    cfg.river_geojson = PathBuf::from("data/river.geojson");
    cfg.observations_csv = PathBuf::from("data/observations.csv");
    cfg.locations = data.locations.clone();
    cfg.sensitivity.truth_geojson = Some(PathBuf::from("data/river_truth.geojson"));
    fs::write(&files.config, serde_json::to_string_pretty(&cfg).expect("config serializes") + "\n")?;
    Ok(files)
}

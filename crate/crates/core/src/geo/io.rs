use std::path::Path;

use serde_json::{json, Value};

use super::{GeoError, GeoPoint, Polyline, RiverPath};

/// Reads the first LineString found in a GeoJSON file.
///
/// Accepts a bare geometry, a Feature, or a FeatureCollection. Coordinates are
/// `[lon, lat]`.
pub fn read_linestring_geojson(path: &Path) -> Result<Polyline, GeoError> {
    let text = std::fs::read_to_string(path)?;
    let value: Value = serde_json::from_str(&text).map_err(|e| GeoError::GeoJson(e.to_string()))?;
    let coords = find_linestring(&value)
        .ok_or_else(|| GeoError::GeoJson("no LineString geometry".into()))?;
    let mut points = Vec::with_capacity(coords.len());
    for c in coords {
        let pair = c.as_array().filter(|a| a.len() >= 2);
        let (lon, lat) = match pair {
            Some(a) => (a[0].as_f64(), a[1].as_f64()),
            None => (None, None),
        };
        match (lon, lat) {
            (Some(lon), Some(lat)) => {
                let p = GeoPoint::new(lat, lon);
                if !p.is_valid() {
                    return Err(GeoError::GeoJson(format!("coordinate out of range: {c}")));
                }
                points.push(p);
            }
            _ => return Err(GeoError::GeoJson(format!("bad coordinate: {c}"))),
        }
    }
    Polyline::new(points)
}

fn find_linestring(v: &Value) -> Option<&Vec<Value>> {
    match v.get("type")?.as_str()? {
        "LineString" => v.get("coordinates")?.as_array(),
        "Feature" => find_linestring(v.get("geometry")?),
        "FeatureCollection" => v
            .get("features")?
            .as_array()?
            .iter()
            .find_map(find_linestring),
        _ => None,
    }
}

pub fn write_linestring_geojson(path: &Path, line: &Polyline) -> Result<(), GeoError> {
    let coords: Vec<Value> = line.points().iter().map(|p| json!([p.lon, p.lat])).collect();
    let doc = json!({
        "type": "Feature",
        "properties": {},
        "geometry": { "type": "LineString", "coordinates": coords },
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| GeoError::GeoJson(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// One row per segment: index, extent, COG (blank when empty) and point count.
pub fn write_segments_csv(path: &Path, river: &RiverPath) -> Result<(), GeoError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["segment_index", "start_mi", "end_mi", "cog_lat", "cog_lon", "n_points"])?;
    for s in &river.segments {
        let (lat, lon) = match s.cog {
            Some(c) => (c.lat.to_string(), c.lon.to_string()),
            None => (String::new(), String::new()),
        };
        w.write_record([
            s.index.to_string(),
            s.start_miles.to_string(),
            s.end_miles.to_string(),
            lat,
            lon,
            s.n_points.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::build_segments;

    #[test]
    fn geojson_round_trip_keeps_lon_lat_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("river.geojson");
        let line = Polyline::new(vec![GeoPoint::new(30.0, -90.0), GeoPoint::new(30.5, -90.25)]).unwrap();
        write_linestring_geojson(&path, &line).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("-90.0").unwrap() < text.find("30.0").unwrap());
        assert_eq!(read_linestring_geojson(&path).unwrap(), line);
    }

    #[test]
    fn reads_bare_geometry_and_collections() {
        let dir = tempfile::tempdir().unwrap();
        let bare = dir.path().join("a.json");
        std::fs::write(&bare, r#"{"type":"LineString","coordinates":[[1,2],[3,4]]}"#).unwrap();
        assert_eq!(read_linestring_geojson(&bare).unwrap().points()[1], GeoPoint::new(4.0, 3.0));
        let fc = dir.path().join("b.json");
        std::fs::write(
            &fc,
            r#"{"type":"FeatureCollection","features":[{"type":"Feature","geometry":{"type":"Point","coordinates":[0,0]}},
               {"type":"Feature","geometry":{"type":"LineString","coordinates":[[0,0],[0,1]]}}]}"#,
        )
        .unwrap();
        assert_eq!(read_linestring_geojson(&fc).unwrap().points().len(), 2);
        let bad = dir.path().join("c.json");
        std::fs::write(&bad, r#"{"type":"Point","coordinates":[0,0]}"#).unwrap();
        assert!(read_linestring_geojson(&bad).is_err());
    }

    #[test]
    fn segments_csv_has_blank_cogs_for_empty_segments() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.csv");
        let line = Polyline::new(vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 0.02)]).unwrap();
        write_segments_csv(&path, &build_segments(&line, 0.3).unwrap()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "segment_index,start_mi,end_mi,cog_lat,cog_lon,n_points");
        assert!(lines[1].contains(",,"));
    }
}

//! GeoJSON import/export for fields, worlds, maps and flight paths, plus the
//! per-image mission log as CSV.
//!
//! All coordinates are meters in the local planar frame, not degrees; every
//! file says so in an `x_crs` foreign member (RFC 7946 allows unknown
//! members and dropped the `crs` field). Writers can embed the resolved run
//! configuration under `x_config` so outputs are self-describing.

use crate::coverage::{FieldPolygon, FlightPath};
use crate::geo::GeoPoint;
use crate::mapping::MapObject;
use crate::sim::{ImageLog, ObjectClass, WorldObject};
use crate::{Error, Result};
use serde_json::{json, Map, Value};
use std::fs;
use std::path::Path;

/// Value of the `x_crs` foreign member on every file this module writes.
pub const CRS_NOTE: &str = "local planar frame, meters";

fn feature_collection(features: Vec<Value>, config: Option<&Value>) -> Value {
    let mut obj = Map::new();
    obj.insert("type".into(), json!("FeatureCollection"));
    obj.insert("x_crs".into(), json!(CRS_NOTE));
    if let Some(cfg) = config {
        obj.insert("x_config".into(), cfg.clone());
    }
    obj.insert("features".into(), Value::Array(features));
    Value::Object(obj)
}

fn point_feature(p: &GeoPoint, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "Point", "coordinates": [p.easting, p.northing] },
        "properties": properties,
    })
}

/// One Polygon feature; the ring is closed as RFC 7946 requires.
pub fn field_to_geojson(field: &FieldPolygon, config: Option<&Value>) -> Value {
    let mut ring: Vec<[f64; 2]> = field
        .vertices()
        .iter()
        .map(|v| [v.easting, v.northing])
        .collect();
    if let Some(first) = ring.first().copied() {
        ring.push(first);
    }
    let feature = json!({
        "type": "Feature",
        "geometry": { "type": "Polygon", "coordinates": [ring] },
        "properties": { "area_m2": field.area() },
    });
    feature_collection(vec![feature], config)
}

/// Point features with class and cluster properties.
pub fn world_to_geojson(world: &[WorldObject], config: Option<&Value>) -> Value {
    let features = world
        .iter()
        .map(|o| {
            point_feature(
                &o.location,
                json!({
                    "class": o.class_label.to_string(),
                    "cluster": o.cluster_id,
                }),
            )
        })
        .collect();
    feature_collection(features, config)
}

/// Point features carrying certainty, class and observation metadata.
pub fn map_to_geojson(objects: &[MapObject], config: Option<&Value>) -> Value {
    let features = objects
        .iter()
        .map(|o| {
            point_feature(
                &o.location,
                json!({
                    "certainty": o.certainty,
                    "class": o.class_label,
                    "min_view_altitude": o.min_view_altitude,
                    "max_certainty_seen": o.max_certainty_seen,
                    "observations": o.observation_count,
                }),
            )
        })
        .collect();
    feature_collection(features, config)
}

/// A LineString for the route plus one Point per waypoint with altitude,
/// heading and (for inspection paths) the id of the map object it targets.
/// `targets`, when given, must have one id per waypoint.
pub fn path_to_geojson(
    path: &FlightPath,
    targets: Option<&[usize]>,
    config: Option<&Value>,
) -> Value {
    if let Some(t) = targets {
        assert_eq!(t.len(), path.waypoints.len(), "one target id per waypoint");
    }
    let coords: Vec<[f64; 2]> = path
        .waypoints
        .iter()
        .map(|w| [w.position.easting, w.position.northing])
        .collect();
    let mut features = vec![json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coords },
        "properties": { "kind": kind_str(path), "length_m": path.length() },
    })];
    for (i, w) in path.waypoints.iter().enumerate() {
        features.push(point_feature(
            &w.position,
            json!({
                "index": i,
                "altitude": w.altitude,
                "heading": w.heading,
                "target": targets.map(|t| t[i]),
            }),
        ));
    }
    feature_collection(features, config)
}

fn kind_str(path: &FlightPath) -> &'static str {
    match path.kind {
        crate::coverage::PathKind::Coverage => "coverage",
        crate::coverage::PathKind::Inspection => "inspection",
    }
}

fn as_feature_array(v: &Value) -> Result<&Vec<Value>> {
    if v.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Config("expected a FeatureCollection".into()));
    }
    v.get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("FeatureCollection without a features array".into()))
}

fn coord_pair(v: &Value) -> Result<GeoPoint> {
    let arr = v
        .as_array()
        .filter(|a| a.len() >= 2)
        .ok_or_else(|| Error::Config("coordinate is not a [x, y] array".into()))?;
    let x = arr[0].as_f64();
    let y = arr[1].as_f64();
    match (x, y) {
        (Some(x), Some(y)) => Ok(GeoPoint::new(x, y)),
        _ => Err(Error::Config("non-numeric coordinate".into())),
    }
}

/// Reads a field polygon back from [`field_to_geojson`] output (or any
/// single-Polygon FeatureCollection in the local frame). A closing vertex
/// equal to the first is dropped.
pub fn field_from_geojson(v: &Value) -> Result<FieldPolygon> {
    let features = as_feature_array(v)?;
    let feature = features
        .iter()
        .find(|f| {
            f.pointer("/geometry/type").and_then(Value::as_str) == Some("Polygon")
        })
        .ok_or_else(|| Error::Config("no Polygon feature in field file".into()))?;
    let rings = feature
        .pointer("/geometry/coordinates")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("Polygon without coordinates".into()))?;
    let ring = rings
        .first()
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Config("Polygon with no exterior ring".into()))?;
    let mut vertices: Vec<GeoPoint> = ring.iter().map(coord_pair).collect::<Result<_>>()?;
    if vertices.len() >= 2 && vertices.first() == vertices.last() {
        vertices.pop();
    }
    FieldPolygon::new(vertices)
}

/// Reads a world back from [`world_to_geojson`] output.
pub fn world_from_geojson(v: &Value) -> Result<Vec<WorldObject>> {
    let features = as_feature_array(v)?;
    features
        .iter()
        .map(|f| {
            if f.pointer("/geometry/type").and_then(Value::as_str) != Some("Point") {
                return Err(Error::Config("world feature is not a Point".into()));
            }
            let location = coord_pair(
                f.pointer("/geometry/coordinates")
                    .ok_or_else(|| Error::Config("Point without coordinates".into()))?,
            )?;
            let class_label = match f.pointer("/properties/class").and_then(Value::as_str) {
                Some("type-i") => ObjectClass::TypeI,
                Some("type-ii") => ObjectClass::TypeII,
                other => {
                    return Err(Error::Config(format!(
                        "unknown object class {other:?}"
                    )))
                }
            };
            let cluster_id = f
                .pointer("/properties/cluster")
                .and_then(Value::as_u64)
                .map(|c| c as usize);
            Ok(WorldObject {
                location,
                class_label,
                cluster_id,
            })
        })
        .collect()
}

/// Per-image mission log as CSV: a `# config:` comment, a header row, one
/// row per image. LF line endings, plain UTF-8.
pub fn image_log_csv(images: &[ImageLog], config: Option<&Value>) -> String {
    let mut out = String::new();
    if let Some(cfg) = config {
        out.push_str(&format!("# config: {cfg}\n"));
    }
    out.push_str(
        "stage,waypoint_index,reported_easting,reported_northing,reported_altitude,\
         reported_heading,true_easting,true_northing,true_altitude,true_heading,\
         detections,map_size,extrapolated\n",
    );
    for img in images {
        let stage = match img.stage {
            crate::coverage::PathKind::Coverage => "coverage",
            crate::coverage::PathKind::Inspection => "inspection",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            stage,
            img.waypoint_index,
            img.reported.easting,
            img.reported.northing,
            img.reported.altitude,
            img.reported.heading,
            img.true_pose.easting,
            img.true_pose.northing,
            img.true_pose.altitude,
            img.true_pose.heading,
            img.detections,
            img.map_size,
            img.extrapolated,
        ));
    }
    out
}

/// Writes a JSON value with a trailing newline.
pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_field(path: &Path) -> Result<FieldPolygon> {
    field_from_geojson(&read_json(path)?)
}

pub fn read_world(path: &Path) -> Result<Vec<WorldObject>> {
    world_from_geojson(&read_json(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coverage::{PathKind, Waypoint};
    use crate::sim::{default_field, generate_world, WorldDistribution};

    #[test]
    fn field_round_trip() {
        let field = FieldPolygon::new(vec![
            GeoPoint::new(0.0, 0.0),
            GeoPoint::new(80.0, 5.0),
            GeoPoint::new(90.0, 60.0),
            GeoPoint::new(-5.0, 55.0),
        ])
        .unwrap();
        let v = field_to_geojson(&field, None);
        let back = field_from_geojson(&v).unwrap();
        assert_eq!(back.vertices(), field.vertices());
        // The exported ring is closed.
        let ring = v.pointer("/features/0/geometry/coordinates/0").unwrap();
        let ring = ring.as_array().unwrap();
        assert_eq!(ring.first(), ring.last());
        assert_eq!(ring.len(), field.vertices().len() + 1);
    }

    #[test]
    fn world_round_trip_preserves_everything() {
        let field = default_field();
        let world = generate_world(WorldDistribution::Clustered, &field, 40, 9).unwrap();
        let v = world_to_geojson(&world, None);
        let back = world_from_geojson(&v).unwrap();
        assert_eq!(back.len(), world.len());
        for (a, b) in world.iter().zip(&back) {
            assert_eq!(a.location, b.location);
            assert_eq!(a.class_label, b.class_label);
            assert_eq!(a.cluster_id, b.cluster_id);
        }
    }

    #[test]
    fn config_is_embedded_as_foreign_member() {
        let cfg = serde_json::json!({ "seed": 7, "dist": "uniform" });
        let v = world_to_geojson(&[], Some(&cfg));
        assert_eq!(v.get("x_config"), Some(&cfg));
        assert_eq!(v.get("x_crs").and_then(Value::as_str), Some(CRS_NOTE));
        assert_eq!(v["features"].as_array().unwrap().len(), 0);
    }

    #[test]
    fn path_export_carries_waypoint_properties() {
        let path = FlightPath {
            kind: PathKind::Inspection,
            waypoints: vec![
                Waypoint {
                    position: GeoPoint::new(1.0, 2.0),
                    altitude: 12.0,
                    heading: 0.5,
                },
                Waypoint {
                    position: GeoPoint::new(8.0, 3.0),
                    altitude: 12.0,
                    heading: 1.5,
                },
            ],
        };
        let v = path_to_geojson(&path, Some(&[4, 2]), None);
        let features = v["features"].as_array().unwrap();
        assert_eq!(features.len(), 3, "one line plus two waypoints");
        assert_eq!(features[0]["geometry"]["type"], "LineString");
        assert_eq!(features[1]["properties"]["target"], 4);
        assert_eq!(features[2]["properties"]["target"], 2);
        assert_eq!(features[2]["properties"]["altitude"], 12.0);
    }

    #[test]
    fn image_log_csv_shape() {
        use crate::geo::Pose;
        let img = ImageLog {
            stage: PathKind::Coverage,
            waypoint_index: 3,
            reported: Pose::new(1.0, 2.0, 24.0, 0.0),
            true_pose: Pose::new(1.1, 2.1, 24.2, 0.01),
            detections: 5,
            map_size: 9,
            extrapolated: false,
        };
        let csv = image_log_csv(&[img], Some(&serde_json::json!({"seed": 1})));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("# config: "));
        assert_eq!(lines[1].split(',').count(), 13);
        assert!(lines[2].starts_with("coverage,3,1,2,24,0,"));
    }
}

//! Field polygons and serpentine coverage planning.
//!
//! The planner lays parallel rows aligned with the polygon's longest edge.
//! Effective image width/height shrink by the overlap fraction, rows are
//! spaced one effective width apart, and waypoints along a row one effective
//! height apart, so consecutive images overlap in both directions. Rows are
//! flown in alternating directions (boustrophedon) starting from the row
//! end nearest the polygon's first vertex.

use crate::geo::{normalize_heading, GeoPoint};
use crate::{geo::CameraModel, Error, Result};
use serde::{Deserialize, Serialize};

/// Guard against float noise when counting rows/waypoints from exact
/// multiples like 43.2 / 7.2.
const COUNT_EPS: f64 = 1e-9;

/// A simple polygon in the local planar frame, vertices counter-clockwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldPolygon {
    vertices: Vec<GeoPoint>,
}

impl FieldPolygon {
    /// Validates and normalizes a vertex ring: at least three vertices,
    /// non-zero area, no self-intersections. Clockwise rings are reversed
    /// in place (keeping the first vertex first).
    pub fn new(mut vertices: Vec<GeoPoint>) -> Result<Self> {
        // Tolerate a closed ring (last vertex repeating the first).
        if vertices.len() > 3 {
            let (first, last) = (vertices[0], vertices[vertices.len() - 1]);
            if first.dist2(&last) == 0.0 {
                vertices.pop();
            }
        }
        if vertices.len() < 3 {
            return Err(Error::invalid("polygon needs at least 3 vertices"));
        }
        let area2 = signed_area2(&vertices);
        if area2.abs() < 1e-9 {
            return Err(Error::invalid("polygon area is zero"));
        }
        if area2 < 0.0 {
            vertices[1..].reverse();
        }
        if self_intersects(&vertices) {
            return Err(Error::invalid("polygon is self-intersecting"));
        }
        Ok(FieldPolygon { vertices })
    }

    /// Axis-aligned rectangle, the default synthetic field shape.
    pub fn rectangle(easting0: f64, northing0: f64, width: f64, height: f64) -> Result<Self> {
        FieldPolygon::new(vec![
            GeoPoint::new(easting0, northing0),
            GeoPoint::new(easting0 + width, northing0),
            GeoPoint::new(easting0 + width, northing0 + height),
            GeoPoint::new(easting0, northing0 + height),
        ])
    }

    pub fn vertices(&self) -> &[GeoPoint] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        signed_area2(&self.vertices) / 2.0
    }

    pub fn bbox(&self) -> (GeoPoint, GeoPoint) {
        let mut lo = GeoPoint::new(f64::INFINITY, f64::INFINITY);
        let mut hi = GeoPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.easting = lo.easting.min(v.easting);
            lo.northing = lo.northing.min(v.northing);
            hi.easting = hi.easting.max(v.easting);
            hi.northing = hi.northing.max(v.northing);
        }
        (lo, hi)
    }

    /// Even-odd ray-cast point-in-polygon test. Boundary points may land on
    /// either side; callers needing boundary guarantees sample the interior.
    pub fn contains(&self, p: &GeoPoint) -> bool {
        let mut inside = false;
        let n = self.vertices.len();
        let mut j = n - 1;
        for i in 0..n {
            let (a, b) = (&self.vertices[i], &self.vertices[j]);
            if (a.northing > p.northing) != (b.northing > p.northing) {
                let x = a.easting
                    + (p.northing - a.northing) / (b.northing - a.northing)
                        * (b.easting - a.easting);
                if p.easting < x {
                    inside = !inside;
                }
            }
            j = i;
        }
        inside
    }

    /// Direction (unit vector) of the longest edge; first wins ties.
    fn longest_edge_direction(&self) -> (f64, f64) {
        let n = self.vertices.len();
        let mut best = 0.0;
        let mut dir = (1.0, 0.0);
        for i in 0..n {
            let a = &self.vertices[i];
            let b = &self.vertices[(i + 1) % n];
            let len2 = a.dist2(b);
            if len2 > best {
                best = len2;
                let len = len2.sqrt();
                dir = ((b.easting - a.easting) / len, (b.northing - a.northing) / len);
            }
        }
        dir
    }
}

fn signed_area2(vertices: &[GeoPoint]) -> f64 {
    let n = vertices.len();
    let mut sum = 0.0;
    for i in 0..n {
        let a = &vertices[i];
        let b = &vertices[(i + 1) % n];
        sum += a.easting * b.northing - b.easting * a.northing;
    }
    sum
}

/// Checks proper crossings between non-adjacent edges. O(n²), fine for the
/// hand-drawn field boundaries this library deals with.
fn self_intersects(vertices: &[GeoPoint]) -> bool {
    let n = vertices.len();
    let seg = |i: usize| (vertices[i], vertices[(i + 1) % n]);
    for i in 0..n {
        for j in (i + 1)..n {
            // Skip adjacent edges (they share an endpoint).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (a, b) = seg(i);
            let (c, d) = seg(j);
            if segments_cross(&a, &b, &c, &d) {
                return true;
            }
        }
    }
    false
}

fn segments_cross(a: &GeoPoint, b: &GeoPoint, c: &GeoPoint, d: &GeoPoint) -> bool {
    let orient = |p: &GeoPoint, q: &GeoPoint, r: &GeoPoint| {
        (q.easting - p.easting) * (r.northing - p.northing)
            - (q.northing - p.northing) * (r.easting - p.easting)
    };
    let d1 = orient(a, b, c);
    let d2 = orient(a, b, d);
    let d3 = orient(c, d, a);
    let d4 = orient(c, d, b);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// One commanded camera position on a flight path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: GeoPoint,
    pub altitude: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    Coverage,
    Inspection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlightPath {
    pub kind: PathKind,
    pub waypoints: Vec<Waypoint>,
}

impl FlightPath {
    /// Horizontal length in meters; zero for paths of one waypoint.
    pub fn length(&self) -> f64 {
        if self.waypoints.is_empty() {
            return 0.0;
        }
        path_length(&self.waypoints).unwrap_or(0.0)
    }
}

/// Sum of consecutive horizontal distances. Altitude changes are excluded:
/// the planner comparison metric only looks at ground track length.
pub fn path_length(waypoints: &[Waypoint]) -> Result<f64> {
    if waypoints.is_empty() {
        return Err(Error::invalid("path length of an empty path"));
    }
    Ok(waypoints
        .windows(2)
        .map(|w| w[0].position.dist(&w[1].position))
        .sum())
}

/// Plans a serpentine coverage path over `field` at `altitude`.
///
/// Row spacing is `(1 - overlap) * FOV_width` and along-row waypoint spacing
/// `(1 - overlap) * FOV_height`; the camera's wide axis lies across the
/// direction of travel. Footprints may overshoot the field boundary, which
/// guarantees edge coverage.
pub fn plan_coverage(
    field: &FieldPolygon,
    camera: &CameraModel,
    altitude: f64,
    overlap: f64,
) -> Result<FlightPath> {
    if altitude <= 0.0 {
        return Err(Error::invalid("coverage altitude must be positive"));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::invalid("overlap fraction must be in [0, 1)"));
    }
    let (fov_w, fov_h) = camera.field_of_view(altitude);
    let row_spacing = (1.0 - overlap) * fov_w;
    let wp_spacing = (1.0 - overlap) * fov_h;

    // Row frame: d along rows (longest edge), n across.
    let d = field.longest_edge_direction();
    let n = (-d.1, d.0);
    let proj_d = |p: &GeoPoint| p.easting * d.0 + p.northing * d.1;
    let proj_n = |p: &GeoPoint| p.easting * n.0 + p.northing * n.1;

    let c_min = field.vertices().iter().map(proj_n).fold(f64::INFINITY, f64::min);
    let c_max = field
        .vertices()
        .iter()
        .map(proj_n)
        .fold(f64::NEG_INFINITY, f64::max);
    let span = c_max - c_min;
    let rows = ((span / row_spacing - COUNT_EPS).ceil() as usize).max(1);
    // Center the block of rows in the cross-track span.
    let first_c = c_min + (span - (rows - 1) as f64 * row_spacing) / 2.0;

    // Along-track extent per row comes from the polygon clipped to the
    // row's strip, so slanted boundaries between row lines stay covered.
    let mut row_ends: Vec<(GeoPoint, GeoPoint)> = Vec::with_capacity(rows);
    for i in 0..rows {
        let c = first_c + i as f64 * row_spacing;
        let strip = clip_to_strip(field.vertices(), n, c - row_spacing / 2.0, c + row_spacing / 2.0);
        let (t_lo, t_hi) = if strip.is_empty() {
            // Rows tile the polygon's span, so an empty clip only happens
            // through float noise at the extremes; fall back to the line.
            let t = field.vertices().iter().map(proj_d).fold(f64::INFINITY, f64::min);
            (t, t)
        } else {
            (
                strip.iter().map(proj_d).fold(f64::INFINITY, f64::min),
                strip.iter().map(proj_d).fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let at = |t: f64| GeoPoint::new(t * d.0 + c * n.0, t * d.1 + c * n.1);
        row_ends.push((at(t_lo), at(t_hi)));
    }

    // Serpentine ordering: enter at the row end nearest the polygon's
    // first vertex, preferring the lexicographically smaller (easting,
    // northing) waypoint on exact ties.
    let v0 = field.vertices()[0];
    let mut candidates: Vec<(bool, bool)> = Vec::new();
    for rows_reversed in [false, true] {
        for first_backwards in [false, true] {
            candidates.push((rows_reversed, first_backwards));
        }
    }
    let entry_of = |rows_reversed: bool, first_backwards: bool| -> GeoPoint {
        let (lo, hi) = if rows_reversed { row_ends[rows - 1] } else { row_ends[0] };
        if first_backwards {
            hi
        } else {
            lo
        }
    };
    candidates.sort_by(|a, b| {
        let pa = entry_of(a.0, a.1);
        let pb = entry_of(b.0, b.1);
        let da = pa.dist2(&v0);
        let db = pb.dist2(&v0);
        da.partial_cmp(&db)
            .unwrap()
            .then(pa.easting.partial_cmp(&pb.easting).unwrap())
            .then(pa.northing.partial_cmp(&pb.northing).unwrap())
    });
    let (rows_reversed, first_backwards) = candidates[0];

    let mut waypoints = Vec::new();
    for visit in 0..rows {
        let i = if rows_reversed { rows - 1 - visit } else { visit };
        let (lo, hi) = row_ends[i];
        let backwards = first_backwards ^ (visit % 2 == 1);
        let (from, to) = if backwards { (hi, lo) } else { (lo, hi) };
        let length = from.dist(&to);
        let count = if length < COUNT_EPS {
            1
        } else {
            (length / wp_spacing - COUNT_EPS).ceil() as usize + 1
        };
        let heading = if length < COUNT_EPS {
            // Degenerate row: keep the nominal row direction.
            let dir = if backwards { (-d.0, -d.1) } else { d };
            normalize_heading(f64::atan2(-dir.0, dir.1))
        } else {
            crate::geo::heading_towards(&from, &to)
        };
        for j in 0..count {
            let f = if count == 1 { 0.5 } else { j as f64 / (count - 1) as f64 };
            let position = GeoPoint::new(
                from.easting + (to.easting - from.easting) * f,
                from.northing + (to.northing - from.northing) * f,
            );
            waypoints.push(Waypoint {
                position,
                altitude,
                heading,
            });
        }
    }

    Ok(FlightPath {
        kind: PathKind::Coverage,
        waypoints,
    })
}

/// Clips a polygon to the slab `lo <= p·normal <= hi` (Sutherland-Hodgman).
fn clip_to_strip(vertices: &[GeoPoint], normal: (f64, f64), lo: f64, hi: f64) -> Vec<GeoPoint> {
    let proj = |p: &GeoPoint| p.easting * normal.0 + p.northing * normal.1;
    let clip_half = |verts: &[GeoPoint], keep_if: &dyn Fn(f64) -> bool, boundary: f64| -> Vec<GeoPoint> {
        let mut out = Vec::with_capacity(verts.len() + 2);
        let n = verts.len();
        for i in 0..n {
            let cur = verts[i];
            let next = verts[(i + 1) % n];
            let (pc, pn) = (proj(&cur), proj(&next));
            let (inside_c, inside_n) = (keep_if(pc), keep_if(pn));
            if inside_c {
                out.push(cur);
            }
            if inside_c != inside_n {
                let t = (boundary - pc) / (pn - pc);
                out.push(GeoPoint::new(
                    cur.easting + (next.easting - cur.easting) * t,
                    cur.northing + (next.northing - cur.northing) * t,
                ));
            }
        }
        out
    };
    let once = clip_half(vertices, &|p| p >= lo, lo);
    if once.is_empty() {
        return once;
    }
    clip_half(&once, &|p| p <= hi, hi)
}

//! Camera geometry and georeferencing in a local planar frame.
//!
//! All coordinates live in a single UTM-like planar frame measured in
//! meters; no geodetic datum is involved. The camera looks straight down
//! unless a gimbal angle is set, and the image plane is aligned with the
//! UAV heading: image "up" (decreasing v) points along the direction of
//! travel, image "right" (increasing u) points to the UAV's right.
//!
//! Conventions:
//! * heading is measured counter-clockwise from north (east = 3π/2), in
//!   radians, normalized to [0, 2π)
//! * pixel (0, 0) is the top-left image corner, u grows right, v grows down
//! * camera-local ground coordinates (x, y) are meters with x along image u
//!   and y along image v, origin at the footprint center
//! * gimbal roll/pitch of a nadir-mounted camera displace the viewed area
//!   by altitude·tan(angle) along the local x/y axis respectively

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// A point in the local planar frame, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub easting: f64,
    pub northing: f64,
}

impl GeoPoint {
    pub fn new(easting: f64, northing: f64) -> Self {
        GeoPoint { easting, northing }
    }

    pub fn dist(&self, other: &GeoPoint) -> f64 {
        self.dist2(other).sqrt()
    }

    /// Squared distance; cheaper when only comparisons are needed.
    pub fn dist2(&self, other: &GeoPoint) -> f64 {
        let de = self.easting - other.easting;
        let dn = self.northing - other.northing;
        de * de + dn * dn
    }
}

/// Pinhole camera intrinsics plus sensor geometry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraModel {
    pub sensor_width_mm: f64,
    pub sensor_height_mm: f64,
    pub focal_length_mm: f64,
    pub image_width_px: u32,
    pub image_height_px: u32,
}

impl Default for CameraModel {
    /// Full-frame 36x24 mm sensor with a 36 mm lens, downsampled to the
    /// detector's working resolution. Yields a ground footprint of exactly
    /// (altitude, altitude·2/3) meters, e.g. 12x8 m at 12 m.
    fn default() -> Self {
        CameraModel {
            sensor_width_mm: 36.0,
            sensor_height_mm: 24.0,
            focal_length_mm: 36.0,
            image_width_px: 2048,
            image_height_px: 1365,
        }
    }
}

impl CameraModel {
    /// Checks positivity and that the pixel grid has (nearly) the sensor's
    /// aspect ratio, so pixels are square within 1%.
    pub fn validate(&self) -> crate::Result<()> {
        if self.sensor_width_mm <= 0.0
            || self.sensor_height_mm <= 0.0
            || self.focal_length_mm <= 0.0
        {
            return Err(crate::Error::invalid(
                "camera sensor dimensions and focal length must be positive",
            ));
        }
        if self.image_width_px == 0 || self.image_height_px == 0 {
            return Err(crate::Error::invalid("camera image dimensions must be positive"));
        }
        let sensor_aspect = self.sensor_width_mm / self.sensor_height_mm;
        let image_aspect = self.image_width_px as f64 / self.image_height_px as f64;
        if (image_aspect / sensor_aspect - 1.0).abs() > 0.01 {
            return Err(crate::Error::invalid(format!(
                "image aspect {image_aspect:.4} deviates more than 1% from sensor aspect {sensor_aspect:.4}",
            )));
        }
        Ok(())
    }

    /// Ground footprint size (width, height) in meters at the given altitude.
    /// Linear in altitude: size = sensor · altitude / focal_length.
    pub fn field_of_view(&self, altitude: f64) -> (f64, f64) {
        let scale = altitude / self.focal_length_mm;
        (self.sensor_width_mm * scale, self.sensor_height_mm * scale)
    }

    /// Meters of ground per pixel at the given altitude (width direction).
    pub fn ground_resolution(&self, altitude: f64) -> f64 {
        self.field_of_view(altitude).0 / self.image_width_px as f64
    }

    /// Pixel coordinates to camera-local ground offsets in meters.
    pub fn pixel_to_local(&self, altitude: f64, u: f64, v: f64) -> (f64, f64) {
        let (fw, fh) = self.field_of_view(altitude);
        (
            (u / self.image_width_px as f64 - 0.5) * fw,
            (v / self.image_height_px as f64 - 0.5) * fh,
        )
    }

    /// Inverse of [`pixel_to_local`](Self::pixel_to_local).
    pub fn local_to_pixel(&self, altitude: f64, x: f64, y: f64) -> (f64, f64) {
        let (fw, fh) = self.field_of_view(altitude);
        (
            (x / fw + 0.5) * self.image_width_px as f64,
            (y / fh + 0.5) * self.image_height_px as f64,
        )
    }
}

/// UAV pose: position, altitude above ground, heading, gimbal angles.
///
/// Gimbal roll/pitch are zero for a nadir view; they exist to model
/// orientation error and shift the viewed ground area without rotating it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Pose {
    pub easting: f64,
    pub northing: f64,
    /// Meters above ground, must be positive.
    pub altitude: f64,
    /// Radians counter-clockwise from north, kept in [0, 2π).
    pub heading: f64,
    pub gimbal_roll: f64,
    pub gimbal_pitch: f64,
}

impl Pose {
    pub fn new(easting: f64, northing: f64, altitude: f64, heading: f64) -> Self {
        Pose {
            easting,
            northing,
            altitude,
            heading: normalize_heading(heading),
            gimbal_roll: 0.0,
            gimbal_pitch: 0.0,
        }
    }

    pub fn with_gimbal(mut self, roll: f64, pitch: f64) -> Self {
        self.gimbal_roll = roll;
        self.gimbal_pitch = pitch;
        self
    }

    pub fn position(&self) -> GeoPoint {
        GeoPoint::new(self.easting, self.northing)
    }

    /// Camera-local ground displacement caused by the gimbal angles.
    fn gimbal_offset(&self) -> (f64, f64) {
        (
            self.altitude * self.gimbal_roll.tan(),
            self.altitude * self.gimbal_pitch.tan(),
        )
    }

    /// Camera-local ground offsets to the planar frame. The local y axis
    /// points "down" in the image, i.e. against the direction of travel,
    /// hence the sign flip before rotating by the heading.
    pub fn local_to_utm(&self, x: f64, y: f64) -> GeoPoint {
        let (ox, oy) = self.gimbal_offset();
        let (xs, ys) = (x + ox, y + oy);
        let (e, n) = rotate(self.heading, xs, -ys);
        GeoPoint::new(e + self.easting, n + self.northing)
    }

    /// Inverse of [`local_to_utm`](Self::local_to_utm).
    pub fn utm_to_local(&self, point: &GeoPoint) -> (f64, f64) {
        let de = point.easting - self.easting;
        let dn = point.northing - self.northing;
        let (x, neg_y) = rotate(-self.heading, de, dn);
        let (ox, oy) = self.gimbal_offset();
        (x - ox, -neg_y - oy)
    }

    /// Georeferences a pixel observed from this pose.
    pub fn pixel_to_utm(&self, camera: &CameraModel, u: f64, v: f64) -> GeoPoint {
        let (x, y) = camera.pixel_to_local(self.altitude, u, v);
        self.local_to_utm(x, y)
    }

    /// Projects a ground point into the image observed from this pose.
    pub fn utm_to_pixel(&self, camera: &CameraModel, point: &GeoPoint) -> (f64, f64) {
        let (x, y) = self.utm_to_local(point);
        camera.local_to_pixel(self.altitude, x, y)
    }

    /// The four ground corners of the image, in pixel-corner order
    /// (0,0), (w,0), (w,h), (0,h).
    pub fn footprint(&self, camera: &CameraModel) -> [GeoPoint; 4] {
        let (fw, fh) = camera.field_of_view(self.altitude);
        let (hw, hh) = (fw / 2.0, fh / 2.0);
        [
            self.local_to_utm(-hw, -hh),
            self.local_to_utm(hw, -hh),
            self.local_to_utm(hw, hh),
            self.local_to_utm(-hw, hh),
        ]
    }

    /// True when `point` lies inside the footprint shrunk inward by
    /// `margin` meters on every side.
    pub fn is_visible(&self, camera: &CameraModel, point: &GeoPoint, margin: f64) -> bool {
        let (fw, fh) = camera.field_of_view(self.altitude);
        let (x, y) = self.utm_to_local(point);
        x.abs() <= fw / 2.0 - margin && y.abs() <= fh / 2.0 - margin
    }
}

/// Rotates (x, y) counter-clockwise by `angle` radians.
pub fn rotate(angle: f64, x: f64, y: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Wraps a heading into [0, 2π).
pub fn normalize_heading(heading: f64) -> f64 {
    let h = heading.rem_euclid(TAU);
    // rem_euclid can return TAU itself when the input is a tiny negative.
    if h >= TAU {
        0.0
    } else {
        h
    }
}

/// Heading that points from one ground position toward another.
/// Counter-clockwise from north, so due east comes out as 3π/2.
pub fn heading_towards(from: &GeoPoint, to: &GeoPoint) -> f64 {
    let de = to.easting - from.easting;
    let dn = to.northing - from.northing;
    normalize_heading(f64::atan2(-de, dn))
}

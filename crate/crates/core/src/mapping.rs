//! Persistent object map built up across images and altitudes.
//!
//! Each image's georeferenced detections are folded into the map one by one:
//! a detection close to an existing object refines it, everything else
//! becomes a new object. Lower-altitude views are considered more
//! trustworthy than anything seen from higher up, regardless of reported
//! certainty. After all detections of an image are merged, objects that
//! should have been re-detected but were not can be pruned.

use crate::geo::{CameraModel, GeoPoint, Pose};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// One georeferenced detection, ready for map insertion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Observation {
    pub location: GeoPoint,
    pub certainty: f64,
    pub class_label: usize,
    /// Altitude the image was taken from (reported, not true).
    pub view_altitude: f64,
}

/// A mapped object and its bookkeeping.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MapObject {
    pub location: GeoPoint,
    pub certainty: f64,
    pub class_label: usize,
    /// Lowest altitude this object has been observed from.
    pub min_view_altitude: f64,
    /// Highest certainty any observation of it ever reported.
    pub max_certainty_seen: f64,
    pub observation_count: usize,
}

/// Distances closer than this epsilon count as ties; ties resolve to the
/// earlier-created object so insertion stays deterministic.
const DIST_TIE_EPS: f64 = 1e-9;

/// Spatial hash over map objects. Cell size only affects lookup speed.
#[derive(Debug, Clone, Default)]
pub struct ObjectMap {
    objects: Vec<Option<MapObject>>,
    grid: HashMap<(i64, i64), Vec<usize>>,
    live: usize,
}

const CELL: f64 = 1.0;

fn cell_of(p: &GeoPoint) -> (i64, i64) {
    ((p.easting / CELL).floor() as i64, (p.northing / CELL).floor() as i64)
}

impl ObjectMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn objects(&self) -> impl Iterator<Item = &MapObject> {
        self.objects.iter().filter_map(|o| o.as_ref())
    }

    /// Objects the mission reports as present: certainty strictly above the
    /// evaluation threshold.
    pub fn accepted_objects(&self, c_eval: f64) -> Vec<MapObject> {
        self.objects().filter(|o| o.certainty > c_eval).copied().collect()
    }

    /// Nearest live object strictly within `radius` of `p`; ties go to the
    /// earlier-created object. `exclude` skips one id during cascades.
    fn nearest_within(&self, p: &GeoPoint, radius: f64, exclude: Option<usize>) -> Option<usize> {
        let r2 = radius * radius;
        let (cx0, cy0) = cell_of(&GeoPoint::new(p.easting - radius, p.northing - radius));
        let (cx1, cy1) = cell_of(&GeoPoint::new(p.easting + radius, p.northing + radius));
        let mut best: Option<(f64, usize)> = None;
        for cx in cx0..=cx1 {
            for cy in cy0..=cy1 {
                let Some(ids) = self.grid.get(&(cx, cy)) else { continue };
                for &id in ids {
                    if Some(id) == exclude {
                        continue;
                    }
                    let Some(obj) = &self.objects[id] else { continue };
                    let d2 = p.dist2(&obj.location);
                    if d2 >= r2 {
                        continue;
                    }
                    let d = d2.sqrt();
                    best = match best {
                        None => Some((d, id)),
                        Some((bd, bid)) => {
                            if d < bd - DIST_TIE_EPS || (d <= bd + DIST_TIE_EPS && id < bid) {
                                Some((d, id))
                            } else {
                                Some((bd, bid))
                            }
                        }
                    };
                }
            }
        }
        best.map(|(_, id)| id)
    }

    fn insert_new(&mut self, obj: MapObject) -> usize {
        let id = self.objects.len();
        self.grid.entry(cell_of(&obj.location)).or_default().push(id);
        self.objects.push(Some(obj));
        self.live += 1;
        id
    }

    fn remove(&mut self, id: usize) -> MapObject {
        let obj = self.objects[id].take().expect("object is live");
        let cell = cell_of(&obj.location);
        if let Some(ids) = self.grid.get_mut(&cell) {
            ids.retain(|&i| i != id);
        }
        self.live -= 1;
        obj
    }

    fn relocate(&mut self, id: usize, from: GeoPoint, to: GeoPoint) {
        let (c0, c1) = (cell_of(&from), cell_of(&to));
        if c0 != c1 {
            if let Some(ids) = self.grid.get_mut(&c0) {
                ids.retain(|&i| i != id);
            }
            self.grid.entry(c1).or_default().push(id);
        }
    }

    /// Folds one observation into the map.
    ///
    /// If no object lies strictly within `d_dist`, the observation becomes a
    /// new object. Otherwise it merges into the nearest one: an observation
    /// from strictly below the object's best altitude replaces its payload
    /// (location, certainty, class); at equal-or-higher altitude only a
    /// strictly higher certainty does. Bookkeeping always updates.
    ///
    /// A payload replacement moves the object, which can drag it within
    /// `d_dist` of a neighbour; such pairs merge too (the lower-altitude
    /// payload wins) until the map is again pairwise separated. Returns the
    /// id of the object that absorbed the observation.
    pub fn insert_or_merge(&mut self, obs: &Observation, d_dist: f64) -> usize {
        let target = self.nearest_within(&obs.location, d_dist, None);
        let id = match target {
            None => self.insert_new(MapObject {
                location: obs.location,
                certainty: obs.certainty,
                class_label: obs.class_label,
                min_view_altitude: obs.view_altitude,
                max_certainty_seen: obs.certainty,
                observation_count: 1,
            }),
            Some(id) => {
                let mut obj = self.objects[id].expect("object is live");
                let old_loc = obj.location;
                if obs.view_altitude < obj.min_view_altitude
                    || (obs.view_altitude >= obj.min_view_altitude && obs.certainty > obj.certainty)
                {
                    obj.location = obs.location;
                    obj.certainty = obs.certainty;
                    obj.class_label = obs.class_label;
                }
                obj.min_view_altitude = obj.min_view_altitude.min(obs.view_altitude);
                obj.max_certainty_seen = obj.max_certainty_seen.max(obs.certainty);
                obj.observation_count += 1;
                self.objects[id] = Some(obj);
                self.relocate(id, old_loc, obj.location);
                id
            }
        };
        self.cascade_merge(id, d_dist)
    }

    /// Re-establishes pairwise separation after an object moved.
    fn cascade_merge(&mut self, mut id: usize, d_dist: f64) -> usize {
        loop {
            let loc = self.objects[id].expect("object is live").location;
            let Some(other) = self.nearest_within(&loc, d_dist, Some(id)) else {
                return id;
            };
            let a = self.remove(id.min(other));
            let b = self.remove(id.max(other));
            // The better-viewed payload survives; certainty breaks ties.
            let winner_is_a = a.min_view_altitude < b.min_view_altitude
                || (a.min_view_altitude == b.min_view_altitude && a.certainty >= b.certainty);
            let payload = if winner_is_a { &a } else { &b };
            id = self.insert_new(MapObject {
                location: payload.location,
                certainty: payload.certainty,
                class_label: payload.class_label,
                min_view_altitude: a.min_view_altitude.min(b.min_view_altitude),
                max_certainty_seen: a.max_certainty_seen.max(b.max_certainty_seen),
                observation_count: a.observation_count + b.observation_count,
            });
        }
    }

    /// Removes objects the current image should have re-detected but did not.
    ///
    /// An object is dropped only when all four hold: it is inside the current
    /// footprint (by `margin`), no current detection lies strictly within
    /// `d_dist` of it, the current view is from strictly below its best
    /// altitude, and no observation of it ever reached `c_accept`. Returns
    /// the number of objects removed.
    pub fn prune_missed(
        &mut self,
        pose: &Pose,
        camera: &CameraModel,
        current_detections: &[GeoPoint],
        c_accept: f64,
        d_dist: f64,
        margin: f64,
    ) -> usize {
        let doomed: Vec<usize> = self
            .objects
            .iter()
            .enumerate()
            .filter_map(|(id, slot)| {
                let obj = slot.as_ref()?;
                let visible = pose.is_visible(camera, &obj.location, margin);
                let confirmed = current_detections.iter().any(|d| d.dist(&obj.location) < d_dist);
                let closer_view = pose.altitude < obj.min_view_altitude;
                let never_convincing = obj.max_certainty_seen < c_accept;
                (visible && !confirmed && closer_view && never_convincing).then_some(id)
            })
            .collect();
        for id in &doomed {
            self.remove(*id);
        }
        doomed.len()
    }
}

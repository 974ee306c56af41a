//! Inspection planning: which mapped objects deserve a low-altitude look,
//! and in what order to visit them.
//!
//! Objects whose certainty is neither convincingly high nor convincingly low
//! become inspection targets. The targets are ordered into a short open tour
//! starting at the end of the coverage path, then thinned: a target already
//! visible from an earlier kept waypoint does not need its own stop.

use crate::coverage::{FlightPath, PathKind, Waypoint};
use crate::geo::{heading_towards, CameraModel, GeoPoint, Pose};
use crate::mapping::ObjectMap;
use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Outcome of the certainty test for one mapped object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Accept,
    Inspect,
    Reject,
}

/// Mission-level planner configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Coverage flight altitude, m.
    pub h_cov: f64,
    /// Inspection flight altitude, m.
    pub h_inspect: f64,
    /// Certainty strictly above this is accepted without inspection.
    pub c_accept: f64,
    /// Certainty strictly below this is discarded as noise.
    pub c_reject: f64,
    /// Certainty strictly above this counts as a reported object.
    pub c_eval: f64,
    /// Distance under which two observations describe the same object, m.
    pub d_dist: f64,
    /// Fraction of footprint shared by adjacent coverage images.
    pub overlap_fraction: f64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            h_cov: 24.0,
            h_inspect: 12.0,
            c_accept: 0.8,
            c_reject: 0.2,
            c_eval: 0.5,
            d_dist: 0.35,
            overlap_fraction: 0.1,
        }
    }
}

impl PlannerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_accept", self.c_accept),
            ("c_reject", self.c_reject),
            ("c_eval", self.c_eval),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.c_reject > self.c_accept {
            return Err(Error::invalid(format!(
                "c_reject ({}) must not exceed c_accept ({})",
                self.c_reject, self.c_accept
            )));
        }
        // Negated so NaN fails too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.h_cov > 0.0) || !(self.h_inspect > 0.0) {
            return Err(Error::invalid("altitudes must be positive"));
        }
        if self.h_inspect > self.h_cov {
            return Err(Error::invalid(format!(
                "inspection altitude ({}) above coverage altitude ({})",
                self.h_inspect, self.h_cov
            )));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.d_dist >= 0.0) {
            return Err(Error::invalid("d_dist must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(Error::invalid("overlap_fraction must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Sorts a certainty into accept / inspect / reject. Both thresholds are
/// strict, so values exactly at a threshold fall back to inspection.
pub fn decide(certainty: f64, params: &PlannerParams) -> Decision {
    if certainty > params.c_accept {
        Decision::Accept
    } else if certainty < params.c_reject {
        Decision::Reject
    } else {
        Decision::Inspect
    }
}

/// Local-search budget per restart, counted in move evaluations.
pub const DEFAULT_MOVE_BUDGET: usize = 10_000;
const RESTARTS: usize = 8;
const IMPROVE_EPS: f64 = 1e-12;

/// Orders `points` into a short open tour that begins at `start` (the start
/// itself is not part of the result; the tour's far end is free).
///
/// Eight restarts (the given order, a nearest-neighbor construction, then
/// shuffles), each polished by first-improvement 2-opt and single-point
/// relocation until no move helps or the per-restart budget runs out. The
/// result is never longer than the input order and is a permutation of
/// `0..points.len()`.
pub fn order_waypoints<R: Rng>(
    points: &[GeoPoint],
    start: &GeoPoint,
    rng: &mut R,
    max_evals: usize,
) -> Vec<usize> {
    let n = points.len();
    if n <= 1 {
        return (0..n).collect();
    }
    let cost = |perm: &[usize]| -> f64 {
        let mut total = start.dist(&points[perm[0]]);
        for w in perm.windows(2) {
            total += points[w[0]].dist(&points[w[1]]);
        }
        total
    };

    let mut best: Vec<usize> = (0..n).collect();
    let mut best_cost = f64::INFINITY;
    for restart in 0..RESTARTS {
        let mut perm: Vec<usize> = match restart {
            0 => (0..n).collect(),
            1 => nearest_neighbor_order(points, start),
            _ => {
                let mut p: Vec<usize> = (0..n).collect();
                p.shuffle(rng);
                p
            }
        };
        local_search(points, start, &mut perm, max_evals);
        let c = cost(&perm);
        if c < best_cost - IMPROVE_EPS {
            best_cost = c;
            best = perm;
        }
    }
    best
}

/// Greedy construction: repeatedly hop to the nearest unvisited point.
/// Deterministic; distance ties break toward the lower index.
fn nearest_neighbor_order(points: &[GeoPoint], start: &GeoPoint) -> Vec<usize> {
    let n = points.len();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut order = Vec::with_capacity(n);
    let mut cur = *start;
    while !remaining.is_empty() {
        let pos = remaining
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| {
                cur.dist(&points[a]).total_cmp(&cur.dist(&points[b])).then(a.cmp(&b))
            })
            .map(|(pos, _)| pos)
            .expect("remaining is non-empty");
        let idx = remaining.swap_remove(pos);
        cur = points[idx];
        order.push(idx);
    }
    order
}

/// First-improvement descent over 2-opt reversals and single-point moves.
/// Improving moves are applied in place and the sweep carries on from the
/// same spot; sweeps repeat until one passes clean or the budget runs out.
fn local_search(points: &[GeoPoint], start: &GeoPoint, perm: &mut Vec<usize>, max_evals: usize) {
    let n = perm.len();
    if n < 2 {
        return;
    }
    let d = |a: usize, b: usize| points[a].dist(&points[b]);
    let d_start = |a: usize| start.dist(&points[a]);
    let mut evals = 0usize;

    let mut improved = true;
    while improved {
        improved = false;
        // 2-opt: reverse perm[i..=j].
        for i in 0..n {
            for j in i + 1..n {
                if evals >= max_evals {
                    return;
                }
                evals += 1;
                let before_i = if i == 0 { d_start(perm[i]) } else { d(perm[i - 1], perm[i]) };
                let new_i = if i == 0 { d_start(perm[j]) } else { d(perm[i - 1], perm[j]) };
                let (before_j, new_j) = if j == n - 1 {
                    (0.0, 0.0)
                } else {
                    (d(perm[j], perm[j + 1]), d(perm[i], perm[j + 1]))
                };
                if new_i + new_j < before_i + before_j - IMPROVE_EPS {
                    perm[i..=j].reverse();
                    improved = true;
                }
            }
        }
        // Relocation: move perm[i] into the gap before position k.
        for i in 0..n {
            for k in 0..=n {
                if k == i || k == i + 1 {
                    continue;
                }
                if evals >= max_evals {
                    return;
                }
                evals += 1;
                let p = perm[i];
                let prev_i = if i == 0 { None } else { Some(perm[i - 1]) };
                let next_i = if i == n - 1 { None } else { Some(perm[i + 1]) };
                let edge = |a: Option<usize>, b: Option<usize>| match (a, b) {
                    (Some(x), Some(y)) => d(x, y),
                    (None, Some(y)) => d_start(y),
                    (_, None) => 0.0,
                };
                let removal_gain = edge(prev_i, Some(p)) + edge(Some(p), next_i) - edge(prev_i, next_i);
                // Gap neighbours in the list with p removed.
                let prev_k = if k == 0 {
                    None
                } else {
                    let idx = if k - 1 == i { continue } else { k - 1 };
                    Some(perm[idx])
                };
                let next_k = if k == n { None } else if k == i { unreachable!() } else { Some(perm[k]) };
                let insert_cost = edge(prev_k, Some(p)) + edge(Some(p), next_k) - edge(prev_k, next_k);
                if insert_cost < removal_gain - IMPROVE_EPS {
                    let val = perm.remove(i);
                    let pos = if k > i { k - 1 } else { k };
                    perm.insert(pos, val);
                    improved = true;
                }
            }
        }
    }
}

/// Turns ordered tour positions into waypoints whose headings face the next
/// waypoint; the last one keeps its predecessor's heading, a lone waypoint
/// faces north.
pub fn assign_headings(positions: &[GeoPoint], altitude: f64) -> Vec<Waypoint> {
    let n = positions.len();
    let mut waypoints = Vec::with_capacity(n);
    for (k, p) in positions.iter().enumerate() {
        let heading = if k + 1 < n {
            heading_towards(p, &positions[k + 1])
        } else if n >= 2 {
            heading_towards(&positions[n - 2], p)
        } else {
            0.0
        };
        waypoints.push(Waypoint {
            position: *p,
            altitude,
            heading,
        });
    }
    waypoints
}

/// Default footprint-edge margin for "close enough to inspect in passing".
pub const VISIBILITY_MARGIN: f64 = 0.35;

/// Drops tour stops whose target is already visible from an earlier kept
/// stop. One greedy pass: the first waypoint is always kept, later ones only
/// if their target cannot be seen (by `margin`) from the last kept waypoint.
/// The result is a subsequence of the input.
pub fn filter_waypoints(
    ordered: &[(Waypoint, GeoPoint)],
    camera: &CameraModel,
    margin: f64,
) -> Vec<(Waypoint, GeoPoint)> {
    let mut kept: Vec<(Waypoint, GeoPoint)> = Vec::new();
    for (wp, target) in ordered {
        let covered = kept.last().is_some_and(|(last, _)| {
            let pose = Pose::new(last.position.easting, last.position.northing, last.altitude, last.heading);
            pose.is_visible(camera, target, margin)
        });
        if !covered {
            kept.push((*wp, *target));
        }
    }
    kept
}

/// Plans the low-altitude inspection flight for the current map state.
///
/// Objects in the inspection band are visited in a locally-optimized order
/// starting from `start` (normally the last coverage waypoint), at the
/// inspection altitude, with redundant stops filtered out. No targets means
/// an empty path.
pub fn plan_inspection<R: Rng>(
    map: &ObjectMap,
    params: &PlannerParams,
    camera: &CameraModel,
    start: &GeoPoint,
    rng: &mut R,
) -> FlightPath {
    plan_inspection_with_targets(map, params, camera, start, rng).0
}

/// Like [`plan_inspection`], but also reports which object each waypoint
/// inspects, as indices into the map's object iteration order at planning
/// time. Useful for exports; the mission loop only needs the path.
pub fn plan_inspection_with_targets<R: Rng>(
    map: &ObjectMap,
    params: &PlannerParams,
    camera: &CameraModel,
    start: &GeoPoint,
    rng: &mut R,
) -> (FlightPath, Vec<usize>) {
    let targets: Vec<(usize, GeoPoint)> = map
        .objects()
        .enumerate()
        .filter(|(_, o)| decide(o.certainty, params) == Decision::Inspect)
        .map(|(i, o)| (i, o.location))
        .collect();
    if targets.is_empty() {
        let path = FlightPath {
            kind: PathKind::Inspection,
            waypoints: Vec::new(),
        };
        return (path, Vec::new());
    }
    let points: Vec<GeoPoint> = targets.iter().map(|(_, p)| *p).collect();
    // A 2-opt sweep costs ~n^2/2 evaluations; give larger target sets enough
    // budget to actually converge instead of stopping mid-descent.
    let budget = DEFAULT_MOVE_BUDGET.max(30 * points.len() * points.len());
    let order = order_waypoints(&points, start, rng, budget);
    let ordered: Vec<GeoPoint> = order.iter().map(|&i| points[i]).collect();
    let waypoints = assign_headings(&ordered, params.h_inspect);
    let pairs: Vec<(Waypoint, GeoPoint)> =
        waypoints.into_iter().zip(ordered.iter().copied()).collect();
    let kept = filter_waypoints(&pairs, camera, VISIBILITY_MARGIN);
    // Recover each kept waypoint's target id from its position in the tour.
    // filter_waypoints keeps a subsequence, so walk both lists in step.
    let mut ids = Vec::with_capacity(kept.len());
    let mut cursor = 0usize;
    for (_, target) in &kept {
        while ordered[cursor] != *target {
            cursor += 1;
        }
        ids.push(targets[order[cursor]].0);
        cursor += 1;
    }
    let path = FlightPath {
        kind: PathKind::Inspection,
        waypoints: kept.into_iter().map(|(wp, _)| wp).collect(),
    };
    (path, ids)
}

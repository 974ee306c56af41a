//! Synthetic worlds, localization error models, and the mission executor.
//!
//! A mission flies the planned waypoints exactly; what degrades under
//! localization error is the *knowledge* of where each image was taken. Per
//! image the executor draws a perturbed pose, crops the world and runs the
//! detector from it, then georeferences and maps the detections using the
//! unperturbed waypoint pose. With the perfect error level both poses
//! coincide.

use crate::coverage::{plan_coverage, FieldPolygon, FlightPath, PathKind, Waypoint};
use crate::detect::{confidence_threshold_filter, detect_image, DetectorProfile};
use crate::geo::{normalize_heading, CameraModel, GeoPoint, Pose};
use crate::inspect::{plan_inspection_with_targets, PlannerParams, VISIBILITY_MARGIN};
use crate::mapping::{MapObject, ObjectMap, Observation};
use crate::rng::{self, stage};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Object categories the detector distinguishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectClass {
    #[serde(rename = "type-i")]
    TypeI,
    #[serde(rename = "type-ii")]
    TypeII,
}

impl ObjectClass {
    pub fn index(self) -> usize {
        match self {
            ObjectClass::TypeI => 0,
            ObjectClass::TypeII => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i.is_multiple_of(2) {
            ObjectClass::TypeI
        } else {
            ObjectClass::TypeII
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectClass::TypeI => "type-i",
            ObjectClass::TypeII => "type-ii",
        })
    }
}

/// Ground-truth object.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct WorldObject {
    pub location: GeoPoint,
    pub class_label: ObjectClass,
    pub cluster_id: Option<usize>,
}

/// Spatial layout of generated worlds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorldDistribution {
    Uniform,
    Clustered,
}

impl WorldDistribution {
    pub fn as_str(self) -> &'static str {
        match self {
            WorldDistribution::Uniform => "uniform",
            WorldDistribution::Clustered => "clustered",
        }
    }

    pub fn index(self) -> u64 {
        match self {
            WorldDistribution::Uniform => 0,
            WorldDistribution::Clustered => 1,
        }
    }
}

/// Objects closer than this would represent the same plant.
pub const MIN_OBJECT_SPACING: f64 = 1.0;
/// Cluster centers keep this distance so clusters stay recognizable.
pub const MIN_CLUSTER_SPACING: f64 = 15.0;
/// Consecutive rejected placements before giving up.
const PLACEMENT_ATTEMPTS: usize = 10_000;
const CLUSTER_SHAPE_RESTARTS: usize = 64;

/// The 0.75ha rectangle all experiments run on unless told otherwise.
pub fn default_field() -> FieldPolygon {
    FieldPolygon::rectangle(0.0, 0.0, 100.0, 75.0).expect("static rectangle is valid")
}

fn sample_in_polygon<R: Rng>(field: &FieldPolygon, rng: &mut R) -> Option<GeoPoint> {
    let (min, max) = field.bbox();
    for _ in 0..PLACEMENT_ATTEMPTS {
        let p = GeoPoint::new(
            rng.gen_range(min.easting..=max.easting),
            rng.gen_range(min.northing..=max.northing),
        );
        if field.contains(&p) {
            return Some(p);
        }
    }
    None
}

/// Places `n` objects i.i.d. uniform over the field, rejecting draws closer
/// than `min_dist` to an already placed object. Classes alternate so both
/// types appear in equal numbers.
pub fn generate_uniform<R: Rng>(
    field: &FieldPolygon,
    n: usize,
    min_dist: f64,
    rng: &mut R,
) -> Result<Vec<WorldObject>> {
    let (min, max) = field.bbox();
    let mut objects: Vec<WorldObject> = Vec::with_capacity(n);
    let mut rejects = 0usize;
    while objects.len() < n {
        let p = GeoPoint::new(
            rng.gen_range(min.easting..=max.easting),
            rng.gen_range(min.northing..=max.northing),
        );
        let ok = field.contains(&p)
            && objects.iter().all(|o| o.location.dist(&p) >= min_dist);
        if ok {
            objects.push(WorldObject {
                location: p,
                class_label: ObjectClass::from_index(objects.len()),
                cluster_id: None,
            });
            rejects = 0;
        } else {
            rejects += 1;
            if rejects >= PLACEMENT_ATTEMPTS {
                return Err(Error::Infeasible {
                    context: format!("uniform placement with min_dist {min_dist}m"),
                    attempts: PLACEMENT_ATTEMPTS,
                    achieved: objects.len(),
                });
            }
        }
    }
    Ok(objects)
}

/// One random 2x2 shape factor for a cluster; the member offset covariance
/// is the positive semidefinite product factor * factor^T.
pub fn sample_cluster_factor<R: Rng>(rng: &mut R) -> [[f64; 2]; 2] {
    let entry = Normal::new(5.0, 2.0).unwrap();
    [
        [entry.sample(rng), entry.sample(rng)],
        [entry.sample(rng), entry.sample(rng)],
    ]
}

/// Groups `n` objects into Gaussian clusters.
///
/// Cluster sizes are drawn from round(N(8, 3)) (resampled while < 1) until
/// they cover `n`, the last cluster truncated to fit. Centers are uniform in
/// the field, pairwise at least 15m apart. Members scatter around their
/// center with a per-cluster random covariance and are resampled while they
/// leave the field or land within 1m of any placed object. Each cluster is
/// a single class, alternating.
pub fn generate_clustered<R: Rng>(
    field: &FieldPolygon,
    n: usize,
    rng: &mut R,
) -> Result<Vec<WorldObject>> {
    let size_dist = Normal::new(8.0, 3.0).unwrap();
    let mut sizes: Vec<usize> = Vec::new();
    let mut total = 0usize;
    while total < n {
        let k: f64 = size_dist.sample(rng);
        let k = k.round();
        if k < 1.0 {
            continue;
        }
        let k = (k as usize).min(n - total);
        sizes.push(k);
        total += k;
    }

    let mut centers: Vec<GeoPoint> = Vec::with_capacity(sizes.len());
    let mut rejects = 0usize;
    while centers.len() < sizes.len() {
        let Some(p) = sample_in_polygon(field, rng) else {
            return Err(Error::Infeasible {
                context: "cluster center inside field".into(),
                attempts: PLACEMENT_ATTEMPTS,
                achieved: centers.len(),
            });
        };
        if centers.iter().all(|c| c.dist(&p) >= MIN_CLUSTER_SPACING) {
            centers.push(p);
            rejects = 0;
        } else {
            rejects += 1;
            if rejects >= PLACEMENT_ATTEMPTS {
                return Err(Error::Infeasible {
                    context: format!("cluster centers with {MIN_CLUSTER_SPACING}m spacing"),
                    attempts: PLACEMENT_ATTEMPTS,
                    achieved: centers.len(),
                });
            }
        }
    }

    let unit = Normal::new(0.0, 1.0).unwrap();
    let mut objects: Vec<WorldObject> = Vec::with_capacity(n);
    for (ci, (&k, center)) in sizes.iter().zip(&centers).enumerate() {
        let class = ObjectClass::from_index(ci);
        let base = objects.len();
        let mut restarts = 0usize;
        // A covariance draw can be too narrow to host k members at the
        // spacing floor (or point almost entirely outside the field); such
        // clusters are rebuilt from a fresh draw instead of failing the world.
        'shape: loop {
            let factor = sample_cluster_factor(rng);
            let mut attempts = 0usize;
            while objects.len() - base < k {
                let z = (unit.sample(rng), unit.sample(rng));
                let offset = (
                    factor[0][0] * z.0 + factor[0][1] * z.1,
                    factor[1][0] * z.0 + factor[1][1] * z.1,
                );
                let p = GeoPoint::new(center.easting + offset.0, center.northing + offset.1);
                let ok = field.contains(&p)
                    && objects.iter().all(|o| o.location.dist(&p) >= MIN_OBJECT_SPACING);
                if ok {
                    objects.push(WorldObject {
                        location: p,
                        class_label: class,
                        cluster_id: Some(ci),
                    });
                    continue;
                }
                attempts += 1;
                if attempts >= PLACEMENT_ATTEMPTS {
                    objects.truncate(base);
                    restarts += 1;
                    if restarts >= CLUSTER_SHAPE_RESTARTS {
                        return Err(Error::Infeasible {
                            context: format!("cluster {ci} member placement"),
                            attempts: restarts * PLACEMENT_ATTEMPTS,
                            achieved: base,
                        });
                    }
                    continue 'shape;
                }
            }
            break;
        }
    }
    Ok(objects)
}

/// Generates a world whose content depends only on (distribution, seed).
pub fn generate_world(
    distribution: WorldDistribution,
    field: &FieldPolygon,
    n: usize,
    seed: u64,
) -> Result<Vec<WorldObject>> {
    let mut r = rng::stream(seed, &[stage::WORLD_GEN, distribution.index()]);
    match distribution {
        WorldDistribution::Uniform => generate_uniform(field, n, MIN_OBJECT_SPACING, &mut r),
        WorldDistribution::Clustered => generate_clustered(field, n, &mut r),
    }
}

/// Localization quality during flight: maximum absolute errors per pose
/// component, plus the widened mapping merge distance that compensates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocalizationErrorLevel {
    pub name: String,
    pub max_position_err: f64,
    pub max_altitude_err: f64,
    pub max_roll_err: f64,
    pub max_pitch_err: f64,
    pub max_heading_err: f64,
    pub mapping_d_dist: f64,
}

const DEG: f64 = std::f64::consts::PI / 180.0;

impl LocalizationErrorLevel {
    fn level(name: &str, pos: f64, angle_deg: f64, d_dist: f64) -> Self {
        LocalizationErrorLevel {
            name: name.into(),
            max_position_err: pos,
            max_altitude_err: pos,
            max_roll_err: angle_deg * DEG,
            max_pitch_err: angle_deg * DEG,
            max_heading_err: angle_deg * DEG,
            mapping_d_dist: d_dist,
        }
    }

    pub fn perfect() -> Self {
        Self::level("perfect", 0.0, 0.0, 0.35)
    }

    pub fn good() -> Self {
        Self::level("good", 0.015, 0.5, 0.5)
    }

    pub fn decent() -> Self {
        Self::level("decent", 0.03, 1.0, 0.9)
    }

    pub fn poor() -> Self {
        Self::level("poor", 0.06, 2.0, 1.8)
    }

    pub fn very_poor() -> Self {
        Self::level("very_poor", 0.15, 5.0, 4.7)
    }

    /// All five levels, ordered from best to worst.
    pub fn standard_levels() -> Vec<Self> {
        vec![
            Self::perfect(),
            Self::good(),
            Self::decent(),
            Self::poor(),
            Self::very_poor(),
        ]
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Self::standard_levels()
            .into_iter()
            .find(|l| l.name == name)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown error level '{name}' (expected perfect, good, decent, poor or very_poor)"
                ))
            })
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.max_position_err,
            self.max_altitude_err,
            self.max_roll_err,
            self.max_pitch_err,
            self.max_heading_err,
            self.mapping_d_dist,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(format!("error level '{}' has negative maxima", self.name)));
        }
        Ok(())
    }
}

fn uniform_err<R: Rng>(rng: &mut R, max: f64) -> f64 {
    if max == 0.0 {
        0.0
    } else {
        rng.gen_range(-max..=max)
    }
}

/// Draws one image's localization error: every component shifted uniformly
/// within the level's maxima. The gimbal errors land in the pose's gimbal
/// angles, so projecting through the result reproduces the ground shift a
/// tilted camera causes.
pub fn perturb_pose<R: Rng>(pose: &Pose, level: &LocalizationErrorLevel, rng: &mut R) -> Pose {
    let mut p = *pose;
    p.easting += uniform_err(rng, level.max_position_err);
    p.northing += uniform_err(rng, level.max_position_err);
    p.altitude += uniform_err(rng, level.max_altitude_err);
    p.heading = normalize_heading(p.heading + uniform_err(rng, level.max_heading_err));
    p.gimbal_roll += uniform_err(rng, level.max_roll_err);
    p.gimbal_pitch += uniform_err(rng, level.max_pitch_err);
    p
}

/// One row of the per-image mission log.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ImageLog {
    pub stage: PathKind,
    pub waypoint_index: usize,
    pub reported: Pose,
    pub true_pose: Pose,
    /// Detections surviving the confidence filter.
    pub detections: usize,
    /// Map size after merging and pruning this image.
    pub map_size: usize,
    /// Detector ran outside its calibrated altitude range.
    pub extrapolated: bool,
}

/// Everything a simulated flight produces.
#[derive(Debug, Clone)]
pub struct MissionResult {
    pub coverage_path: FlightPath,
    pub inspection_path: FlightPath,
    /// Per inspection waypoint: which map object (by planning-time index)
    /// it was flown to look at. Same length as the inspection path.
    pub inspection_targets: Vec<usize>,
    pub final_map: Vec<MapObject>,
    pub total_length: f64,
    pub images: Vec<ImageLog>,
}

impl MissionResult {
    /// Objects the mission reports, at the given evaluation threshold.
    pub fn accepted_objects(&self, c_eval: f64) -> Vec<MapObject> {
        self.final_map.iter().filter(|o| o.certainty > c_eval).copied().collect()
    }

    /// True when any image was taken outside the detector's calibrated range.
    pub fn any_extrapolated(&self) -> bool {
        self.images.iter().any(|i| i.extrapolated)
    }
}

struct MissionContext<'a> {
    world: &'a [WorldObject],
    params: &'a PlannerParams,
    camera: &'a CameraModel,
    profile: &'a DetectorProfile,
    level: &'a LocalizationErrorLevel,
    seed: u64,
}

/// Flies one leg, feeding every image through detection, georeferencing,
/// map merging and pruning.
fn execute_leg(
    ctx: &MissionContext,
    path: &FlightPath,
    stage_label: u64,
    map: &mut ObjectMap,
    images: &mut Vec<ImageLog>,
) {
    for (i, wp) in path.waypoints.iter().enumerate() {
        let reported = Pose::new(
            wp.position.easting,
            wp.position.northing,
            wp.altitude,
            wp.heading,
        );
        let mut err_rng = rng::stream(ctx.seed, &[stage::POSE_ERROR, stage_label, i as u64]);
        let true_pose = perturb_pose(&reported, ctx.level, &mut err_rng);

        let in_view: Vec<(GeoPoint, usize)> = ctx
            .world
            .iter()
            .filter(|o| true_pose.is_visible(ctx.camera, &o.location, 0.0))
            .map(|o| (o.location, o.class_label.index()))
            .collect();

        // Image content depends on (seed, stage, index) but not on the error
        // level, so error levels can be compared with common random numbers.
        let mut img_rng = rng::stream(ctx.seed, &[stage_label, i as u64]);
        let (raw, extrapolated) =
            detect_image(&in_view, &true_pose, ctx.camera, ctx.profile, &mut img_rng);
        let kept = confidence_threshold_filter(raw, ctx.params.c_reject);

        let located: Vec<GeoPoint> = kept
            .iter()
            .map(|d| {
                let (u, v) = d.bbox.center();
                reported.pixel_to_utm(ctx.camera, u, v)
            })
            .collect();
        for (d, loc) in kept.iter().zip(&located) {
            map.insert_or_merge(
                &Observation {
                    location: *loc,
                    certainty: d.confidence,
                    class_label: d.class_label,
                    view_altitude: reported.altitude,
                },
                ctx.level.mapping_d_dist,
            );
        }
        map.prune_missed(
            &reported,
            ctx.camera,
            &located,
            ctx.params.c_accept,
            ctx.level.mapping_d_dist,
            VISIBILITY_MARGIN,
        );

        images.push(ImageLog {
            stage: path.kind,
            waypoint_index: i,
            reported,
            true_pose,
            detections: kept.len(),
            map_size: map.len(),
            extrapolated,
        });
    }
}

/// Runs the adaptive mission: coverage at `h_cov`, then one inspection pass
/// at `h_inspect` over every object whose certainty stayed ambiguous. The
/// same seed reproduces the mission bit for bit.
pub fn run_mission(
    field: &FieldPolygon,
    world: &[WorldObject],
    params: &PlannerParams,
    camera: &CameraModel,
    profile: &DetectorProfile,
    level: &LocalizationErrorLevel,
    seed: u64,
) -> Result<MissionResult> {
    params.validate()?;
    level.validate()?;
    camera.validate()?;
    let coverage_path = plan_coverage(field, camera, params.h_cov, params.overlap_fraction)?;

    let mut map = ObjectMap::new();
    let mut images = Vec::new();
    let ctx = MissionContext {
        world,
        params,
        camera,
        profile,
        level,
        seed,
    };
    execute_leg(&ctx, &coverage_path, stage::COVERAGE_IMAGE, &mut map, &mut images);

    let start = coverage_path
        .waypoints
        .last()
        .map(|w| w.position)
        .expect("coverage path has waypoints");
    let mut plan_rng = rng::stream(seed, &[stage::INSPECTION_PLAN]);
    let (inspection_path, inspection_targets) =
        plan_inspection_with_targets(&map, params, camera, &start, &mut plan_rng);
    execute_leg(&ctx, &inspection_path, stage::INSPECTION_IMAGE, &mut map, &mut images);

    let total_length = coverage_path.length() + inspection_path.length();
    Ok(MissionResult {
        coverage_path,
        inspection_path,
        inspection_targets,
        final_map: map.objects().copied().collect(),
        total_length,
        images,
    })
}

/// Runs the non-adaptive reference flight: coverage at `params.h_cov` with
/// the inspection stage disabled.
pub fn run_baseline(
    field: &FieldPolygon,
    world: &[WorldObject],
    params: &PlannerParams,
    camera: &CameraModel,
    profile: &DetectorProfile,
    level: &LocalizationErrorLevel,
    seed: u64,
) -> Result<MissionResult> {
    params.validate()?;
    level.validate()?;
    camera.validate()?;
    let coverage_path = plan_coverage(field, camera, params.h_cov, params.overlap_fraction)?;

    let mut map = ObjectMap::new();
    let mut images = Vec::new();
    let ctx = MissionContext {
        world,
        params,
        camera,
        profile,
        level,
        seed,
    };
    execute_leg(&ctx, &coverage_path, stage::COVERAGE_IMAGE, &mut map, &mut images);

    let total_length = coverage_path.length();
    Ok(MissionResult {
        coverage_path,
        inspection_path: FlightPath {
            kind: PathKind::Inspection,
            waypoints: Vec::new(),
        },
        inspection_targets: Vec::new(),
        final_map: map.objects().copied().collect(),
        total_length,
        images,
    })
}

/// Convenience for tests and tools: a waypoint list as poses.
pub fn waypoint_pose(wp: &Waypoint) -> Pose {
    Pose::new(wp.position.easting, wp.position.northing, wp.altitude, wp.heading)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{McEmulation, ProfileAnchor};

    fn noiseless_profile(conf_alpha: f64, conf_beta: f64) -> DetectorProfile {
        DetectorProfile {
            name: "test".into(),
            class_count: 2,
            object_size_m: 0.1,
            bbox_size_jitter: 0.0,
            class_act_sigma: 0.0,
            mc: McEmulation::default(),
            anchors: vec![
                ProfileAnchor {
                    altitude: 12.0,
                    p_tp: 1.0,
                    fp_rate: 0.0,
                    tp_conf_alpha: conf_alpha,
                    tp_conf_beta: conf_beta,
                    fp_conf_alpha: 1.0,
                    fp_conf_beta: 9999.0,
                    sigma_ground: 0.0,
                    class_gap: 8.0,
                },
                ProfileAnchor {
                    altitude: 48.0,
                    p_tp: 1.0,
                    fp_rate: 0.0,
                    tp_conf_alpha: conf_alpha,
                    tp_conf_beta: conf_beta,
                    fp_conf_alpha: 1.0,
                    fp_conf_beta: 9999.0,
                    sigma_ground: 0.0,
                    class_gap: 8.0,
                },
            ],
        }
    }

    #[test]
    fn uniform_world_respects_spacing() {
        let field = default_field();
        let mut r = rng::stream(1, &[stage::WORLD_GEN]);
        let world = generate_uniform(&field, 60, 1.0, &mut r).unwrap();
        assert_eq!(world.len(), 60);
        for (i, a) in world.iter().enumerate() {
            assert!(field.contains(&a.location));
            for b in &world[i + 1..] {
                assert!(a.location.dist(&b.location) >= 1.0);
            }
        }
        let type_i = world.iter().filter(|o| o.class_label == ObjectClass::TypeI).count();
        assert_eq!(type_i, 30, "classes alternate");
        assert!(generate_uniform(&field, 0, 1.0, &mut r).unwrap().is_empty());
    }

    #[test]
    fn uniform_world_infeasible_density_errors() {
        let field = FieldPolygon::rectangle(0.0, 0.0, 3.0, 3.0).unwrap();
        let mut r = rng::stream(2, &[stage::WORLD_GEN]);
        let err = generate_uniform(&field, 100, 1.0, &mut r).unwrap_err();
        match err {
            Error::Infeasible { achieved, .. } => assert!(achieved > 0 && achieved < 100),
            other => panic!("expected Infeasible, got {other:?}"),
        }
    }

    #[test]
    fn clustered_world_structure() {
        let field = default_field();
        let mut r = rng::stream(3, &[stage::WORLD_GEN]);
        let world = generate_clustered(&field, 60, &mut r).unwrap();
        assert_eq!(world.len(), 60);
        let mut cluster_ids: Vec<usize> = world.iter().filter_map(|o| o.cluster_id).collect();
        cluster_ids.sort_unstable();
        cluster_ids.dedup();
        assert!(cluster_ids.len() >= 2, "60 objects span several clusters");
        // One class per cluster.
        for &ci in &cluster_ids {
            let classes: Vec<ObjectClass> = world
                .iter()
                .filter(|o| o.cluster_id == Some(ci))
                .map(|o| o.class_label)
                .collect();
            assert!(classes.windows(2).all(|w| w[0] == w[1]));
        }
        // Global spacing still holds across clusters.
        for (i, a) in world.iter().enumerate() {
            assert!(field.contains(&a.location));
            for b in &world[i + 1..] {
                assert!(a.location.dist(&b.location) >= MIN_OBJECT_SPACING - 1e-12);
            }
        }
    }

    #[test]
    fn cluster_count_matches_mean_size() {
        let field = default_field();
        let mut total_clusters = 0usize;
        let mut runs = 0usize;
        for seed in 0..200 {
            let mut r = rng::stream(seed, &[stage::WORLD_GEN, 1]);
            if let Ok(world) = generate_clustered(&field, 60, &mut r) {
                let max_id = world.iter().filter_map(|o| o.cluster_id).max().unwrap();
                total_clusters += max_id + 1;
                runs += 1;
            }
        }
        let mean = total_clusters as f64 / runs as f64;
        assert!(
            (6.0..=9.0).contains(&mean),
            "mean cluster count {mean:.2} outside the expected band"
        );
    }

    #[test]
    fn standard_levels_are_ordered() {
        let levels = LocalizationErrorLevel::standard_levels();
        assert_eq!(levels.len(), 5);
        for w in levels.windows(2) {
            assert!(w[0].max_position_err <= w[1].max_position_err);
            assert!(w[0].max_heading_err <= w[1].max_heading_err);
            assert!(w[0].mapping_d_dist <= w[1].mapping_d_dist);
        }
        assert_eq!(LocalizationErrorLevel::by_name("decent").unwrap().mapping_d_dist, 0.9);
        assert!(LocalizationErrorLevel::by_name("awful").is_err());
    }

    #[test]
    fn perturbation_respects_level_maxima() {
        let pose = Pose::new(10.0, 20.0, 24.0, 1.0);
        let perfect = LocalizationErrorLevel::perfect();
        let mut r = rng::stream(4, &[stage::POSE_ERROR]);
        let same = perturb_pose(&pose, &perfect, &mut r);
        assert_eq!(format!("{pose:?}"), format!("{same:?}"), "perfect level is exact");

        let decent = LocalizationErrorLevel::decent();
        let mut any_nonzero = false;
        for _ in 0..1000 {
            let p = perturb_pose(&pose, &decent, &mut r);
            assert!((p.easting - pose.easting).abs() <= 0.03);
            assert!((p.northing - pose.northing).abs() <= 0.03);
            assert!((p.altitude - pose.altitude).abs() <= 0.03);
            assert!((p.heading - pose.heading).abs() <= 1.0 * DEG + 1e-12);
            assert!(p.gimbal_roll.abs() <= 1.0 * DEG);
            assert!(p.gimbal_pitch.abs() <= 1.0 * DEG);
            any_nonzero |= p.easting != pose.easting;
        }
        assert!(any_nonzero);
    }

    #[test]
    fn empty_world_flies_coverage_only() {
        let field = default_field();
        let profile = noiseless_profile(9999.0, 1.0);
        let params = PlannerParams::default();
        let result = run_mission(
            &field,
            &[],
            &params,
            &CameraModel::default(),
            &profile,
            &LocalizationErrorLevel::perfect(),
            7,
        )
        .unwrap();
        assert!(result.final_map.is_empty());
        assert!(result.inspection_path.waypoints.is_empty());
        assert_eq!(result.total_length, result.coverage_path.length());
        assert_eq!(
            result.images.len(),
            result.coverage_path.waypoints.len(),
            "one image per waypoint"
        );
    }

    #[test]
    fn confident_detection_skips_inspection() {
        let field = default_field();
        let profile = noiseless_profile(9999.0, 1.0);
        let world = vec![WorldObject {
            location: GeoPoint::new(50.0, 40.0),
            class_label: ObjectClass::TypeI,
            cluster_id: None,
        }];
        let result = run_mission(
            &field,
            &world,
            &PlannerParams::default(),
            &CameraModel::default(),
            &profile,
            &LocalizationErrorLevel::perfect(),
            8,
        )
        .unwrap();
        assert_eq!(result.final_map.len(), 1);
        assert!(result.final_map[0].certainty > 0.99);
        assert!(result.inspection_path.waypoints.is_empty());
        assert!(result.final_map[0].location.dist(&world[0].location) < 1e-9);
    }

    #[test]
    fn ambiguous_detection_triggers_one_inspection() {
        let field = default_field();
        // Confidence pinned near 0.5: inside the inspection band.
        let profile = noiseless_profile(2000.0, 2000.0);
        let world = vec![WorldObject {
            location: GeoPoint::new(30.0, 55.0),
            class_label: ObjectClass::TypeII,
            cluster_id: None,
        }];
        let params = PlannerParams::default();
        let result = run_mission(
            &field,
            &world,
            &params,
            &CameraModel::default(),
            &profile,
            &LocalizationErrorLevel::perfect(),
            9,
        )
        .unwrap();
        assert_eq!(result.inspection_path.waypoints.len(), 1);
        let wp = &result.inspection_path.waypoints[0];
        assert!(wp.position.dist(&world[0].location) < 1e-9, "stop sits over the object");
        assert_eq!(wp.altitude, params.h_inspect);
        assert_eq!(result.final_map.len(), 1);
        assert_eq!(result.final_map[0].min_view_altitude, params.h_inspect);
    }

    #[test]
    fn missions_are_deterministic() {
        let field = default_field();
        let world = generate_world(WorldDistribution::Clustered, &field, 40, 5).unwrap();
        let profile = DetectorProfile::default_calibrated();
        let params = PlannerParams {
            c_reject: 0.05,
            ..PlannerParams::default()
        };
        let run = || {
            run_mission(
                &field,
                &world,
                &params,
                &CameraModel::default(),
                &profile,
                &LocalizationErrorLevel::decent(),
                11,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.total_length.to_bits(), b.total_length.to_bits());
        assert_eq!(a.final_map.len(), b.final_map.len());
        for (x, y) in a.final_map.iter().zip(&b.final_map) {
            assert_eq!(x.location.easting.to_bits(), y.location.easting.to_bits());
            assert_eq!(x.certainty.to_bits(), y.certainty.to_bits());
        }
        assert_eq!(a.images.len(), b.images.len());

        let world2 = generate_world(WorldDistribution::Clustered, &field, 40, 5).unwrap();
        assert_eq!(world.len(), world2.len());
        for (x, y) in world.iter().zip(&world2) {
            assert_eq!(x.location.easting.to_bits(), y.location.easting.to_bits());
        }
    }

    #[test]
    fn baseline_skips_inspection_stage() {
        let field = default_field();
        let world = generate_world(WorldDistribution::Uniform, &field, 30, 3).unwrap();
        let profile = DetectorProfile::default_calibrated();
        let params = PlannerParams { h_cov: 12.0, ..PlannerParams::default() };
        let result = run_baseline(
            &field,
            &world,
            &params,
            &CameraModel::default(),
            &profile,
            &LocalizationErrorLevel::perfect(),
            2,
        )
        .unwrap();
        assert!(result.inspection_path.waypoints.is_empty());
        assert_eq!(result.total_length, result.coverage_path.length());
        assert!(!result.final_map.is_empty());
        assert!(!result.any_extrapolated());
    }
}

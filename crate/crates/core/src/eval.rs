//! Ground-truth evaluation and the experiment harnesses.
//!
//! Everything here is deterministic given its seed: experiment jobs run in
//! parallel, but randomness comes from per-job derived streams and rows are
//! sorted before they are returned, so thread scheduling never shows up in
//! the output.

use crate::coverage::{plan_coverage, FieldPolygon};
use crate::detect::{
    build_detection_set, certainty_measures, confidence_threshold_filter, detect_image,
    synthetic_detect, CertaintyVector, DetectorProfile,
};
use crate::geo::{CameraModel, GeoPoint, Pose};
use crate::inspect::PlannerParams;
use crate::mapping::MapObject;
use crate::rng::{self, stage};
use crate::sim::{
    generate_world, run_baseline, run_mission, LocalizationErrorLevel, MissionResult,
    WorldDistribution, WorldObject, MIN_OBJECT_SPACING,
};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution as _, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Maximum ground distance for a detection to count as a true positive.
/// Fixed for evaluation regardless of the mapping merge distance.
pub const EVAL_RADIUS: f64 = 0.35;
/// Detections or truth objects closer than this to the image border are
/// excluded from single-image scoring.
pub const BORDER_MARGIN: f64 = 0.35;
/// Object density used by single-image trials: 80 objects per hectare.
pub const TRIAL_DENSITY_PER_M2: f64 = 0.008;
/// Confidence threshold at which single-image quality is calibrated; equal
/// to the mission evaluation threshold.
pub const CALIBRATION_THRESHOLD: f64 = 0.5;
/// Reference altitude for relative path lengths.
pub const BASELINE_ALTITUDE: f64 = 12.0;

/// Outcome of matching accepted map objects against ground truth.
#[derive(Debug, Clone, Serialize)]
pub struct MatchResult {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// Matched (accepted index, truth index) pairs, sorted.
    pub pairs: Vec<(usize, usize)>,
}

/// Greedy nearest-first one-to-one matching between predictions and truth:
/// candidate pairs (distance strictly below `radius`, equal class) are taken
/// closest-first, skipping anything already matched. Ties break on indices,
/// so the result is deterministic.
fn greedy_pairs(
    predicted: &[(GeoPoint, usize)],
    truth: &[(GeoPoint, usize)],
    radius: f64,
) -> Vec<(usize, usize)> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, (p, pc)) in predicted.iter().enumerate() {
        for (j, (t, tc)) in truth.iter().enumerate() {
            if pc == tc {
                let d = p.dist(t);
                if d < radius {
                    candidates.push((d, i, j));
                }
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_p = vec![false; predicted.len()];
    let mut used_t = vec![false; truth.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_p[i] && !used_t[j] {
            used_p[i] = true;
            used_t[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Matches accepted map objects to ground truth within `radius` (strict),
/// requiring equal classes. Unmatched accepted objects are false positives,
/// unmatched truth false negatives.
pub fn match_ground_truth(
    accepted: &[MapObject],
    truth: &[WorldObject],
    radius: f64,
) -> MatchResult {
    assert!(radius > 0.0, "matching radius must be positive");
    let predicted: Vec<(GeoPoint, usize)> =
        accepted.iter().map(|o| (o.location, o.class_label)).collect();
    let truth_pts: Vec<(GeoPoint, usize)> = truth
        .iter()
        .map(|o| (o.location, o.class_label.index()))
        .collect();
    let pairs = greedy_pairs(&predicted, &truth_pts, radius);
    MatchResult {
        true_positives: pairs.len(),
        false_positives: accepted.len() - pairs.len(),
        false_negatives: truth.len() - pairs.len(),
        pairs,
    }
}

/// F1 score of a match; `None` when there was nothing to score.
pub fn f1(m: &MatchResult) -> Option<f64> {
    let denom = 2 * m.true_positives + m.false_positives + m.false_negatives;
    if denom == 0 {
        None
    } else {
        Some(2.0 * m.true_positives as f64 / denom as f64)
    }
}

/// Path length relative to the fixed-altitude reference flight on the same
/// field; values below 1 mean the adaptive mission flew less.
pub fn relative_length(length: f64, baseline_length: f64) -> Result<f64> {
    // Negated so NaN fails too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(baseline_length > 0.0) {
        return Err(Error::invalid("baseline length must be positive"));
    }
    Ok(length / baseline_length)
}

/// Welch's t statistic between two samples (sample standard deviations).
/// Positive when the first sample's mean is higher.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::invalid(format!(
            "welch_t needs at least 2 samples per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    let var = |xs: &[f64], m: f64| {
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
    };
    let (ma, mb) = (mean(a), mean(b));
    let denom = (var(a, ma) / a.len() as f64 + var(b, mb) / b.len() as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::Degenerate("welch_t with zero variance in both samples".into()));
    }
    Ok((ma - mb) / denom)
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, v.sqrt())
}

/// Scores a finished mission against the world it flew over.
pub fn evaluate_mission(
    result: &MissionResult,
    world: &[WorldObject],
    c_eval: f64,
) -> (MatchResult, Option<f64>) {
    let accepted = result.accepted_objects(c_eval);
    let m = match_ground_truth(&accepted, world, EVAL_RADIUS);
    let score = f1(&m);
    (m, score)
}

// ---------------------------------------------------------------------------
// Single-image trials (detector calibration and certainty separability).

/// Scatters objects over the footprint of a nadir view at `altitude`:
/// Poisson count at the trial density, uniform positions, 1m spacing,
/// alternating classes.
pub fn place_trial_objects<R: Rng>(
    camera: &CameraModel,
    altitude: f64,
    rng: &mut R,
) -> Vec<(GeoPoint, usize)> {
    let (fw, fh) = camera.field_of_view(altitude);
    let mean = TRIAL_DENSITY_PER_M2 * fw * fh;
    let n = Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0);
    let mut placed: Vec<(GeoPoint, usize)> = Vec::new();
    let mut rejects = 0usize;
    while placed.len() < n && rejects < 1000 {
        let p = GeoPoint::new(
            rng.gen_range(-fw / 2.0..=fw / 2.0),
            rng.gen_range(-fh / 2.0..=fh / 2.0),
        );
        if placed.iter().all(|(q, _)| q.dist(&p) >= MIN_OBJECT_SPACING) {
            let class = placed.len() % 2;
            placed.push((p, class));
            rejects = 0;
        } else {
            rejects += 1;
        }
    }
    placed
}

/// Detection counts of one scored image.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrialCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

impl TrialCounts {
    fn add(self, other: TrialCounts) -> TrialCounts {
        TrialCounts {
            true_positives: self.true_positives + other.true_positives,
            false_positives: self.false_positives + other.false_positives,
            false_negatives: self.false_negatives + other.false_negatives,
        }
    }

    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.true_positives + self.false_positives + self.false_negatives;
        if denom == 0 {
            None
        } else {
            Some(2.0 * self.true_positives as f64 / denom as f64)
        }
    }
}

/// Runs the detector once on a synthetic image and scores it: detections
/// below `threshold` are dropped, detections and truth within the border
/// margin are excluded, the rest matched class-sensitively at the
/// evaluation radius.
pub fn image_trial<R: Rng>(
    profile: &DetectorProfile,
    camera: &CameraModel,
    altitude: f64,
    threshold: f64,
    rng: &mut R,
) -> TrialCounts {
    let pose = Pose::new(0.0, 0.0, altitude, 0.0);
    let objects = place_trial_objects(camera, altitude, rng);
    let (raw, _) = detect_image(&objects, &pose, camera, profile, rng);
    let kept = confidence_threshold_filter(raw, threshold);
    let predicted: Vec<(GeoPoint, usize)> = kept
        .iter()
        .map(|d| {
            let (u, v) = d.bbox.center();
            (pose.pixel_to_utm(camera, u, v), d.class_label)
        })
        .filter(|(g, _)| pose.is_visible(camera, g, BORDER_MARGIN))
        .collect();
    let truth: Vec<(GeoPoint, usize)> = objects
        .into_iter()
        .filter(|(g, _)| pose.is_visible(camera, g, BORDER_MARGIN))
        .collect();
    let pairs = greedy_pairs(&predicted, &truth, EVAL_RADIUS);
    TrialCounts {
        true_positives: pairs.len(),
        false_positives: predicted.len() - pairs.len(),
        false_negatives: truth.len() - pairs.len(),
    }
}

/// Aggregate F1 over many single-image trials at one altitude.
pub fn image_f1(
    profile: &DetectorProfile,
    camera: &CameraModel,
    altitude: f64,
    threshold: f64,
    n_trials: usize,
    seed: u64,
) -> Option<f64> {
    let totals = (0..n_trials)
        .into_par_iter()
        .map(|t| {
            let mut r = rng::stream(seed, &[stage::TRIAL_IMAGE, altitude.to_bits(), t as u64]);
            image_trial(profile, camera, altitude, threshold, &mut r)
        })
        .reduce(TrialCounts::default, TrialCounts::add);
    totals.f1()
}

/// One fitted anchor from [`calibrate_p_tp`].
#[derive(Debug, Clone, Copy)]
pub struct CalibratedAnchor {
    pub altitude: f64,
    pub p_tp: f64,
    pub achieved_f1: f64,
}

/// Fits per-anchor detection rates so the thresholded image-level F1 at each
/// target altitude matches the requested value. Only `p_tp` moves; confidence
/// shapes, spurious-detection rates and localization noise stay as authored.
///
/// F1 is monotone in `p_tp` and the trial streams are fixed by `seed`, so
/// plain bisection converges. Fitted rates are clamped to be non-increasing
/// in altitude (a farther view never helps detection), which means a target
/// can come out short if it conflicts with a lower altitude's fit; the
/// achieved value is reported so the caller can see the gap.
pub fn calibrate_p_tp(
    profile: &mut DetectorProfile,
    camera: &CameraModel,
    targets: &[(f64, f64)],
    n_trials: usize,
    seed: u64,
) -> Result<Vec<CalibratedAnchor>> {
    let mut targets = targets.to_vec();
    targets.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut fitted = Vec::with_capacity(targets.len());
    let mut ceiling = 1.0f64;
    for &(altitude, want) in &targets {
        let idx = profile
            .anchors
            .iter()
            .position(|a| (a.altitude - altitude).abs() < 1e-9)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("no profile anchor at {altitude} m"))
            })?;
        let f1_at = |profile: &mut DetectorProfile, p: f64| {
            profile.anchors[idx].p_tp = p;
            image_f1(profile, camera, altitude, CALIBRATION_THRESHOLD, n_trials, seed)
                .unwrap_or(0.0)
        };
        let (mut lo, mut hi) = (0.0f64, ceiling);
        if f1_at(profile, hi) <= want {
            // Target unreachable under the ceiling; keep the ceiling.
        } else {
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if f1_at(profile, mid) < want {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let achieved = f1_at(profile, hi);
        fitted.push(CalibratedAnchor {
            altitude,
            p_tp: hi,
            achieved_f1: achieved,
        });
        ceiling = hi;
    }
    Ok(fitted)
}

// ---------------------------------------------------------------------------
// Experiment: certainty-measure separability.

/// Certainty measures, in reporting order.
pub const MEASURE_NAMES: [&str; 6] =
    ["yolo", "avg_yolo", "occurrence", "location", "class", "combined"];

fn measure_value(v: &CertaintyVector, index: usize) -> f64 {
    match index {
        0 => v.yolo,
        1 => v.avg_yolo,
        2 => v.occurrence,
        3 => v.location,
        4 => v.class_certainty,
        _ => v.combined,
    }
}

/// Welch's t between TP and FP values of one measure at one altitude.
#[derive(Debug, Clone, Serialize)]
pub struct SeparabilityRow {
    pub altitude: f64,
    pub measure: String,
    /// `None` when the statistic is degenerate (no FPs, or zero variance).
    pub t: Option<f64>,
    pub n_tp: usize,
    pub n_fp: usize,
}

fn separability_image<R: Rng>(
    profile: &DetectorProfile,
    camera: &CameraModel,
    altitude: f64,
    rng: &mut R,
) -> Vec<(CertaintyVector, bool)> {
    let pose = Pose::new(0.0, 0.0, altitude, 0.0);
    let objects = place_trial_objects(camera, altitude, rng);
    let out = synthetic_detect(&objects, &pose, camera, profile, rng);
    let located: Vec<(usize, GeoPoint, usize)> = out
        .reference
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let (u, v) = d.bbox.center();
            (i, pose.pixel_to_utm(camera, u, v), d.class_label)
        })
        .filter(|(_, g, _)| pose.is_visible(camera, g, BORDER_MARGIN))
        .collect();
    let truth: Vec<(GeoPoint, usize)> = objects
        .into_iter()
        .filter(|(g, _)| pose.is_visible(camera, g, BORDER_MARGIN))
        .collect();
    let predicted: Vec<(GeoPoint, usize)> = located.iter().map(|(_, g, c)| (*g, *c)).collect();
    let pairs = greedy_pairs(&predicted, &truth, EVAL_RADIUS);
    let mut is_tp = vec![false; located.len()];
    for (i, _) in pairs {
        is_tp[i] = true;
    }
    located
        .iter()
        .zip(is_tp)
        .map(|((ref_idx, _, _), tp)| {
            let set = build_detection_set(&out.reference[*ref_idx], &out.mc_runs);
            (certainty_measures(&set, profile.class_count), tp)
        })
        .collect()
}

/// Simulates `n_images` per altitude and reports, per measure, how well it
/// separates true from false detections.
pub fn experiment_certainty_separability(
    profile: &DetectorProfile,
    camera: &CameraModel,
    altitudes: &[f64],
    n_images: usize,
    seed: u64,
) -> Vec<SeparabilityRow> {
    let mut rows = Vec::new();
    for &altitude in altitudes {
        let all: Vec<(CertaintyVector, bool)> = (0..n_images)
            .into_par_iter()
            .map(|img| {
                let mut r =
                    rng::stream(seed, &[stage::TRIAL_IMAGE, altitude.to_bits(), img as u64]);
                separability_image(profile, camera, altitude, &mut r)
            })
            .flatten()
            .collect();
        for (mi, name) in MEASURE_NAMES.iter().enumerate() {
            let tp: Vec<f64> = all
                .iter()
                .filter(|(_, is)| *is)
                .map(|(v, _)| measure_value(v, mi))
                .collect();
            let fp: Vec<f64> = all
                .iter()
                .filter(|(_, is)| !*is)
                .map(|(v, _)| measure_value(v, mi))
                .collect();
            rows.push(SeparabilityRow {
                altitude,
                measure: name.to_string(),
                t: welch_t(&tp, &fp).ok(),
                n_tp: tp.len(),
                n_fp: fp.len(),
            });
        }
    }
    rows
}

// ---------------------------------------------------------------------------
// Experiment: parameter sweep.

/// One planner configuration of the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub h_cov: f64,
    pub c_accept: f64,
    pub c_reject: f64,
}

/// The swept parameter ranges; the default grid has 44 cells (one threshold
/// combination is excluded per altitude because its accept and reject bands
/// touch).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub altitudes: Vec<f64>,
    pub accept_thresholds: Vec<f64>,
    pub reject_thresholds: Vec<f64>,
    pub excluded: Vec<(f64, f64)>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            altitudes: vec![12.0, 24.0, 36.0, 48.0],
            accept_thresholds: vec![1.0, 0.8, 0.6, 0.4],
            reject_thresholds: vec![0.05, 0.2, 0.4],
            excluded: vec![(0.4, 0.4)],
        }
    }
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &h in &self.altitudes {
            for &ca in &self.accept_thresholds {
                for &cr in &self.reject_thresholds {
                    if self.excluded.iter().any(|(a, r)| *a == ca && *r == cr) {
                        continue;
                    }
                    cells.push(SweepCell {
                        h_cov: h,
                        c_accept: ca,
                        c_reject: cr,
                    });
                }
            }
        }
        cells
    }
}

/// One adaptive mission scored against its world and 12m reference flight.
#[derive(Debug, Clone, Serialize)]
pub struct MissionRecord {
    pub distribution: WorldDistribution,
    pub h_cov: f64,
    pub c_accept: f64,
    pub c_reject: f64,
    pub level: String,
    pub seed: u64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub f1: Option<f64>,
    pub length: f64,
    pub baseline_length: f64,
    pub baseline_f1: Option<f64>,
    pub r_diff: f64,
}

/// Sweep setup; `params_base` supplies everything the grid does not vary.
#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub grid: SweepGrid,
    pub distributions: Vec<WorldDistribution>,
    pub object_count: usize,
    pub seeds: Vec<u64>,
    pub level: LocalizationErrorLevel,
    pub params_base: PlannerParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            grid: SweepGrid::default(),
            distributions: vec![WorldDistribution::Clustered, WorldDistribution::Uniform],
            object_count: 60,
            seeds: (0..10).collect(),
            level: LocalizationErrorLevel::perfect(),
            params_base: PlannerParams::default(),
        }
    }
}

struct WorldEntry {
    distribution: WorldDistribution,
    seed: u64,
    world: Vec<WorldObject>,
    baseline_length: f64,
    baseline_f1: Option<f64>,
}

#[allow(clippy::too_many_arguments)]
fn prepare_worlds(
    cfg_distributions: &[WorldDistribution],
    seeds: &[u64],
    object_count: usize,
    params_base: &PlannerParams,
    level: &LocalizationErrorLevel,
    field: &FieldPolygon,
    camera: &CameraModel,
    profile: &DetectorProfile,
) -> Result<Vec<WorldEntry>> {
    let jobs: Vec<(WorldDistribution, u64)> = cfg_distributions
        .iter()
        .flat_map(|d| seeds.iter().map(move |s| (*d, *s)))
        .collect();
    jobs.into_par_iter()
        .map(|(distribution, seed)| {
            let world = generate_world(distribution, field, object_count, seed)?;
            let mut bparams = *params_base;
            bparams.h_cov = BASELINE_ALTITUDE;
            let baseline = run_baseline(field, &world, &bparams, camera, profile, level, seed)?;
            let (_, baseline_f1) = evaluate_mission(&baseline, &world, params_base.c_eval);
            Ok(WorldEntry {
                distribution,
                seed,
                world,
                baseline_length: baseline.total_length,
                baseline_f1,
            })
        })
        .collect()
}

/// Runs the full parameter sweep: every grid cell on every world, each
/// scored against the same world's 12m reference flight.
pub fn experiment_sweep(
    cfg: &SweepConfig,
    field: &FieldPolygon,
    camera: &CameraModel,
    profile: &DetectorProfile,
) -> Result<Vec<MissionRecord>> {
    let worlds = prepare_worlds(
        &cfg.distributions,
        &cfg.seeds,
        cfg.object_count,
        &cfg.params_base,
        &cfg.level,
        field,
        camera,
        profile,
    )?;
    let cells = cfg.grid.cells();
    let jobs: Vec<(usize, SweepCell)> = (0..worlds.len())
        .flat_map(|wi| cells.iter().map(move |c| (wi, *c)))
        .collect();
    let mut records: Vec<MissionRecord> = jobs
        .into_par_iter()
        .map(|(wi, cell)| {
            let entry = &worlds[wi];
            let mut params = cfg.params_base;
            params.h_cov = cell.h_cov;
            params.c_accept = cell.c_accept;
            params.c_reject = cell.c_reject;
            let result = run_mission(
                field,
                &entry.world,
                &params,
                camera,
                profile,
                &cfg.level,
                entry.seed,
            )?;
            let (m, score) = evaluate_mission(&result, &entry.world, cfg.params_base.c_eval);
            let r_diff = relative_length(result.total_length, entry.baseline_length)?;
            Ok(MissionRecord {
                distribution: entry.distribution,
                h_cov: cell.h_cov,
                c_accept: cell.c_accept,
                c_reject: cell.c_reject,
                level: cfg.level.name.clone(),
                seed: entry.seed,
                true_positives: m.true_positives,
                false_positives: m.false_positives,
                false_negatives: m.false_negatives,
                f1: score,
                length: result.total_length,
                baseline_length: entry.baseline_length,
                baseline_f1: entry.baseline_f1,
                r_diff,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| {
        (a.distribution.index(), a.seed)
            .cmp(&(b.distribution.index(), b.seed))
            .then(a.h_cov.total_cmp(&b.h_cov))
            .then(a.c_accept.total_cmp(&b.c_accept))
            .then(a.c_reject.total_cmp(&b.c_reject))
    });
    Ok(records)
}

/// Per-cell aggregate of sweep records.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub distribution: WorldDistribution,
    pub h_cov: f64,
    pub c_accept: f64,
    pub c_reject: f64,
    pub runs: usize,
    pub mean_f1: Option<f64>,
    pub std_f1: Option<f64>,
    pub mean_baseline_f1: Option<f64>,
    pub mean_r_diff: f64,
    pub std_r_diff: f64,
}

/// Groups sweep records by (distribution, cell) and aggregates them.
/// Degenerate F1 rows are excluded from the F1 means.
pub fn summarize_sweep(records: &[MissionRecord]) -> Vec<CellSummary> {
    let mut keys: Vec<(u64, u64, u64, u64)> = records
        .iter()
        .map(|r| {
            (
                r.distribution.index(),
                r.h_cov.to_bits(),
                r.c_accept.to_bits(),
                r.c_reject.to_bits(),
            )
        })
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|key| {
            let group: Vec<&MissionRecord> = records
                .iter()
                .filter(|r| {
                    (
                        r.distribution.index(),
                        r.h_cov.to_bits(),
                        r.c_accept.to_bits(),
                        r.c_reject.to_bits(),
                    ) == *key
                })
                .collect();
            let f1s: Vec<f64> = group.iter().filter_map(|r| r.f1).collect();
            let base_f1s: Vec<f64> = group.iter().filter_map(|r| r.baseline_f1).collect();
            let rs: Vec<f64> = group.iter().map(|r| r.r_diff).collect();
            let (mean_r, std_r) = mean_std(&rs);
            let (mean_f1, std_f1) = mean_std(&f1s);
            let first = group[0];
            CellSummary {
                distribution: first.distribution,
                h_cov: first.h_cov,
                c_accept: first.c_accept,
                c_reject: first.c_reject,
                runs: group.len(),
                mean_f1: (!f1s.is_empty()).then_some(mean_f1),
                std_f1: (!f1s.is_empty()).then_some(std_f1),
                mean_baseline_f1: (!base_f1s.is_empty())
                    .then(|| base_f1s.iter().sum::<f64>() / base_f1s.len() as f64),
                mean_r_diff: mean_r,
                std_r_diff: std_r,
            }
        })
        .collect()
}

/// Detection-quality budget for [`best_cell`]: cells whose mean F1 sits more
/// than this far below the low-altitude baseline are not worth flying no
/// matter how short their path.
pub const BEST_CELL_MAX_F1_DROP: f64 = 0.05;

/// Picks the sweep cell with the shortest mean relative path among those
/// whose mean F1 stays within `max_f1_drop` of the per-world baseline. If no
/// cell qualifies, falls back to the highest mean F1. Ties go to the cell
/// appearing first in the summary order.
pub fn best_cell(
    summaries: &[CellSummary],
    distribution: WorldDistribution,
    max_f1_drop: f64,
) -> Option<CellSummary> {
    let cells: Vec<&CellSummary> = summaries
        .iter()
        .filter(|s| s.distribution == distribution && s.mean_f1.is_some())
        .collect();
    let qualifying = cells.iter().filter(|s| {
        match (s.mean_baseline_f1, s.mean_f1) {
            (Some(base), Some(f1v)) => base - f1v <= max_f1_drop,
            _ => false,
        }
    });
    let mut best: Option<&CellSummary> = None;
    for s in qualifying {
        match best {
            Some(b) if s.mean_r_diff >= b.mean_r_diff => {}
            _ => best = Some(s),
        }
    }
    if best.is_none() {
        for s in &cells {
            match best {
                Some(b) if s.mean_f1 <= b.mean_f1 => {}
                _ => best = Some(s),
            }
        }
    }
    best.cloned()
}

// ---------------------------------------------------------------------------
// Experiment: localization robustness.

/// Which planner produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Adaptive,
    Coverage,
}

impl PlannerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlannerKind::Adaptive => "adaptive",
            PlannerKind::Coverage => "coverage",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalizationRecord {
    pub planner: PlannerKind,
    pub distribution: WorldDistribution,
    /// Position of the level in the configured order, 0 = best.
    pub level_rank: usize,
    pub level: String,
    pub h_cov: f64,
    pub seed: u64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub f1: Option<f64>,
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct LocalizationConfig {
    pub levels: Vec<LocalizationErrorLevel>,
    pub altitudes: Vec<f64>,
    pub distributions: Vec<WorldDistribution>,
    pub object_count: usize,
    pub seeds: Vec<u64>,
    pub params_base: PlannerParams,
}

impl Default for LocalizationConfig {
    fn default() -> Self {
        LocalizationConfig {
            levels: LocalizationErrorLevel::standard_levels(),
            altitudes: vec![12.0, 24.0, 36.0, 48.0],
            distributions: vec![WorldDistribution::Clustered, WorldDistribution::Uniform],
            object_count: 60,
            seeds: (0..10).collect(),
            params_base: PlannerParams {
                c_reject: 0.05,
                ..PlannerParams::default()
            },
        }
    }
}

/// Compares the adaptive planner against plain coverage at every altitude
/// under each localization error level. Worlds and detector draws are shared
/// across levels (common random numbers), so level effects are paired.
pub fn experiment_localization(
    cfg: &LocalizationConfig,
    field: &FieldPolygon,
    camera: &CameraModel,
    profile: &DetectorProfile,
) -> Result<Vec<LocalizationRecord>> {
    let worlds: Result<Vec<(WorldDistribution, u64, Vec<WorldObject>)>> = cfg
        .distributions
        .iter()
        .flat_map(|d| cfg.seeds.iter().map(move |s| (*d, *s)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(d, s)| Ok((d, s, generate_world(d, field, cfg.object_count, s)?)))
        .collect();
    let worlds = worlds?;

    let mut jobs: Vec<(usize, usize, f64, PlannerKind)> = Vec::new();
    for wi in 0..worlds.len() {
        for (li, _) in cfg.levels.iter().enumerate() {
            for &alt in &cfg.altitudes {
                jobs.push((wi, li, alt, PlannerKind::Adaptive));
                jobs.push((wi, li, alt, PlannerKind::Coverage));
            }
        }
    }
    let mut records: Vec<LocalizationRecord> = jobs
        .into_par_iter()
        .map(|(wi, li, altitude, planner)| {
            let (distribution, seed, world) = &worlds[wi];
            let level = &cfg.levels[li];
            let mut params = cfg.params_base;
            params.h_cov = altitude;
            let result = match planner {
                PlannerKind::Adaptive => {
                    run_mission(field, world, &params, camera, profile, level, *seed)?
                }
                PlannerKind::Coverage => {
                    run_baseline(field, world, &params, camera, profile, level, *seed)?
                }
            };
            let (m, score) = evaluate_mission(&result, world, cfg.params_base.c_eval);
            Ok(LocalizationRecord {
                planner,
                distribution: *distribution,
                level_rank: li,
                level: level.name.clone(),
                h_cov: altitude,
                seed: *seed,
                true_positives: m.true_positives,
                false_positives: m.false_positives,
                false_negatives: m.false_negatives,
                f1: score,
                length: result.total_length,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| {
        (a.distribution.index(), a.level_rank, a.planner.as_str(), a.seed)
            .cmp(&(b.distribution.index(), b.level_rank, b.planner.as_str(), b.seed))
            .then(a.h_cov.total_cmp(&b.h_cov))
    });
    Ok(records)
}

// ---------------------------------------------------------------------------
// Experiment: object density.

#[derive(Debug, Clone, Serialize)]
pub struct DensityRecord {
    pub distribution: WorldDistribution,
    pub count: usize,
    pub density_per_ha: f64,
    pub seed: u64,
    pub f1: Option<f64>,
    pub length: f64,
    pub baseline_length: f64,
    pub r_diff: f64,
}

#[derive(Debug, Clone)]
pub struct DensityConfig {
    pub counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub level: LocalizationErrorLevel,
    /// Planner parameters per distribution; the sweep's preferred cells.
    pub params_uniform: PlannerParams,
    pub params_clustered: PlannerParams,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            counts: (0..=200).step_by(20).collect(),
            seeds: (0..10).collect(),
            level: LocalizationErrorLevel::perfect(),
            params_uniform: default_density_params(WorldDistribution::Uniform),
            params_clustered: default_density_params(WorldDistribution::Clustered),
        }
    }
}

/// The sweep-preferred planner configuration per distribution, used as
/// defaults by the density experiment.
pub fn default_density_params(distribution: WorldDistribution) -> PlannerParams {
    match distribution {
        WorldDistribution::Uniform => PlannerParams {
            h_cov: 24.0,
            c_accept: 0.6,
            c_reject: 0.05,
            ..PlannerParams::default()
        },
        WorldDistribution::Clustered => PlannerParams {
            h_cov: 48.0,
            c_accept: 0.6,
            c_reject: 0.05,
            ..PlannerParams::default()
        },
    }
}

/// Sweeps the number of objects and reports adaptive path length relative to
/// the 12m reference flight.
pub fn experiment_density(
    cfg: &DensityConfig,
    field: &FieldPolygon,
    camera: &CameraModel,
    profile: &DetectorProfile,
) -> Result<Vec<DensityRecord>> {
    let hectares = field.area() / 10_000.0;
    let jobs: Vec<(WorldDistribution, usize, u64)> =
        [WorldDistribution::Clustered, WorldDistribution::Uniform]
            .iter()
            .flat_map(|d| {
                cfg.counts
                    .iter()
                    .flat_map(move |c| cfg.seeds.iter().map(move |s| (*d, *c, *s)))
            })
            .collect();
    let mut records: Vec<DensityRecord> = jobs
        .into_par_iter()
        .map(|(distribution, count, seed)| {
            let params = match distribution {
                WorldDistribution::Uniform => cfg.params_uniform,
                WorldDistribution::Clustered => cfg.params_clustered,
            };
            let world = generate_world(distribution, field, count, seed)?;
            let baseline_length =
                plan_coverage(field, camera, BASELINE_ALTITUDE, params.overlap_fraction)?.length();
            let result =
                run_mission(field, &world, &params, camera, profile, &cfg.level, seed)?;
            let (_, score) = evaluate_mission(&result, &world, params.c_eval);
            Ok(DensityRecord {
                distribution,
                count,
                density_per_ha: count as f64 / hectares,
                seed,
                f1: score,
                length: result.total_length,
                baseline_length,
                r_diff: relative_length(result.total_length, baseline_length)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| {
        (a.distribution.index(), a.count, a.seed).cmp(&(b.distribution.index(), b.count, b.seed))
    });
    Ok(records)
}

/// Linear-interpolated density at which a relative-length curve first
/// crosses 1.0. Points must be sorted by density.
pub fn crossover_density(points: &[(f64, f64)]) -> Option<f64> {
    for w in points.windows(2) {
        let (d0, r0) = w[0];
        let (d1, r1) = w[1];
        if r0 <= 1.0 && r1 > 1.0 {
            return Some(d0 + (1.0 - r0) / (r1 - r0) * (d1 - d0));
        }
    }
    None
}

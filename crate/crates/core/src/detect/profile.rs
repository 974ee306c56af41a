//! Synthetic detector: a calibrated stochastic stand-in for the onboard
//! network.
//!
//! The real detector's behaviour over view altitude is summarized by a small
//! table of anchor parameters (detection probability, false-positive rate,
//! confidence distributions, localization noise, class-score margin).
//! Between anchors the parameters are interpolated linearly; beyond the last
//! anchor they stay at the last anchor's values, which is why profiles ship
//! an explicit high-altitude anchor encoding the continued quality drop.
//!
//! The shipped default profile (`default_profile.toml`) was fitted with the
//! `calibrate` tool so that single-image F1 at the evaluation threshold
//! reproduces the reference detector's measured quality per altitude.

use crate::detect::{BBox, Detection};
use crate::geo::{CameraModel, GeoPoint, Pose};
use crate::{Error, Result};
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

/// Detector behaviour at one view altitude.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProfileAnchor {
    /// View altitude this row describes, meters above ground.
    pub altitude: f64,
    /// Probability that a visible object yields a detection.
    pub p_tp: f64,
    /// Mean count of spurious detections per image (Poisson).
    pub fp_rate: f64,
    /// Beta parameters of true-detection confidences.
    pub tp_conf_alpha: f64,
    pub tp_conf_beta: f64,
    /// Beta parameters of spurious-detection confidences.
    pub fp_conf_alpha: f64,
    pub fp_conf_beta: f64,
    /// Std-dev of box-center localization error, meters on the ground.
    pub sigma_ground: f64,
    /// Mean activation margin of the true class over the other classes.
    pub class_gap: f64,
}

/// How the Monte-Carlo (dropout) passes perturb the reference detections.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct McEmulation {
    /// Number of noisy passes per image.
    pub n_runs: usize,
    /// Per-pass survival probability of a true detection.
    pub keep_tp: f64,
    /// Per-pass survival probability of a spurious detection.
    pub keep_fp: f64,
    /// Center/size jitter as a fraction of box size, true detections.
    pub bbox_jitter_tp: f64,
    /// Same for spurious detections (larger: their sets scatter).
    pub bbox_jitter_fp: f64,
    /// Std-dev of per-pass confidence jitter.
    pub conf_sigma: f64,
    /// Std-dev of per-pass class-activation jitter.
    pub act_sigma: f64,
}

impl Default for McEmulation {
    fn default() -> Self {
        McEmulation {
            n_runs: 20,
            keep_tp: 0.95,
            keep_fp: 0.5,
            bbox_jitter_tp: 0.06,
            bbox_jitter_fp: 0.18,
            conf_sigma: 0.05,
            act_sigma: 0.4,
        }
    }
}

/// Full synthetic-detector description, loadable from TOML.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorProfile {
    pub name: String,
    /// Number of object classes the detector distinguishes.
    pub class_count: usize,
    /// Ground-truth object footprint (box side), meters on the ground.
    pub object_size_m: f64,
    /// Relative size noise of emitted boxes (lognormal sigma).
    pub bbox_size_jitter: f64,
    /// Std-dev of class-activation noise at detection time.
    pub class_act_sigma: f64,
    #[serde(default)]
    pub mc: McEmulation,
    /// Anchor rows, strictly increasing altitude.
    pub anchors: Vec<ProfileAnchor>,
}

impl DetectorProfile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let profile: DetectorProfile =
            toml::from_str(s).map_err(|e| Error::Config(format!("detector profile: {e}")))?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The profile shipped with the library, fitted with the calibrate tool.
    pub fn default_calibrated() -> Self {
        Self::from_toml_str(include_str!("default_profile.toml"))
            .expect("shipped profile must parse")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("profile serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return Err(Error::invalid("profile needs at least one class"));
        }
        if self.anchors.is_empty() {
            return Err(Error::invalid("profile needs at least one anchor"));
        }
        // Negated so NaN fails too.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.object_size_m > 0.0) {
            return Err(Error::invalid("object_size_m must be positive"));
        }
        for w in self.anchors.windows(2) {
            if w[1].altitude <= w[0].altitude {
                return Err(Error::invalid("anchor altitudes must strictly increase"));
            }
        }
        for a in &self.anchors {
            if !(0.0..=1.0).contains(&a.p_tp)
                || a.fp_rate < 0.0
                || a.tp_conf_alpha <= 0.0
                || a.tp_conf_beta <= 0.0
                || a.fp_conf_alpha <= 0.0
                || a.fp_conf_beta <= 0.0
                || a.sigma_ground < 0.0
            {
                return Err(Error::invalid(format!(
                    "anchor at {}m has out-of-range parameters",
                    a.altitude
                )));
            }
        }
        if self.mc.n_runs == 0 {
            return Err(Error::invalid("mc.n_runs must be at least 1"));
        }
        Ok(())
    }

    /// Altitude range covered by the anchors; outside it parameters are
    /// clamped and outputs carry an extrapolation flag.
    pub fn calibrated_range(&self) -> (f64, f64) {
        (
            self.anchors.first().unwrap().altitude,
            self.anchors.last().unwrap().altitude,
        )
    }

    /// Piecewise-linear interpolation between anchors, clamped at the ends.
    pub fn params_at(&self, altitude: f64) -> ProfileAnchor {
        let anchors = &self.anchors;
        if altitude <= anchors[0].altitude {
            let mut a = anchors[0];
            a.altitude = altitude;
            return a;
        }
        if altitude >= anchors[anchors.len() - 1].altitude {
            let mut a = anchors[anchors.len() - 1];
            a.altitude = altitude;
            return a;
        }
        let hi = anchors.partition_point(|a| a.altitude < altitude);
        let (a, b) = (&anchors[hi - 1], &anchors[hi]);
        let t = (altitude - a.altitude) / (b.altitude - a.altitude);
        let lerp = |x: f64, y: f64| x + t * (y - x);
        ProfileAnchor {
            altitude,
            p_tp: lerp(a.p_tp, b.p_tp),
            fp_rate: lerp(a.fp_rate, b.fp_rate),
            tp_conf_alpha: lerp(a.tp_conf_alpha, b.tp_conf_alpha),
            tp_conf_beta: lerp(a.tp_conf_beta, b.tp_conf_beta),
            fp_conf_alpha: lerp(a.fp_conf_alpha, b.fp_conf_alpha),
            fp_conf_beta: lerp(a.fp_conf_beta, b.fp_conf_beta),
            sigma_ground: lerp(a.sigma_ground, b.sigma_ground),
            class_gap: lerp(a.class_gap, b.class_gap),
        }
    }
}

/// Everything one simulated image produces.
#[derive(Debug, Clone)]
pub struct DetectorOutput {
    /// The standard-pass detections.
    pub reference: Vec<Detection>,
    /// Noisy-pass detections, one list per pass.
    pub mc_runs: Vec<Vec<Detection>>,
    /// True when the view altitude fell outside the calibrated range.
    pub extrapolated: bool,
}

/// Runs the synthetic detector on one image: reference pass plus the
/// Monte-Carlo passes used for certainty estimation.
///
/// `objects_in_view` are the true objects inside the camera footprint, given
/// as (ground position, class index). The pose is the one the image was
/// actually taken from; all pixel coordinates are in its frame.
pub fn synthetic_detect<R: Rng>(
    objects_in_view: &[(GeoPoint, usize)],
    pose: &Pose,
    camera: &CameraModel,
    profile: &DetectorProfile,
    rng: &mut R,
) -> DetectorOutput {
    let (reference, is_tp, extrapolated) =
        detect_labeled(objects_in_view, pose, camera, profile, rng);
    let mc_runs = emulate_mc_runs(&reference, &is_tp, profile, rng);
    DetectorOutput {
        reference,
        mc_runs,
        extrapolated,
    }
}

/// Reference pass only; the cheap path for mission simulation, where the
/// certainty measure in use is the plain confidence.
pub fn detect_image<R: Rng>(
    objects_in_view: &[(GeoPoint, usize)],
    pose: &Pose,
    camera: &CameraModel,
    profile: &DetectorProfile,
    rng: &mut R,
) -> (Vec<Detection>, bool) {
    let (reference, _, extrapolated) = detect_labeled(objects_in_view, pose, camera, profile, rng);
    (reference, extrapolated)
}

/// Latent detection difficulty of an object, hashed from its ground position.
///
/// A real detector is a deterministic function of image content: the same
/// object photographed twice from the same altitude is found twice or missed
/// twice, and an object found at high altitude (few pixels) does not vanish
/// when photographed closer. An independent coin flip per image would break
/// both properties, so each object carries a fixed uniform draw u and is
/// detected at altitude h iff u < p_tp(h). With p_tp non-increasing in
/// altitude the detection sets nest across altitudes.
fn detectability(loc: &GeoPoint) -> f64 {
    let mut state = loc.easting.to_bits() ^ 0xa076_1d64_78bd_642f;
    let a = crate::rng::splitmix64(&mut state);
    state ^= loc.northing.to_bits().wrapping_mul(0xe703_7ed1_a0b4_28db);
    let b = crate::rng::splitmix64(&mut state);
    // 53 high bits of the mix, mapped to [0, 1)
    ((a ^ b) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn detect_labeled<R: Rng>(
    objects_in_view: &[(GeoPoint, usize)],
    pose: &Pose,
    camera: &CameraModel,
    profile: &DetectorProfile,
    rng: &mut R,
) -> (Vec<Detection>, Vec<bool>, bool) {
    let p = profile.params_at(pose.altitude);
    let (lo, hi) = profile.calibrated_range();
    let extrapolated = pose.altitude < lo || pose.altitude > hi;
    let res = camera.ground_resolution(pose.altitude);
    let sigma_px = p.sigma_ground / res;
    let size_px = profile.object_size_m / res;
    let (iw, ih) = (camera.image_width_px as f64, camera.image_height_px as f64);

    let mut detections = Vec::new();
    let mut is_tp = Vec::new();

    for &(loc, class) in objects_in_view {
        if detectability(&loc) >= p.p_tp {
            continue;
        }
        let (u0, v0) = pose.utm_to_pixel(camera, &loc);
        let u = clamp(u0 + gauss(rng, sigma_px), 0.0, iw);
        let v = clamp(v0 + gauss(rng, sigma_px), 0.0, ih);
        let size = size_px * gauss(rng, profile.bbox_size_jitter).exp();
        let confidence = sample_beta(rng, p.tp_conf_alpha, p.tp_conf_beta);
        let scores =
            class_activations(rng, profile.class_count, Some(class), p.class_gap, profile.class_act_sigma);
        detections.push(mk_detection(u, v, size, confidence, scores));
        is_tp.push(true);
    }

    let n_fp = if p.fp_rate > 0.0 {
        Poisson::new(p.fp_rate).unwrap().sample(rng) as usize
    } else {
        0
    };
    for _ in 0..n_fp {
        let u = rng.gen_range(0.0..iw);
        let v = rng.gen_range(0.0..ih);
        let size = size_px * gauss(rng, profile.bbox_size_jitter).exp();
        let confidence = sample_beta(rng, p.fp_conf_alpha, p.fp_conf_beta);
        let scores = class_activations(rng, profile.class_count, None, p.class_gap, profile.class_act_sigma);
        detections.push(mk_detection(u, v, size, confidence, scores));
        is_tp.push(false);
    }

    (detections, is_tp, extrapolated)
}

fn emulate_mc_runs<R: Rng>(
    reference: &[Detection],
    is_tp: &[bool],
    profile: &DetectorProfile,
    rng: &mut R,
) -> Vec<Vec<Detection>> {
    let mc = &profile.mc;
    let mut runs = Vec::with_capacity(mc.n_runs);
    for _ in 0..mc.n_runs {
        let mut run = Vec::new();
        for (d, &tp) in reference.iter().zip(is_tp) {
            let (keep, jitter) = if tp {
                (mc.keep_tp, mc.bbox_jitter_tp)
            } else {
                (mc.keep_fp, mc.bbox_jitter_fp)
            };
            if !rng.gen_bool(keep) {
                continue;
            }
            let (u, v) = d.bbox.center();
            let size = d.bbox.u_max - d.bbox.u_min;
            let ju = gauss(rng, jitter * size);
            let jv = gauss(rng, jitter * size);
            let jsize = size * gauss(rng, jitter).exp();
            let confidence = clamp(d.confidence + gauss(rng, mc.conf_sigma), 0.0, 1.0);
            let scores: Vec<f64> = d
                .class_scores
                .iter()
                .map(|s| s + gauss(rng, mc.act_sigma))
                .collect();
            run.push(mk_detection(u + ju, v + jv, jsize, confidence, scores));
        }
        runs.push(run);
    }
    runs
}

fn mk_detection(u: f64, v: f64, size: f64, confidence: f64, scores: Vec<f64>) -> Detection {
    let class_label = scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    Detection {
        bbox: BBox::centered(u, v, size.max(1.0)),
        confidence,
        class_scores: scores,
        class_label,
    }
}

/// True class gets mean +gap/2, the rest -gap/2; `None` (spurious detections)
/// gives every class mean 0, so their labels are arbitrary and unstable.
fn class_activations<R: Rng>(
    rng: &mut R,
    class_count: usize,
    true_class: Option<usize>,
    gap: f64,
    sigma: f64,
) -> Vec<f64> {
    (0..class_count)
        .map(|k| {
            let mean = match true_class {
                Some(c) if k == c => gap / 2.0,
                Some(_) => -gap / 2.0,
                None => 0.0,
            };
            mean + gauss(rng, sigma)
        })
        .collect()
}

fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).unwrap().sample(rng)
}

fn sample_beta<R: Rng>(rng: &mut R, alpha: f64, beta: f64) -> f64 {
    Beta::new(alpha, beta).unwrap().sample(rng)
}

fn clamp(x: f64, lo: f64, hi: f64) -> f64 {
    x.max(lo).min(hi)
}

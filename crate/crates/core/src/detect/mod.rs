//! Detections, Monte-Carlo detection sets and certainty measures.
//!
//! A detection is one bounding box with a confidence and raw per-class
//! activation scores. To quantify how trustworthy a detection is, the
//! detector is (conceptually) run N times with dropout enabled; detections
//! from those noisy passes that overlap a reference detection form its
//! *detection set*, from which five certainty measures are computed. The
//! synthetic stand-in for the real network lives in [`profile`].

pub mod profile;

pub use profile::{
    detect_image, synthetic_detect, DetectorOutput, DetectorProfile, McEmulation, ProfileAnchor,
};

use serde::{Deserialize, Serialize};

/// Axis-aligned bounding box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox {
    /// Square box of side `size` centered on (u, v).
    pub fn centered(u: f64, v: f64, size: f64) -> Self {
        BBox {
            u_min: u - size / 2.0,
            v_min: v - size / 2.0,
            u_max: u + size / 2.0,
            v_max: v + size / 2.0,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.u_min + self.u_max) / 2.0, (self.v_min + self.v_max) / 2.0)
    }

    pub fn area(&self) -> f64 {
        (self.u_max - self.u_min).max(0.0) * (self.v_max - self.v_min).max(0.0)
    }
}

/// Intersection over union of two boxes; 0 when disjoint.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.u_max.min(b.u_max) - a.u_min.max(b.u_min)).max(0.0);
    let ih = (a.v_max.min(b.v_max) - a.v_min.max(b.v_min)).max(0.0);
    let inter = iw * ih;
    if inter == 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// One detector output: box, confidence, raw class activations, arg-max label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub confidence: f64,
    /// Raw activation per class; probabilities are softmax(class_scores).
    pub class_scores: Vec<f64>,
    pub class_label: usize,
}

/// A reference detection plus the overlapping detections from N noisy passes.
#[derive(Debug, Clone)]
pub struct DetectionSet {
    pub reference: Detection,
    pub members: Vec<Detection>,
    pub n_runs: usize,
}

/// Membership IoU threshold: an MC detection belongs to a reference
/// detection's set when their boxes overlap by more than this.
pub const SET_IOU_THRESHOLD: f64 = 0.5;

/// Associates each noisy pass with the reference detection.
///
/// Per pass, the detection with the highest IoU joins the set iff that IoU
/// exceeds [`SET_IOU_THRESHOLD`]; class labels are ignored entirely, so a
/// mislabeled pass still supports the same physical object.
pub fn build_detection_set(reference: &Detection, mc_runs: &[Vec<Detection>]) -> DetectionSet {
    let mut members = Vec::new();
    for run in mc_runs {
        let best = run
            .iter()
            .map(|d| (iou(&reference.bbox, &d.bbox), d))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if let Some((overlap, det)) = best {
            if overlap > SET_IOU_THRESHOLD {
                members.push(det.clone());
            }
        }
    }
    DetectionSet {
        reference: reference.clone(),
        members,
        n_runs: mc_runs.len(),
    }
}

/// The certainty measures of one detection set.
///
/// `yolo` is the plain network confidence of the reference detection; the
/// other four are Monte-Carlo measures; `combined` is their product per the
/// occurrence/location/class decomposition.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertaintyVector {
    pub yolo: f64,
    pub avg_yolo: f64,
    pub occurrence: f64,
    pub location: f64,
    pub class_certainty: f64,
    pub combined: f64,
}

/// Computes all certainty measures for a detection set.
///
/// Empty sets yield 0.0 for the averaged measures. The class certainty
/// follows the published formulation literally: per-class entropies are
/// summed over set members (not averaged), normalized with a softmax, and
/// the largest normalized value is returned. With that reading higher
/// entropy receives more softmax mass; see the module tests pinning the
/// resulting values.
pub fn certainty_measures(set: &DetectionSet, class_count: usize) -> CertaintyVector {
    assert!(class_count >= 1, "need at least one class");
    let n = set.members.len();
    let (avg_yolo, location) = if n == 0 {
        (0.0, 0.0)
    } else {
        let conf: f64 = set.members.iter().map(|m| m.confidence).sum();
        let loc: f64 = set
            .members
            .iter()
            .map(|m| iou(&set.reference.bbox, &m.bbox))
            .sum();
        (conf / n as f64, loc / n as f64)
    };
    let occurrence = if set.n_runs == 0 {
        0.0
    } else {
        n as f64 / set.n_runs as f64
    };

    // Per-class entropy accumulated over members, then softmax across classes.
    let mut entropy = vec![0.0f64; class_count];
    for m in &set.members {
        let probs = softmax(&m.class_scores[..class_count.min(m.class_scores.len())]);
        for (k, p) in probs.iter().enumerate() {
            if *p > 0.0 {
                entropy[k] -= p * p.ln();
            }
        }
    }
    let class_certainty = softmax(&entropy)
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);

    let combined = occurrence * location * class_certainty;
    CertaintyVector {
        yolo: set.reference.confidence,
        avg_yolo,
        occurrence,
        location,
        class_certainty,
        combined,
    }
}

/// Numerically-stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Drops detections below the detector's minimum confidence. The boundary
/// value is kept: a detection at exactly `c_reject` survives.
pub fn confidence_threshold_filter(detections: Vec<Detection>, c_reject: f64) -> Vec<Detection> {
    detections
        .into_iter()
        .filter(|d| d.confidence >= c_reject)
        .collect()
}

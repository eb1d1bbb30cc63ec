use serde::{Deserialize, Serialize};

use super::{Classifier, LearnError};
use crate::percept::{cut_patch, extract_features, Frame, PixelRect};
use crate::world::SignClass;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: PixelRect,
    pub class: SignClass,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub stride: usize,
    pub scales: Vec<usize>,
    pub min_score: f64,
    pub iou_threshold: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            stride: 4,
            scales: vec![16, 24, 32],
            min_score: 0.3,
            iou_threshold: 0.5,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self, width: usize, height: usize) -> Result<(), LearnError> {
        let bad = |m: String| Err(LearnError::BadConfig(m));
        if self.stride == 0 {
            return bad("stride must be >= 1".into());
        }
        if self.scales.is_empty() {
            return bad("scales must not be empty".into());
        }
        if let Some(s) = self.scales.iter().find(|&&s| s < 8 || s > width.min(height)) {
            return bad(format!("window {s} must lie in [8, {}]", width.min(height)));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return bad("iou_threshold must lie in (0, 1]".into());
        }
        if !self.min_score.is_finite() {
            return bad("min_score must be finite".into());
        }
        Ok(())
    }
}

/// Greedy class-agnostic suppression. Candidates are taken by descending
/// score, ties broken by smaller x then y.
pub fn nms(detections: &[Detection], iou_threshold: f64) -> Vec<Detection> {
    let mut sorted = detections.to_vec();
    sorted.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.bbox.x.cmp(&b.bbox.x))
            .then(a.bbox.y.cmp(&b.bbox.y))
    });
    let mut kept: Vec<Detection> = Vec::new();
    for d in sorted {
        if kept.iter().all(|k| k.bbox.iou(&d.bbox) <= iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Slides square windows over the frame, classifies each, keeps those
/// scoring at least `min_score`, and suppresses overlaps.
pub fn detect(frame: &Frame, model: &Classifier, config: &DetectorConfig) -> Result<Vec<Detection>, LearnError> {
    config.validate(frame.width, frame.height)?;
    let mut scales = config.scales.clone();
    scales.sort_unstable();
    scales.dedup();
    let mut candidates = Vec::new();
    for s in scales {
        for x in (0..=frame.width - s).step_by(config.stride) {
            for y in (0..=frame.height - s).step_by(config.stride) {
                let bbox = PixelRect::new(x, y, s, s);
                let patch = cut_patch(frame, bbox).expect("window inside frame");
                let (class, score) = model.predict(&extract_features(&patch));
                if score >= config.min_score {
                    candidates.push(Detection { bbox, class, score });
                }
            }
        }
    }
    Ok(nms(&candidates, config.iou_threshold))
}

/// `/vision/detections` payload.
pub fn detections_payload(detections: &[Detection], sim_time: f64) -> serde_json::Value {
    serde_json::json!({"detections": detections, "sim_time": sim_time})
}

//! JSONL traces: one [`TraceRecord`] per step.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::learn::Detection;
use crate::twin::GroundSample;
use crate::world::Rgb;
use crate::Vec2d;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundRecord {
    pub rgb: Rgb,
    /// `None` when the rangefinder sees nothing.
    pub distance: Option<f64>,
    pub light: f64,
}

impl From<GroundSample> for GroundRecord {
    fn from(g: GroundSample) -> Self {
        GroundRecord {
            rgb: g.rgb,
            distance: g.distance.is_finite().then_some(g.distance),
            light: g.light,
        }
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub t: f64,
    /// True pose `[x, y, theta]`.
    pub pose: [f64; 3],
    /// Dead-reckoned pose as published on `/rvr/odom`.
    pub odom: [f64; 3],
    /// Tread speeds `[left, right]`.
    pub v: [f64; 2],
    pub q: [f64; 4],
    pub gripper: f64,
    pub ground: GroundRecord,
    /// Present on steps that rendered a frame and ran the classifier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detections: Option<Vec<Detection>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub collision: bool,
}

impl TraceRecord {
    pub fn position(&self) -> Vec2d {
        Vec2d::new(self.pose[0], self.pose[1])
    }

    /// Mean tread speed, unsigned.
    pub fn speed(&self) -> f64 {
        ((self.v[0] + self.v[1]) / 2.0).abs()
    }
}

pub fn trace_to_string(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for r in trace {
        let line = serde_json::to_string(r).expect("trace records serialize");
        writeln!(out, "{line}").expect("writing to a string");
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRecord>, ScenarioError> {
    let mut out: Vec<TraceRecord> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(line).map_err(|e| ScenarioError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(prev) = out.last() {
            if rec.t <= prev.t {
                return Err(ScenarioError::Parse {
                    line: line_no,
                    message: format!("time {} does not increase past {}", rec.t, prev.t),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_trace(path: &Path, trace: &[TraceRecord]) -> Result<(), ScenarioError> {
    std::fs::write(path, trace_to_string(trace)).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_trace(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::percept::PixelRect;
    use crate::world::SignClass;

    pub(crate) fn record(step: u64, x: f64) -> TraceRecord {
        TraceRecord {
            step,
            t: step as f64 * 0.02,
            pose: [x, 0.5, 0.0],
            odom: [x, 0.5, 0.0],
            v: [0.1, 0.1],
            q: [0.0; 4],
            gripper: 0.06,
            ground: GroundRecord {
                rgb: [128; 3],
                distance: None,
                light: 400.0,
            },
            detections: None,
            collision: false,
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let mut trace: Vec<_> = (0..5).map(|k| record(k, 0.1 + k as f64 * 0.002)).collect();
        trace[2].detections = Some(vec![Detection {
            bbox: PixelRect::new(3, 4, 24, 24),
            class: SignClass::Stop,
            score: 0.1 + 0.2,
        }]);
        trace[4].collision = true;
        trace[1].ground.distance = Some(1.0 / 3.0);
        let text = trace_to_string(&trace);
        assert_eq!(text.lines().count(), 5);
        assert!(!text.lines().next().unwrap().contains("collision"));
        assert_eq!(parse_trace(&text).unwrap(), trace);
    }

    #[test]
    fn bad_line_is_numbered() {
        let text = trace_to_string(&[record(0, 0.0), record(1, 0.1)]);
        let truncated = &text[..text.len() - 10];
        match parse_trace(truncated) {
            Err(ScenarioError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let twice = trace_to_string(&[record(1, 0.0), record(1, 0.1)]);
        assert!(matches!(parse_trace(&twice), Err(ScenarioError::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_text_is_empty_trace() {
        assert!(parse_trace("").unwrap().is_empty());
    }
}

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::learn::{Classifier, DetectorConfig};
use crate::percept::{DEFAULT_HEIGHT, DEFAULT_WIDTH};
use crate::world::{load_arena, Arena, SignClass};
use crate::{Pose2d, Vec2d};

/// Circular goal area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalRegion {
    pub center: [f64; 2],
    pub radius: f64,
}

impl GoalRegion {
    pub fn contains(&self, p: Vec2d) -> bool {
        p.distance(Vec2d::new(self.center[0], self.center[1])) <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurnDirection {
    Left,
    Right,
}

/// What a sign demands inside its zone, the half-disc of `zone_radius`
/// in front of its face.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrafficRule {
    /// Stand still (speed below `still_speed`) for `dwell` seconds before leaving.
    Stop { zone_radius: f64, dwell: f64, still_speed: f64 },
    SpeedCap { zone_radius: f64, max_speed: f64 },
    /// Net heading change of at least `min_turn` radians in `direction`.
    Turn { zone_radius: f64, direction: TurnDirection, min_turn: f64 },
    NoEntry { zone_radius: f64 },
}

impl TrafficRule {
    pub fn zone_radius(&self) -> f64 {
        match *self {
            TrafficRule::Stop { zone_radius, .. }
            | TrafficRule::SpeedCap { zone_radius, .. }
            | TrafficRule::Turn { zone_radius, .. }
            | TrafficRule::NoEntry { zone_radius } => zone_radius,
        }
    }

    fn validate(&self) -> Result<(), String> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = positive(self.zone_radius())
            && match *self {
                TrafficRule::Stop { dwell, still_speed, .. } => positive(dwell) && positive(still_speed),
                TrafficRule::SpeedCap { max_speed, .. } => positive(max_speed),
                TrafficRule::Turn { min_turn, .. } => min_turn.is_finite() && min_turn >= 0.0,
                TrafficRule::NoEntry { .. } => true,
            };
        if ok {
            Ok(())
        } else {
            Err(format!("traffic rule {self:?} needs positive parameters"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SuccessRule {
    LineFollow { track: usize, max_dev: f64, min_dist: f64 },
    Maze { goal: GoalRegion, time_limit: f64 },
    TrafficCompliance { rules: BTreeMap<SignClass, TrafficRule> },
    FreePlay,
}

/// How the runner looks at camera frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perception {
    pub detector: DetectorConfig,
    /// A detection counts as a sighting for `on_sign` only when its box is
    /// at least this wide, so watchers fire when the sign is near.
    pub trigger_min_px: usize,
    pub render_every: u64,
}

impl Default for Perception {
    fn default() -> Self {
        Perception {
            detector: DetectorConfig::default(),
            trigger_min_px: 0,
            render_every: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub arena: Arena,
    pub start_pose: Pose2d,
    pub model: Option<Classifier>,
    pub success_rule: SuccessRule,
    pub perception: Perception,
    /// Default run length when the caller does not give one.
    pub max_time: f64,
}

pub const DEFAULT_MAX_TIME: f64 = 10.0;

/// A file reference (relative to the scenario file) or an inline document.
#[derive(Deserialize)]
#[serde(untagged)]
enum Inline {
    Path(String),
    Doc(serde_json::Value),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    arena: Inline,
    start_pose: [f64; 3],
    #[serde(default)]
    model: Option<Inline>,
    success_rule: SuccessRule,
    #[serde(default)]
    perception: Perception,
    #[serde(default)]
    max_time: Option<f64>,
}

fn read(path: &Path) -> Result<Vec<u8>, ScenarioError> {
    std::fs::read(path).map_err(|e| ScenarioError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

impl Scenario {
    /// A free-play scenario with default perception.
    pub fn free_play(arena: Arena, start_pose: Pose2d) -> Scenario {
        Scenario {
            arena,
            start_pose,
            model: None,
            success_rule: SuccessRule::FreePlay,
            perception: Perception::default(),
            max_time: DEFAULT_MAX_TIME,
        }
    }

    /// Parses a scenario document; string-valued `arena` and `model`
    /// fields are paths resolved against `base_dir`.
    pub fn from_json(bytes: &[u8], base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = serde_json::from_slice(bytes).map_err(|e| ScenarioError::BadScenario(e.to_string()))?;
        let arena = match raw.arena {
            Inline::Path(p) => load_arena(&read(&base_dir.join(p))?)?,
            Inline::Doc(v) => load_arena(v.to_string().as_bytes())?,
        };
        let model = match raw.model {
            None => None,
            Some(Inline::Path(p)) => Some(Classifier::load(&base_dir.join(p))?),
            Some(Inline::Doc(v)) => Some(Classifier::from_json(&v)?),
        };
        let [x, y, theta] = raw.start_pose;
        let scenario = Scenario {
            arena,
            start_pose: Pose2d::new(x, y, theta),
            model,
            success_rule: raw.success_rule,
            perception: raw.perception,
            max_time: raw.max_time.unwrap_or(DEFAULT_MAX_TIME),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::from_json(&read(path)?, base)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::BadScenario(m));
        if !self.start_pose.is_finite() || !self.arena.contains(self.start_pose.position()) {
            return bad("start_pose must lie inside the arena".into());
        }
        if !(self.max_time.is_finite() && self.max_time > 0.0) {
            return bad(format!("max_time must be > 0, got {}", self.max_time));
        }
        if self.perception.render_every == 0 {
            return bad("render_every must be >= 1".into());
        }
        self.perception
            .detector
            .validate(DEFAULT_WIDTH, DEFAULT_HEIGHT)
            .map_err(|e| ScenarioError::BadScenario(e.to_string()))?;
        match &self.success_rule {
            SuccessRule::LineFollow { track, max_dev, min_dist } => {
                if *track >= self.arena.line_tracks.len() {
                    return bad(format!("line track {track} does not exist"));
                }
                if !(max_dev.is_finite() && *max_dev >= 0.0 && min_dist.is_finite() && *min_dist >= 0.0) {
                    return bad("max_dev and min_dist must be >= 0".into());
                }
            }
            SuccessRule::Maze { goal, time_limit } => {
                let c = Vec2d::new(goal.center[0], goal.center[1]);
                if !(goal.radius > 0.0 && self.arena.contains(c)) {
                    return bad("goal must be a positive radius around a point in the arena".into());
                }
                if !(time_limit.is_finite() && *time_limit > 0.0) {
                    return bad("time_limit must be > 0".into());
                }
            }
            SuccessRule::TrafficCompliance { rules } => {
                for (class, rule) in rules {
                    if !class.is_placeable() {
                        return bad("rules must name sign classes".into());
                    }
                    rule.validate().map_err(ScenarioError::BadScenario)?;
                }
            }
            SuccessRule::FreePlay => {}
        }
        Ok(())
    }
}

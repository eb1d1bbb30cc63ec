//! Pure scoring functions over traces.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Event, Outcome, Scenario, ScenarioError, SuccessRule, TraceRecord, TrafficRule, TurnDirection};
use crate::geom::{distance_to_polyline, normalize_angle};
use crate::scenarios::GoalRegion;
use crate::world::{Arena, Sign, SignClass};
use crate::Vec2d;

/// Slack when comparing a measured dwell against the required one.
const DWELL_EPS: f64 = 1e-9;

fn non_empty(trace: &[TraceRecord]) -> Result<(), ScenarioError> {
    if trace.is_empty() {
        Err(ScenarioError::EmptyTrace)
    } else {
        Ok(())
    }
}

/// Sum of straight-line displacements between consecutive records.
pub fn path_length(trace: &[TraceRecord]) -> f64 {
    trace.windows(2).map(|w| w[0].position().distance(w[1].position())).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFollowScore {
    pub mean_dev: f64,
    pub max_dev: f64,
    pub distance: f64,
    pub pass: bool,
}

pub fn score_line_follow(trace: &[TraceRecord], track: &[Vec2d], max_dev: f64, min_dist: f64) -> Result<LineFollowScore, ScenarioError> {
    non_empty(trace)?;
    let devs: Vec<f64> = trace.iter().map(|r| distance_to_polyline(r.position(), track)).collect();
    let mean_dev = devs.iter().sum::<f64>() / devs.len() as f64;
    let max = devs.iter().copied().fold(0.0, f64::max);
    let distance = path_length(trace);
    Ok(LineFollowScore {
        mean_dev,
        max_dev: max,
        distance,
        pass: max <= max_dev && distance >= min_dist,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MazeScore {
    pub reached: bool,
    /// First time inside the goal, if within the limit.
    pub time: Option<f64>,
    pub path_length: f64,
}

pub fn score_maze(trace: &[TraceRecord], goal: &GoalRegion, time_limit: f64) -> Result<MazeScore, ScenarioError> {
    non_empty(trace)?;
    let hit = trace.iter().position(|r| r.t <= time_limit && goal.contains(r.position()));
    let until = hit.map_or(trace.len(), |k| k + 1);
    Ok(MazeScore {
        reached: hit.is_some(),
        time: hit.map(|k| trace[k].t),
        path_length: path_length(&trace[..until]),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Index of the sign in the arena.
    pub sign: usize,
    pub class: SignClass,
    pub t: f64,
    pub reason: String,
}

/// Inside the half-disc of `radius` in front of the sign face.
pub fn in_zone(sign: &Sign, radius: f64, p: Vec2d) -> bool {
    let d = p - sign.center();
    d.norm() <= radius && d.dot(sign.facing()) > 0.0
}

/// Checks one contiguous stay in a zone. `exit` is the first record after
/// the stay, absent if the trace ends inside.
fn check_visit(rule: &TrafficRule, visit: &[TraceRecord], exit: Option<&TraceRecord>) -> Option<(f64, String)> {
    match *rule {
        TrafficRule::Stop { dwell, still_speed, .. } => {
            let exit = exit?;
            let mut best = 0.0f64;
            let mut start: Option<f64> = None;
            for r in visit {
                if r.speed() < still_speed {
                    let s = *start.get_or_insert(r.t);
                    best = best.max(r.t - s);
                } else {
                    start = None;
                }
            }
            (best + DWELL_EPS < dwell).then(|| (exit.t, format!("left the stop zone after standing still {best:.3} s of {dwell} s")))
        }
        TrafficRule::SpeedCap { max_speed, .. } => visit
            .iter()
            .find(|r| r.speed() > max_speed)
            .map(|r| (r.t, format!("speed {:.3} m/s above {max_speed}", r.speed()))),
        TrafficRule::Turn { direction, min_turn, .. } => {
            let exit = exit?;
            let mut net = 0.0;
            let mut prev = visit[0].pose[2];
            for r in visit[1..].iter().chain(std::iter::once(exit)) {
                net += normalize_angle(r.pose[2] - prev);
                prev = r.pose[2];
            }
            let ok = match direction {
                TurnDirection::Left => net >= min_turn,
                TurnDirection::Right => net <= -min_turn,
            };
            (!ok).then(|| (exit.t, format!("turned {net:.3} rad in the zone")))
        }
        TrafficRule::NoEntry { .. } => Some((visit[0].t, "entered a no-entry zone".to_string())),
    }
}

/// Every rule violation, ordered by time then sign index.
pub fn score_traffic(trace: &[TraceRecord], arena: &Arena, rules: &BTreeMap<SignClass, TrafficRule>) -> Result<Vec<Violation>, ScenarioError> {
    non_empty(trace)?;
    let mut out = Vec::new();
    for (id, sign) in arena.signs.iter().enumerate() {
        let Some(rule) = rules.get(&sign.class) else { continue };
        let inside: Vec<bool> = trace.iter().map(|r| in_zone(sign, rule.zone_radius(), r.position())).collect();
        let mut k = 0;
        while k < trace.len() {
            if !inside[k] {
                k += 1;
                continue;
            }
            let start = k;
            while k < trace.len() && inside[k] {
                k += 1;
            }
            if let Some((t, reason)) = check_visit(rule, &trace[start..k], trace.get(k)) {
                out.push(Violation {
                    sign: id,
                    class: sign.class,
                    t,
                    reason,
                });
            }
        }
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.sign.cmp(&b.sign)));
    Ok(out)
}

/// Outcome, metrics and scoring events for a finished trace.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub outcome: Outcome,
    pub metrics: BTreeMap<String, f64>,
    pub events: Vec<Event>,
}

pub fn evaluate_trace(trace: &[TraceRecord], scenario: &Scenario) -> Result<Evaluation, ScenarioError> {
    non_empty(trace)?;
    let last = trace.last().expect("non-empty");
    let mut metrics = BTreeMap::new();
    let mut events = Vec::new();
    metrics.insert("steps".to_string(), trace.len() as f64);
    metrics.insert("sim_time".to_string(), last.t);
    metrics.insert("path_length".to_string(), path_length(trace));
    for (i, name) in ["final_x", "final_y", "final_theta"].iter().enumerate() {
        metrics.insert(name.to_string(), last.pose[i]);
    }

    let collided = trace.iter().find(|r| r.collision);
    if let Some(r) = collided {
        events.push(Event::new(r.t, "collision", format!("at ({:.3}, {:.3})", r.pose[0], r.pose[1])));
    }

    let mut outcome = match &scenario.success_rule {
        SuccessRule::FreePlay => Outcome::Pass,
        SuccessRule::LineFollow { track, max_dev, min_dist } => {
            let s = score_line_follow(trace, &scenario.arena.line_tracks[*track].points, *max_dev, *min_dist)?;
            metrics.insert("mean_dev".into(), s.mean_dev);
            metrics.insert("max_dev".into(), s.max_dev);
            metrics.insert("distance".into(), s.distance);
            if s.pass {
                Outcome::Pass
            } else {
                Outcome::Fail
            }
        }
        SuccessRule::Maze { goal, time_limit } => {
            let s = score_maze(trace, goal, *time_limit)?;
            metrics.insert("reached".into(), f64::from(u8::from(s.reached)));
            metrics.insert("maze_path_length".into(), s.path_length);
            if let Some(t) = s.time {
                metrics.insert("time".into(), t);
                events.push(Event::new(t, "goal_reached", String::new()));
                Outcome::Pass
            } else if last.t >= *time_limit {
                Outcome::Fail
            } else {
                Outcome::Timeout
            }
        }
        SuccessRule::TrafficCompliance { rules } => {
            let v = score_traffic(trace, &scenario.arena, rules)?;
            metrics.insert("violations".into(), v.len() as f64);
            for x in &v {
                events.push(Event::new(x.t, "violation", format!("sign {} ({}): {}", x.sign, x.class, x.reason)));
            }
            if v.is_empty() {
                Outcome::Pass
            } else {
                Outcome::Fail
            }
        }
    };
    if collided.is_some() {
        outcome = Outcome::Collision;
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(Evaluation { outcome, metrics, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::GroundRecord;
    use crate::Pose2d;

    fn rec(step: u64, x: f64, y: f64, speed: f64) -> TraceRecord {
        TraceRecord {
            step,
            t: step as f64 * 0.02,
            pose: [x, y, 0.0],
            odom: [x, y, 0.0],
            v: [speed, speed],
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

    fn straight(n: u64, y: f64, speed: f64) -> Vec<TraceRecord> {
        (0..n).map(|k| rec(k, k as f64 * speed * 0.02, y, speed)).collect()
    }

    fn stop_arena() -> Arena {
        let mut a = Arena::empty(3.0, 1.0);
        a.signs.push(Sign {
            class: SignClass::Stop,
            pose: Pose2d::new(1.5, 0.6, std::f64::consts::PI),
            face_width: 0.1,
            mount_height: 0.07,
        });
        a
    }

    fn stop_rules() -> BTreeMap<SignClass, TrafficRule> {
        BTreeMap::from([(
            SignClass::Stop,
            TrafficRule::Stop {
                zone_radius: 0.4,
                dwell: 1.0,
                still_speed: 0.005,
            },
        )])
    }

    #[test]
    fn on_track_and_parallel_offsets() {
        let track = [Vec2d::new(0.0, 0.5), Vec2d::new(3.0, 0.5)];
        let s = score_line_follow(&straight(50, 0.5, 0.1), &track, 0.01, 0.05).unwrap();
        assert!(s.mean_dev < 1e-15 && s.max_dev < 1e-15);
        assert!(s.pass);
        let s = score_line_follow(&straight(50, 0.55, 0.1), &track, 0.01, 0.05).unwrap();
        assert!((s.mean_dev - 0.05).abs() < 1e-12);
        assert!(!s.pass);
        assert!((s.distance - 49.0 * 0.002).abs() < 1e-12);
    }

    #[test]
    fn maze_goal() {
        let goal = GoalRegion { center: [0.0, 0.5], radius: 0.05 };
        let s = score_maze(&straight(10, 0.5, 0.1), &goal, 5.0).unwrap();
        assert_eq!((s.reached, s.time, s.path_length), (true, Some(0.0), 0.0));
        let far = GoalRegion { center: [2.0, 0.5], radius: 0.05 };
        let s = score_maze(&straight(10, 0.5, 0.1), &far, 5.0).unwrap();
        assert!(!s.reached && s.time.is_none());
    }

    #[test]
    fn empty_traces_are_rejected() {
        assert!(matches!(score_line_follow(&[], &[Vec2d::zero()], 1.0, 0.0), Err(ScenarioError::EmptyTrace)));
        let goal = GoalRegion { center: [0.0, 0.0], radius: 1.0 };
        assert!(matches!(score_maze(&[], &goal, 1.0), Err(ScenarioError::EmptyTrace)));
        assert!(matches!(score_traffic(&[], &stop_arena(), &stop_rules()), Err(ScenarioError::EmptyTrace)));
    }

    #[test]
    fn never_entering_is_compliant() {
        let v = score_traffic(&straight(100, 0.1, 0.1), &stop_arena(), &stop_rules()).unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn rolling_through_is_one_violation() {
        // 0.1 m/s along y = 0.5 passes x = 1.5 at t = 15 s.
        let trace = straight(1000, 0.5, 0.1);
        let v = score_traffic(&trace, &stop_arena(), &stop_rules()).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].sign, v[0].class), (0, SignClass::Stop));
        let exit = trace.iter().find(|r| r.pose[0] >= 1.5).unwrap().t;
        assert_eq!(v[0].t, exit);
    }

    #[test]
    fn full_stop_is_compliant() {
        let mut trace = Vec::new();
        let mut x = 0.8;
        for k in 0..800u64 {
            // Stand still at x = 1.3 for 1.2 s (60 steps), then continue.
            let speed = if (400..460).contains(&k) { 0.0 } else { 0.1 };
            trace.push(rec(k, x, 0.5, speed));
            if x < 1.3 || k >= 460 {
                x += 0.1 * 0.02;
            }
        }
        assert!(trace[399].pose[0] >= 1.3);
        let v = score_traffic(&trace, &stop_arena(), &stop_rules()).unwrap();
        assert!(v.is_empty(), "{v:?}");
    }
}

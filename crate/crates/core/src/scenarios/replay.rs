use std::time::{Duration, Instant};

use serde_json::json;
use stair_bus::{catalog, Broker, SimTime};

use super::TraceRecord;
use crate::learn::detections_payload;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayPace {
    /// Wall-clock spacing matches the recorded sim times.
    Faithful,
    Fast,
}

/// Re-publishes the recorded sensor topics. Returns the number of records sent.
pub fn replay(trace: &[TraceRecord], bus: &Broker, pace: ReplayPace) -> usize {
    let started = Instant::now();
    let t0 = trace.first().map_or(0.0, |r| r.t);
    for r in trace {
        if pace == ReplayPace::Faithful {
            let due = started + Duration::from_secs_f64(r.t - t0);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        let t = SimTime::from_secs(r.t);
        let publish = |topic: &str, payload| {
            bus.publish_to(topic, payload, t).expect("catalog topics are valid");
        };
        publish(catalog::ODOM, json!({"x": r.odom[0], "y": r.odom[1], "theta": r.odom[2], "seq": r.step}));
        publish(
            catalog::GROUND,
            json!({"rgb": r.ground.rgb, "distance": r.ground.distance, "light": r.ground.light}),
        );
        publish(catalog::JOINT_STATES, json!({"q": r.q}));
        if let Some(d) = &r.detections {
            publish(catalog::DETECTIONS, detections_payload(d, r.t));
        }
    }
    trace.len()
}

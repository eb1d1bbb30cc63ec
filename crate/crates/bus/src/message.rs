use std::fmt;

use serde::{Deserialize, Serialize};

use crate::TopicName;

/// Structured payload: a JSON key/value tree.
pub type Document = serde_json::Value;

/// Simulation timestamp with microsecond resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    /// Rounds to the nearest microsecond; negative and non-finite inputs clamp to zero.
    pub fn from_secs(secs: f64) -> Self {
        if secs.is_finite() && secs > 0.0 {
            SimTime((secs * 1e6).round() as u64)
        } else {
            SimTime(0)
        }
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:06}s", self.0 / 1_000_000, self.0 % 1_000_000)
    }
}

/// A message delivered on a topic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub topic: TopicName,
    pub seq: u64,
    #[serde(rename = "sim_time_us")]
    pub sim_time: SimTime,
    pub payload: Document,
}

/// A request addressed to a service, as carried on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceCall {
    pub service: TopicName,
    pub call_id: u64,
    pub request: Document,
    /// Time budget in seconds; the server default applies when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sim_time_rounds_to_microseconds() {
        assert_eq!(SimTime::from_secs(0.02).as_micros(), 20_000);
        assert_eq!(SimTime::from_secs(1.0000004).as_micros(), 1_000_000);
        assert_eq!(SimTime::from_secs(-3.0), SimTime::ZERO);
        assert_eq!(SimTime::from_secs(f64::NAN), SimTime::ZERO);
        assert_eq!(SimTime::from_micros(1_500_000).to_string(), "1.500000s");
    }
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::BusError;

/// Slash-separated topic or service path such as `/rvr/odom`.
///
/// Every segment is non-empty and made of `[a-z0-9_]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TopicName(String);

impl TopicName {
    pub fn new(path: impl Into<String>) -> Result<Self, BusError> {
        let path = path.into();
        if Self::is_valid(&path) {
            Ok(TopicName(path))
        } else {
            Err(BusError::InvalidTopic(path))
        }
    }

    pub fn is_valid(path: &str) -> bool {
        let Some(rest) = path.strip_prefix('/') else {
            return false;
        };
        !rest.is_empty()
            && rest.split('/').all(|seg| {
                !seg.is_empty()
                    && seg
                        .bytes()
                        .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
            })
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TopicName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for TopicName {
    type Err = BusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopicName::new(s)
    }
}

impl TryFrom<String> for TopicName {
    type Error = BusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        TopicName::new(value)
    }
}

impl TryFrom<&str> for TopicName {
    type Error = BusError;

    fn try_from(value: &str) -> Result<Self, Self::Error> {
        TopicName::new(value)
    }
}

impl From<TopicName> for String {
    fn from(t: TopicName) -> String {
        t.0
    }
}

impl AsRef<str> for TopicName {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

use std::fmt;

use chrono::{DateTime, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const FORMAT: &str = "%Y-%m-%dT%H:%MZ";

/// A UTC instant at minute resolution, stored as minutes since the Unix epoch.
///
/// The textual form is ISO-8601 with a trailing `Z`, e.g. `2021-01-01T00:05Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub const fn from_minutes(minutes: i64) -> Self {
        Self(minutes)
    }

    pub const fn minutes(self) -> i64 {
        self.0
    }

    pub fn from_ymd_hm(year: i32, month: u32, day: u32, hour: u32, minute: u32) -> Option<Self> {
        let date = chrono::NaiveDate::from_ymd_opt(year, month, day)?;
        let dt = date.and_hms_opt(hour, minute, 0)?;
        Some(Self(dt.and_utc().timestamp() / 60))
    }

    /// Parses `YYYY-MM-DDTHH:MMZ`. Anything else (offsets, seconds, missing `Z`)
    /// is rejected.
    pub fn parse(text: &str) -> Result<Self, String> {
        let naive = NaiveDateTime::parse_from_str(text, FORMAT)
            .map_err(|e| format!("`{text}`: {e}"))?;
        debug_assert_eq!(naive.second(), 0);
        Ok(Self(naive.and_utc().timestamp() / 60))
    }

    pub fn plus_minutes(self, minutes: i64) -> Self {
        Self(self.0 + minutes)
    }

    /// True when the instant lies on a grid of `cadence` minutes anchored at
    /// 00:00 UTC.
    pub fn is_aligned(self, cadence_minutes: i64) -> bool {
        self.0.rem_euclid(cadence_minutes) == 0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DateTime::from_timestamp(self.0 * 60, 0) {
            Some(dt) => write!(f, "{}", dt.format(FORMAT)),
            None => write!(f, "<minute {}>", self.0),
        }
    }
}

impl std::str::FromStr for Timestamp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

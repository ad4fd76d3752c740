//! Minute-resolution local clock.
//!
//! Timestamps are plain minute counts from 1970-01-01T00:00 on a local,
//! DST-free clock. No timezone arithmetic is ever performed.

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const MINUTES_PER_HOUR: i64 = 60;
pub const MINUTES_PER_DAY: i64 = 1440;

const FORMAT: &str = "%Y-%m-%dT%H:%M";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(i64);

impl Timestamp {
    pub fn from_minutes(minutes: i64) -> Result<Self> {
        if minutes < 0 {
            return Err(Error::Time(format!("negative timestamp {minutes}")));
        }
        Ok(Self(minutes))
    }

    pub fn minutes(self) -> i64 {
        self.0
    }

    pub fn from_datetime(dt: NaiveDateTime) -> Result<Self> {
        let epoch = epoch();
        let minutes = (dt - epoch).num_minutes();
        Self::from_minutes(minutes)
    }

    /// Midnight at the start of `date`.
    pub fn from_date(date: NaiveDate) -> Result<Self> {
        Self::from_datetime(date.and_hms_opt(0, 0, 0).expect("midnight is valid"))
    }

    pub fn to_datetime(self) -> NaiveDateTime {
        epoch() + chrono::Duration::minutes(self.0)
    }

    pub fn date(self) -> NaiveDate {
        self.to_datetime().date()
    }

    pub fn hour_floor(self) -> Self {
        Self(self.0 - self.0.rem_euclid(MINUTES_PER_HOUR))
    }

    pub fn is_hour_aligned(self) -> bool {
        self.0 % MINUTES_PER_HOUR == 0
    }

    pub fn add_minutes(self, minutes: i64) -> Self {
        Self(self.0 + minutes)
    }

    pub fn add_hours(self, hours: i64) -> Self {
        Self(self.0 + hours * MINUTES_PER_HOUR)
    }

    pub fn hour_of_day(self) -> u32 {
        self.to_datetime().hour()
    }

    /// Monday = 0 ... Sunday = 6.
    pub fn day_of_week(self) -> u32 {
        self.to_datetime().weekday().num_days_from_monday()
    }
}

fn epoch() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(1970, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("epoch is valid")
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_datetime().format(FORMAT))
    }
}

impl FromStr for Timestamp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let dt = NaiveDateTime::parse_from_str(s.trim(), FORMAT)
            .map_err(|e| Error::Time(format!("invalid timestamp {s:?}: {e}")))?;
        Self::from_datetime(dt)
    }
}

impl Serialize for Timestamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Timestamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Time(format!("invalid date {s:?}: {e}")))
}

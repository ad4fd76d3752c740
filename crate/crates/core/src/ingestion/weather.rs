use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::HourIndex;
use crate::error::{Error, Result};
use crate::time::Timestamp;

/// Longest run of missing weather hours that is forward-filled.
pub const MAX_WEATHER_FILL_HOURS: i64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeatherCondition {
    Clear,
    Clouds,
    Rain,
    Mist,
    Thunderstorm,
    Snow,
    Drizzle,
    Haze,
    Fog,
    Smoke,
}

impl WeatherCondition {
    pub const ALL: [WeatherCondition; 10] = [
        Self::Clear,
        Self::Clouds,
        Self::Rain,
        Self::Mist,
        Self::Thunderstorm,
        Self::Snow,
        Self::Drizzle,
        Self::Haze,
        Self::Fog,
        Self::Smoke,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Clear => "Clear",
            Self::Clouds => "Clouds",
            Self::Rain => "Rain",
            Self::Mist => "Mist",
            Self::Thunderstorm => "Thunderstorm",
            Self::Snow => "Snow",
            Self::Drizzle => "Drizzle",
            Self::Haze => "Haze",
            Self::Fog => "Fog",
            Self::Smoke => "Smoke",
        }
    }
}

impl fmt::Display for WeatherCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeatherCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown weather condition {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeatherHour {
    pub hour: Timestamp,
    pub temperature: f64,
    pub wind_speed: f64,
    pub humidity: f64,
    pub condition: WeatherCondition,
}

/// One weather row per non-excluded hour of `index`.
///
/// A missing hour takes the most recent observation at most
/// [`MAX_WEATHER_FILL_HOURS`] earlier; anything older is an error. Duplicate
/// rows for an hour keep the first.
pub fn align_weather(weather: &[WeatherHour], index: &HourIndex) -> Result<Vec<WeatherHour>> {
    let mut by_hour: HashMap<Timestamp, &WeatherHour> = HashMap::with_capacity(weather.len());
    for w in weather {
        by_hour.entry(w.hour).or_insert(w);
    }
    index
        .hours()
        .iter()
        .map(|&t| {
            (0..=MAX_WEATHER_FILL_HOURS)
                .find_map(|back| by_hour.get(&t.add_hours(-back)))
                .map(|w| WeatherHour { hour: t, ..**w })
                .ok_or_else(|| {
                    Error::Weather(format!(
                        "no observation within {MAX_WEATHER_FILL_HOURS} hours before {t}"
                    ))
                })
        })
        .collect()
}

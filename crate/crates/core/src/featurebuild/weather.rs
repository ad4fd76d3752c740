use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingestion::WeatherCondition;

/// Five-way weather grouping used by most dataset variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WeatherGroup {
    Clear,
    Clouds,
    Rain,
    Thunderstorm,
    Others,
}

impl WeatherGroup {
    pub const ALL: [WeatherGroup; 5] = [Self::Clear, Self::Clouds, Self::Rain, Self::Thunderstorm, Self::Others];

    pub fn name(self) -> &'static str {
        match self {
            Self::Clear => "Clear",
            Self::Clouds => "Clouds",
            Self::Rain => "Rain",
            Self::Thunderstorm => "Thunderstorm",
            Self::Others => "Others",
        }
    }
}

impl fmt::Display for WeatherGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl From<WeatherCondition> for WeatherGroup {
    fn from(c: WeatherCondition) -> Self {
        use WeatherCondition::*;
        match c {
            Clear => Self::Clear,
            Clouds | Mist => Self::Clouds,
            Rain | Drizzle => Self::Rain,
            Thunderstorm => Self::Thunderstorm,
            Snow | Haze | Fog | Smoke => Self::Others,
        }
    }
}

/// Maps a ten-category condition name onto the five-way grouping.
pub fn recategorize_weather(condition10: &str) -> Result<WeatherGroup> {
    Ok(condition10.parse::<WeatherCondition>()?.into())
}

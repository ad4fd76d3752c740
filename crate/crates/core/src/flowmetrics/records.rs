use std::io::{Read, Write};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{extreme_case_indicator, EciParams, FlowSeries};
use crate::error::{Error, Result};
use crate::featurebuild::WeatherGroup;
use crate::ingestion::{align_weather, CalendarTable, HourIndex, WeatherCondition, WeatherHour};
use crate::time::Timestamp;

/// One integrated hour: flow metrics, weather and calendar context.
/// Field order is the column order of `integrated.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyRecord {
    pub hour: Timestamp,
    pub waiting_count: u32,
    pub waiting_count_esi12: u32,
    pub waiting_count_esi3: u32,
    pub waiting_count_esi45: u32,
    pub avg_waiting_time: f64,
    pub avg_waiting_time_esi12: f64,
    pub avg_waiting_time_esi3: f64,
    pub avg_waiting_time_esi45: f64,
    pub treatment_count: u32,
    pub avg_treatment_time: f64,
    pub boarding_count: u32,
    pub avg_boarding_time: f64,
    pub hospital_census: u32,
    pub eci: u8,
    pub temperature: f64,
    pub wind_speed: f64,
    pub humidity: f64,
    pub condition10: WeatherCondition,
    pub condition5: WeatherGroup,
    pub year: i32,
    pub month: u32,
    pub day_of_month: u32,
    pub day_of_week: u32,
    pub hour_of_day: u32,
    pub is_holiday: u8,
    pub is_football: u8,
}

pub const INTEGRATED_COLUMNS: [&str; 27] = [
    "hour",
    "waiting_count",
    "waiting_count_esi12",
    "waiting_count_esi3",
    "waiting_count_esi45",
    "avg_waiting_time",
    "avg_waiting_time_esi12",
    "avg_waiting_time_esi3",
    "avg_waiting_time_esi45",
    "treatment_count",
    "avg_treatment_time",
    "boarding_count",
    "avg_boarding_time",
    "hospital_census",
    "eci",
    "temperature",
    "wind_speed",
    "humidity",
    "condition10",
    "condition5",
    "year",
    "month",
    "day_of_month",
    "day_of_week",
    "hour_of_day",
    "is_holiday",
    "is_football",
];

impl HourlyRecord {
    /// Numeric value of a field by column name; `None` for the timestamp,
    /// the categorical weather fields and unknown names.
    pub fn value(&self, field: &str) -> Option<f64> {
        let v = match field {
            "waiting_count" => self.waiting_count as f64,
            "waiting_count_esi12" => self.waiting_count_esi12 as f64,
            "waiting_count_esi3" => self.waiting_count_esi3 as f64,
            "waiting_count_esi45" => self.waiting_count_esi45 as f64,
            "avg_waiting_time" => self.avg_waiting_time,
            "avg_waiting_time_esi12" => self.avg_waiting_time_esi12,
            "avg_waiting_time_esi3" => self.avg_waiting_time_esi3,
            "avg_waiting_time_esi45" => self.avg_waiting_time_esi45,
            "treatment_count" => self.treatment_count as f64,
            "avg_treatment_time" => self.avg_treatment_time,
            "boarding_count" => self.boarding_count as f64,
            "avg_boarding_time" => self.avg_boarding_time,
            "hospital_census" => self.hospital_census as f64,
            "eci" => self.eci as f64,
            "temperature" => self.temperature,
            "wind_speed" => self.wind_speed,
            "humidity" => self.humidity,
            "year" => self.year as f64,
            "month" => self.month as f64,
            "day_of_month" => self.day_of_month as f64,
            "day_of_week" => self.day_of_week as f64,
            "hour_of_day" => self.hour_of_day as f64,
            "is_holiday" => self.is_holiday as f64,
            "is_football" => self.is_football as f64,
            _ => return None,
        };
        Some(v)
    }
}

fn count(v: f64) -> u32 {
    debug_assert!(v >= 0.0 && v.fract() == 0.0);
    v as u32
}

/// Merges flow series, weather and calendar into one record per
/// non-excluded hour. `eci` sets the extreme-case threshold.
pub fn assemble_hourly_records(
    series: &FlowSeries,
    eci: &EciParams,
    weather: &[WeatherHour],
    calendar: &CalendarTable,
    index: &HourIndex,
) -> Result<Vec<HourlyRecord>> {
    let weather = align_weather(weather, index)?;
    let flags = extreme_case_indicator(series.waiting.total.values(), eci);
    let mut out = Vec::with_capacity(index.effective_len());
    for (i, &hour) in index.hours().iter().enumerate() {
        let w = &weather[i];
        let date = hour.date();
        out.push(HourlyRecord {
            hour,
            waiting_count: count(series.waiting.total.values()[i]),
            waiting_count_esi12: count(series.waiting.esi12.values()[i]),
            waiting_count_esi3: count(series.waiting.esi3.values()[i]),
            waiting_count_esi45: count(series.waiting.esi45.values()[i]),
            avg_waiting_time: series.waiting_time.total.values()[i],
            avg_waiting_time_esi12: series.waiting_time.esi12.values()[i],
            avg_waiting_time_esi3: series.waiting_time.esi3.values()[i],
            avg_waiting_time_esi45: series.waiting_time.esi45.values()[i],
            treatment_count: count(series.treatment_count.values()[i]),
            avg_treatment_time: series.treatment_time.values()[i],
            boarding_count: count(series.boarding_count.values()[i]),
            avg_boarding_time: series.boarding_time.values()[i],
            hospital_census: count(series.hospital_census.values()[i]),
            eci: flags[i] as u8,
            temperature: w.temperature,
            wind_speed: w.wind_speed,
            humidity: w.humidity,
            condition10: w.condition,
            condition5: WeatherGroup::from(w.condition),
            year: date.year(),
            month: date.month(),
            day_of_month: date.day(),
            day_of_week: hour.day_of_week(),
            hour_of_day: hour.hour_of_day(),
            is_holiday: calendar.holidays.contains(&date) as u8,
            is_football: calendar.football_games.contains(&date) as u8,
        });
    }
    Ok(out)
}

pub fn write_integrated<W: Write>(sink: W, records: &[HourlyRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(sink);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_integrated<R: Read>(source: R) -> Result<Vec<HourlyRecord>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.iter().ne(INTEGRATED_COLUMNS.iter().copied()) {
        return Err(Error::Schema {
            table: "integrated",
            message: format!("header must be {}", INTEGRATED_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for row in reader.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

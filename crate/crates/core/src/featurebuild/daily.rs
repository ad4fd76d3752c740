use std::collections::{BTreeMap, HashMap};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::WeatherGroup;
use crate::error::{Error, Result};
use crate::flowmetrics::HourlyRecord;
use crate::ingestion::WeatherCondition;
use crate::time::Timestamp;

pub const DEFAULT_ANCHOR_HOUR: u32 = 17;

/// Numeric hourly fields averaged into daily rows. Calendar fields are not
/// averaged; they describe the window end.
pub(crate) const AVERAGED_FIELDS: [&str; 19] = [
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
    "is_holiday",
    "is_football",
];

pub(crate) fn weather10_column(c: WeatherCondition) -> String {
    format!("weather10_{}", c.name().to_ascii_lowercase())
}

pub(crate) fn weather5_column(g: WeatherGroup) -> String {
    format!("weather5_{}", g.name().to_ascii_lowercase())
}

/// Every averaged quantity of one hour: numeric fields plus weather one-hots.
pub(crate) fn hour_quantities(r: &HourlyRecord) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = AVERAGED_FIELDS
        .iter()
        .map(|f| (f.to_string(), r.value(f).expect("known field")))
        .collect();
    for c in WeatherCondition::ALL {
        out.push((weather10_column(c), (r.condition10 == c) as u8 as f64));
    }
    for g in WeatherGroup::ALL {
        out.push((weather5_column(g), (r.condition5 == g) as u8 as f64));
    }
    out
}

/// 24-hour means over the window `[window_end - 24h, window_end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub window_end: Timestamp,
    pub values: BTreeMap<String, f64>,
}

impl DailyRecord {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

/// Consecutive non-overlapping 24-hour windows ending at `anchor_hour`.
/// Windows missing any hour (exclusion gaps, series edges) are dropped.
pub fn daily_aggregate(records: &[HourlyRecord], anchor_hour: u32) -> Result<Vec<DailyRecord>> {
    if anchor_hour > 23 {
        return Err(Error::Feature(format!("anchor hour {anchor_hour} outside 0-23")));
    }
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let last = records.last().expect("non-empty").hour;
    let by_hour: HashMap<Timestamp, &HourlyRecord> = records.iter().map(|r| (r.hour, r)).collect();

    let first_anchor = Timestamp::from_date(first.hour.date())?.add_hours(anchor_hour as i64);
    let mut out = Vec::new();
    let mut end = first_anchor;
    while end.add_hours(-24) <= last {
        let window: Option<Vec<&HourlyRecord>> =
            (0..24).map(|h| by_hour.get(&end.add_hours(h - 24)).copied()).collect();
        if let Some(window) = window {
            out.push(summarise(end, &window));
        }
        end = end.add_hours(24);
    }
    Ok(out)
}

fn summarise(window_end: Timestamp, window: &[&HourlyRecord]) -> DailyRecord {
    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    for r in window {
        for (name, v) in hour_quantities(r) {
            *values.entry(name).or_insert(0.0) += v;
        }
    }
    for v in values.values_mut() {
        *v /= window.len() as f64;
    }
    let date = window_end.date();
    values.insert("year".into(), date.year() as f64);
    values.insert("month".into(), date.month() as f64);
    values.insert("day_of_month".into(), date.day() as f64);
    values.insert("day_of_week".into(), window_end.day_of_week() as f64);
    DailyRecord { window_end, values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmetrics::mean_and_sd;
    use crate::testutil::record;

    fn run(start: &str, hours: i64, f: impl Fn(i64) -> u32) -> Vec<HourlyRecord> {
        let t0: Timestamp = start.parse().unwrap();
        (0..hours).map(|h| record(t0.add_hours(h), f(h))).collect()
    }

    #[test]
    fn constant_series_gives_constant_days() {
        let recs = run("2019-01-01T00:00", 48, |_| 5);
        let days = daily_aggregate(&recs, 17).unwrap();
        // only the window ending 2019-01-02T17:00 is complete
        assert_eq!(days.len(), 1);
        assert_eq!(days[0].window_end.to_string(), "2019-01-02T17:00");
        assert_eq!(days[0].value("waiting_count"), Some(5.0));
        assert_eq!(days[0].value("weather10_clear"), Some(1.0));

        let aligned = run("2019-01-01T17:00", 48, |_| 5);
        assert_eq!(daily_aggregate(&aligned, 17).unwrap().len(), 2);
    }

    #[test]
    fn windows_with_gaps_are_dropped() {
        let mut recs = run("2019-01-01T17:00", 72, |h| h as u32);
        recs.retain(|r| r.hour.to_string() != "2019-01-02T20:00");
        let days = daily_aggregate(&recs, 17).unwrap();
        let ends: Vec<String> = days.iter().map(|d| d.window_end.to_string()).collect();
        assert_eq!(ends, vec!["2019-01-02T17:00", "2019-01-04T17:00"]);
    }

    #[test]
    fn tiled_means_are_preserved() {
        let recs = run("2019-01-01T17:00", 24 * 10, |h| ((h * 7919) % 37) as u32);
        let days = daily_aggregate(&recs, 17).unwrap();
        assert_eq!(days.len(), 10);
        let hourly: Vec<f64> = recs.iter().map(|r| r.waiting_count as f64).collect();
        let daily: Vec<f64> = days.iter().map(|d| d.value("waiting_count").unwrap()).collect();
        let (hm, hs) = mean_and_sd(&hourly).unwrap();
        let (dm, ds) = mean_and_sd(&daily).unwrap();
        assert!((hm - dm).abs() < 1e-9);
        assert!(ds < hs);
    }

    #[test]
    fn short_input_and_bad_anchor() {
        assert!(daily_aggregate(&run("2019-01-01T00:00", 23, |_| 1), 17)
            .unwrap()
            .is_empty());
        assert!(daily_aggregate(&[], 17).unwrap().is_empty());
        assert!(daily_aggregate(&run("2019-01-01T00:00", 30, |_| 1), 24).is_err());
    }
}

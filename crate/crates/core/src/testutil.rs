//! Synthetic hourly records for unit tests.

use chrono::Datelike;

use crate::featurebuild::WeatherGroup;
use crate::flowmetrics::HourlyRecord;
use crate::ingestion::WeatherCondition;
use crate::rng::SeededStream;
use crate::time::Timestamp;

pub(crate) fn record(hour: Timestamp, waiting: u32) -> HourlyRecord {
    let date = hour.date();
    HourlyRecord {
        hour,
        waiting_count: waiting,
        waiting_count_esi12: 0,
        waiting_count_esi3: waiting,
        waiting_count_esi45: 0,
        avg_waiting_time: 30.0,
        avg_waiting_time_esi12: 0.0,
        avg_waiting_time_esi3: 30.0,
        avg_waiting_time_esi45: 0.0,
        treatment_count: 4,
        avg_treatment_time: 90.0,
        boarding_count: 1,
        avg_boarding_time: 120.0,
        hospital_census: 300,
        eci: (waiting > 20) as u8,
        temperature: 60.0,
        wind_speed: 3.0,
        humidity: 70.0,
        condition10: WeatherCondition::Clear,
        condition5: WeatherGroup::Clear,
        year: date.year(),
        month: date.month(),
        day_of_month: date.day(),
        day_of_week: hour.day_of_week(),
        hour_of_day: hour.hour_of_day(),
        is_holiday: 0,
        is_football: 0,
    }
}

/// `n` consecutive hours from `start` with seeded, varying values.
pub(crate) fn hourly_records(start: &str, n: usize, seed: u64) -> Vec<HourlyRecord> {
    let t0: Timestamp = start.parse().unwrap();
    let mut rng = SeededStream::new(seed, 0);
    (0..n)
        .map(|i| {
            let hour = t0.add_hours(i as i64);
            let base = 8.0 + 6.0 * ((hour.hour_of_day() as f64 - 7.0) / 24.0 * std::f64::consts::TAU).sin();
            let waiting = rng.poisson(base.max(0.5)) as u32;
            let mut r = record(hour, waiting);
            r.waiting_count_esi12 = waiting / 4;
            r.waiting_count_esi45 = waiting / 6;
            r.waiting_count_esi3 = waiting - r.waiting_count_esi12 - r.waiting_count_esi45;
            r.avg_waiting_time = 20.0 + 30.0 * rng.uniform();
            r.avg_treatment_time = 60.0 + 60.0 * rng.uniform();
            r.treatment_count = rng.poisson(12.0) as u32;
            r.boarding_count = rng.poisson(3.0) as u32;
            r.hospital_census = 280 + rng.below(40) as u32;
            r.temperature = 40.0 + 30.0 * rng.uniform();
            r.wind_speed = 10.0 * rng.uniform();
            r.humidity = 100.0 * rng.uniform();
            r.condition10 = WeatherCondition::ALL[rng.below(WeatherCondition::ALL.len())];
            r.condition5 = r.condition10.into();
            r.is_holiday = (i / 24 % 9 == 0) as u8;
            r.is_football = (i / 24 % 7 == 5) as u8;
            r
        })
        .collect()
}

//! Raw tables to integrated hourly records: parse, clean, index, compute the
//! flow series and merge weather and calendar.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowmetrics::{assemble_hourly_records, compute_flow_series, eci_fit, EciParams, HourlyRecord};
use crate::ingestion::{
    clean_visits, parse_boarding_events, parse_calendar, parse_inpatient_stays, parse_visit_events, parse_weather,
    BoardingInterval, CalendarTable, DateRange, HourIndex, InpatientStay, Parsed, RowError, VisitInterval, WeatherHour,
    DEFAULT_MAX_WAIT_MINUTES,
};
use crate::time::Timestamp;

pub const SOURCE_FILES: [&str; 5] = [
    "visits.csv",
    "boarding.csv",
    "inpatient.csv",
    "weather.csv",
    "calendar.csv",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub max_wait_minutes: i64,
    /// Date ranges removed from the index; clipped to the data span.
    pub exclusions: Vec<DateRange>,
    /// Leading share of effective hours the ECI threshold is fitted on.
    pub eci_fit_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_wait_minutes: DEFAULT_MAX_WAIT_MINUTES,
            exclusions: vec![DateRange::covid()],
            eci_fit_fraction: 0.70,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SourceTables {
    pub visits: Vec<VisitInterval>,
    pub boarding: Vec<BoardingInterval>,
    pub inpatient: Vec<InpatientStay>,
    pub weather: Vec<WeatherHour>,
    pub calendar: CalendarTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileErrors {
    pub file: String,
    pub errors: Vec<RowError>,
}

/// What ingestion did, written next to the integrated table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub span_start: Timestamp,
    pub span_end: Timestamp,
    pub effective_hours: usize,
    pub excluded_hours: usize,
    pub dropped_waiting_intervals: usize,
    pub eci: EciParams,
    pub eci_fit_hours: usize,
    pub row_errors: Vec<FileErrors>,
}

fn open(dir: &Path, name: &str) -> Result<BufReader<File>> {
    let path = dir.join(name);
    File::open(&path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidInput(format!("cannot open {}: {e}", path.display())))
}

/// Reads the five source tables from `dir`, collecting row errors per file.
pub fn read_sources(dir: &Path) -> Result<(SourceTables, Vec<FileErrors>)> {
    let mut errors = Vec::new();
    let mut keep = |name: &str, row_errors: Vec<RowError>| {
        if !row_errors.is_empty() {
            errors.push(FileErrors {
                file: name.into(),
                errors: row_errors,
            });
        }
    };
    let Parsed {
        records: visits,
        row_errors,
    } = parse_visit_events(open(dir, SOURCE_FILES[0])?)?;
    keep(SOURCE_FILES[0], row_errors);
    let Parsed {
        records: boarding,
        row_errors,
    } = parse_boarding_events(open(dir, SOURCE_FILES[1])?)?;
    keep(SOURCE_FILES[1], row_errors);
    let Parsed {
        records: inpatient,
        row_errors,
    } = parse_inpatient_stays(open(dir, SOURCE_FILES[2])?)?;
    keep(SOURCE_FILES[2], row_errors);
    let Parsed {
        records: weather,
        row_errors,
    } = parse_weather(open(dir, SOURCE_FILES[3])?)?;
    keep(SOURCE_FILES[3], row_errors);
    let Parsed {
        records: calendar,
        row_errors,
    } = parse_calendar(open(dir, SOURCE_FILES[4])?)?;
    keep(SOURCE_FILES[4], row_errors);
    let calendar = calendar.into_iter().next().unwrap_or_default();
    Ok((
        SourceTables {
            visits,
            boarding,
            inpatient,
            weather,
            calendar,
        },
        errors,
    ))
}

/// The hourly span is the one covered by the weather table.
pub fn integrate(tables: SourceTables, options: &IngestOptions) -> Result<(Vec<HourlyRecord>, IngestSummary)> {
    let (Some(first), Some(last)) = (
        tables.weather.iter().map(|w| w.hour).min(),
        tables.weather.iter().map(|w| w.hour).max(),
    ) else {
        return Err(Error::Weather(
            "weather table is empty, so the hourly span is unknown".into(),
        ));
    };
    let (start, end) = (first, last.add_hours(1));
    let exclusions = options
        .exclusions
        .iter()
        .filter_map(|r| r.clip_to_span(start, end))
        .map(|c| (c.start, c.end))
        .collect();
    let index = HourIndex::from_hour_ranges(start, end, exclusions)?;

    let (visits, dropped) = clean_visits(tables.visits, options.max_wait_minutes)?;
    let series = compute_flow_series(&visits, &tables.boarding, &tables.inpatient, &index)?;
    if !(options.eci_fit_fraction > 0.0 && options.eci_fit_fraction <= 1.0) {
        return Err(Error::InvalidInput("ECI fit fraction must lie in (0, 1]".into()));
    }
    let waiting = series.waiting.total.values();
    let fit_hours = ((waiting.len() as f64 * options.eci_fit_fraction + 1e-9).floor() as usize).max(2);
    let eci = eci_fit(&waiting[..fit_hours.min(waiting.len())])?;
    let records = assemble_hourly_records(&series, &eci, &tables.weather, &tables.calendar, &index)?;
    let summary = IngestSummary {
        span_start: start,
        span_end: end,
        effective_hours: index.effective_len(),
        excluded_hours: index.length() - index.effective_len(),
        dropped_waiting_intervals: dropped,
        eci,
        eci_fit_hours: fit_hours.min(waiting.len()),
        row_errors: Vec::new(),
    };
    Ok((records, summary))
}

/// [`read_sources`] followed by [`integrate`].
pub fn ingest_dir(dir: &Path, options: &IngestOptions) -> Result<(Vec<HourlyRecord>, IngestSummary)> {
    let (tables, errors) = read_sources(dir)?;
    let (records, mut summary) = integrate(tables, options)?;
    summary.row_errors = errors;
    Ok((records, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_world, SynthConfig};

    fn world_dir(cfg: &SynthConfig) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (name, bytes) in generate_world(cfg).unwrap().render().unwrap() {
            std::fs::write(dir.path().join(name), bytes).unwrap();
        }
        dir
    }

    #[test]
    fn synthetic_world_round_trips_to_truth() {
        let cfg = SynthConfig {
            days: 14,
            seed: 3,
            ..SynthConfig::default()
        };
        let dir = world_dir(&cfg);
        let (records, summary) = ingest_dir(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(records.len(), 14 * 24);
        assert_eq!(summary.excluded_hours, 0);
        assert_eq!(summary.dropped_waiting_intervals, 0);
        assert!(summary.row_errors.is_empty());
        let truth = generate_world(&cfg).unwrap().truth;
        for (r, t) in records.iter().zip(&truth) {
            assert_eq!(r.hour, t.hour);
            assert_eq!(r.waiting_count, t.true_waiting_count);
            assert_eq!(r.treatment_count, t.true_treatment_count);
            assert_eq!(r.boarding_count, t.true_boarding_count);
        }
        assert!(records.iter().any(|r| r.hospital_census > 0));
    }

    #[test]
    fn covid_window_clipped_to_span() {
        let cfg = SynthConfig {
            start: "2019-12-25T00:00".parse().unwrap(),
            days: 14,
            ..SynthConfig::default()
        };
        let dir = world_dir(&cfg);
        let (records, summary) = ingest_dir(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(records.len(), 7 * 24);
        assert_eq!(summary.excluded_hours, 7 * 24);
        assert!(records
            .iter()
            .all(|r| r.hour.date().to_string().as_str() < "2020-01-01"));
    }

    #[test]
    fn eci_fit_on_leading_hours() {
        let cfg = SynthConfig {
            days: 10,
            ..SynthConfig::default()
        };
        let dir = world_dir(&cfg);
        let (records, summary) = ingest_dir(dir.path(), &IngestOptions::default()).unwrap();
        assert_eq!(summary.eci_fit_hours, 168);
        let lead: Vec<f64> = records[..168].iter().map(|r| r.waiting_count as f64).collect();
        let (mean, sd) = crate::flowmetrics::mean_and_sd(&lead).unwrap();
        assert_eq!((summary.eci.mean, summary.eci.sd), (mean, sd));
        for r in &records {
            assert_eq!(r.eci == 1, r.waiting_count as f64 >= summary.eci.threshold());
        }
    }

    #[test]
    fn missing_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_dir(dir.path(), &IngestOptions::default()).is_err());
    }
}

//! Source-table parsing, validation and cleaning.
//!
//! Every table is comma-delimited UTF-8 with a fixed header. A malformed row
//! never aborts the stream: it is skipped and reported with its line number.

mod hour_index;
mod weather;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use chrono::NaiveDate;
use csv::StringRecord;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{parse_date, Timestamp};

pub use hour_index::{build_hour_index, ClippedRange, DateRange, HourIndex};
pub use weather::{align_weather, WeatherCondition, WeatherHour, MAX_WEATHER_FILL_HOURS};

pub const VISITS_HEADER: [&str; 6] = ["visit_id", "patient_id", "location", "arrival", "departure", "esi"];
pub const BOARDING_HEADER: [&str; 3] = ["visit_id", "bed_request", "ed_checkout"];
pub const INPATIENT_HEADER: [&str; 3] = ["stay_id", "admit", "discharge"];
pub const WEATHER_HEADER: [&str; 5] = ["hour", "temp_f", "wind_mps", "humidity_pct", "condition"];
pub const CALENDAR_HEADER: [&str; 2] = ["date", "kind"];

/// Default waiting-room cut-off: stays longer than nine hours are dropped.
pub const DEFAULT_MAX_WAIT_MINUTES: i64 = 540;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Waiting,
    Treatment,
}

impl FromStr for Location {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "waiting" => Ok(Self::Waiting),
            "treatment" => Ok(Self::Treatment),
            other => Err(Error::InvalidInput(format!("unknown location {other:?}"))),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Waiting => "waiting",
            Self::Treatment => "treatment",
        })
    }
}

/// One waiting- or treatment-room stay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitInterval {
    pub visit_id: String,
    pub patient_id: String,
    pub location: Location,
    pub arrival: Timestamp,
    pub departure: Timestamp,
    pub esi: Option<u8>,
}

impl VisitInterval {
    pub fn duration_minutes(&self) -> i64 {
        self.departure.minutes() - self.arrival.minutes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoardingInterval {
    pub visit_id: String,
    pub bed_request: Timestamp,
    pub ed_checkout: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InpatientStay {
    pub stay_id: String,
    pub admit: Timestamp,
    pub discharge: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CalendarTable {
    pub holidays: BTreeSet<NaiveDate>,
    pub football_games: BTreeSet<NaiveDate>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the source file (the header is line 1).
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Parsed rows plus the rows that were rejected.
#[derive(Debug, Clone)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub row_errors: Vec<RowError>,
}

struct Columns(HashMap<&'static str, usize>);

impl Columns {
    fn resolve(table: &'static str, headers: &StringRecord, required: &[&'static str]) -> Result<Self> {
        let mut map = HashMap::new();
        for &name in required {
            let pos = headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::MissingColumn {
                    table,
                    column: name.to_string(),
                })?;
            map.insert(name, pos);
        }
        Ok(Self(map))
    }

    fn get<'r>(&self, record: &'r StringRecord, name: &str) -> std::result::Result<&'r str, String> {
        let pos = self.0[name];
        record
            .get(pos)
            .map(str::trim)
            .ok_or_else(|| format!("missing field `{name}`"))
    }
}

fn read_table<R, T, F>(source: R, table: &'static str, required: &[&'static str], parse_row: F) -> Result<Parsed<T>>
where
    R: Read,
    F: Fn(&Columns, &StringRecord) -> std::result::Result<T, String>,
{
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let columns = Columns::resolve(table, &headers, required)?;
    let mut records = Vec::new();
    let mut row_errors = Vec::new();
    for result in reader.records() {
        match result {
            Ok(record) => {
                let line = record.position().map_or(0, |p| p.line());
                match parse_row(&columns, &record) {
                    Ok(value) => records.push(value),
                    Err(message) => row_errors.push(RowError { line, message }),
                }
            }
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                if matches!(e.kind(), csv::ErrorKind::Io(_)) {
                    return Err(e.into());
                }
                row_errors.push(RowError {
                    line,
                    message: e.to_string(),
                });
            }
        }
    }
    Ok(Parsed { records, row_errors })
}

fn timestamp(columns: &Columns, record: &StringRecord, name: &str) -> std::result::Result<Timestamp, String> {
    columns.get(record, name)?.parse().map_err(|e: Error| e.to_string())
}

fn number(columns: &Columns, record: &StringRecord, name: &str) -> std::result::Result<f64, String> {
    let raw = columns.get(record, name)?;
    let value: f64 = raw.parse().map_err(|_| format!("`{name}` is not a number: {raw:?}"))?;
    if !value.is_finite() {
        return Err(format!("`{name}` is not finite"));
    }
    Ok(value)
}

fn ordered(start: Timestamp, end: Timestamp, what: &str) -> std::result::Result<(), String> {
    if end < start {
        Err(format!("{what}: end {end} precedes start {start}"))
    } else {
        Ok(())
    }
}

pub fn parse_visit_events<R: Read>(source: R) -> Result<Parsed<VisitInterval>> {
    read_table(source, "visits", &VISITS_HEADER, |cols, rec| {
        let visit_id = cols.get(rec, "visit_id")?.to_string();
        let patient_id = cols.get(rec, "patient_id")?.to_string();
        if visit_id.is_empty() {
            return Err("empty visit_id".into());
        }
        let location: Location = cols.get(rec, "location")?.parse().map_err(|e: Error| e.to_string())?;
        let arrival = timestamp(cols, rec, "arrival")?;
        let departure = timestamp(cols, rec, "departure")?;
        ordered(arrival, departure, "visit")?;
        let esi = match cols.get(rec, "esi")? {
            "" => None,
            raw => match raw.parse::<u8>() {
                Ok(v @ 1..=5) => Some(v),
                _ => return Err(format!("ESI must be 1-5, got {raw:?}")),
            },
        };
        Ok(VisitInterval {
            visit_id,
            patient_id,
            location,
            arrival,
            departure,
            esi,
        })
    })
}

pub fn parse_boarding_events<R: Read>(source: R) -> Result<Parsed<BoardingInterval>> {
    read_table(source, "boarding", &BOARDING_HEADER, |cols, rec| {
        let bed_request = timestamp(cols, rec, "bed_request")?;
        let ed_checkout = timestamp(cols, rec, "ed_checkout")?;
        ordered(bed_request, ed_checkout, "boarding")?;
        Ok(BoardingInterval {
            visit_id: cols.get(rec, "visit_id")?.to_string(),
            bed_request,
            ed_checkout,
        })
    })
}

pub fn parse_inpatient_stays<R: Read>(source: R) -> Result<Parsed<InpatientStay>> {
    read_table(source, "inpatient", &INPATIENT_HEADER, |cols, rec| {
        let admit = timestamp(cols, rec, "admit")?;
        let discharge = timestamp(cols, rec, "discharge")?;
        ordered(admit, discharge, "inpatient stay")?;
        Ok(InpatientStay {
            stay_id: cols.get(rec, "stay_id")?.to_string(),
            admit,
            discharge,
        })
    })
}

pub fn parse_weather<R: Read>(source: R) -> Result<Parsed<WeatherHour>> {
    read_table(source, "weather", &WEATHER_HEADER, |cols, rec| {
        let hour = timestamp(cols, rec, "hour")?;
        if !hour.is_hour_aligned() {
            return Err(format!("weather hour {hour} is not hour-aligned"));
        }
        let humidity = number(cols, rec, "humidity_pct")?;
        if !(0.0..=100.0).contains(&humidity) {
            return Err(format!("humidity {humidity} outside 0-100"));
        }
        Ok(WeatherHour {
            hour,
            temperature: number(cols, rec, "temp_f")?,
            wind_speed: number(cols, rec, "wind_mps")?,
            humidity,
            condition: cols.get(rec, "condition")?.parse().map_err(|e: Error| e.to_string())?,
        })
    })
}

#[derive(Debug, Clone, Copy)]
enum CalendarKind {
    Holiday,
    Football,
}

pub fn parse_calendar<R: Read>(source: R) -> Result<Parsed<CalendarTable>> {
    let rows = read_table(source, "calendar", &CALENDAR_HEADER, |cols, rec| {
        let date = parse_date(cols.get(rec, "date")?).map_err(|e| e.to_string())?;
        let kind = match cols.get(rec, "kind")?.to_ascii_lowercase().as_str() {
            "holiday" => CalendarKind::Holiday,
            "football" => CalendarKind::Football,
            other => return Err(format!("unknown calendar kind {other:?}")),
        };
        Ok((date, kind))
    })?;
    let mut table = CalendarTable::default();
    for (date, kind) in rows.records {
        match kind {
            CalendarKind::Holiday => table.holidays.insert(date),
            CalendarKind::Football => table.football_games.insert(date),
        };
    }
    Ok(Parsed {
        records: vec![table],
        row_errors: rows.row_errors,
    })
}

fn writer<W: Write>(sink: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
    w.write_record(header)?;
    Ok(w)
}

pub fn write_visits<W: Write>(sink: W, visits: &[VisitInterval]) -> Result<()> {
    let mut w = writer(sink, &VISITS_HEADER)?;
    for v in visits {
        let esi = v.esi.map(|e| e.to_string()).unwrap_or_default();
        w.write_record([
            v.visit_id.as_str(),
            v.patient_id.as_str(),
            &v.location.to_string(),
            &v.arrival.to_string(),
            &v.departure.to_string(),
            &esi,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_boarding<W: Write>(sink: W, rows: &[BoardingInterval]) -> Result<()> {
    let mut w = writer(sink, &BOARDING_HEADER)?;
    for b in rows {
        w.write_record([
            b.visit_id.as_str(),
            &b.bed_request.to_string(),
            &b.ed_checkout.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_inpatient<W: Write>(sink: W, rows: &[InpatientStay]) -> Result<()> {
    let mut w = writer(sink, &INPATIENT_HEADER)?;
    for s in rows {
        w.write_record([s.stay_id.as_str(), &s.admit.to_string(), &s.discharge.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weather<W: Write>(sink: W, rows: &[WeatherHour]) -> Result<()> {
    let mut w = writer(sink, &WEATHER_HEADER)?;
    for h in rows {
        w.write_record([
            h.hour.to_string(),
            h.temperature.to_string(),
            h.wind_speed.to_string(),
            h.humidity.to_string(),
            h.condition.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_calendar<W: Write>(sink: W, calendar: &CalendarTable) -> Result<()> {
    let mut w = writer(sink, &CALENDAR_HEADER)?;
    for d in &calendar.holidays {
        w.write_record([d.to_string().as_str(), "holiday"])?;
    }
    for d in &calendar.football_games {
        w.write_record([d.to_string().as_str(), "football"])?;
    }
    w.flush()?;
    Ok(())
}

/// Drops waiting-room stays longer than `max_wait_minutes` (strictly greater).
/// Treatment stays are never touched.
pub fn clean_visits(visits: Vec<VisitInterval>, max_wait_minutes: i64) -> Result<(Vec<VisitInterval>, usize)> {
    if max_wait_minutes <= 0 {
        return Err(Error::InvalidInput(format!(
            "max_wait_minutes must be positive, got {max_wait_minutes}"
        )));
    }
    let before = visits.len();
    let kept: Vec<_> = visits
        .into_iter()
        .filter(|v| v.location != Location::Waiting || v.duration_minutes() <= max_wait_minutes)
        .collect();
    let dropped = before - kept.len();
    Ok((kept, dropped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const HEADER: &str = "visit_id,patient_id,location,arrival,departure,esi\n";

    fn ts(s: &str) -> Timestamp {
        s.parse().unwrap()
    }

    fn visit(location: Location, arrival: &str, minutes: i64) -> VisitInterval {
        let arrival = ts(arrival);
        VisitInterval {
            visit_id: "V".into(),
            patient_id: "P".into(),
            location,
            arrival,
            departure: arrival.add_minutes(minutes),
            esi: Some(3),
        }
    }

    #[test]
    fn header_only_gives_empty_sequence() {
        let parsed = parse_visit_events(HEADER.as_bytes()).unwrap();
        assert!(parsed.records.is_empty());
        assert!(parsed.row_errors.is_empty());
    }

    #[test]
    fn parses_canonical_visit_row() {
        let src = format!("{HEADER}V1,P1,waiting,2019-01-05T10:10,2019-01-05T11:15,3\n");
        let parsed = parse_visit_events(src.as_bytes()).unwrap();
        assert_eq!(
            parsed.records,
            vec![VisitInterval {
                visit_id: "V1".into(),
                patient_id: "P1".into(),
                location: Location::Waiting,
                arrival: ts("2019-01-05T10:10"),
                departure: ts("2019-01-05T11:15"),
                esi: Some(3),
            }]
        );
    }

    #[test]
    fn location_is_case_insensitive_and_esi_optional() {
        let src = format!("{HEADER}V1,P1,TREATMENT,2019-01-05T10:10,2019-01-05T11:15,\n");
        let parsed = parse_visit_events(src.as_bytes()).unwrap();
        assert_eq!(parsed.records[0].location, Location::Treatment);
        assert_eq!(parsed.records[0].esi, None);
    }

    #[test]
    fn bad_rows_are_reported_not_emitted() {
        let src = format!(
            "{HEADER}V1,P1,waiting,2019-01-05T12:00,2019-01-05T11:15,3\n\
             V2,P2,waiting,2019-01-05T10:00,2019-01-05T11:15,7\n\
             V3,P3,waiting,yesterday,2019-01-05T11:15,2\n\
             V4,P4,waiting,2019-01-05T10:00,2019-01-05T11:15,2\n"
        );
        let parsed = parse_visit_events(src.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].visit_id, "V4");
        let lines: Vec<u64> = parsed.row_errors.iter().map(|e| e.line).collect();
        assert_eq!(lines, vec![2, 3, 4]);
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let err = parse_visit_events("visit_id,patient_id,location,arrival,esi\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "departure"));
    }

    #[test]
    fn weather_mist_and_bad_humidity() {
        let src = "hour,temp_f,wind_mps,humidity_pct,condition\n\
                   2019-01-05T10:00,41.5,3.2,88,Mist\n\
                   2019-01-05T11:00,41.5,3.2,140,Clear\n\
                   2019-01-05T12:30,41.5,3.2,40,Clear\n";
        let parsed = parse_weather(src.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].condition, WeatherCondition::Mist);
        assert_eq!(parsed.row_errors.len(), 2);
    }

    #[test]
    fn calendar_counts_holidays() {
        let mut src = String::from("date,kind\n");
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
        for i in 0..34 {
            src.push_str(&format!("{},holiday\n", start + chrono::Duration::days(i * 30)));
        }
        src.push_str("2019-09-07,football\n");
        let parsed = parse_calendar(src.as_bytes()).unwrap();
        assert_eq!(parsed.records[0].holidays.len(), 34);
        assert_eq!(parsed.records[0].football_games.len(), 1);
    }

    #[test]
    fn empty_boarding_file() {
        let parsed = parse_boarding_events("visit_id,bed_request,ed_checkout\n".as_bytes()).unwrap();
        assert!(parsed.records.is_empty());
    }

    #[test]
    fn nine_hour_rule_is_strict_and_waiting_only() {
        let visits = vec![
            visit(Location::Waiting, "2019-01-05T10:00", 541),
            visit(Location::Waiting, "2019-01-05T10:00", 540),
            visit(Location::Treatment, "2019-01-05T10:00", 700),
        ];
        let (kept, dropped) = clean_visits(visits, DEFAULT_MAX_WAIT_MINUTES).unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].duration_minutes(), 540);
        assert_eq!(kept[1].location, Location::Treatment);
        assert!(clean_visits(vec![], 0).is_err());
    }

    fn arb_visit() -> impl Strategy<Value = VisitInterval> {
        (
            "[A-Z][0-9]{1,4}",
            "[a-z]{1,3}[0-9]{0,3}",
            any::<bool>(),
            0i64..5_000_000,
            0i64..1_000,
            proptest::option::of(1u8..=5),
        )
            .prop_map(|(visit_id, patient_id, waiting, start, len, esi)| {
                let arrival = Timestamp::from_minutes(start).unwrap();
                VisitInterval {
                    visit_id,
                    patient_id,
                    location: if waiting {
                        Location::Waiting
                    } else {
                        Location::Treatment
                    },
                    arrival,
                    departure: arrival.add_minutes(len),
                    esi,
                }
            })
    }

    proptest! {
        #[test]
        fn visits_round_trip(visits in proptest::collection::vec(arb_visit(), 0..40)) {
            let mut buf = Vec::new();
            write_visits(&mut buf, &visits).unwrap();
            let parsed = parse_visit_events(buf.as_slice()).unwrap();
            prop_assert!(parsed.row_errors.is_empty());
            prop_assert_eq!(parsed.records, visits);
        }

        #[test]
        fn cleaning_is_idempotent(visits in proptest::collection::vec(arb_visit(), 0..40)) {
            let (once, _) = clean_visits(visits, 540).unwrap();
            let (twice, dropped) = clean_visits(once.clone(), 540).unwrap();
            prop_assert_eq!(dropped, 0);
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn row_errors_never_abort(good in 0usize..20, bad in 0usize..20, seed in any::<u64>()) {
            let mut rows: Vec<(bool, String)> = Vec::new();
            for i in 0..good {
                rows.push((true, format!("G{i},P,waiting,2019-01-05T10:00,2019-01-05T11:00,2")));
            }
            for i in 0..bad {
                rows.push((false, format!("B{i},P,waiting,2019-01-05T10:00,2019-01-05T09:00,2")));
            }
            // deterministic shuffle
            let mut s = crate::rng::SeededStream::new(seed, 0);
            for i in (1..rows.len()).rev() {
                let j = s.below(i + 1);
                rows.swap(i, j);
            }
            let body: String = rows.iter().map(|(_, r)| format!("{r}\n")).collect();
            let parsed = parse_visit_events(format!("{HEADER}{body}").as_bytes()).unwrap();
            prop_assert_eq!(parsed.records.len(), good);
            prop_assert_eq!(parsed.row_errors.len(), bad);
        }
    }
}

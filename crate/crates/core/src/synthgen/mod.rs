//! Seeded synthetic emergency-department worlds with planted daily and weekly
//! demand cycles, emitted in the ingestion schemas together with their own
//! ground-truth hourly census.

mod calendar;

use std::f64::consts::TAU;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use calendar::{federal_holidays, football_saturdays};

use crate::error::{Error, Result};
use crate::ingestion::{
    write_boarding, write_calendar, write_inpatient, write_visits, write_weather, BoardingInterval, CalendarTable,
    InpatientStay, Location, VisitInterval, WeatherCondition, WeatherHour, DEFAULT_MAX_WAIT_MINUTES,
};
use crate::rng::SeededStream;
use crate::time::{Timestamp, MINUTES_PER_DAY, MINUTES_PER_HOUR};

/// Stream id offsets so that each kind of per-day draw has its own streams.
const VISIT_STREAMS: u64 = 0;
const DIRECT_ADMIT_STREAMS: u64 = 1 << 32;
const WEATHER_STREAM: u64 = 2 << 32;

/// Days of direct admissions simulated before the span so the inpatient
/// census starts near equilibrium.
const CENSUS_WARMUP_DAYS: i64 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Burst {
    pub dates: Vec<NaiveDate>,
    pub multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duration {
    Exponential,
    /// Lognormal with the configured mean and this log-scale sd.
    Lognormal {
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// Midnight starting the span.
    pub start: Timestamp,
    pub days: u32,
    /// Mean arrivals per hour before modulation.
    pub base_arrival_rate: f64,
    pub diurnal_amplitude: f64,
    pub diurnal_peak_hour: u32,
    pub weekly_amplitude: f64,
    /// Day of week (Monday = 0) with the highest demand.
    pub weekly_peak_day: u32,
    pub mean_wait: f64,
    pub mean_treatment: f64,
    pub admit_probability: f64,
    pub mean_boarding: f64,
    pub mean_inpatient_stay: f64,
    /// Non-ED admissions per hour feeding the hospital census.
    pub direct_admission_rate: f64,
    /// Shares of ESI groups 1-2, 3 and 4-5; any remainder arrives unlabelled.
    pub esi_distribution: [f64; 3],
    pub duration: Duration,
    pub extreme_burst: Option<Burst>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            start: Timestamp::from_date(NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date")).expect("valid"),
            days: 90,
            base_arrival_rate: 8.0,
            diurnal_amplitude: 0.5,
            diurnal_peak_hour: 19,
            weekly_amplitude: 0.1,
            weekly_peak_day: 0,
            mean_wait: 75.0,
            mean_treatment: 150.0,
            admit_probability: 0.25,
            mean_boarding: 240.0,
            mean_inpatient_stay: 4.5 * MINUTES_PER_DAY as f64,
            direct_admission_rate: 2.0,
            esi_distribution: [0.264, 0.583, 0.147],
            duration: Duration::Exponential,
            extreme_burst: None,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn end(&self) -> Timestamp {
        self.start.add_minutes(self.days as i64 * MINUTES_PER_DAY)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Synth(m));
        if self.start.minutes() % MINUTES_PER_DAY != 0 {
            return bad(format!("span must start at midnight, got {}", self.start));
        }
        if self.days == 0 {
            return bad("span must cover at least one day".into());
        }
        if self.diurnal_peak_hour > 23 || self.weekly_peak_day > 6 {
            return bad("peak hour must be 0-23 and peak day 0-6".into());
        }
        for (name, v) in [
            ("base_arrival_rate", self.base_arrival_rate),
            ("mean_wait", self.mean_wait),
            ("mean_treatment", self.mean_treatment),
            ("mean_boarding", self.mean_boarding),
            ("mean_inpatient_stay", self.mean_inpatient_stay),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.direct_admission_rate.is_nan() || self.direct_admission_rate < 0.0 {
            return bad("direct_admission_rate must be non-negative".into());
        }
        for (name, v) in [
            ("admit_probability", self.admit_probability),
            ("diurnal_amplitude", self.diurnal_amplitude),
            ("weekly_amplitude", self.weekly_amplitude),
        ] {
            if !(0.0..=f64::MAX).contains(&v) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.admit_probability > 1.0 {
            return bad("admit_probability must lie in [0, 1]".into());
        }
        let esi = self.esi_distribution;
        if esi.iter().any(|p| !(0.0..=1.0).contains(p)) || esi.iter().sum::<f64>() > 1.0 + 1e-9 {
            return bad(format!("ESI shares {esi:?} must be probabilities summing to at most 1"));
        }
        if let Duration::Lognormal { sigma } = self.duration {
            if !(sigma > 0.0 && sigma.is_finite()) {
                return bad("lognormal sigma must be positive".into());
            }
        }
        if let Some(b) = &self.extreme_burst {
            if !(b.multiplier >= 0.0 && b.multiplier.is_finite()) {
                return bad("burst multiplier must be non-negative".into());
            }
        }
        for hour in 0..24 {
            for day in 0..7 {
                if self.shape(hour, day) < 0.0 {
                    return bad(format!("arrival rate is negative at hour {hour} of weekday {day}"));
                }
            }
        }
        Ok(())
    }

    fn shape(&self, hour: u32, weekday: u32) -> f64 {
        let diurnal = 1.0 + self.diurnal_amplitude * (TAU * (hour as f64 - self.diurnal_peak_hour as f64) / 24.0).cos();
        let weekly = 1.0 + self.weekly_amplitude * (TAU * (weekday as f64 - self.weekly_peak_day as f64) / 7.0).cos();
        diurnal * weekly
    }

    /// Expected arrivals during the hour starting at `hour`.
    pub fn arrival_rate(&self, hour: Timestamp) -> f64 {
        let burst = match &self.extreme_burst {
            Some(b) if b.dates.contains(&hour.date()) => b.multiplier,
            _ => 1.0,
        };
        self.base_arrival_rate * self.shape(hour.hour_of_day(), hour.day_of_week()) * burst
    }

    fn draw_duration(&self, rng: &mut SeededStream, mean: f64) -> f64 {
        match self.duration {
            Duration::Exponential => rng.exponential(mean),
            Duration::Lognormal { sigma } => (mean.ln() - sigma * sigma / 2.0 + sigma * rng.standard_normal()).exp(),
        }
    }
}

/// Ground-truth counts for one hour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthHour {
    pub hour: Timestamp,
    pub true_waiting_count: u32,
    pub true_treatment_count: u32,
    pub true_boarding_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub visits: Vec<VisitInterval>,
    pub boarding: Vec<BoardingInterval>,
    pub inpatient: Vec<InpatientStay>,
    pub weather: Vec<WeatherHour>,
    pub calendar: CalendarTable,
    pub truth: Vec<TruthHour>,
}

pub const WORLD_FILES: [&str; 6] = [
    "visits.csv",
    "boarding.csv",
    "inpatient.csv",
    "weather.csv",
    "calendar.csv",
    "truth.csv",
];

impl World {
    /// Rendered files in [`WORLD_FILES`] order.
    pub fn render(&self) -> Result<Vec<(&'static str, Vec<u8>)>> {
        let mut out = Vec::with_capacity(WORLD_FILES.len());
        let mut buf = Vec::new();
        write_visits(&mut buf, &self.visits)?;
        out.push((WORLD_FILES[0], std::mem::take(&mut buf)));
        write_boarding(&mut buf, &self.boarding)?;
        out.push((WORLD_FILES[1], std::mem::take(&mut buf)));
        write_inpatient(&mut buf, &self.inpatient)?;
        out.push((WORLD_FILES[2], std::mem::take(&mut buf)));
        write_weather(&mut buf, &self.weather)?;
        out.push((WORLD_FILES[3], std::mem::take(&mut buf)));
        write_calendar(&mut buf, &self.calendar)?;
        out.push((WORLD_FILES[4], std::mem::take(&mut buf)));
        write_truth(&mut buf, &self.truth)?;
        out.push((WORLD_FILES[5], buf));
        Ok(out)
    }
}

pub fn write_truth<W: std::io::Write>(sink: W, rows: &[TruthHour]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_truth<R: std::io::Read>(source: R) -> Result<Vec<TruthHour>> {
    csv::Reader::from_reader(source)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

struct DayEvents {
    visits: Vec<VisitInterval>,
    boarding: Vec<BoardingInterval>,
    inpatient: Vec<InpatientStay>,
}

fn minutes(x: f64) -> i64 {
    x.floor() as i64
}

fn esi_level(rng: &mut SeededStream, shares: &[f64; 3]) -> Option<u8> {
    let missing = (1.0 - shares.iter().sum::<f64>()).max(0.0);
    Some(match rng.categorical(&[shares[0], shares[1], shares[2], missing]) {
        0 => {
            if rng.uniform() < 0.2 {
                1
            } else {
                2
            }
        }
        1 => 3,
        2 => {
            if rng.uniform() < 0.85 {
                4
            } else {
                5
            }
        }
        _ => return None,
    })
}

fn simulate_day(config: &SynthConfig, day: i64) -> DayEvents {
    let mut rng = SeededStream::new(config.seed, VISIT_STREAMS + day as u64);
    let midnight = config.start.add_minutes(day * MINUTES_PER_DAY);
    let mut ev = DayEvents {
        visits: Vec::new(),
        boarding: Vec::new(),
        inpatient: Vec::new(),
    };
    let mut arrivals: Vec<i64> = Vec::new();
    for h in 0..24 {
        let hour = midnight.add_hours(h);
        let n = rng.poisson(config.arrival_rate(hour));
        let mut within: Vec<i64> = (0..n).map(|_| rng.below(MINUTES_PER_HOUR as usize) as i64).collect();
        within.sort_unstable();
        arrivals.extend(within.into_iter().map(|m| hour.minutes() + m));
    }
    for (i, arrival) in arrivals.into_iter().enumerate() {
        let id = format!("V{day:05}{i:04}");
        let esi = esi_level(&mut rng, &config.esi_distribution);
        let arrival = Timestamp::from_minutes(arrival).expect("within span");
        let wait = minutes(config.draw_duration(&mut rng, config.mean_wait)).min(DEFAULT_MAX_WAIT_MINUTES);
        let seen = arrival.add_minutes(wait);
        let care_end = seen.add_minutes(minutes(config.draw_duration(&mut rng, config.mean_treatment)));
        let admitted = rng.uniform() < config.admit_probability;
        let checkout = if admitted {
            let checkout = care_end.add_minutes(minutes(config.draw_duration(&mut rng, config.mean_boarding)));
            let stay = minutes(config.draw_duration(&mut rng, config.mean_inpatient_stay));
            ev.boarding.push(BoardingInterval {
                visit_id: id.clone(),
                bed_request: care_end,
                ed_checkout: checkout,
            });
            ev.inpatient.push(InpatientStay {
                stay_id: format!("S{day:05}{i:04}"),
                admit: checkout,
                discharge: checkout.add_minutes(stay),
            });
            checkout
        } else {
            care_end
        };
        let patient_id = format!("P{day:05}{i:04}");
        ev.visits.push(VisitInterval {
            visit_id: id.clone(),
            patient_id: patient_id.clone(),
            location: Location::Waiting,
            arrival,
            departure: seen,
            esi,
        });
        ev.visits.push(VisitInterval {
            visit_id: id,
            patient_id,
            location: Location::Treatment,
            arrival: seen,
            departure: checkout,
            esi,
        });
    }
    ev
}

fn direct_admissions(config: &SynthConfig, day: i64) -> Vec<InpatientStay> {
    // warm-up days are negative; shift them into their own stream block
    let stream = DIRECT_ADMIT_STREAMS + (day + CENSUS_WARMUP_DAYS) as u64;
    let mut rng = SeededStream::new(config.seed, stream);
    let midnight = config.start.minutes() + day * MINUTES_PER_DAY;
    let n = rng.poisson(config.direct_admission_rate * 24.0);
    let mut admits: Vec<i64> = (0..n)
        .map(|_| midnight + rng.below(MINUTES_PER_DAY as usize) as i64)
        .collect();
    admits.sort_unstable();
    admits
        .into_iter()
        .enumerate()
        .filter_map(|(i, a)| {
            let stay = minutes(config.draw_duration(&mut rng, config.mean_inpatient_stay));
            let admit = Timestamp::from_minutes(a).ok()?;
            Some(InpatientStay {
                stay_id: format!("D{:05}{i:04}", day + CENSUS_WARMUP_DAYS),
                admit,
                discharge: admit.add_minutes(stay),
            })
        })
        .collect()
}

fn weather(config: &SynthConfig) -> Vec<WeatherHour> {
    let mut rng = SeededStream::new(config.seed, WEATHER_STREAM);
    // Rough shares of an inland US climate.
    let weights = [0.40, 0.30, 0.10, 0.05, 0.03, 0.03, 0.04, 0.02, 0.02, 0.01];
    let hours = config.days as i64 * 24;
    let mut condition = WeatherCondition::ALL[rng.categorical(&weights)];
    (0..hours)
        .map(|h| {
            let hour = config.start.add_hours(h);
            if rng.uniform() < 0.15 {
                condition = WeatherCondition::ALL[rng.categorical(&weights)];
            }
            let season = (TAU * (hour.date().ordinal() as f64 - 200.0) / 365.25).cos();
            let daily = (TAU * (hour.hour_of_day() as f64 - 15.0) / 24.0).cos();
            let temperature = 55.0 + 22.0 * season + 8.0 * daily + 3.0 * rng.standard_normal();
            WeatherHour {
                hour,
                temperature: (temperature * 10.0).round() / 10.0,
                wind_speed: ((2.0 + 1.5 * rng.standard_normal()).abs() * 10.0).round() / 10.0,
                humidity: (65.0 - 15.0 * daily + 10.0 * rng.standard_normal())
                    .clamp(0.0, 100.0)
                    .round(),
                condition,
            }
        })
        .collect()
}

/// Per-hour counts from walking every minute of every stay: a stay is
/// present in an hour when any of its minutes `[start, end]` falls inside it.
pub fn minute_walk_census(intervals: &[(Timestamp, Timestamp)], start: Timestamp, hours: usize) -> Vec<u32> {
    let mut counts = vec![0u32; hours];
    let origin = start.minutes();
    for &(a, b) in intervals {
        let mut last = None;
        for m in a.minutes()..=b.minutes() {
            let offset = m - origin;
            if offset < 0 {
                continue;
            }
            let h = (offset / MINUTES_PER_HOUR) as usize;
            if h >= hours {
                break;
            }
            if last != Some(h) {
                counts[h] += 1;
                last = Some(h);
            }
        }
    }
    counts
}

/// Generates a world. Days are simulated in parallel on their own streams
/// and concatenated in day order, so the result depends only on `config`.
pub fn generate_world(config: &SynthConfig) -> Result<World> {
    config.validate()?;
    let days: Vec<DayEvents> = (0..config.days as i64)
        .into_par_iter()
        .map(|d| simulate_day(config, d))
        .collect();
    let direct: Vec<Vec<InpatientStay>> = (-CENSUS_WARMUP_DAYS..config.days as i64)
        .into_par_iter()
        .map(|d| direct_admissions(config, d))
        .collect();

    let mut visits = Vec::new();
    let mut boarding = Vec::new();
    let mut inpatient: Vec<InpatientStay> = direct.into_iter().flatten().collect();
    for d in days {
        visits.extend(d.visits);
        boarding.extend(d.boarding);
        inpatient.extend(d.inpatient);
    }
    inpatient.sort_by(|a, b| (a.admit, &a.stay_id).cmp(&(b.admit, &b.stay_id)));

    let hours = config.days as usize * 24;
    let spans = |loc: Location| -> Vec<(Timestamp, Timestamp)> {
        visits
            .iter()
            .filter(|v| v.location == loc)
            .map(|v| (v.arrival, v.departure))
            .collect()
    };
    let waiting = minute_walk_census(&spans(Location::Waiting), config.start, hours);
    let treatment = minute_walk_census(&spans(Location::Treatment), config.start, hours);
    let boards: Vec<_> = boarding.iter().map(|b| (b.bed_request, b.ed_checkout)).collect();
    let boarded = minute_walk_census(&boards, config.start, hours);
    let truth = (0..hours)
        .map(|h| TruthHour {
            hour: config.start.add_hours(h as i64),
            true_waiting_count: waiting[h],
            true_treatment_count: treatment[h],
            true_boarding_count: boarded[h],
        })
        .collect();

    let (first, last) = (config.start.date(), config.end().add_minutes(-1).date());
    let calendar = CalendarTable {
        holidays: (first.year()..=last.year())
            .flat_map(federal_holidays)
            .filter(|d| (first..=last).contains(d))
            .collect(),
        football_games: (first.year()..=last.year())
            .flat_map(football_saturdays)
            .filter(|d| (first..=last).contains(d))
            .collect(),
    };

    Ok(World {
        visits,
        boarding,
        inpatient,
        weather: weather(config),
        calendar,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flowmetrics::{interval_census, mean_and_sd};
    use crate::ingestion::build_hour_index;

    fn small(days: u32, seed: u64) -> SynthConfig {
        SynthConfig {
            days,
            seed,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_bytes() {
        let a = generate_world(&small(5, 7)).unwrap().render().unwrap();
        let b = generate_world(&small(5, 7)).unwrap().render().unwrap();
        assert_eq!(a, b);
        let c = generate_world(&small(5, 8)).unwrap().render().unwrap();
        assert_ne!(a[0].1, c[0].1);
    }

    #[test]
    fn visit_and_boarding_invariants() {
        let w = generate_world(&small(20, 3)).unwrap();
        assert!(w.visits.iter().all(|v| v.arrival <= v.departure));
        for b in &w.boarding {
            let treat = w
                .visits
                .iter()
                .find(|v| v.visit_id == b.visit_id && v.location == Location::Treatment)
                .unwrap();
            assert!(treat.arrival <= b.bed_request && b.bed_request <= b.ed_checkout);
        }
        assert!(w
            .visits
            .iter()
            .all(|v| v.location == Location::Treatment || v.duration_minutes() <= DEFAULT_MAX_WAIT_MINUTES));
    }

    #[test]
    fn admitted_fraction_converges() {
        let cfg = small(60, 11);
        let w = generate_world(&cfg).unwrap();
        let n = (w.visits.len() / 2) as f64;
        let p = cfg.admit_probability;
        let observed = w.boarding.len() as f64 / n;
        assert!((observed - p).abs() < 3.0 * (p * (1.0 - p) / n).sqrt());
    }

    #[test]
    fn flat_world_matches_analytic_mean() {
        let cfg = SynthConfig {
            diurnal_amplitude: 0.0,
            weekly_amplitude: 0.0,
            ..small(60, 5)
        };
        let w = generate_world(&cfg).unwrap();
        let counts: Vec<f64> = w.truth.iter().skip(24).map(|t| t.true_waiting_count as f64).collect();
        // a stay of w whole minutes touches an hour when its arrival minute
        // lies in the w + 60 minutes before the hour ends; floor(Exp(m))
        // capped at c has mean sum_{k=1..c} exp(-k/m)
        let wait_mean: f64 = (1..=DEFAULT_MAX_WAIT_MINUTES)
            .map(|k| (-(k as f64) / cfg.mean_wait).exp())
            .sum();
        let expected = cfg.base_arrival_rate * (wait_mean + 60.0) / 60.0;
        let (mean, sd) = mean_and_sd(&counts).unwrap();
        // neighbouring hours share stays; thin to every 6th hour for the error
        let se = sd / ((counts.len() / 6) as f64).sqrt();
        assert!(
            (mean - expected).abs() < 3.0 * se,
            "mean {mean}, expected {expected}, se {se}"
        );
    }

    #[test]
    fn occupancy_peaks_near_configured_hour() {
        let w = generate_world(&small(90, 42)).unwrap();
        let mut by_hour = [0.0; 24];
        for t in &w.truth {
            by_hour[t.hour.hour_of_day() as usize] += t.true_waiting_count as f64;
        }
        let peak = (0..24).max_by(|&a, &b| by_hour[a].total_cmp(&by_hour[b])).unwrap();
        assert!((18..=20).contains(&peak), "peak at {peak}");
    }

    #[test]
    fn truth_matches_interval_census() {
        let cfg = small(10, 9);
        let w = generate_world(&cfg).unwrap();
        let idx = build_hour_index(cfg.start, cfg.end(), &[]).unwrap();
        let boards: Vec<_> = w.boarding.iter().map(|b| (b.bed_request, b.ed_checkout)).collect();
        let got = interval_census(&boards, &idx).unwrap();
        let want: Vec<f64> = w.truth.iter().map(|t| t.true_boarding_count as f64).collect();
        assert_eq!(got.values(), want.as_slice());
    }

    #[test]
    fn calendar_and_weather_cover_span() {
        let cfg = SynthConfig {
            start: "2019-08-01T00:00".parse().unwrap(),
            ..small(183, 1)
        };
        let w = generate_world(&cfg).unwrap();
        assert_eq!(w.weather.len(), 183 * 24);
        assert!(w.weather.iter().all(|h| (0.0..=100.0).contains(&h.humidity)));
        // Labor Day through Martin Luther King Jr. Day
        assert_eq!(w.calendar.holidays.len(), 7);
        assert_eq!(w.calendar.football_games.len(), 13);
    }

    #[test]
    fn truth_csv_round_trip() {
        let w = generate_world(&small(2, 4)).unwrap();
        let mut buf = Vec::new();
        write_truth(&mut buf, &w.truth).unwrap();
        assert!(buf.starts_with(b"hour,true_waiting_count,true_treatment_count,true_boarding_count\n"));
        assert_eq!(read_truth(buf.as_slice()).unwrap(), w.truth);
    }

    #[test]
    fn invalid_configs() {
        for cfg in [
            SynthConfig {
                diurnal_amplitude: 1.5,
                ..small(3, 0)
            },
            SynthConfig {
                esi_distribution: [0.5, 0.5, 0.5],
                ..small(3, 0)
            },
            SynthConfig {
                mean_wait: 0.0,
                ..small(3, 0)
            },
            SynthConfig {
                start: "2019-01-01T05:00".parse().unwrap(),
                ..small(3, 0)
            },
            SynthConfig {
                admit_probability: 1.2,
                ..small(3, 0)
            },
        ] {
            assert!(generate_world(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn burst_raises_arrivals() {
        let date = NaiveDate::from_ymd_opt(2019, 1, 3).unwrap();
        let cfg = SynthConfig {
            extreme_burst: Some(Burst {
                dates: vec![date],
                multiplier: 3.0,
            }),
            ..small(5, 2)
        };
        let w = generate_world(&cfg).unwrap();
        let per_day = |d: NaiveDate| w.visits.iter().filter(|v| v.arrival.date() == d).count();
        assert!(per_day(date) > 2 * per_day(NaiveDate::from_ymd_opt(2019, 1, 2).unwrap()));
    }

    #[test]
    fn lognormal_durations_keep_mean() {
        let cfg = SynthConfig {
            duration: Duration::Lognormal { sigma: 0.6 },
            ..small(30, 6)
        };
        let w = generate_world(&cfg).unwrap();
        let treat: Vec<f64> = w
            .visits
            .iter()
            .filter(|v| v.location == Location::Waiting)
            .map(|v| v.duration_minutes() as f64)
            .collect();
        let (mean, _) = mean_and_sd(&treat).unwrap();
        assert!((mean - (cfg.mean_wait - 0.5)).abs() < 3.0, "{mean}");
    }
}

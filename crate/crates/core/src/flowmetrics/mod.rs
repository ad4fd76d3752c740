//! Hourly patient-flow metrics computed from stay intervals.
//!
//! A stay `[start, end]` is present in hour `t` iff `start < t + 1h` and
//! `end >= t`. The same membership rule drives every count (waiting,
//! treatment, boarding, hospital census) and every average dwell time.

mod records;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{BoardingInterval, HourIndex, InpatientStay, Location, VisitInterval};
use crate::time::Timestamp;

pub use records::{assemble_hourly_records, read_integrated, write_integrated, HourlyRecord, INTEGRATED_COLUMNS};

/// One value per non-excluded hour of an [`HourIndex`].
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(index: &HourIndex, values: Vec<f64>) -> Result<Self> {
        if values.len() != index.effective_len() {
            return Err(Error::InvalidInput(format!(
                "series has {} values but the index has {} hours",
                values.len(),
                index.effective_len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("series values must be finite".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Inclusive slot range of the hours an interval touches, clipped to the index.
fn touched_slots(start: Timestamp, end: Timestamp, index: &HourIndex) -> Option<(usize, usize)> {
    let first = start.hour_floor().max(index.start());
    let last = end.hour_floor().min(index.end().add_hours(-1));
    if first > last {
        return None;
    }
    Some((index.slot(first)?, index.slot(last)?))
}

fn check_ordered(intervals: &[(Timestamp, Timestamp)]) -> Result<()> {
    match intervals.iter().find(|(s, e)| e < s) {
        Some((s, e)) => Err(Error::InvalidInput(format!(
            "interval ends at {e} before it starts at {s}"
        ))),
        None => Ok(()),
    }
}

/// Number of intervals present in each hour.
pub fn interval_census(intervals: &[(Timestamp, Timestamp)], index: &HourIndex) -> Result<HourlySeries> {
    check_ordered(intervals)?;
    let mut diff = vec![0i64; index.length() + 1];
    for &(start, end) in intervals {
        if let Some((first, last)) = touched_slots(start, end, index) {
            diff[first] += 1;
            diff[last + 1] -= 1;
        }
    }
    let mut values = Vec::with_capacity(index.effective_len());
    let mut running = 0i64;
    for (slot, delta) in diff[..index.length()].iter().enumerate() {
        running += delta;
        if index.position_of_slot(slot).is_some() {
            values.push(running as f64);
        }
    }
    HourlySeries::new(index, values)
}

/// Mean elapsed dwell at the end of each hour over the stays present in it.
///
/// A stay contributes `min(end, t + 1h) - start` minutes to hour `t`. Hours
/// with no stays are 0.
pub fn avg_dwell_time(intervals: &[(Timestamp, Timestamp)], index: &HourIndex) -> Result<HourlySeries> {
    check_ordered(intervals)?;
    let mut total = vec![0.0f64; index.length()];
    let mut members = vec![0u32; index.length()];
    for &(start, end) in intervals {
        if let Some((first, last)) = touched_slots(start, end, index) {
            for slot in first..=last {
                let hour_end = index.start().add_hours(slot as i64 + 1);
                let elapsed = end.min(hour_end).minutes() - start.minutes();
                total[slot] += elapsed.max(0) as f64;
                members[slot] += 1;
            }
        }
    }
    let values = (0..index.length())
        .filter(|&slot| index.position_of_slot(slot).is_some())
        .map(|slot| match members[slot] {
            0 => 0.0,
            n => total[slot] / n as f64,
        })
        .collect();
    HourlySeries::new(index, values)
}

/// ESI groups used for the stratified waiting metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EsiGroup {
    /// ESI 1-2, very urgent.
    Urgent12,
    /// ESI 3.
    Urgent3,
    /// ESI 4-5, non-urgent.
    NonUrgent45,
}

impl EsiGroup {
    pub fn of(esi: Option<u8>) -> Option<Self> {
        match esi? {
            1 | 2 => Some(Self::Urgent12),
            3 => Some(Self::Urgent3),
            4 | 5 => Some(Self::NonUrgent45),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stratified {
    pub total: HourlySeries,
    pub esi12: HourlySeries,
    pub esi3: HourlySeries,
    pub esi45: HourlySeries,
}

fn spans_of(visits: &[VisitInterval], group: Option<EsiGroup>) -> Vec<(Timestamp, Timestamp)> {
    visits
        .iter()
        .filter(|v| group.is_none() || EsiGroup::of(v.esi) == group)
        .map(|v| (v.arrival, v.departure))
        .collect()
}

/// Waiting counts overall and per ESI group. Visits without an ESI label
/// count toward the total only. Callers pass waiting-room visits.
pub fn stratified_census(visits: &[VisitInterval], index: &HourIndex) -> Result<Stratified> {
    Ok(Stratified {
        total: interval_census(&spans_of(visits, None), index)?,
        esi12: interval_census(&spans_of(visits, Some(EsiGroup::Urgent12)), index)?,
        esi3: interval_census(&spans_of(visits, Some(EsiGroup::Urgent3)), index)?,
        esi45: interval_census(&spans_of(visits, Some(EsiGroup::NonUrgent45)), index)?,
    })
}

/// Average waiting times overall and per ESI group.
pub fn stratified_dwell(visits: &[VisitInterval], index: &HourIndex) -> Result<Stratified> {
    Ok(Stratified {
        total: avg_dwell_time(&spans_of(visits, None), index)?,
        esi12: avg_dwell_time(&spans_of(visits, Some(EsiGroup::Urgent12)), index)?,
        esi3: avg_dwell_time(&spans_of(visits, Some(EsiGroup::Urgent3)), index)?,
        esi45: avg_dwell_time(&spans_of(visits, Some(EsiGroup::NonUrgent45)), index)?,
    })
}

/// Collapses the segments of each visit at `location` into one stay from the
/// earliest arrival to the latest departure. Output follows first appearance.
pub fn merge_by_visit(visits: &[VisitInterval], location: Location) -> Vec<VisitInterval> {
    let mut merged: Vec<VisitInterval> = Vec::new();
    let mut slot: HashMap<&str, usize> = HashMap::new();
    for v in visits.iter().filter(|v| v.location == location) {
        match slot.get(v.visit_id.as_str()) {
            Some(&i) => {
                let m = &mut merged[i];
                m.arrival = m.arrival.min(v.arrival);
                m.departure = m.departure.max(v.departure);
                m.esi = m.esi.or(v.esi);
            }
            None => {
                slot.insert(v.visit_id.as_str(), merged.len());
                merged.push(v.clone());
            }
        }
    }
    merged
}

/// Threshold parameters of the extreme case indicator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EciParams {
    pub mean: f64,
    pub sd: f64,
    pub multiplier: f64,
}

impl EciParams {
    pub const DEFAULT_MULTIPLIER: f64 = 2.0;

    pub fn new(mean: f64, sd: f64, multiplier: f64) -> Result<Self> {
        let params = Self { mean, sd, multiplier };
        if sd.is_nan() || sd < 0.0 || !params.threshold().is_finite() {
            return Err(Error::InvalidInput(format!("invalid ECI parameters {params:?}")));
        }
        Ok(params)
    }

    pub fn threshold(&self) -> f64 {
        self.mean + self.multiplier * self.sd
    }
}

/// Population mean and standard deviation of `values`.
pub fn mean_and_sd(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

pub fn eci_fit(values: &[f64]) -> Result<EciParams> {
    if values.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "ECI fit needs at least 2 values, got {}",
            values.len()
        )));
    }
    let (mean, sd) = mean_and_sd(values).expect("non-empty");
    EciParams::new(mean, sd, EciParams::DEFAULT_MULTIPLIER)
}

/// 1 where the count reaches `mean + multiplier * sd`, else 0.
pub fn extreme_case_indicator(values: &[f64], params: &EciParams) -> Vec<f64> {
    let threshold = params.threshold();
    values.iter().map(|&v| if v >= threshold { 1.0 } else { 0.0 }).collect()
}

/// Every hourly metric series for one index.
#[derive(Debug, Clone)]
pub struct FlowSeries {
    pub waiting: Stratified,
    pub waiting_time: Stratified,
    pub treatment_count: HourlySeries,
    pub treatment_time: HourlySeries,
    pub boarding_count: HourlySeries,
    pub boarding_time: HourlySeries,
    pub hospital_census: HourlySeries,
}

pub fn compute_flow_series(
    visits: &[VisitInterval],
    boarding: &[BoardingInterval],
    inpatient: &[InpatientStay],
    index: &HourIndex,
) -> Result<FlowSeries> {
    let waiting = merge_by_visit(visits, Location::Waiting);
    let treatment: Vec<_> = merge_by_visit(visits, Location::Treatment)
        .iter()
        .map(|v| (v.arrival, v.departure))
        .collect();
    let boards: Vec<_> = boarding.iter().map(|b| (b.bed_request, b.ed_checkout)).collect();
    let stays: Vec<_> = inpatient.iter().map(|s| (s.admit, s.discharge)).collect();
    Ok(FlowSeries {
        waiting: stratified_census(&waiting, index)?,
        waiting_time: stratified_dwell(&waiting, index)?,
        treatment_count: interval_census(&treatment, index)?,
        treatment_time: avg_dwell_time(&treatment, index)?,
        boarding_count: interval_census(&boards, index)?,
        boarding_time: avg_dwell_time(&boards, index)?,
        hospital_census: interval_census(&stays, index)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::build_hour_index;
    use crate::rng::SeededStream;
    use proptest::prelude::*;

    fn ts(s: &str) -> Timestamp {
        s.parse().unwrap()
    }

    fn day_index(day: &str) -> HourIndex {
        let start = ts(&format!("{day}T00:00"));
        build_hour_index(start, start.add_hours(24), &[]).unwrap()
    }

    /// Independent oracle: scan every minute of every hour.
    fn minute_scan(intervals: &[(Timestamp, Timestamp)], index: &HourIndex) -> Vec<f64> {
        index
            .hours()
            .iter()
            .map(|t| {
                intervals
                    .iter()
                    .filter(|(s, e)| {
                        (0..60).any(|m| {
                            let minute = t.minutes() + m;
                            s.minutes() <= minute && minute <= e.minutes()
                        })
                    })
                    .count() as f64
            })
            .collect()
    }

    #[test]
    fn boarding_example_spans_two_hours() {
        let idx = day_index("2019-01-05");
        let s = interval_census(&[(ts("2019-01-05T10:10"), ts("2019-01-05T11:15"))], &idx).unwrap();
        for (h, v) in s.values().iter().enumerate() {
            let expected = if h == 10 || h == 11 { 1.0 } else { 0.0 };
            assert_eq!(*v, expected, "hour {h}");
        }
    }

    #[test]
    fn empty_list_is_all_zero() {
        let idx = day_index("2019-01-05");
        assert!(interval_census(&[], &idx).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn ending_on_the_hour_counts_in_that_hour() {
        let idx = day_index("2019-01-05");
        let s = interval_census(&[(ts("2019-01-05T11:30"), ts("2019-01-05T12:00"))], &idx).unwrap();
        assert_eq!(s.values()[11], 1.0);
        assert_eq!(s.values()[12], 1.0);
        assert_eq!(s.values()[13], 0.0);
    }

    #[test]
    fn reversed_interval_is_rejected() {
        let idx = day_index("2019-01-05");
        assert!(interval_census(&[(ts("2019-01-05T12:00"), ts("2019-01-05T11:00"))], &idx).is_err());
    }

    #[test]
    fn census_matches_minute_scan_with_exclusions() {
        let start = ts("2019-01-01T00:00");
        let idx = HourIndex::from_hour_ranges(
            start,
            start.add_hours(24 * 5),
            vec![(start.add_hours(30), start.add_hours(50))],
        )
        .unwrap();
        let mut rng = SeededStream::new(11, 0);
        let intervals: Vec<_> = (0..300)
            .map(|_| {
                let s = start.add_minutes(rng.below(24 * 5 * 60 + 600) as i64 - 300);
                let s = Timestamp::from_minutes(s.minutes().max(0)).unwrap();
                (s, s.add_minutes(rng.below(900) as i64))
            })
            .collect();
        let got = interval_census(&intervals, &idx).unwrap();
        assert_eq!(got.values(), minute_scan(&intervals, &idx).as_slice());
    }

    #[test]
    fn stratified_example() {
        let idx = day_index("2019-01-05");
        let v = |esi| VisitInterval {
            visit_id: format!("V{esi}"),
            patient_id: "P".into(),
            location: Location::Waiting,
            arrival: ts("2019-01-05T08:30"),
            departure: ts("2019-01-05T09:30"),
            esi: Some(esi),
        };
        let s = stratified_census(&[v(1), v(4)], &idx).unwrap();
        assert_eq!(s.total.values()[9], 2.0);
        assert_eq!(s.esi12.values()[9], 1.0);
        assert_eq!(s.esi3.values()[9], 0.0);
        assert_eq!(s.esi45.values()[9], 1.0);

        let all3: Vec<_> = (0..5).map(|_| v(3)).collect();
        let s = stratified_census(&all3, &idx).unwrap();
        assert_eq!(s.esi3, s.total);
    }

    #[test]
    fn dwell_clips_at_hour_end() {
        let idx = day_index("2019-01-05");
        let s = avg_dwell_time(&[(ts("2019-01-05T09:00"), ts("2019-01-05T10:30"))], &idx).unwrap();
        assert_eq!(s.values()[9], 60.0);
        assert_eq!(s.values()[10], 90.0);
        assert_eq!(s.values()[8], 0.0);
        assert_eq!(s.values()[11], 0.0);
    }

    #[test]
    fn dwell_is_the_member_mean() {
        let idx = day_index("2019-01-05");
        let s = avg_dwell_time(
            &[
                (ts("2019-01-05T14:30"), ts("2019-01-05T16:00")),
                (ts("2019-01-05T14:00"), ts("2019-01-05T14:50")),
            ],
            &idx,
        )
        .unwrap();
        // 30 and 50 minutes elapsed by 15:00
        assert_eq!(s.values()[14], 40.0);
    }

    #[test]
    fn merge_takes_earliest_arrival_and_latest_departure() {
        let seg = |a: &str, d: &str, loc| VisitInterval {
            visit_id: "V1".into(),
            patient_id: "P1".into(),
            location: loc,
            arrival: ts(a),
            departure: ts(d),
            esi: None,
        };
        let merged = merge_by_visit(
            &[
                seg("2019-01-05T10:00", "2019-01-05T10:20", Location::Waiting),
                seg("2019-01-05T10:20", "2019-01-05T11:00", Location::Treatment),
                seg("2019-01-05T11:00", "2019-01-05T11:40", Location::Waiting),
            ],
            Location::Waiting,
        );
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].arrival, ts("2019-01-05T10:00"));
        assert_eq!(merged[0].departure, ts("2019-01-05T11:40"));
    }

    #[test]
    fn eci_fit_examples() {
        let p = eci_fit(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!((p.mean, p.sd), (5.0, 0.0));
        let p = eci_fit(&[0.0, 10.0]).unwrap();
        assert_eq!((p.mean, p.sd), (5.0, 5.0));
        assert!(eci_fit(&[]).is_err());
    }

    #[test]
    fn eci_threshold_boundaries() {
        let p = EciParams::new(18.11, 9.77, 2.0).unwrap();
        assert!((p.threshold() - 37.65).abs() < 1e-9);
        assert_eq!(extreme_case_indicator(&[38.0, 37.0], &p), vec![1.0, 0.0]);
        let flat = EciParams::new(4.0, 0.0, 2.0).unwrap();
        assert_eq!(extreme_case_indicator(&[4.0], &flat), vec![1.0]);
        let p = EciParams::new(3.0, 1.0, 2.0).unwrap();
        assert!(extreme_case_indicator(&[0.0; 8], &p).iter().all(|v| *v == 0.0));
        assert!(EciParams::new(1.0, -0.5, 2.0).is_err());
    }

    fn arb_intervals() -> impl Strategy<Value = Vec<(Timestamp, Timestamp)>> {
        let base = ts("2019-01-05T00:00").minutes();
        proptest::collection::vec((-120i64..1_560, 0i64..400), 0..60).prop_map(move |v| {
            v.into_iter()
                .map(|(s, len)| {
                    let s = Timestamp::from_minutes(base + s).unwrap();
                    (s, s.add_minutes(len))
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn census_equals_oracle(intervals in arb_intervals()) {
            let idx = day_index("2019-01-05");
            let got = interval_census(&intervals, &idx).unwrap();
            let want = minute_scan(&intervals, &idx);
            prop_assert_eq!(got.values(), want.as_slice());
        }

        #[test]
        fn adding_an_interval_never_decreases(intervals in arb_intervals(), extra in arb_intervals()) {
            let idx = day_index("2019-01-05");
            let before = interval_census(&intervals, &idx).unwrap();
            let mut more = intervals.clone();
            more.extend(extra.into_iter().take(1));
            let after = interval_census(&more, &idx).unwrap();
            for (a, b) in after.values().iter().zip(before.values()) {
                prop_assert!(a >= b);
            }
        }

        #[test]
        fn dwell_is_bounded(intervals in arb_intervals()) {
            let idx = day_index("2019-01-05");
            let s = avg_dwell_time(&intervals, &idx).unwrap();
            let longest = intervals.iter().map(|(a, b)| b.minutes() - a.minutes()).max().unwrap_or(0) as f64;
            for v in s.values() {
                prop_assert!(*v >= 0.0 && *v <= longest);
            }
        }

        #[test]
        fn esi_partition(intervals in arb_intervals(), labels in proptest::collection::vec(proptest::option::of(1u8..=5), 60)) {
            let idx = day_index("2019-01-05");
            let visits: Vec<_> = intervals.iter().zip(&labels).enumerate().map(|(i, ((a, d), esi))| VisitInterval {
                visit_id: format!("V{i}"),
                patient_id: "P".into(),
                location: Location::Waiting,
                arrival: *a,
                departure: *d,
                esi: *esi,
            }).collect();
            let s = stratified_census(&visits, &idx).unwrap();
            let unlabeled: Vec<_> = visits.iter().filter(|v| v.esi.is_none()).map(|v| (v.arrival, v.departure)).collect();
            let unlabeled = interval_census(&unlabeled, &idx).unwrap();
            for h in 0..idx.effective_len() {
                let sum = s.esi12.values()[h] + s.esi3.values()[h] + s.esi45.values()[h] + unlabeled.values()[h];
                prop_assert_eq!(sum, s.total.values()[h]);
            }
        }

        #[test]
        fn eci_is_monotone(a in 0f64..80.0, b in 0f64..80.0, mean in 0f64..40.0, sd in 0f64..20.0) {
            let p = EciParams::new(mean, sd, 2.0).unwrap();
            let flags = extreme_case_indicator(&[a, b], &p);
            if a >= b {
                prop_assert!(flags[0] >= flags[1]);
            }
        }
    }
}

use std::ops::Range;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::{Timestamp, MINUTES_PER_HOUR};

/// Half-open calendar date range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    /// The pandemic-era window dropped from every dataset variant.
    pub fn covid() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(2020, 1, 1).expect("valid date"),
            end: NaiveDate::from_ymd_opt(2021, 5, 1).expect("valid date"),
        }
    }

    fn to_hours(self) -> Result<(Timestamp, Timestamp)> {
        Ok((Timestamp::from_date(self.start)?, Timestamp::from_date(self.end)?))
    }

    /// Intersection with the hour span `[start, end)`, or `None` when disjoint.
    pub fn clip_to_span(self, start: Timestamp, end: Timestamp) -> Option<ClippedRange> {
        let (lo, hi) = self.to_hours().ok()?;
        let lo = lo.max(start);
        let hi = hi.min(end);
        (lo < hi).then_some(ClippedRange { start: lo, end: hi })
    }
}

/// Exclusion already expressed in hour-aligned timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClippedRange {
    pub start: Timestamp,
    pub end: Timestamp,
}

/// Contiguous hourly grid with excluded half-open sub-ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HourIndex {
    start: Timestamp,
    length: usize,
    exclusions: Vec<(Timestamp, Timestamp)>,
    slots: Vec<Option<usize>>,
    hours: Vec<Timestamp>,
}

/// Covers `[start, end)` at 60-minute steps with the given date-range exclusions.
pub fn build_hour_index(start: Timestamp, end: Timestamp, exclusions: &[DateRange]) -> Result<HourIndex> {
    let mut hour_ranges = Vec::with_capacity(exclusions.len());
    for range in exclusions {
        if range.start >= range.end {
            return Err(Error::HourIndex(format!(
                "empty exclusion {}..{}",
                range.start, range.end
            )));
        }
        hour_ranges.push(range.to_hours()?);
    }
    HourIndex::from_hour_ranges(start, end, hour_ranges)
}

impl HourIndex {
    pub fn from_hour_ranges(
        start: Timestamp,
        end: Timestamp,
        mut exclusions: Vec<(Timestamp, Timestamp)>,
    ) -> Result<Self> {
        if !start.is_hour_aligned() || !end.is_hour_aligned() {
            return Err(Error::HourIndex(format!("{start} and {end} must be hour-aligned")));
        }
        if end <= start {
            return Err(Error::HourIndex(format!("end {end} must be after start {start}")));
        }
        exclusions.sort();
        for &(lo, hi) in &exclusions {
            if !lo.is_hour_aligned() || !hi.is_hour_aligned() || lo >= hi {
                return Err(Error::HourIndex(format!("malformed exclusion {lo}..{hi}")));
            }
            if lo < start || hi > end {
                return Err(Error::HourIndex(format!(
                    "exclusion {lo}..{hi} lies outside {start}..{end}"
                )));
            }
        }
        for pair in exclusions.windows(2) {
            if pair[1].0 < pair[0].1 {
                return Err(Error::HourIndex(format!(
                    "exclusions {}..{} and {}..{} overlap",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                )));
            }
        }
        let length = ((end.minutes() - start.minutes()) / MINUTES_PER_HOUR) as usize;
        let mut index = Self {
            start,
            length,
            exclusions,
            slots: Vec::new(),
            hours: Vec::new(),
        };
        index.rebuild();
        if index.hours.is_empty() {
            return Err(Error::HourIndex("every hour is excluded".into()));
        }
        Ok(index)
    }

    fn rebuild(&mut self) {
        let mut slots = vec![None; self.length];
        let mut hours = Vec::with_capacity(self.length);
        let mut excl = self.exclusions.iter().peekable();
        for (slot, entry) in slots.iter_mut().enumerate() {
            let t = self.start.add_hours(slot as i64);
            while excl.peek().is_some_and(|&&(_, hi)| hi <= t) {
                excl.next();
            }
            let excluded = excl.peek().is_some_and(|&&(lo, hi)| lo <= t && t < hi);
            if !excluded {
                *entry = Some(hours.len());
                hours.push(t);
            }
        }
        self.slots = slots;
        self.hours = hours;
    }

    pub fn start(&self) -> Timestamp {
        self.start
    }

    pub fn end(&self) -> Timestamp {
        self.start.add_hours(self.length as i64)
    }

    /// Hours in `[start, end)`, excluded ones included.
    pub fn length(&self) -> usize {
        self.length
    }

    pub fn exclusions(&self) -> &[(Timestamp, Timestamp)] {
        &self.exclusions
    }

    pub fn effective_len(&self) -> usize {
        self.hours.len()
    }

    /// Non-excluded hours in order.
    pub fn hours(&self) -> &[Timestamp] {
        &self.hours
    }

    /// Offset of an hour-aligned timestamp from `start`, excluded hours included.
    pub fn slot(&self, t: Timestamp) -> Option<usize> {
        if t < self.start || !t.is_hour_aligned() {
            return None;
        }
        let slot = ((t.minutes() - self.start.minutes()) / MINUTES_PER_HOUR) as usize;
        (slot < self.length).then_some(slot)
    }

    /// Position of `t` among the non-excluded hours.
    pub fn position(&self, t: Timestamp) -> Option<usize> {
        self.slot(t).and_then(|s| self.slots[s])
    }

    pub fn position_of_slot(&self, slot: usize) -> Option<usize> {
        self.slots.get(slot).copied().flatten()
    }

    /// Maximal runs of consecutive non-excluded hours, as position ranges.
    pub fn spans(&self) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut begin = 0;
        for i in 1..=self.hours.len() {
            let broken =
                i == self.hours.len() || self.hours[i].minutes() - self.hours[i - 1].minutes() != MINUTES_PER_HOUR;
            if broken {
                spans.push(begin..i);
                begin = i;
            }
        }
        spans
    }
}

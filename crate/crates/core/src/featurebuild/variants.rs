//! The sixteen dataset variants and their assembly into feature tables.
//!
//! Every "Lags (W=k)" block holds the current value plus `lag_1..lag_{k-1}`,
//! i.e. the `k` most recent observations. Rolling blocks are trailing means
//! that include the current step.

use std::collections::BTreeMap;
use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::daily::{hour_quantities, weather10_column, weather5_column};
use super::{lag_features, rolling_mean, Column, ColumnKind, DailyRecord, FeatureTable, ScalingMethod, WeatherGroup};
use crate::error::{Error, Result};
use crate::flowmetrics::HourlyRecord;
use crate::ingestion::{DateRange, WeatherCondition};
use crate::time::{Timestamp, MINUTES_PER_DAY, MINUTES_PER_HOUR};

pub const VARIANTS_JSON: &str = include_str!("variants.json");
pub const TARGET_COLUMN: &str = "waiting_count";
pub const DEFAULT_DAILY_LAG_DAYS: usize = 7;

const HOURLY_LAG_WINDOW: usize = 24;
const EXTRA_ROLLING_WINDOW: usize = 4;
const CENSUS_ROLLING_WINDOW: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeatherStatus {
    None,
    FiveCat,
    TenCat,
}

/// Declarative recipe for one dataset variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetVariantSpec {
    pub id: String,
    /// Width of the waiting-count lag block in hours (24 or 48).
    pub target_lag_window: usize,
    pub target_rolling_windows: Vec<usize>,
    pub avg_waiting_time: bool,
    pub treatment_count: bool,
    pub boarding_count: bool,
    pub esi_waiting_counts: bool,
    pub esi_waiting_times: bool,
    pub avg_treatment_time: bool,
    pub avg_boarding_time: bool,
    pub temperature: bool,
    pub temperature_lags: bool,
    pub wind: bool,
    pub humidity: bool,
    pub weather_status: WeatherStatus,
    pub hospital_census: bool,
    pub hospital_census_lags: bool,
    pub hospital_census_rolling: bool,
    pub holidays: bool,
    pub football: bool,
    /// 24h lags and 4h rolling means for waiting time, treatment count and
    /// boarding count.
    pub extra_lags_and_rolling: bool,
    pub scaling: ScalingMethod,
    pub covid_exclusion: DateRange,
}

#[derive(Deserialize)]
struct CatalogFile {
    schema: String,
    variants: Vec<DatasetVariantSpec>,
}

/// DS0-DS15 in id order.
pub fn catalog() -> &'static [DatasetVariantSpec] {
    static CATALOG: OnceLock<Vec<DatasetVariantSpec>> = OnceLock::new();
    CATALOG.get_or_init(|| {
        let file: CatalogFile = serde_json::from_str(VARIANTS_JSON).expect("bundled catalog parses");
        assert_eq!(file.schema, "edflow.variants/v1");
        file.variants
    })
}

pub fn variant(id: &str) -> Result<DatasetVariantSpec> {
    catalog()
        .iter()
        .find(|v| v.id.eq_ignore_ascii_case(id))
        .cloned()
        .ok_or_else(|| Error::Feature(format!("unknown dataset variant {id:?}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Hourly,
    Daily,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hourly" => Ok(Self::Hourly),
            "daily" => Ok(Self::Daily),
            other => Err(Error::InvalidInput(format!("unknown task {other:?}"))),
        }
    }
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Hourly => "hourly",
            Self::Daily => "daily",
        })
    }
}

/// Named base series on a regular time grid, possibly with gaps.
#[derive(Debug, Clone)]
pub struct BaseFrame {
    timestamps: Vec<Timestamp>,
    step_minutes: i64,
    series: BTreeMap<String, Vec<f64>>,
}

impl BaseFrame {
    pub fn new(timestamps: Vec<Timestamp>, step_minutes: i64, series: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Feature("frame timestamps must be strictly increasing".into()));
        }
        if let Some((name, _)) = series.iter().find(|(_, v)| v.len() != timestamps.len()) {
            return Err(Error::Feature(format!("series `{name}` has the wrong length")));
        }
        Ok(Self {
            timestamps,
            step_minutes,
            series,
        })
    }

    pub fn from_hourly(records: &[HourlyRecord]) -> Result<Self> {
        let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in records {
            for (name, v) in hour_quantities(r) {
                series.entry(name).or_default().push(v);
            }
            for name in ["year", "month", "day_of_month", "day_of_week", "hour_of_day"] {
                series
                    .entry(name.to_string())
                    .or_default()
                    .push(r.value(name).expect("calendar field"));
            }
        }
        Self::new(records.iter().map(|r| r.hour).collect(), MINUTES_PER_HOUR, series)
    }

    pub fn from_daily(records: &[DailyRecord]) -> Result<Self> {
        let mut series: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for r in records {
            for (name, v) in &r.values {
                series.entry(name.clone()).or_default().push(*v);
            }
        }
        Self::new(records.iter().map(|r| r.window_end).collect(), MINUTES_PER_DAY, series)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn without(mut self, name: &str) -> Self {
        self.series.remove(name);
        self
    }

    fn get(&self, name: &str, variant: &str) -> Result<&[f64]> {
        self.series.get(name).map(Vec::as_slice).ok_or_else(|| {
            Error::Feature(format!(
                "variant {variant} needs `{name}`, which the records do not carry"
            ))
        })
    }

    /// Maximal runs of rows exactly one step apart.
    fn spans(&self) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut begin = 0;
        for i in 1..=self.timestamps.len() {
            if i == self.timestamps.len()
                || self.timestamps[i].minutes() - self.timestamps[i - 1].minutes() != self.step_minutes
            {
                spans.push(begin..i);
                begin = i;
            }
        }
        spans
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Block {
    Plain(&'static str, ColumnKind),
    Window(&'static str, usize),
    Rolling(&'static str, usize),
    OneHot(Vec<String>),
}

impl Block {
    fn width(&self) -> usize {
        match self {
            Self::Plain(..) | Self::OneHot(_) => 1,
            Self::Window(_, k) | Self::Rolling(_, k) => *k,
        }
    }
}

struct WindowPlan {
    target: usize,
    other: usize,
    rolling: bool,
    hour_of_day: bool,
}

fn blocks(spec: &DatasetVariantSpec, plan: &WindowPlan) -> Vec<Block> {
    use ColumnKind::{Binary, Numeric};
    let mut b = vec![Block::Window(TARGET_COLUMN, plan.target)];
    if plan.rolling {
        for &w in &spec.target_rolling_windows {
            b.push(Block::Rolling(TARGET_COLUMN, w));
        }
    }
    b.push(Block::Plain("eci", Binary));
    for name in ["year", "month", "day_of_month", "day_of_week"] {
        b.push(Block::Plain(name, Numeric));
    }
    if plan.hour_of_day {
        b.push(Block::Plain("hour_of_day", Numeric));
    }
    for (flag, name) in [
        (spec.avg_waiting_time, "avg_waiting_time"),
        (spec.treatment_count, "treatment_count"),
        (spec.boarding_count, "boarding_count"),
    ] {
        if spec.extra_lags_and_rolling {
            b.push(Block::Window(name, plan.other));
            if plan.rolling {
                b.push(Block::Rolling(name, EXTRA_ROLLING_WINDOW));
            }
        } else if flag {
            b.push(Block::Plain(name, Numeric));
        }
    }
    if spec.esi_waiting_counts {
        for name in ["waiting_count_esi12", "waiting_count_esi3", "waiting_count_esi45"] {
            b.push(Block::Plain(name, Numeric));
        }
    }
    if spec.esi_waiting_times {
        for name in [
            "avg_waiting_time_esi12",
            "avg_waiting_time_esi3",
            "avg_waiting_time_esi45",
        ] {
            b.push(Block::Plain(name, Numeric));
        }
    }
    if spec.avg_treatment_time {
        b.push(Block::Plain("avg_treatment_time", Numeric));
    }
    if spec.avg_boarding_time {
        b.push(Block::Plain("avg_boarding_time", Numeric));
    }
    if spec.temperature_lags {
        b.push(Block::Window("temperature", plan.other));
    } else if spec.temperature {
        b.push(Block::Plain("temperature", Numeric));
    }
    if spec.wind {
        b.push(Block::Plain("wind_speed", Numeric));
    }
    if spec.humidity {
        b.push(Block::Plain("humidity", Numeric));
    }
    match spec.weather_status {
        WeatherStatus::None => {}
        WeatherStatus::FiveCat => b.push(Block::OneHot(
            WeatherGroup::ALL.into_iter().map(weather5_column).collect(),
        )),
        WeatherStatus::TenCat => b.push(Block::OneHot(
            WeatherCondition::ALL.into_iter().map(weather10_column).collect(),
        )),
    }
    if spec.hospital_census_lags {
        b.push(Block::Window("hospital_census", plan.other));
    } else if spec.hospital_census {
        b.push(Block::Plain("hospital_census", Numeric));
    }
    if spec.hospital_census_rolling && plan.rolling {
        b.push(Block::Rolling("hospital_census", CENSUS_ROLLING_WINDOW));
    }
    if spec.holidays {
        b.push(Block::Plain("is_holiday", Binary));
    }
    if spec.football {
        b.push(Block::Plain("is_football", Binary));
    }
    b
}

fn column_headers(blocks: &[Block]) -> Vec<Column> {
    let mut cols = Vec::new();
    let numeric = |name: String| Column {
        name,
        kind: ColumnKind::Numeric,
    };
    for block in blocks {
        match block {
            Block::Plain(name, kind) => cols.push(Column {
                name: name.to_string(),
                kind: *kind,
            }),
            Block::Window(name, k) => {
                cols.push(numeric(name.to_string()));
                cols.extend((1..*k).map(|j| numeric(format!("{name}_lag_{j}"))));
            }
            Block::Rolling(name, w) => cols.push(numeric(format!("{name}_roll_{w}"))),
            Block::OneHot(names) => cols.extend(names.iter().map(|n| Column {
                name: n.clone(),
                kind: ColumnKind::Binary,
            })),
        }
    }
    cols
}

/// Feature table plus the bookkeeping needed for supervised framing.
#[derive(Debug, Clone)]
pub struct AssembledVariant {
    pub table: FeatureTable,
    /// Longest window, counting the current step.
    pub window: usize,
    /// Rows in the base frame before trimming.
    pub source_rows: usize,
}

fn assemble(frame: &BaseFrame, spec: &DatasetVariantSpec, plan: &WindowPlan) -> Result<AssembledVariant> {
    let blocks = blocks(spec, plan);
    let columns = column_headers(&blocks);
    let window = blocks.iter().map(Block::width).max().unwrap_or(1);

    // resolve every referenced series up front so a mismatch fails even when
    // no span is long enough to produce rows
    for block in &blocks {
        match block {
            Block::Plain(name, _) | Block::Window(name, _) | Block::Rolling(name, _) => {
                frame.get(name, &spec.id)?;
            }
            Block::OneHot(names) => {
                for n in names {
                    frame.get(n, &spec.id)?;
                }
            }
        }
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut timestamps = Vec::new();
    for span in frame.spans() {
        if span.len() < window {
            continue;
        }
        let mut span_columns: Vec<Vec<Option<f64>>> = Vec::with_capacity(columns.len());
        for block in &blocks {
            match block {
                Block::Plain(name, _) => {
                    span_columns.push(
                        frame.get(name, &spec.id)?[span.clone()]
                            .iter()
                            .map(|v| Some(*v))
                            .collect(),
                    );
                }
                Block::Window(name, k) => {
                    let s = &frame.get(name, &spec.id)?[span.clone()];
                    span_columns.push(s.iter().map(|v| Some(*v)).collect());
                    if *k > 1 {
                        span_columns.extend(lag_features(s, k - 1)?);
                    }
                }
                Block::Rolling(name, w) => {
                    span_columns.push(rolling_mean(&frame.get(name, &spec.id)?[span.clone()], *w)?);
                }
                Block::OneHot(names) => {
                    for n in names {
                        span_columns.push(frame.get(n, &spec.id)?[span.clone()].iter().map(|v| Some(*v)).collect());
                    }
                }
            }
        }
        for (offset, t) in span.clone().enumerate() {
            let row: Option<Vec<f64>> = span_columns.iter().map(|c| c[offset]).collect();
            if let Some(row) = row {
                rows.push(row);
                timestamps.push(frame.timestamps[t]);
            }
        }
    }
    Ok(AssembledVariant {
        table: FeatureTable::new(columns, rows, timestamps, frame.step_minutes)?,
        window,
        source_rows: frame.len(),
    })
}

/// Hourly feature table for `spec`. Rows whose lag or rolling windows would
/// reach back across a gap are trimmed.
pub fn assemble_variant(records: &[HourlyRecord], spec: &DatasetVariantSpec) -> Result<AssembledVariant> {
    let frame = BaseFrame::from_hourly(records)?;
    assemble_frame(&frame, spec, Task::Hourly, DEFAULT_DAILY_LAG_DAYS)
}

/// Daily feature table: 24h means plus a `lag_days`-wide lag block for every
/// lagged feature. Rolling blocks and the hour of day do not apply.
pub fn assemble_daily_variant(
    records: &[DailyRecord],
    spec: &DatasetVariantSpec,
    lag_days: usize,
) -> Result<AssembledVariant> {
    let frame = BaseFrame::from_daily(records)?;
    assemble_frame(&frame, spec, Task::Daily, lag_days)
}

pub fn assemble_frame(
    frame: &BaseFrame,
    spec: &DatasetVariantSpec,
    task: Task,
    lag_days: usize,
) -> Result<AssembledVariant> {
    if spec.target_lag_window == 0 {
        return Err(Error::Feature(format!("variant {} has an empty lag window", spec.id)));
    }
    // daily lag blocks scale with the hourly width in whole days
    if task == Task::Daily && !spec.target_lag_window.is_multiple_of(HOURLY_LAG_WINDOW) {
        return Err(Error::Feature(format!(
            "variant {} has lag window {}, expected a multiple of 24 for the daily task",
            spec.id, spec.target_lag_window
        )));
    }
    let plan = match task {
        Task::Hourly => WindowPlan {
            target: spec.target_lag_window,
            other: HOURLY_LAG_WINDOW,
            rolling: true,
            hour_of_day: true,
        },
        Task::Daily => {
            if lag_days == 0 {
                return Err(Error::Feature("daily lag window must be at least 1 day".into()));
            }
            WindowPlan {
                target: lag_days * (spec.target_lag_window / HOURLY_LAG_WINDOW),
                other: lag_days,
                rolling: false,
                hour_of_day: false,
            }
        }
    };
    assemble(frame, spec, &plan)
}

/// How a feature table was derived from hourly records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub variant_id: String,
    pub task: Task,
    /// Steps between anchor and target: hours or days.
    pub horizon: usize,
    pub anchor_hour: u32,
    pub lag_days: usize,
}

impl DatasetInfo {
    pub fn new(variant_id: &str, task: Task, horizon: Option<usize>, anchor_hour: u32) -> Result<Self> {
        let spec = variant(variant_id)?;
        Ok(Self {
            variant_id: spec.id,
            task,
            horizon: horizon.unwrap_or(match task {
                Task::Hourly => 6,
                Task::Daily => 1,
            }),
            anchor_hour,
            lag_days: DEFAULT_DAILY_LAG_DAYS,
        })
    }

    /// Minutes in one step of the task's grid.
    pub fn step_minutes(&self) -> i64 {
        match self.task {
            Task::Hourly => MINUTES_PER_HOUR,
            Task::Daily => MINUTES_PER_DAY,
        }
    }

    /// Feature table for this dataset, before scaling.
    pub fn assemble(&self, records: &[HourlyRecord]) -> Result<AssembledVariant> {
        let spec = variant(&self.variant_id)?;
        match self.task {
            Task::Hourly => assemble_variant(records, &spec),
            Task::Daily => {
                let days = super::daily_aggregate(records, self.anchor_hour)?;
                assemble_daily_variant(&days, &spec, self.lag_days)
            }
        }
    }

    /// Assembled features framed for `horizon`-step targets.
    pub fn supervised(&self, records: &[HourlyRecord]) -> Result<(AssembledVariant, super::SupervisedFrame)> {
        let v = self.assemble(records)?;
        let frame = super::make_supervised(&v.table, TARGET_COLUMN, self.horizon, v.window, v.source_rows)?;
        Ok((v, frame))
    }
}

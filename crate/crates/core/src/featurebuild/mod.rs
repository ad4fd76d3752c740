//! Model-ready feature tables: lag and rolling expansion, dataset variants,
//! scaling, daily aggregation and direct h-step supervised framing.

mod daily;
mod scaling;
mod variants;
mod weather;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::time::Timestamp;

pub use daily::{daily_aggregate, DailyRecord, DEFAULT_ANCHOR_HOUR};
pub use scaling::{apply_scaler, fit_scaler, ColumnScale, ScalerParams, ScalingMethod};
pub use variants::{
    assemble_daily_variant, assemble_frame, assemble_variant, catalog, variant, AssembledVariant, BaseFrame,
    DatasetInfo, DatasetVariantSpec, Task, WeatherStatus, DEFAULT_DAILY_LAG_DAYS, TARGET_COLUMN, VARIANTS_JSON,
};
pub use weather::{recategorize_weather, WeatherGroup};

/// Whether a column goes through the scaler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    /// One-hot or 0/1 flag; never scaled.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// Rectangular numeric table with one timestamp per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    columns: Vec<Column>,
    rows: Vec<Vec<f64>>,
    timestamps: Vec<Timestamp>,
    step_minutes: i64,
}

impl FeatureTable {
    pub fn new(
        columns: Vec<Column>,
        rows: Vec<Vec<f64>>,
        timestamps: Vec<Timestamp>,
        step_minutes: i64,
    ) -> Result<Self> {
        let mut names: Vec<&str> = columns.iter().map(|c| c.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Feature("duplicate column names".into()));
        }
        if rows.len() != timestamps.len() {
            return Err(Error::Feature(format!(
                "{} rows but {} timestamps",
                rows.len(),
                timestamps.len()
            )));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != columns.len()) {
            return Err(Error::Feature(format!(
                "row {bad} has {} values, expected {}",
                rows[bad].len(),
                columns.len()
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Feature("non-finite value in feature table".into()));
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Feature("timestamps must be strictly increasing".into()));
        }
        if step_minutes <= 0 {
            return Err(Error::Feature("step must be positive".into()));
        }
        Ok(Self {
            columns,
            rows,
            timestamps,
            step_minutes,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn step_minutes(&self) -> i64 {
        self.step_minutes
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Rows `[range)` as a new table.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            columns: self.columns.clone(),
            rows: self.rows[range.clone()].to_vec(),
            timestamps: self.timestamps[range].to_vec(),
            step_minutes: self.step_minutes,
        }
    }

    /// Same columns, values replaced row for row.
    pub(crate) fn with_rows(&self, rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(self.columns.clone(), rows, self.timestamps.clone(), self.step_minutes)
    }

    /// CSV with a `timestamp` column followed by the feature columns.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(sink);
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.column_names());
        w.write_record(&header)?;
        for (t, row) in self.timestamps.iter().zip(&self.rows) {
            let mut rec = vec![t.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `lag_j(t) = series(t - j)` for `j = 1..=k`; the first `k` positions of
/// every column are `None`.
pub fn lag_features(series: &[f64], k: usize) -> Result<Vec<Vec<Option<f64>>>> {
    if k == 0 {
        return Err(Error::Feature("lag count must be at least 1".into()));
    }
    if k >= series.len() {
        return Err(Error::Feature(format!(
            "{k} lags need a series longer than {}",
            series.len()
        )));
    }
    Ok((1..=k)
        .map(|j| (0..series.len()).map(|t| t.checked_sub(j).map(|s| series[s])).collect())
        .collect())
}

/// Trailing mean over the current and previous `w - 1` positions.
pub fn rolling_mean(series: &[f64], w: usize) -> Result<Vec<Option<f64>>> {
    if w == 0 {
        return Err(Error::Feature("rolling window must be at least 1".into()));
    }
    if w > series.len() {
        return Err(Error::Feature(format!(
            "window {w} exceeds series length {}",
            series.len()
        )));
    }
    Ok((0..series.len())
        .map(|t| (t + 1 >= w).then(|| series[t + 1 - w..=t].iter().sum::<f64>() / w as f64))
        .collect())
}

/// Design matrix and `h`-step-ahead targets.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedFrame {
    pub x: FeatureTable,
    pub y: Vec<f64>,
    pub target_times: Vec<Timestamp>,
    pub horizon: usize,
    /// Width of the longest lag/rolling window, counting the current step.
    pub window: usize,
    /// Source rows before window trimming.
    pub source_rows: usize,
}

impl SupervisedFrame {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn anchor_times(&self) -> &[Timestamp] {
        self.x.timestamps()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            x: self.x.slice(range.clone()),
            y: self.y[range.clone()].to_vec(),
            target_times: self.target_times[range].to_vec(),
            horizon: self.horizon,
            window: self.window,
            source_rows: self.source_rows,
        }
    }
}

/// Pairs each row at anchor `t` with the raw `target` value at
/// `t + h` steps. Anchors whose target falls outside their contiguous run of
/// rows are skipped, so no pair bridges a gap.
pub fn make_supervised(
    table: &FeatureTable,
    target: &str,
    h: usize,
    window: usize,
    source_rows: usize,
) -> Result<SupervisedFrame> {
    if h == 0 {
        return Err(Error::Feature("horizon must be at least 1".into()));
    }
    let j = table
        .column_index(target)
        .ok_or_else(|| Error::Feature(format!("target column `{target}` missing")))?;
    let ts = table.timestamps();
    let span = h as i64 * table.step_minutes();
    let mut anchors = Vec::new();
    let mut y = Vec::new();
    let mut target_times = Vec::new();
    for i in 0..table.len().saturating_sub(h) {
        // timestamps strictly increase by at least one step, so an exact
        // h-step difference means rows i..=i+h are contiguous
        if ts[i + h].minutes() - ts[i].minutes() == span {
            anchors.push(i);
            y.push(table.rows()[i + h][j]);
            target_times.push(ts[i + h]);
        }
    }
    let rows = anchors.iter().map(|&i| table.rows()[i].clone()).collect();
    let times = anchors.iter().map(|&i| ts[i]).collect();
    Ok(SupervisedFrame {
        x: FeatureTable::new(table.columns().to_vec(), rows, times, table.step_minutes())?,
        y,
        target_times,
        horizon: h,
        window,
        source_rows,
    })
}

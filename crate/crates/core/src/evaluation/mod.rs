//! Point metrics, extreme-case strata, hour-of-day breakdowns and the
//! report/leaderboard documents.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::featurebuild::Task;
use crate::flowmetrics::mean_and_sd;
use crate::time::Timestamp;

pub const REPORT_SCHEMA: &str = "edflow.report/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub n: usize,
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    /// `None` when the targets are constant and the predictions miss them.
    pub r2: Option<f64>,
}

pub fn point_metrics(y_true: &[f64], y_pred: &[f64]) -> Result<MetricSet> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Evaluation(format!(
            "{} targets but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Evaluation("no points to score".into()));
    }
    if y_true.iter().chain(y_pred).any(|v| !v.is_finite()) {
        return Err(Error::Evaluation("non-finite target or prediction".into()));
    }
    let n = y_true.len() as f64;
    let (mut abs, mut sse) = (0.0, 0.0);
    for (t, p) in y_true.iter().zip(y_pred) {
        let e = t - p;
        abs += e.abs();
        sse += e * e;
    }
    let mean = y_true.iter().sum::<f64>() / n;
    let sst: f64 = y_true.iter().map(|t| (t - mean) * (t - mean)).sum();
    let r2 = if sst > 0.0 {
        Some(1.0 - sse / sst)
    } else if sse == 0.0 {
        Some(0.0)
    } else {
        None
    };
    let mse = sse / n;
    Ok(MetricSet {
        n: y_true.len(),
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
        r2,
    })
}

/// Thresholds `mean + m * sd` for increasingly extreme target values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrataSpec {
    pub mean: f64,
    pub sd: f64,
    pub multipliers: [f64; 3],
    pub labels: [String; 3],
}

impl StrataSpec {
    pub fn new(mean: f64, sd: f64) -> Result<Self> {
        if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
            return Err(Error::Evaluation(format!(
                "invalid strata statistics mean={mean} sd={sd}"
            )));
        }
        Ok(Self {
            mean,
            sd,
            multipliers: [1.0, 2.0, 3.0],
            labels: ["Extreme".into(), "VeryExtreme".into(), "HighlyExtreme".into()],
        })
    }

    /// Statistics of `values` (population sd), usually the training targets.
    pub fn fit(values: &[f64]) -> Result<Self> {
        let (mean, sd) =
            mean_and_sd(values).ok_or_else(|| Error::Evaluation("cannot fit strata on no values".into()))?;
        Self::new(mean, sd)
    }

    pub fn thresholds(&self) -> [f64; 3] {
        self.multipliers.map(|m| self.mean + m * self.sd)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumResult {
    pub label: String,
    pub threshold: f64,
    pub count: usize,
    pub metrics: Option<MetricSet>,
}

fn subset_metrics(y_true: &[f64], y_pred: &[f64], keep: impl Fn(usize) -> bool) -> Result<(usize, Option<MetricSet>)> {
    let (t, p): (Vec<f64>, Vec<f64>) = (0..y_true.len())
        .filter(|&i| keep(i))
        .map(|i| (y_true[i], y_pred[i]))
        .unzip();
    if t.is_empty() {
        Ok((0, None))
    } else {
        Ok((t.len(), Some(point_metrics(&t, &p)?)))
    }
}

/// Scores the points whose target reaches each threshold (`>=`).
pub fn extreme_strata_eval(y_true: &[f64], y_pred: &[f64], spec: &StrataSpec) -> Result<Vec<StratumResult>> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Evaluation("targets and predictions differ in length".into()));
    }
    spec.thresholds()
        .iter()
        .zip(&spec.labels)
        .map(|(&threshold, label)| {
            let (count, metrics) = subset_metrics(y_true, y_pred, |i| y_true[i] >= threshold)?;
            Ok(StratumResult {
                label: label.clone(),
                threshold,
                count,
                metrics,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourBucket {
    pub hour: u32,
    pub count: usize,
    pub metrics: Option<MetricSet>,
}

/// Metrics bucketed by the hour of day of each target time.
pub fn hour_of_day_eval(y_true: &[f64], y_pred: &[f64], target_times: &[Timestamp]) -> Result<Vec<HourBucket>> {
    if y_true.len() != y_pred.len() || y_true.len() != target_times.len() {
        return Err(Error::Evaluation(
            "targets, predictions and times differ in length".into(),
        ));
    }
    (0..24)
        .map(|hour| {
            let (count, metrics) = subset_metrics(y_true, y_pred, |i| target_times[i].hour_of_day() == hour)?;
            Ok(HourBucket { hour, count, metrics })
        })
        .collect()
}

/// Published accuracies, carried for orientation only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceTargets {
    pub note: String,
    pub hourly_best_mae: f64,
    pub daily_best_mae: f64,
}

impl Default for ReferenceTargets {
    fn default() -> Self {
        Self {
            note: "published results on private hospital data; context only, not reproducible here and never a pass/fail gate"
                .into(),
            hourly_best_mae: 4.195,
            daily_best_mae: 2.00,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIdentity {
    pub kind: String,
    pub config_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema: String,
    pub model: ModelIdentity,
    pub variant_id: String,
    pub task: Task,
    pub horizon: usize,
    pub overall: MetricSet,
    pub strata: Option<StrataSpec>,
    pub per_stratum: Vec<StratumResult>,
    pub per_hour: Vec<HourBucket>,
    pub reference_targets: Option<ReferenceTargets>,
}

impl EvaluationReport {
    /// Full report: overall, strata and hour-of-day sections.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        model: ModelIdentity,
        variant_id: &str,
        task: Task,
        horizon: usize,
        y_true: &[f64],
        y_pred: &[f64],
        target_times: &[Timestamp],
        strata: StrataSpec,
    ) -> Result<Self> {
        let report = Self {
            schema: REPORT_SCHEMA.into(),
            model,
            variant_id: variant_id.into(),
            task,
            horizon,
            overall: point_metrics(y_true, y_pred)?,
            per_stratum: extreme_strata_eval(y_true, y_pred, &strata)?,
            strata: Some(strata),
            per_hour: hour_of_day_eval(y_true, y_pred, target_times)?,
            reference_targets: Some(ReferenceTargets::default()),
        };
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        if self.overall.n == 0 {
            return Err(Error::Evaluation("report has no scored points".into()));
        }
        if !self.per_hour.is_empty() {
            let total: usize = self.per_hour.iter().map(|b| b.count).sum();
            if total != self.overall.n {
                return Err(Error::Evaluation(format!(
                    "hour buckets hold {total} points, overall n is {}",
                    self.overall.n
                )));
            }
        }
        if self.per_stratum.windows(2).any(|w| w[1].count > w[0].count)
            || self.per_stratum.iter().any(|s| s.count > self.overall.n)
        {
            return Err(Error::Evaluation("strata are not nested".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::InvalidInput(format!("unknown report format {other:?}"))),
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Serializes a validated report. CSV output has one row per section entry:
/// `section,key,n,mae,mse,rmse,r2`.
pub fn emit_report(report: &EvaluationReport, format: ReportFormat) -> Result<String> {
    report.validate()?;
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["section", "key", "n", "mae", "mse", "rmse", "r2"])?;
            let mut row = |section: &str, key: String, n: usize, m: Option<&MetricSet>| {
                w.write_record([
                    section.to_string(),
                    key,
                    n.to_string(),
                    fmt_opt(m.map(|m| m.mae)),
                    fmt_opt(m.map(|m| m.mse)),
                    fmt_opt(m.map(|m| m.rmse)),
                    fmt_opt(m.and_then(|m| m.r2)),
                ])
            };
            row("overall", "all".into(), report.overall.n, Some(&report.overall))?;
            for s in &report.per_stratum {
                row("stratum", s.label.clone(), s.count, s.metrics.as_ref())?;
            }
            for b in &report.per_hour {
                row("hour", b.hour.to_string(), b.count, b.metrics.as_ref())?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub variant_id: String,
    pub model_kind: String,
    pub config_id: String,
    pub val_mae: Option<f64>,
    pub test_mae: Option<f64>,
    pub test_mse: Option<f64>,
    pub test_rmse: Option<f64>,
    pub test_r2: Option<f64>,
}

pub fn write_leaderboard<W: Write>(sink: W, rows: &[LeaderboardRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "variant_id",
        "model_kind",
        "config_id",
        "val_mae",
        "test_mae",
        "test_mse",
        "test_rmse",
        "test_r2",
    ])?;
    for r in rows {
        w.write_record([
            r.variant_id.clone(),
            r.model_kind.clone(),
            r.config_id.clone(),
            fmt_opt(r.val_mae),
            fmt_opt(r.test_mae),
            fmt_opt(r.test_mse),
            fmt_opt(r.test_rmse),
            fmt_opt(r.test_r2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

//! Direct h-step regressors on supervised frames: chronological splits,
//! naive baselines, ridge, random forest, externally produced predictions and
//! grid search.

mod forest;
mod ridge;

use std::collections::BTreeMap;
use std::io::Read;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use forest::{ForestConfig, Node, Tree};

use crate::error::{Error, Result};
use crate::evaluation::{point_metrics, MetricSet};
use crate::featurebuild::{
    apply_scaler, fit_scaler, DatasetInfo, FeatureTable, ScalerParams, ScalingMethod, SupervisedFrame,
};
use crate::rng::GeneratorInfo;
use crate::time::Timestamp;

pub const MODEL_SCHEMA: &str = "edflow.model/v1";
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.70, 0.15, 0.15);

#[derive(Debug, Clone)]
pub struct SplitFrames {
    pub train: SupervisedFrame,
    pub validation: SupervisedFrame,
    pub test: SupervisedFrame,
}

/// First `floor(a*n)` rows train, next `floor(b*n)` validate, the rest test.
pub fn chrono_split(frame: &SupervisedFrame, fractions: (f64, f64, f64)) -> Result<SplitFrames> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to 1"
        )));
    }
    if frame.anchor_times().windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("frame rows are not in timestamp order".into()));
    }
    let n = frame.len();
    // the nudge keeps exact products such as 0.7 * 10 from flooring to 6
    let n_train = (a * n as f64 + 1e-9).floor() as usize;
    let n_val = (b * n as f64 + 1e-9).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::InvalidInput(format!(
            "{n} rows leave an empty train, validation or test part"
        )));
    }
    Ok(SplitFrames {
        train: frame.slice(0..n_train),
        validation: frame.slice(n_train..n_train + n_val),
        test: frame.slice(n_train + n_val..n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    SeasonalNaive,
    Ridge,
    Forest,
    External,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Naive => "naive",
            Self::SeasonalNaive => "seasonal_naive",
            Self::Ridge => "ridge",
            Self::Forest => "forest",
            Self::External => "external",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NaiveMode {
    LastValue,
    /// Value one period (in rows' steps) before the target time.
    Seasonal(usize),
}

/// One trainable configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Naive,
    SeasonalNaive { period: usize },
    Ridge { lambda: f64 },
    Forest(ForestConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Naive => ModelKind::Naive,
            Self::SeasonalNaive { .. } => ModelKind::SeasonalNaive,
            Self::Ridge { .. } => ModelKind::Ridge,
            Self::Forest(_) => ModelKind::Forest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPrediction {
    pub timestamp: Timestamp,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelParams {
    /// Predicts the named feature column unchanged.
    Copy {
        column: String,
    },
    Ridge {
        intercept: f64,
        coefficients: Vec<f64>,
    },
    Forest {
        config: ForestConfig,
        trees: Vec<Tree>,
    },
    External {
        predictions: Vec<ExternalPrediction>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub train_start: Option<Timestamp>,
    pub train_end: Option<Timestamp>,
    pub train_rows: usize,
    pub horizon: usize,
}

/// Self-describing fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub schema: String,
    pub kind: ModelKind,
    pub config_id: String,
    pub config: Option<ModelConfig>,
    pub columns: Vec<String>,
    /// Applied to incoming rows before `params`; naive kinds never scale.
    pub scaler: Option<ScalerParams>,
    pub params: ModelParams,
    pub generator: GeneratorInfo,
    pub provenance: Provenance,
    /// Set by callers that build features from hourly records.
    pub dataset: Option<DatasetInfo>,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.schema != MODEL_SCHEMA {
            return Err(Error::Model(format!("unsupported model schema {:?}", m.schema)));
        }
        Ok(m)
    }
}

fn provenance(frame: &SupervisedFrame) -> Provenance {
    Provenance {
        train_start: frame.anchor_times().first().copied(),
        train_end: frame.anchor_times().last().copied(),
        train_rows: frame.len(),
        horizon: frame.horizon,
    }
}

fn model(kind: ModelKind, frame: &SupervisedFrame, params: ModelParams, seed: u64) -> TrainedModel {
    TrainedModel {
        schema: MODEL_SCHEMA.into(),
        kind,
        config_id: kind.name().into(),
        config: None,
        columns: frame.x.column_names(),
        scaler: None,
        params,
        generator: GeneratorInfo::new(seed),
        provenance: provenance(frame),
        dataset: None,
    }
}

/// Column holding `target` `lag` steps before the anchor.
pub fn lag_column(target: &str, lag: usize) -> String {
    if lag == 0 {
        target.to_string()
    } else {
        format!("{target}_lag_{lag}")
    }
}

pub fn train_naive(frame: &SupervisedFrame, target: &str, mode: NaiveMode) -> Result<TrainedModel> {
    if frame.is_empty() {
        return Err(Error::Model("cannot train on an empty frame".into()));
    }
    let (kind, column) = match mode {
        NaiveMode::LastValue => (ModelKind::Naive, lag_column(target, 0)),
        NaiveMode::Seasonal(period) => {
            if period < frame.horizon {
                return Err(Error::Model(format!(
                    "seasonal period {period} is shorter than horizon {}",
                    frame.horizon
                )));
            }
            if period > frame.len() {
                return Err(Error::Model(format!(
                    "seasonal period {period} exceeds the {} training rows",
                    frame.len()
                )));
            }
            (ModelKind::SeasonalNaive, lag_column(target, period - frame.horizon))
        }
    };
    if frame.x.column_index(&column).is_none() {
        return Err(Error::Model(format!(
            "naive model needs column `{column}`, absent from the features"
        )));
    }
    Ok(model(kind, frame, ModelParams::Copy { column }, 0))
}

pub fn train_ridge(frame: &SupervisedFrame, lambda: f64) -> Result<TrainedModel> {
    let (intercept, coefficients) = ridge::solve(frame.x.rows(), &frame.y, lambda)?;
    Ok(model(
        ModelKind::Ridge,
        frame,
        ModelParams::Ridge {
            intercept,
            coefficients,
        },
        0,
    ))
}

pub fn train_forest(frame: &SupervisedFrame, config: &ForestConfig, seed: u64) -> Result<TrainedModel> {
    let trees = forest::fit(frame.x.rows(), &frame.y, config, seed)?;
    Ok(model(
        ModelKind::Forest,
        frame,
        ModelParams::Forest {
            config: config.clone(),
            trees,
        },
        seed,
    ))
}

/// Wraps predictions produced elsewhere from an exported feature table.
/// `predictions.csv` has columns `timestamp,prediction`; every exported row
/// must have exactly one prediction.
pub fn load_external<R: Read>(predictions: R, exported: &FeatureTable, horizon: usize) -> Result<TrainedModel> {
    let mut rdr = csv::Reader::from_reader(predictions);
    let mut preds = Vec::new();
    for rec in rdr.deserialize() {
        let p: ExternalPrediction = rec?;
        if !p.prediction.is_finite() {
            return Err(Error::Model(format!("non-finite prediction at {}", p.timestamp)));
        }
        preds.push(p);
    }
    preds.sort_by_key(|p| p.timestamp);
    if preds.windows(2).any(|w| w[0].timestamp == w[1].timestamp) {
        return Err(Error::Model("duplicate timestamps in predictions".into()));
    }
    let have: Vec<Timestamp> = preds.iter().map(|p| p.timestamp).collect();
    if have != exported.timestamps() {
        return Err(Error::Model(
            "predictions are not aligned with the exported features".into(),
        ));
    }
    Ok(TrainedModel {
        schema: MODEL_SCHEMA.into(),
        kind: ModelKind::External,
        config_id: "external".into(),
        config: None,
        columns: exported.column_names(),
        scaler: None,
        params: ModelParams::External { predictions: preds },
        generator: GeneratorInfo::new(0),
        provenance: Provenance {
            train_start: None,
            train_end: None,
            train_rows: 0,
            horizon,
        },
        dataset: None,
    })
}

/// One prediction per row. Rows must carry exactly the model's columns.
pub fn predict(model: &TrainedModel, rows: &FeatureTable) -> Result<Vec<f64>> {
    let actual = rows.column_names();
    if actual != model.columns {
        return Err(Error::ColumnMismatch {
            expected: model.columns.clone(),
            actual,
        });
    }
    let scaled;
    let rows = match &model.scaler {
        Some(s) => {
            scaled = apply_scaler(rows, s)?;
            &scaled
        }
        None => rows,
    };
    let out: Vec<f64> = match &model.params {
        ModelParams::Copy { column } => rows
            .column(column)
            .ok_or_else(|| Error::Model(format!("column `{column}` missing")))?,
        ModelParams::Ridge {
            intercept,
            coefficients,
        } => rows
            .rows()
            .iter()
            .map(|r| intercept + r.iter().zip(coefficients).map(|(a, b)| a * b).sum::<f64>())
            .collect(),
        ModelParams::Forest { trees, .. } => rows.rows().par_iter().map(|r| forest::predict(trees, r)).collect(),
        ModelParams::External { predictions } => {
            let by_time: BTreeMap<Timestamp, f64> = predictions.iter().map(|p| (p.timestamp, p.prediction)).collect();
            rows.timestamps()
                .iter()
                .map(|t| {
                    by_time
                        .get(t)
                        .copied()
                        .ok_or_else(|| Error::Model(format!("no external prediction for {t}")))
                })
                .collect::<Result<_>>()?
        }
    };
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Model("model produced a non-finite prediction".into()));
    }
    Ok(out)
}

/// Trains `config` on `train`. Ridge and forest fit a scaler on the training
/// rows first when `scaling` is given.
pub fn fit_config(
    config: &ModelConfig,
    config_id: &str,
    train: &SupervisedFrame,
    target: &str,
    scaling: Option<ScalingMethod>,
    seed: u64,
) -> Result<TrainedModel> {
    let scaled = |method: ScalingMethod| -> Result<(SupervisedFrame, ScalerParams)> {
        let params = fit_scaler(&train.x, method, 0..train.len())?;
        let mut frame = train.clone();
        frame.x = apply_scaler(&train.x, &params)?;
        Ok((frame, params))
    };
    let fit_scaled = |fit: &dyn Fn(&SupervisedFrame) -> Result<TrainedModel>| -> Result<TrainedModel> {
        match scaling {
            Some(method) => {
                let (frame, params) = scaled(method)?;
                let mut m = fit(&frame)?;
                m.scaler = Some(params);
                Ok(m)
            }
            None => fit(train),
        }
    };
    let mut m = match config {
        ModelConfig::Naive => train_naive(train, target, NaiveMode::LastValue)?,
        ModelConfig::SeasonalNaive { period } => train_naive(train, target, NaiveMode::Seasonal(*period))?,
        ModelConfig::Ridge { lambda } => fit_scaled(&|f| train_ridge(f, *lambda))?,
        ModelConfig::Forest(c) => fit_scaled(&|f| train_forest(f, c, seed))?,
    };
    m.config_id = config_id.to_string();
    m.config = Some(config.clone());
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub model: ModelConfig,
}

/// Ordered candidate list; the first candidate wins ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub seed: u64,
    pub candidates: Vec<Candidate>,
}

impl GridSpec {
    /// Built-in grid for one model kind. `period` is the seasonal period in
    /// frame steps.
    pub fn default_for(kind: ModelKind, period: usize, seed: u64) -> Result<Self> {
        let candidates = match kind {
            ModelKind::Naive => vec![Candidate {
                id: "naive".into(),
                model: ModelConfig::Naive,
            }],
            ModelKind::SeasonalNaive => vec![Candidate {
                id: format!("seasonal-{period}"),
                model: ModelConfig::SeasonalNaive { period },
            }],
            ModelKind::Ridge => [0.0, 0.1, 1.0, 10.0, 100.0]
                .iter()
                .map(|&lambda| Candidate {
                    id: format!("ridge-{lambda}"),
                    model: ModelConfig::Ridge { lambda },
                })
                .collect(),
            ModelKind::Forest => vec![
                Candidate {
                    id: "forest-100-d30-l4".into(),
                    model: ModelConfig::Forest(ForestConfig::default()),
                },
                Candidate {
                    id: "forest-50-d12-l8".into(),
                    model: ModelConfig::Forest(ForestConfig {
                        n_trees: 50,
                        max_depth: 12,
                        min_samples_leaf: 8,
                        max_features: 0.5,
                        ..ForestConfig::default()
                    }),
                },
            ],
            ModelKind::External => return Err(Error::InvalidInput("external models are loaded, not searched".into())),
        };
        Ok(Self { seed, candidates })
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidates.is_empty() {
            return Err(Error::InvalidInput("grid has no candidates".into()));
        }
        let mut ids: Vec<&str> = self.candidates.iter().map(|c| c.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("grid candidate ids must be unique".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub id: String,
    pub kind: ModelKind,
    pub validation: Option<MetricSet>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct GridResult {
    pub best: Candidate,
    pub model: TrainedModel,
    pub leaderboard: Vec<GridEntry>,
}

/// Trains every candidate on the training part, scores validation MAE and
/// keeps the lowest (earliest on ties). The returned model is the one fitted
/// on the training part alone.
pub fn grid_search(
    split: &SplitFrames,
    grid: &GridSpec,
    target: &str,
    scaling: Option<ScalingMethod>,
) -> Result<GridResult> {
    grid.validate()?;
    let fitted: Vec<Result<(TrainedModel, MetricSet)>> = grid
        .candidates
        .par_iter()
        .map(|c| {
            let m = fit_config(&c.model, &c.id, &split.train, target, scaling, grid.seed)?;
            let pred = predict(&m, &split.validation.x)?;
            let metrics = point_metrics(&split.validation.y, &pred)?;
            Ok((m, metrics))
        })
        .collect();

    let mut leaderboard = Vec::with_capacity(fitted.len());
    let mut best: Option<(usize, f64)> = None;
    for (i, (c, r)) in grid.candidates.iter().zip(&fitted).enumerate() {
        let (validation, error) = match r {
            Ok((_, m)) => {
                if best.is_none_or(|(_, mae)| m.mae < mae) {
                    best = Some((i, m.mae));
                }
                (Some(m.clone()), None)
            }
            Err(e) => (None, Some(e.to_string())),
        };
        leaderboard.push(GridEntry {
            id: c.id.clone(),
            kind: c.model.kind(),
            validation,
            error,
        });
    }
    let (i, _) = best.ok_or_else(|| {
        let reasons: Vec<String> = leaderboard.iter().filter_map(|e| e.error.clone()).collect();
        Error::Model(format!("every grid candidate failed: {}", reasons.join("; ")))
    })?;
    let model = fitted.into_iter().nth(i).expect("index in range")?.0;
    Ok(GridResult {
        best: grid.candidates[i].clone(),
        model,
        leaderboard,
    })
}

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ColumnKind, FeatureTable};
use crate::error::{Error, Result};
use crate::flowmetrics::mean_and_sd;
use crate::time::Timestamp;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingMethod {
    #[serde(rename = "minmax")]
    MinMax,
    #[serde(rename = "zscore")]
    ZScore,
}

/// `scaled = (x - offset) / scale`; binary and constant columns keep
/// `offset = 0, scale = 1` and `offset = x, scale = 1` respectively.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub name: String,
    pub offset: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub method: ScalingMethod,
    pub columns: Vec<ColumnScale>,
    /// First and last timestamp of the rows the statistics came from.
    pub fit_start: Timestamp,
    pub fit_end: Timestamp,
}

/// Fits per-column statistics on `rows` of `table` only.
pub fn fit_scaler(table: &FeatureTable, method: ScalingMethod, rows: Range<usize>) -> Result<ScalerParams> {
    if rows.is_empty() || rows.end > table.len() {
        return Err(Error::Feature(format!(
            "scaler fit range {rows:?} is empty or exceeds {} rows",
            table.len()
        )));
    }
    let fit = &table.rows()[rows.clone()];
    let columns = table
        .columns()
        .iter()
        .enumerate()
        .map(|(j, col)| {
            let (offset, scale) = if col.kind == ColumnKind::Binary {
                (0.0, 1.0)
            } else {
                let values: Vec<f64> = fit.iter().map(|r| r[j]).collect();
                let (offset, spread) = match method {
                    ScalingMethod::MinMax => {
                        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        (lo, hi - lo)
                    }
                    ScalingMethod::ZScore => mean_and_sd(&values).expect("non-empty"),
                };
                if spread > 0.0 {
                    (offset, spread)
                } else {
                    (offset, 1.0)
                }
            };
            ColumnScale {
                name: col.name.clone(),
                offset,
                scale,
            }
        })
        .collect();
    Ok(ScalerParams {
        method,
        columns,
        fit_start: table.timestamps()[rows.start],
        fit_end: table.timestamps()[rows.end - 1],
    })
}

pub fn apply_scaler(table: &FeatureTable, params: &ScalerParams) -> Result<FeatureTable> {
    let expected: Vec<String> = params.columns.iter().map(|c| c.name.clone()).collect();
    let actual = table.column_names();
    if expected != actual {
        return Err(Error::ColumnMismatch { expected, actual });
    }
    let rows = table
        .rows()
        .iter()
        .map(|r| {
            r.iter()
                .zip(&params.columns)
                .map(|(v, c)| (v - c.offset) / c.scale)
                .collect()
        })
        .collect();
    table.with_rows(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featurebuild::Column;
    use proptest::prelude::*;

    fn table(values: &[(f64, f64, f64)]) -> FeatureTable {
        let t0: Timestamp = "2019-01-01T00:00".parse().unwrap();
        let col = |n: &str, kind| Column { name: n.into(), kind };
        FeatureTable::new(
            vec![
                col("a", ColumnKind::Numeric),
                col("flag", ColumnKind::Binary),
                col("c", ColumnKind::Numeric),
            ],
            values.iter().map(|&(a, b, c)| vec![a, b, c]).collect(),
            (0..values.len()).map(|i| t0.add_hours(i as i64)).collect(),
            60,
        )
        .unwrap()
    }

    #[test]
    fn zscore_uses_train_rows_only() {
        let t = table(&[(1.0, 0.0, 5.0), (3.0, 1.0, 5.0), (100.0, 1.0, 9.0)]);
        let p = fit_scaler(&t, ScalingMethod::ZScore, 0..2).unwrap();
        assert_eq!(p.columns[0].offset, 2.0);
        assert_eq!(p.columns[0].scale, 1.0);
        let s = apply_scaler(&t, &p).unwrap();
        assert_eq!(s.rows()[0], vec![-1.0, 0.0, 0.0]);
        assert_eq!(s.rows()[1], vec![1.0, 1.0, 0.0]);
        assert_eq!(s.rows()[2], vec![98.0, 1.0, 4.0]);
    }

    #[test]
    fn minmax_maps_train_to_unit_interval() {
        let t = table(&[(2.0, 1.0, 0.0), (6.0, 0.0, 4.0), (4.0, 1.0, 2.0)]);
        let p = fit_scaler(&t, ScalingMethod::MinMax, 0..3).unwrap();
        let s = apply_scaler(&t, &p).unwrap();
        assert_eq!(s.column("a").unwrap(), vec![0.0, 1.0, 0.5]);
        assert_eq!(s.column("flag").unwrap(), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn errors() {
        let t = table(&[(1.0, 0.0, 1.0)]);
        assert!(fit_scaler(&t, ScalingMethod::ZScore, 0..0).is_err());
        assert!(fit_scaler(&t, ScalingMethod::ZScore, 0..2).is_err());
        let mut p = fit_scaler(&t, ScalingMethod::ZScore, 0..1).unwrap();
        p.columns.swap(0, 2);
        assert!(matches!(apply_scaler(&t, &p), Err(Error::ColumnMismatch { .. })));
    }

    #[test]
    fn params_round_trip_json() {
        let t = table(&[(1.0, 0.0, 1.0), (2.0, 1.0, 3.0)]);
        let p = fit_scaler(&t, ScalingMethod::MinMax, 0..2).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(json.contains("\"minmax\""));
        assert_eq!(serde_json::from_str::<ScalerParams>(&json).unwrap(), p);
    }

    proptest! {
        #[test]
        fn zscore_train_columns_have_zero_mean_unit_sd(
            vals in prop::collection::vec((-1e3f64..1e3, 0u8..2, -50f64..50.0), 2..40),
        ) {
            let rows: Vec<(f64, f64, f64)> = vals.iter().map(|&(a, b, c)| (a, b as f64, c)).collect();
            let t = table(&rows);
            let p = fit_scaler(&t, ScalingMethod::ZScore, 0..t.len()).unwrap();
            let s = apply_scaler(&t, &p).unwrap();
            for name in ["a", "c"] {
                let col = s.column(name).unwrap();
                let (m, sd) = mean_and_sd(&col).unwrap();
                prop_assert!(m.abs() < 1e-9);
                prop_assert!(sd.abs() < 1e-9 || (sd - 1.0).abs() < 1e-9);
            }
            prop_assert_eq!(s.column("flag").unwrap(), t.column("flag").unwrap());
        }

        #[test]
        fn minmax_train_within_unit_interval(vals in prop::collection::vec(-1e3f64..1e3, 1..40)) {
            let rows: Vec<(f64, f64, f64)> = vals.iter().map(|&a| (a, 0.0, a * 2.0)).collect();
            let t = table(&rows);
            let p = fit_scaler(&t, ScalingMethod::MinMax, 0..t.len()).unwrap();
            for v in apply_scaler(&t, &p).unwrap().column("a").unwrap() {
                prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v));
            }
        }
    }
}

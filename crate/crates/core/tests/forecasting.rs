use std::fs;
use std::sync::OnceLock;

use edflow::evaluation::point_metrics;
use edflow::featurebuild::ScalingMethod;
use edflow::featurebuild::{assemble_variant, make_supervised, variant, DatasetVariantSpec, TARGET_COLUMN};
use edflow::flowmetrics::HourlyRecord;
use edflow::forecast::{chrono_split, fit_config, predict, ForestConfig, ModelConfig, TrainedModel, DEFAULT_FRACTIONS};
use edflow::pipeline::{ingest_dir, IngestOptions};
use edflow::synthgen::{generate_world, SynthConfig};
use proptest::prelude::*;

fn world() -> &'static [HourlyRecord] {
    static RECORDS: OnceLock<Vec<HourlyRecord>> = OnceLock::new();
    RECORDS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let config = SynthConfig {
            days: 150,
            seed: 21,
            weekly_amplitude: 0.3,
            ..SynthConfig::default()
        };
        for (name, bytes) in generate_world(&config).unwrap().render().unwrap() {
            fs::write(dir.path().join(name), bytes).unwrap();
        }
        ingest_dir(dir.path(), &IngestOptions::default()).unwrap().0
    })
}

#[test]
fn weekly_seasonal_naive_beats_last_value() {
    let spec = DatasetVariantSpec {
        target_lag_window: 168,
        ..variant("DS0").unwrap()
    };
    let assembled = assemble_variant(world(), &spec).unwrap();
    let frame = make_supervised(
        &assembled.table,
        TARGET_COLUMN,
        6,
        assembled.window,
        assembled.source_rows,
    )
    .unwrap();
    let split = chrono_split(&frame, DEFAULT_FRACTIONS).unwrap();
    let mae = |config: ModelConfig| {
        let m = fit_config(&config, "m", &split.train, TARGET_COLUMN, None, 0).unwrap();
        point_metrics(&split.test.y, &predict(&m, &split.test.x).unwrap())
            .unwrap()
            .mae
    };
    let weekly = mae(ModelConfig::SeasonalNaive { period: 168 });
    let last = mae(ModelConfig::Naive);
    assert!(weekly < last, "seasonal(168) {weekly} vs last value {last}");
}

#[test]
fn seasonal_period_shorter_than_horizon_is_rejected() {
    let assembled = assemble_variant(world(), &variant("DS0").unwrap()).unwrap();
    let frame = make_supervised(
        &assembled.table,
        TARGET_COLUMN,
        30,
        assembled.window,
        assembled.source_rows,
    )
    .unwrap();
    assert!(fit_config(
        &ModelConfig::SeasonalNaive { period: 24 },
        "s",
        &frame,
        TARGET_COLUMN,
        None,
        0
    )
    .is_err());
}

fn small_split() -> &'static edflow::forecast::SplitFrames {
    static SPLIT: OnceLock<edflow::forecast::SplitFrames> = OnceLock::new();
    SPLIT.get_or_init(|| {
        let assembled = assemble_variant(&world()[..24 * 40], &variant("DS9").unwrap()).unwrap();
        let frame = make_supervised(
            &assembled.table,
            TARGET_COLUMN,
            3,
            assembled.window,
            assembled.source_rows,
        )
        .unwrap();
        chrono_split(&frame, DEFAULT_FRACTIONS).unwrap()
    })
}

fn round_trip(model: &TrainedModel) -> TrainedModel {
    TrainedModel::from_json(&model.to_json().unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn saved_models_predict_identically(
        lambda in 0.0f64..50.0,
        trees in 1usize..6,
        depth in 1usize..10,
        seed in any::<u64>(),
        zscore in any::<bool>(),
    ) {
        let split = small_split();
        let scaling = Some(if zscore { ScalingMethod::ZScore } else { ScalingMethod::MinMax });
        let forest = ForestConfig { n_trees: trees, max_depth: depth, ..ForestConfig::default() };
        for config in [ModelConfig::Ridge { lambda }, ModelConfig::Forest(forest), ModelConfig::Naive] {
            let m = fit_config(&config, "c", &split.train, TARGET_COLUMN, scaling, seed).unwrap();
            let back = round_trip(&m);
            prop_assert_eq!(&back, &m);
            let a = predict(&m, &split.test.x).unwrap();
            let b = predict(&back, &split.test.x).unwrap();
            prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn same_seed_same_forest(seed in any::<u64>()) {
        let split = small_split();
        let config = ModelConfig::Forest(ForestConfig { n_trees: 4, max_depth: 6, ..ForestConfig::default() });
        let a = fit_config(&config, "f", &split.train, TARGET_COLUMN, None, seed).unwrap();
        let b = fit_config(&config, "f", &split.train, TARGET_COLUMN, None, seed).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}

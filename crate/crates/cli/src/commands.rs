use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Parser;
use edflow::evaluation::{
    emit_report, point_metrics, write_leaderboard, EvaluationReport, LeaderboardRow, ModelIdentity, ReportFormat,
    StrataSpec,
};
use edflow::featurebuild::{variant, DatasetInfo, Task, TARGET_COLUMN};
use edflow::flowmetrics::{read_integrated, write_integrated, HourlyRecord};
use edflow::forecast::{chrono_split, grid_search, predict, GridSpec, ModelKind, TrainedModel, DEFAULT_FRACTIONS};
use edflow::pipeline::{ingest_dir, IngestOptions, SOURCE_FILES};
use edflow::synthgen::{generate_world, SynthConfig};
use serde::Serialize;

use crate::manifest::{sha256_hex, Outputs, RunManifest};
use crate::{
    Cli, Command, DatasetArgs, EvaluateArgs, Failure, FeaturizeArgs, ForecastArgs, FormatArg, IngestArgs, ReplayArgs,
    SynthArgs, TrainArgs,
};

pub const INTEGRATED_FILE: &str = "integrated.csv";

pub fn dispatch(command: Command, raw: Vec<String>) -> Result<(), Failure> {
    match command {
        Command::Synth(a) => synth(a, raw),
        Command::Ingest(a) => ingest(a, raw),
        Command::Featurize(a) => featurize(a, raw),
        Command::Train(a) => train(a, raw),
        Command::Evaluate(a) => evaluate(a, raw),
        Command::Forecast(a) => forecast(a, raw),
        Command::Replay(a) => replay(a),
    }
}

fn json_bytes<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

fn read_records(dir: &Path, manifest: &mut RunManifest) -> anyhow::Result<Vec<HourlyRecord>> {
    let path = dir.join(INTEGRATED_FILE);
    manifest.add_input(&path)?;
    let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_integrated(BufReader::new(file))?)
}

fn load_model(path: &Path, manifest: &mut RunManifest) -> anyhow::Result<TrainedModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading model file {}", path.display()))?;
    manifest.add_input(path)?;
    TrainedModel::from_json(&text).with_context(|| format!("loading model file {}", path.display()))
}

fn dataset_of(model: &TrainedModel) -> anyhow::Result<&DatasetInfo> {
    model.dataset.as_ref().ok_or_else(|| {
        anyhow!(
            "model `{}` does not record how its features were built",
            model.config_id
        )
    })
}

fn dataset_info(args: &DatasetArgs) -> Result<DatasetInfo, Failure> {
    DatasetInfo::new(
        &args.variant,
        args.task.into(),
        args.horizon.map(|h| h as usize),
        args.anchor,
    )
    .map_err(|e| Failure::Usage(e.to_string()))
}

fn synth(args: SynthArgs, raw: Vec<String>) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("synth", raw);
    let mut config = match &args.config {
        Some(path) => {
            manifest.add_input(path)?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SynthConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(days) = args.days {
        config.days = days;
    }
    if let Some(start) = args.start {
        config.start = start;
    }
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let world = generate_world(&config)?;
    let mut out = Outputs::default();
    for (name, bytes) in world.render()? {
        out.add(name, bytes);
    }
    out.add("synth_config.json", json_bytes(&config)?);
    manifest.seed = Some(config.seed);
    out.commit(&args.out, manifest)?;
    Ok(())
}

fn ingest(args: IngestArgs, raw: Vec<String>) -> Result<(), Failure> {
    if args.max_wait <= 0 {
        return Err(Failure::Usage("--max-wait must be positive".into()));
    }
    let mut manifest = RunManifest::new("ingest", raw);
    for name in SOURCE_FILES {
        manifest.add_input(&args.input.join(name))?;
    }
    let options = IngestOptions {
        max_wait_minutes: args.max_wait,
        ..IngestOptions::default()
    };
    let (records, summary) = ingest_dir(&args.input, &options)?;
    let mut table = Vec::new();
    write_integrated(&mut table, &records)?;
    let mut out = Outputs::default();
    out.add(INTEGRATED_FILE, table);
    out.add("ingest_summary.json", json_bytes(&summary)?);
    out.commit(&args.out, manifest)?;
    for f in &summary.row_errors {
        eprintln!("warning: {} rejected {} row(s)", f.file, f.errors.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct FeatureDescription<'a> {
    dataset: &'a DatasetInfo,
    columns: &'a [edflow::featurebuild::Column],
    window: usize,
    source_rows: usize,
    rows: usize,
}

fn featurize(args: FeaturizeArgs, raw: Vec<String>) -> Result<(), Failure> {
    let info = dataset_info(&args.dataset)?;
    let mut manifest = RunManifest::new("featurize", raw);
    let records = read_records(&args.input, &mut manifest)?;
    let assembled = info.assemble(&records)?;
    let mut csv = Vec::new();
    assembled.table.write_csv(&mut csv)?;
    let description = FeatureDescription {
        dataset: &info,
        columns: assembled.table.columns(),
        window: assembled.window,
        source_rows: assembled.source_rows,
        rows: assembled.table.len(),
    };
    let mut out = Outputs::default();
    out.add("features.csv", csv);
    out.add("features.json", json_bytes(&description)?);
    manifest.variant_id = Some(info.variant_id.clone());
    manifest.horizon = Some(info.horizon);
    out.commit(&args.out, manifest)?;
    Ok(())
}

fn seasonal_period(task: Task) -> usize {
    match task {
        Task::Hourly => 24,
        Task::Daily => 7,
    }
}

fn train(args: TrainArgs, raw: Vec<String>) -> Result<(), Failure> {
    let info = dataset_info(&args.dataset)?;
    let mut manifest = RunManifest::new("train", raw);
    let mut grid = match (&args.grid, args.model) {
        (None, None) => return Err(Failure::Usage("train needs --model or --grid".into())),
        (None, Some(m)) => GridSpec::default_for(m.into(), seasonal_period(info.task), 0)?,
        (Some(path), model) => {
            manifest.add_input(path)?;
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mut grid: GridSpec =
                serde_json::from_str(&text).with_context(|| format!("parsing grid {}", path.display()))?;
            if let Some(m) = model {
                let kind: ModelKind = m.into();
                grid.candidates.retain(|c| c.model.kind() == kind);
                if grid.candidates.is_empty() {
                    return Err(Failure::Usage(format!("grid has no {} candidates", kind.name())));
                }
            }
            grid
        }
    };
    if let Some(seed) = args.seed {
        grid.seed = seed;
    }
    grid.validate()?;
    let records = read_records(&args.input, &mut manifest)?;
    let (_, frame) = info.supervised(&records)?;
    let split = chrono_split(&frame, DEFAULT_FRACTIONS)?;
    let scaling = variant(&info.variant_id)?.scaling;
    let mut result = grid_search(&split, &grid, TARGET_COLUMN, Some(scaling))?;
    result.model.dataset = Some(info.clone());

    #[derive(Serialize)]
    struct Search<'a> {
        selected: &'a str,
        seed: u64,
        candidates: &'a [edflow::forecast::GridEntry],
    }
    let mut out = Outputs::default();
    out.add("model.json", result.model.to_json()?.into_bytes());
    out.add(
        "grid_results.json",
        json_bytes(&Search {
            selected: &result.best.id,
            seed: grid.seed,
            candidates: &result.leaderboard,
        })?,
    );
    manifest.variant_id = Some(info.variant_id);
    manifest.horizon = Some(info.horizon);
    manifest.model_config = Some(serde_json::to_value(&result.best)?);
    manifest.seed = Some(grid.seed);
    out.commit(&args.out, manifest)?;
    Ok(())
}

fn evaluate(args: EvaluateArgs, raw: Vec<String>) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("evaluate", raw);
    let fixed = match (args.strata_mean, args.strata_sd) {
        (Some(mean), Some(sd)) => Some(StrataSpec::new(mean, sd).map_err(|e| Failure::Usage(e.to_string()))?),
        _ => None,
    };
    let format = match args.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
    };
    let ext = match format {
        ReportFormat::Json => "json",
        ReportFormat::Csv => "csv",
    };
    let models: Vec<TrainedModel> = args
        .model_files
        .iter()
        .map(|p| load_model(p, &mut manifest))
        .collect::<anyhow::Result<_>>()?;
    let records = read_records(&args.input, &mut manifest)?;

    let mut out = Outputs::default();
    let mut board = Vec::new();
    for (i, model) in models.iter().enumerate() {
        let info = dataset_of(model)?;
        let (_, frame) = info.supervised(&records)?;
        let split = chrono_split(&frame, DEFAULT_FRACTIONS)?;
        let val = point_metrics(&split.validation.y, &predict(model, &split.validation.x)?)?;
        let test_pred = predict(model, &split.test.x)?;
        let strata = match &fixed {
            Some(s) => s.clone(),
            None => StrataSpec::fit(&split.train.y)?,
        };
        let report = EvaluationReport::build(
            ModelIdentity {
                kind: model.kind.name().into(),
                config_id: model.config_id.clone(),
            },
            &info.variant_id,
            info.task,
            info.horizon,
            &split.test.y,
            &test_pred,
            &split.test.target_times,
            strata,
        )?;
        let name = if models.len() == 1 {
            format!("report.{ext}")
        } else {
            format!("report-{i}-{}.{ext}", model.config_id)
        };
        out.add(name, emit_report(&report, format)?.into_bytes());
        board.push(LeaderboardRow {
            variant_id: info.variant_id.clone(),
            model_kind: model.kind.name().into(),
            config_id: model.config_id.clone(),
            val_mae: Some(val.mae),
            test_mae: Some(report.overall.mae),
            test_mse: Some(report.overall.mse),
            test_rmse: Some(report.overall.rmse),
            test_r2: report.overall.r2,
        });
        if models.len() == 1 {
            manifest.variant_id = Some(info.variant_id.clone());
            manifest.horizon = Some(info.horizon);
            manifest.seed = Some(model.generator.seed);
        }
    }
    let mut csv = Vec::new();
    write_leaderboard(&mut csv, &board)?;
    out.add("leaderboard.csv", csv);
    out.commit(&args.out, manifest)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ForecastOutput {
    model: String,
    variant_id: String,
    task: Task,
    horizon: usize,
    anchor: edflow::Timestamp,
    target_time: edflow::Timestamp,
    /// Daily task only: start of the 24-hour window being predicted.
    window_start: Option<edflow::Timestamp>,
    prediction: f64,
}

fn forecast(args: ForecastArgs, raw: Vec<String>) -> Result<(), Failure> {
    let mut manifest = RunManifest::new("forecast", raw);
    let model = load_model(&args.model_file, &mut manifest)?;
    let info = dataset_of(&model)?.clone();
    if let Some(task) = args.task {
        let task: Task = task.into();
        if task != info.task {
            return Err(Failure::Usage(format!(
                "--task {} does not match the model's {} task",
                task, info.task
            )));
        }
    }
    let records = read_records(&args.input, &mut manifest)?;
    let assembled = info.assemble(&records)?;
    let times = assembled.table.timestamps();
    let row = match info.task {
        Task::Hourly => times.iter().position(|t| *t == args.at).ok_or_else(|| {
            anyhow!(
                "no complete feature row at {}; lags may reach into missing hours",
                args.at
            )
        })?,
        Task::Daily => times
            .iter()
            .rposition(|t| *t <= args.at)
            .ok_or_else(|| anyhow!("no complete daily window ends by {}", args.at))?,
    };
    let anchor = times[row];
    let prediction = predict(&model, &assembled.table.slice(row..row + 1))?[0];
    let target_time = anchor.add_minutes(info.horizon as i64 * info.step_minutes());
    let output = ForecastOutput {
        model: model.config_id.clone(),
        variant_id: info.variant_id.clone(),
        task: info.task,
        horizon: info.horizon,
        anchor,
        target_time,
        window_start: (info.task == Task::Daily).then(|| target_time.add_hours(-24)),
        prediction,
    };
    let bytes = json_bytes(&output)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    if let Some(dir) = &args.out {
        let mut out = Outputs::default();
        out.add("forecast.json", bytes);
        manifest.variant_id = Some(info.variant_id);
        manifest.horizon = Some(info.horizon);
        out.commit(dir, manifest)?;
    }
    Ok(())
}

/// Argument list with the `--out` directory replaced.
fn redirect_out(args: &[String], dir: &Path) -> Option<Vec<String>> {
    let mut out = Vec::with_capacity(args.len());
    let mut found = false;
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out" {
            it.next();
            out.push(a.clone());
            out.push(dir.display().to_string());
            found = true;
        } else if a.starts_with("--out=") {
            out.push(format!("--out={}", dir.display()));
            found = true;
        } else {
            out.push(a.clone());
        }
    }
    found.then_some(out)
}

fn replay(args: ReplayArgs) -> Result<(), Failure> {
    let text = fs::read_to_string(&args.manifest).with_context(|| format!("reading {}", args.manifest.display()))?;
    let recorded: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.manifest.display()))?;
    if recorded.command == "replay" {
        return Err(Failure::Usage("a replay manifest cannot be replayed".into()));
    }
    for input in &recorded.inputs {
        let bytes = fs::read(&input.path).with_context(|| format!("reading input {}", input.path))?;
        if sha256_hex(&bytes) != input.sha256 {
            return Err(Failure::Data(anyhow!(
                "input {} changed since the recorded run",
                input.path
            )));
        }
    }
    let scratch = tempfile::tempdir()?;
    let replay_args = redirect_out(&recorded.args, scratch.path())
        .ok_or_else(|| Failure::Usage("the recorded command wrote no output directory".into()))?;
    let mut argv = vec!["edflow".to_string(), recorded.command.clone()];
    argv.extend(replay_args.iter().cloned());
    let cli = Cli::try_parse_from(&argv).map_err(|e| Failure::Usage(e.render().to_string()))?;
    dispatch(cli.command, replay_args)?;

    let mut mismatched = Vec::new();
    for output in &recorded.outputs {
        let path: PathBuf = scratch.path().join(&output.path);
        let bytes = fs::read(&path).with_context(|| format!("replayed run did not write {}", output.path))?;
        if sha256_hex(&bytes) != output.sha256 {
            mismatched.push(output.path.clone());
        }
    }
    if !mismatched.is_empty() {
        return Err(Failure::Data(anyhow!("replay differs in {}", mismatched.join(", "))));
    }
    println!("replay ok: {} output(s) reproduced", recorded.outputs.len());
    Ok(())
}

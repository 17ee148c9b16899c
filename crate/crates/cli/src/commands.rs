use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use kpcast_core::eval::{self, ComparisonTable};
use kpcast_core::fusion::FusedDataset;
use kpcast_core::ingest::{self, Sources};
use kpcast_core::model::TrainedModel;
use kpcast_core::{
    baseline, datagen, forest, fusion, pca, ExperimentPlan, FeatureSubset, ForestConfig, KFeatures,
    LagSpec, ModelKind, Mtry, SynthConfig, Timestamp,
};

use crate::config::RunConfig;
use crate::{
    CompareArgs, Command, EvaluateArgs, ForestArgs, FuseArgs, ImportanceArgs, LagArgs, PcaArgs,
    PlanArgs, PredictArgs, SourceArgs, SynthArgs, TrainArgs, UsageError,
};

const DEFAULT_SEED: u64 = 7;
const DEFAULT_TRAIN_FRACTION: f64 = 0.75;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Fuse(a) => fuse(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Importance(a) => importance(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
        Command::Pca(a) => pca_cmd(a),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_file(p, contents),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(contents.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<RunConfig> {
    path.map_or_else(|| Ok(RunConfig::default()), |p| RunConfig::load(p))
}

fn load_sources(args: &SourceArgs, cfg: &RunConfig) -> Result<Sources> {
    let dir = args.data_dir.clone().or_else(|| cfg.data_dir.clone());
    let pick = |flag: &Option<PathBuf>, key: &Option<PathBuf>, file: &str, name: &str| {
        flag.clone()
            .or_else(|| key.clone())
            .or_else(|| dir.as_ref().map(|d| d.join(file)))
            .ok_or_else(|| usage(format!("missing --{name} (or --data-dir)")))
    };
    let solar_path = pick(&args.solar, &cfg.solar, "solar_wind.csv", "solar")?;
    let dst_path = pick(&args.dst, &cfg.dst, "dst.csv", "dst")?;
    let kp_path = pick(&args.kp, &cfg.kp, "kp.csv", "kp")?;

    let solar = ingest::parse_solar_wind(&read(&solar_path)?)
        .with_context(|| solar_path.display().to_string())?;
    let dst = ingest::parse_dst(&read(&dst_path)?).with_context(|| dst_path.display().to_string())?;
    let kp = ingest::parse_kp(&read(&kp_path)?).with_context(|| kp_path.display().to_string())?;
    Sources::from_records(&solar, &dst, &kp).context("cannot lay the records onto their time grids")
}

fn lag_spec(args: &LagArgs, cfg: &RunConfig) -> LagSpec {
    let d = LagSpec::default();
    LagSpec {
        solar_wind_lookback_minutes: args
            .sw_lookback
            .or(cfg.sw_lookback_minutes)
            .unwrap_or(d.solar_wind_lookback_minutes),
        solar_wind_step_minutes: args.sw_step.or(cfg.sw_step_minutes).unwrap_or(d.solar_wind_step_minutes),
        dst_lookback_hours: args.dst_lookback.or(cfg.dst_lookback_hours).unwrap_or(d.dst_lookback_hours),
        kp_lookback_hours: args.kp_lookback.or(cfg.kp_lookback_hours).unwrap_or(d.kp_lookback_hours),
        horizon_hours: args.horizon.or(cfg.horizon_hours).unwrap_or(d.horizon_hours),
    }
}

fn forest_config(args: &ForestArgs, cfg: &RunConfig) -> Result<ForestConfig> {
    let d = ForestConfig::default();
    let mtry = match args.mtry.clone().or_else(|| cfg.mtry.as_ref().map(|w| w.to_string())) {
        Some(s) => s.parse::<Mtry>().map_err(|e| usage(format!("--mtry: {e}")))?,
        None => d.mtry,
    };
    let bootstrap = if args.no_bootstrap {
        false
    } else {
        cfg.bootstrap.unwrap_or(d.bootstrap)
    };
    Ok(ForestConfig {
        n_trees: args.trees.or(cfg.trees).unwrap_or(d.n_trees),
        mtry,
        min_leaf: args.min_leaf.or(cfg.min_leaf).unwrap_or(d.min_leaf),
        seed: args.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED),
        bootstrap,
    })
}

fn init_threads(args: &ForestArgs, cfg: &RunConfig) -> Result<()> {
    if let Some(n) = args.threads.or(cfg.threads) {
        if n == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot start the worker pool")?;
    }
    Ok(())
}

fn build_plan(
    plan: &PlanArgs,
    lags: &LagArgs,
    forest_args: &ForestArgs,
    cfg: &RunConfig,
    sources: &Sources,
) -> Result<ExperimentPlan> {
    let cutoff = match plan.cutoff.clone().or_else(|| cfg.cutoff.clone()) {
        Some(s) => Timestamp::parse(&s).map_err(|e| usage(format!("--cutoff: {e}")))?,
        None => {
            let fraction = plan
                .train_fraction
                .or(cfg.train_fraction)
                .unwrap_or(DEFAULT_TRAIN_FRACTION);
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(usage("--train-fraction must lie strictly between 0 and 1"));
            }
            eval::chronological_cutoff(sources, fraction)
        }
    };
    let model_kind = match plan.model.clone().or_else(|| cfg.model.clone()) {
        Some(s) => s.parse::<ModelKind>().map_err(|e| usage(format!("--model: {e}")))?,
        None => ModelKind::Forest,
    };
    let k_features = match plan
        .k_features
        .clone()
        .or_else(|| cfg.k_features.as_ref().map(|w| w.to_string()))
    {
        Some(s) => s.parse::<KFeatures>().map_err(|e| usage(format!("--k: {e}")))?,
        None => KFeatures::All,
    };
    Ok(ExperimentPlan {
        label: None,
        lag_spec: lag_spec(lags, cfg),
        forest: forest_config(forest_args, cfg)?,
        k_features,
        downsample_l: plan.downsample_l.or(cfg.downsample_l).unwrap_or(1),
        downsample_threshold: plan.threshold.or(cfg.downsample_threshold).unwrap_or(4.0),
        cutoff,
        model_kind,
    })
}

fn load_dataset(path: &Path) -> Result<FusedDataset> {
    FusedDataset::from_csv(&read(path)?).with_context(|| path.display().to_string())
}

fn synth(a: SynthArgs) -> Result<()> {
    let config = SynthConfig {
        seed: a.seed,
        n_days: a.days,
        storm_rate_per_day: a.storm_rate,
        noise_scale: a.noise,
    };
    let sources = datagen::generate(&config)?;
    let (solar, dst, kp) = sources.to_csv()?;
    write_file(&a.out.join("solar_wind.csv"), &solar)?;
    write_file(&a.out.join("dst.csv"), &dst)?;
    write_file(&a.out.join("kp.csv"), &kp)?;
    eprintln!(
        "wrote {} days of synthetic data to {}",
        a.days,
        a.out.display()
    );
    Ok(())
}

fn fuse(a: FuseArgs) -> Result<()> {
    let cfg = load_config(a.sources.config.as_ref())?;
    let spec = lag_spec(&a.lags, &cfg);
    let sources = load_sources(&a.sources, &cfg)?;
    let data = fusion::fuse(&sources, &spec)?;
    eprintln!("fused {} rows x {} features", data.n_rows(), data.n_features());
    emit(a.out.as_deref(), &data.to_csv())
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = RunConfig::default();
    init_threads(&a.forest, &cfg)?;
    let kind = a.model.parse::<ModelKind>().map_err(|e| usage(format!("--model: {e}")))?;
    let data = load_dataset(&a.data)?;
    let model: TrainedModel = match kind {
        ModelKind::Forest => {
            let m = forest::fit(&data, &forest_config(&a.forest, &cfg)?)?;
            if let Some(oob) = m.oob_mse {
                eprintln!("out-of-bag MSE {oob:.6}");
            }
            m.into()
        }
        ModelKind::Linear => baseline::fit_linear(&data)?.into(),
    };
    emit(a.out.as_deref(), &(model.to_json() + "\n"))
}

fn load_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::from_json(&read(path)?).with_context(|| path.display().to_string())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let data = load_dataset(&a.data)?;
    let subset = FeatureSubset::by_name(&data, model.feature_names())
        .with_context(|| format!("{} lacks a feature the model needs", a.data.display()))?;
    let data = fusion::select_features(&data, &subset)?;
    let predictions = model.predict_dataset(&data)?;
    let mut out = String::from("row_time,predicted,actual\n");
    for ((t, p), y) in data.row_times().iter().zip(&predictions).zip(data.targets()) {
        out.push_str(&format!("{t},{p},{y}\n"));
    }
    emit(a.out.as_deref(), &out)
}

fn importance(a: ImportanceArgs) -> Result<()> {
    let TrainedModel::Forest(model) = load_model(&a.model)? else {
        return Err(usage("--model: importance needs a forest model"));
    };
    let mut report = forest::importance(&model);
    if let Some(k) = a.top {
        let subset = forest::top_k(&report, k)?;
        report.ranked.truncate(subset.indices.len());
    }
    emit(a.out.as_deref(), &report.to_csv())
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = load_config(a.sources.config.as_ref())?;
    init_threads(&a.forest, &cfg)?;
    if !matches!(a.format.as_str(), "text" | "json") {
        return Err(usage("--format must be `text` or `json`"));
    }
    let sources = load_sources(&a.sources, &cfg)?;
    let plan = build_plan(&a.plan, &a.lags, &a.forest, &cfg, &sources)?;
    let data = fusion::fuse(&sources, &plan.lag_spec)?;
    let outcome = eval::run_on_dataset(&plan, &data)?;
    let report = &outcome.report;
    if let Some(dir) = a.out_dir.as_ref().or(cfg.out_dir.as_ref()) {
        write_file(&dir.join("report.json"), &(report.to_json() + "\n"))?;
        write_file(&dir.join("report.txt"), &report.to_string())?;
        let mut preds = String::from("row_time,predicted,actual\n");
        for ((t, p), y) in outcome.test_times.iter().zip(&outcome.predictions).zip(&outcome.actual) {
            preds.push_str(&format!("{t},{p},{y}\n"));
        }
        write_file(&dir.join("predictions.csv"), &preds)?;
    }
    match a.format.as_str() {
        "json" => emit(None, &(report.to_json() + "\n")),
        _ => emit(None, &report.to_string()),
    }
}

fn compare(a: CompareArgs) -> Result<()> {
    let cfg = load_config(a.sources.config.as_ref())?;
    init_threads(&a.forest, &cfg)?;
    if !matches!(a.format.as_str(), "text" | "csv") {
        return Err(usage("--format must be `text` or `csv`"));
    }
    let sources = load_sources(&a.sources, &cfg)?;
    let base = build_plan(&a.plan, &a.lags, &a.forest, &cfg, &sources)?;
    let labels: Option<Vec<String>> = a
        .plans
        .as_ref()
        .map(|s| s.split(',').map(|l| l.trim().to_string()).collect())
        .or_else(|| cfg.plans.clone());
    let plans = match labels {
        Some(labels) => labels
            .iter()
            .map(|l| ExperimentPlan::from_label(l, &base).map_err(|e| usage(format!("--plans: {e}"))))
            .collect::<Result<Vec<_>>>()?,
        None => ExperimentPlan::comparison_set(&base),
    };
    let table: ComparisonTable = eval::comparison_table(&plans, &sources)?;
    if let Some(dir) = a.out_dir.as_ref().or(cfg.out_dir.as_ref()) {
        write_file(&dir.join("comparison.csv"), &table.to_csv())?;
        write_file(&dir.join("comparison.txt"), &table.to_string())?;
        let reports = serde_json::to_string_pretty(&table.reports)?;
        write_file(&dir.join("reports.json"), &(reports + "\n"))?;
    }
    match a.format.as_str() {
        "csv" => emit(None, &table.to_csv()),
        _ => emit(None, &table.to_string()),
    }
}

fn pca_cmd(a: PcaArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let model = pca::fit_pca(&data, a.k, a.standardize)?;
    let ratios: Vec<String> = model
        .explained_variance_ratio
        .iter()
        .map(|r| format!("{:.4}", r))
        .collect();
    eprintln!(
        "explained variance ratio: {} (total {:.4})",
        ratios.join(", "),
        model.explained_variance_ratio.iter().sum::<f64>()
    );
    emit(a.out.as_deref(), &pca::projection_csv(&model, &data)?)
}

//! Metrics and the train/evaluate protocol.
//!
//! Stage order is fixed: fuse, chronological split, optional top-k feature
//! selection ranked by a forest fitted on the training split, optional
//! downsampling of low-Kp training rows, final fit, prediction on the test
//! split. Test rows never reach ranking, downsampling or fitting.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::fit_linear;
use crate::error::{Error, Result};
use crate::forest::{self, ForestConfig};
use crate::fusion::{self, FeatureSubset, FusedDataset, LagSpec};
use crate::ingest::Sources;
use crate::model::TrainedModel;
use crate::rng::derive_seed;
use crate::time::Timestamp;

/// Seed stream for the forest that ranks features before selection.
pub const RANKING_STREAM: u64 = 0x5241_4e4b;
/// Seed stream for low-Kp downsampling.
pub const DOWNSAMPLE_STREAM: u64 = 0x4453_4d50;

/// Fraction of pairs with `|predicted - actual| <= 1`.
pub fn accuracy_within_1(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    check_pairs(predicted, actual)?;
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(p, a)| (*p - *a).abs() <= 1.0)
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

fn check_pairs(predicted: &[f64], actual: &[f64]) -> Result<()> {
    if predicted.len() != actual.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: actual.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(v) = predicted.iter().chain(actual).find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(v.to_string()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Forest,
    Linear,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "forest" | "rf" => Ok(ModelKind::Forest),
            "linear" => Ok(ModelKind::Linear),
            _ => Err(format!("model kind must be `forest` or `linear`, got `{s}`")),
        }
    }
}

/// How many ranked features the final model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "KRepr", into = "KRepr")]
pub enum KFeatures {
    #[default]
    All,
    Top(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<KRepr> for KFeatures {
    type Error = String;

    fn try_from(r: KRepr) -> std::result::Result<Self, String> {
        match r {
            KRepr::Count(k) => Ok(KFeatures::Top(k)),
            KRepr::Name(s) => s.parse(),
        }
    }
}

impl From<KFeatures> for KRepr {
    fn from(k: KFeatures) -> Self {
        match k {
            KFeatures::All => KRepr::Name("all".into()),
            KFeatures::Top(k) => KRepr::Count(k),
        }
    }
}

impl std::str::FromStr for KFeatures {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(KFeatures::All);
        }
        s.parse()
            .map(KFeatures::Top)
            .map_err(|_| format!("k must be an integer or `all`, got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Display name; derived from the other fields when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub lag_spec: LagSpec,
    /// `forest.seed` is the master seed for every stage.
    pub forest: ForestConfig,
    pub k_features: KFeatures,
    pub downsample_l: u32,
    pub downsample_threshold: f64,
    pub cutoff: Timestamp,
    pub model_kind: ModelKind,
}

impl ExperimentPlan {
    pub fn new(cutoff: Timestamp) -> Self {
        Self {
            label: None,
            lag_spec: LagSpec::default(),
            forest: ForestConfig::default(),
            k_features: KFeatures::All,
            downsample_l: 1,
            downsample_threshold: 4.0,
            cutoff,
            model_kind: ModelKind::Forest,
        }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        let mut s = match self.model_kind {
            ModelKind::Forest => String::from("RF"),
            ModelKind::Linear => String::from("Linear"),
        };
        if let KFeatures::Top(k) = self.k_features {
            write!(s, " top-{k}").unwrap();
        }
        if self.downsample_l > 1 {
            write!(s, " L={}", self.downsample_l).unwrap();
        }
        s
    }

    /// Parses labels such as `RF`, `RF top-50 L=2` or `Linear` into a copy of
    /// `base` with model kind, `k` and `L` replaced.
    pub fn from_label(label: &str, base: &ExperimentPlan) -> Result<Self> {
        let mut words = label.split_whitespace();
        let bad = || Error::InvalidConfig(format!("cannot parse plan label `{label}`"));
        let model_kind = match words.next().ok_or_else(bad)? {
            "RF" => ModelKind::Forest,
            "Linear" => ModelKind::Linear,
            _ => return Err(bad()),
        };
        let mut plan = ExperimentPlan {
            label: None,
            model_kind,
            k_features: KFeatures::All,
            downsample_l: 1,
            ..base.clone()
        };
        for w in words {
            if let Some(k) = w.strip_prefix("top-") {
                plan.k_features = KFeatures::Top(k.parse().map_err(|_| bad())?);
            } else if let Some(l) = w.strip_prefix("L=") {
                plan.downsample_l = l.parse().map_err(|_| bad())?;
            } else {
                return Err(bad());
            }
        }
        Ok(plan)
    }

    /// The five configurations of the algorithm comparison: full forest,
    /// top-100, top-50, top-50 with L=2, and the linear baseline.
    pub fn comparison_set(base: &ExperimentPlan) -> Vec<ExperimentPlan> {
        ["RF", "RF top-100", "RF top-50", "RF top-50 L=2", "Linear"]
            .iter()
            .map(|l| Self::from_label(l, base).expect("static labels parse"))
            .collect()
    }

    pub fn ranking_config(&self) -> ForestConfig {
        ForestConfig {
            seed: derive_seed(self.forest.seed, RANKING_STREAM),
            ..self.forest.clone()
        }
    }

    pub fn downsample_seed(&self) -> u64 {
        derive_seed(self.forest.seed, DOWNSAMPLE_STREAM)
    }

    fn validate(&self) -> Result<()> {
        self.lag_spec.validate()?;
        if self.downsample_l == 0 {
            return Err(Error::InvalidConfig("downsample L must be >= 1".into()));
        }
        if !(0.0..=9.0).contains(&self.downsample_threshold) {
            return Err(Error::InvalidConfig("downsample threshold must lie in [0, 9]".into()));
        }
        if self.model_kind == ModelKind::Linear && self.k_features != KFeatures::All {
            return Err(Error::InvalidConfig(
                "feature selection is ranked by a forest and only applies to forest plans".into(),
            ));
        }
        Ok(())
    }
}

/// Cutoff placing the first `train_fraction` of the Kp record's span in the
/// training split, floored to the 3-hour grid.
pub fn chronological_cutoff(sources: &Sources, train_fraction: f64) -> Timestamp {
    let cadence = sources.kp.cadence_minutes as i64;
    let span = sources.kp.len() as i64 * cadence;
    let offset = ((span as f64 * train_fraction) as i64).div_euclid(cadence) * cadence;
    sources.kp.start.plus_minutes(offset)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StormBreakdown {
    pub kp_threshold: f64,
    pub n: usize,
    /// Within-1 accuracy on test rows whose actual Kp exceeds the threshold.
    pub accuracy_within_1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub n: usize,
    pub n_train: usize,
    pub n_features: usize,
    pub accuracy_within_1: f64,
    pub mean_abs_error: f64,
    /// Counts of `|error|` in `[0, 1]`, `(1, 2]` and above 2.
    pub per_bin_hits: [usize; 3],
    pub storm: StormBreakdown,
    pub config_echo: ExperimentPlan,
}

impl EvalReport {
    pub fn from_predictions(
        predicted: &[f64],
        actual: &[f64],
        plan: &ExperimentPlan,
        n_train: usize,
        n_features: usize,
    ) -> Result<Self> {
        check_pairs(predicted, actual)?;
        let mut bins = [0usize; 3];
        let mut abs_sum = 0.0;
        for (p, a) in predicted.iter().zip(actual) {
            let e = (p - a).abs();
            abs_sum += e;
            let bin = if e <= 1.0 {
                0
            } else if e <= 2.0 {
                1
            } else {
                2
            };
            bins[bin] += 1;
        }
        let n = predicted.len();
        let storm_idx: Vec<usize> = (0..n)
            .filter(|&i| actual[i] > plan.downsample_threshold)
            .collect();
        let storm_acc = (!storm_idx.is_empty()).then(|| {
            storm_idx
                .iter()
                .filter(|&&i| (predicted[i] - actual[i]).abs() <= 1.0)
                .count() as f64
                / storm_idx.len() as f64
        });
        Ok(Self {
            label: plan.label(),
            n,
            n_train,
            n_features,
            accuracy_within_1: bins[0] as f64 / n as f64,
            mean_abs_error: abs_sum / n as f64,
            per_bin_hits: bins,
            storm: StormBreakdown {
                kp_threshold: plan.downsample_threshold,
                n: storm_idx.len(),
                accuracy_within_1: storm_acc,
            },
            config_echo: plan.clone(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("finite report")
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "plan                 {}", self.label)?;
        writeln!(f, "train rows           {}", self.n_train)?;
        writeln!(f, "features             {}", self.n_features)?;
        writeln!(f, "test rows            {}", self.n)?;
        writeln!(f, "accuracy (|err|<=1)  {:.4}", self.accuracy_within_1)?;
        writeln!(f, "mean |err|           {:.4}", self.mean_abs_error)?;
        writeln!(f, "|err| <= 1           {}", self.per_bin_hits[0])?;
        writeln!(f, "1 < |err| <= 2       {}", self.per_bin_hits[1])?;
        writeln!(f, "|err| > 2            {}", self.per_bin_hits[2])?;
        let storm = format!("Kp > {} rows", self.storm.kp_threshold);
        match self.storm.accuracy_within_1 {
            Some(a) => writeln!(f, "{storm:<21}{} (accuracy {a:.4})", self.storm.n),
            None => writeln!(f, "{storm:<21}0"),
        }
    }
}

/// Everything a run produced, for inspection beyond the report.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: EvalReport,
    pub model: TrainedModel,
    pub selected: Option<FeatureSubset>,
    pub predictions: Vec<f64>,
    pub actual: Vec<f64>,
    pub test_times: Vec<Timestamp>,
}

pub fn run_experiment(plan: &ExperimentPlan, sources: &Sources) -> Result<EvalReport> {
    let data = fusion::fuse(sources, &plan.lag_spec)?;
    Ok(run_on_dataset(plan, &data)?.report)
}

/// Runs every stage after fusion on an already fused dataset.
pub fn run_on_dataset(plan: &ExperimentPlan, data: &FusedDataset) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let (mut train, mut test) = fusion::split_by_time(data, plan.cutoff);
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut selected = None;
    if let (ModelKind::Forest, KFeatures::Top(k)) = (plan.model_kind, plan.k_features) {
        let ranking = forest::fit(&train, &plan.ranking_config())?;
        let subset = forest::top_k(&forest::importance(&ranking), k)?;
        train = fusion::select_features(&train, &subset)?;
        test = fusion::select_features(&test, &subset)?;
        selected = Some(subset);
    }
    if plan.downsample_l > 1 {
        train = fusion::downsample_low_kp(
            &train,
            plan.downsample_l,
            plan.downsample_threshold,
            plan.downsample_seed(),
        )?;
    }

    let model: TrainedModel = match plan.model_kind {
        ModelKind::Forest => forest::fit(&train, &plan.forest)?.into(),
        ModelKind::Linear => fit_linear(&train)?.into(),
    };
    let predictions = model.predict_dataset(&test)?;
    let report = EvalReport::from_predictions(
        &predictions,
        test.targets(),
        plan,
        train.n_rows(),
        train.n_features(),
    )?;
    Ok(ExperimentOutcome {
        report,
        model,
        selected,
        predictions,
        actual: test.targets().to_vec(),
        test_times: test.row_times().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub reports: Vec<EvalReport>,
}

impl ComparisonTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,accuracy\n");
        for r in &self.rows {
            writeln!(out, "{},{}", r.label, r.accuracy).unwrap();
        }
        out
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.rows.iter().map(|r| r.label.len()).max().unwrap_or(5).max(5);
        writeln!(f, "{:<width$}  accuracy", "model")?;
        for r in &self.rows {
            writeln!(f, "{:<width$}  {:.4}", r.label, r.accuracy)?;
        }
        Ok(())
    }
}

/// Runs each plan (concurrently) and tabulates accuracy in input order.
/// Sources are fused once per distinct lag specification.
pub fn comparison_table(plans: &[ExperimentPlan], sources: &Sources) -> Result<ComparisonTable> {
    if plans.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut fused: HashMap<&LagSpec, FusedDataset> = HashMap::new();
    for p in plans {
        if !fused.contains_key(&p.lag_spec) {
            fused.insert(&p.lag_spec, fusion::fuse(sources, &p.lag_spec)?);
        }
    }
    let reports: Vec<EvalReport> = plans
        .par_iter()
        .map(|p| run_on_dataset(p, &fused[&p.lag_spec]).map(|o| o.report))
        .collect::<Result<_>>()?;
    Ok(ComparisonTable {
        rows: reports
            .iter()
            .map(|r| ComparisonRow {
                label: r.label.clone(),
                accuracy: r.accuracy_within_1,
            })
            .collect(),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_accuracy() {
        let a = accuracy_within_1(&[3.0, 5.2, 7.0], &[3.9, 3.9, 7.5]).unwrap();
        assert_eq!(a, 2.0 / 3.0);
        assert_eq!(accuracy_within_1(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(accuracy_within_1(&[4.0], &[3.0]).unwrap(), 1.0);
        assert_eq!(accuracy_within_1(&[], &[]), Err(Error::EmptyInput));
        assert_eq!(
            accuracy_within_1(&[1.0], &[1.0, 2.0]),
            Err(Error::LengthMismatch { left: 1, right: 2 })
        );
    }

    #[test]
    fn labels_round_trip() {
        let base = ExperimentPlan::new(Timestamp::from_minutes(0));
        let set = ExperimentPlan::comparison_set(&base);
        let labels: Vec<String> = set.iter().map(ExperimentPlan::label).collect();
        assert_eq!(labels, ["RF", "RF top-100", "RF top-50", "RF top-50 L=2", "Linear"]);
        assert_eq!(set[3].downsample_l, 2);
        assert_eq!(set[3].k_features, KFeatures::Top(50));
        assert!(ExperimentPlan::from_label("SVM", &base).is_err());
        assert!(ExperimentPlan::from_label("RF top-x", &base).is_err());
    }

    #[test]
    fn report_bins() {
        let plan = ExperimentPlan::new(Timestamp::from_minutes(0));
        let r = EvalReport::from_predictions(&[1.0, 2.0, 5.0, 6.0], &[1.5, 3.5, 8.0, 5.0], &plan, 10, 3).unwrap();
        assert_eq!(r.per_bin_hits, [2, 1, 1]);
        assert_eq!(r.accuracy_within_1, 0.5);
        assert_eq!(r.storm.n, 2);
        assert_eq!(r.storm.accuracy_within_1, Some(0.5));
        assert!((r.mean_abs_error - (0.5 + 1.5 + 3.0 + 1.0) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn k_features_serde() {
        assert_eq!(serde_json::to_string(&KFeatures::All).unwrap(), "\"all\"");
        assert_eq!(serde_json::from_str::<KFeatures>("50").unwrap(), KFeatures::Top(50));
        assert_eq!("all".parse::<KFeatures>().unwrap(), KFeatures::All);
    }
}

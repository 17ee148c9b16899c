//! Random forest regression.
//!
//! Each tree is a CART regressor grown on a bootstrap sample. At every node a
//! random subset of `mtry` features is scanned for the threshold minimising
//! the summed squared error of the two children; thresholds are midpoints
//! between consecutive distinct values. Growth stops at nodes with at most
//! `min_leaf` rows, constant targets, or no separating threshold. The forest
//! predicts the mean of its trees.
//!
//! Reproducibility: tree `i` draws all of its randomness (bootstrap, then
//! per-node feature sampling in depth-first, left-first order) from a
//! generator seeded with `derive_seed(seed, i)`. Trees are independent, so
//! the thread count never changes the fitted model.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{FeatureSubset, FusedDataset};
use crate::rng::{derive_seed, SplitMix64};

/// Features tried per split: `Default` is `floor(p / 3)`, at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "MtryRepr", into = "MtryRepr")]
pub enum Mtry {
    #[default]
    Default,
    Fixed(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MtryRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<MtryRepr> for Mtry {
    type Error = String;

    fn try_from(r: MtryRepr) -> std::result::Result<Self, String> {
        match r {
            MtryRepr::Count(n) => Ok(Mtry::Fixed(n)),
            MtryRepr::Name(s) if s == "default" => Ok(Mtry::Default),
            MtryRepr::Name(s) => Err(format!("mtry must be an integer or \"default\", got {s:?}")),
        }
    }
}

impl From<Mtry> for MtryRepr {
    fn from(m: Mtry) -> Self {
        match m {
            Mtry::Default => MtryRepr::Name("default".into()),
            Mtry::Fixed(n) => MtryRepr::Count(n),
        }
    }
}

impl std::str::FromStr for Mtry {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "default" {
            return Ok(Mtry::Default);
        }
        s.parse()
            .map(Mtry::Fixed)
            .map_err(|_| format!("mtry must be an integer or `default`, got `{s}`"))
    }
}

impl Mtry {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            Mtry::Default => (n_features / 3).max(1),
            Mtry::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub min_leaf: usize,
    pub seed: u64,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            mtry: Mtry::Default,
            min_leaf: 5,
            seed: 0,
            bootstrap: true,
        }
    }
}

impl ForestConfig {
    fn validate(&self, n_features: usize) -> Result<usize> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidConfig("min_leaf must be >= 1".into()));
        }
        let mtry = self.mtry.resolve(n_features);
        if mtry == 0 || mtry > n_features {
            return Err(Error::InvalidConfig(format!(
                "mtry = {mtry} must lie in 1..={n_features}"
            )));
        }
        Ok(mtry)
    }
}

/// A regression tree node. Rows with `value <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "t")]
        threshold: f64,
        #[serde(rename = "l")]
        left: Box<TreeNode>,
        #[serde(rename = "r")]
        right: Box<TreeNode>,
    },
    Leaf {
        #[serde(rename = "p")]
        prediction: f64,
        #[serde(rename = "n")]
        n_samples: usize,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { prediction, .. } => return *prediction,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn node_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => 1 + left.node_count() + right.node_count(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub config: ForestConfig,
    pub feature_names: Vec<String>,
    /// Smallest and largest training target.
    pub target_range: (f64, f64),
    /// Mean decrease in squared error per feature, normalised to sum 1.
    pub importances: Vec<f64>,
    /// Out-of-bag mean squared error; absent without bootstrap or when no
    /// row was ever left out.
    #[serde(default)]
    pub oob_mse: Option<f64>,
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        predict(self, row)
    }

    pub fn predict_dataset(&self, data: &FusedDataset) -> Result<Vec<f64>> {
        data.rows().map(|r| predict(self, r)).collect()
    }
}

/// Per-tree output, merged in tree order.
struct GrownTree {
    root: TreeNode,
    importance: Vec<f64>,
    oob: Vec<(usize, f64)>,
}

struct Grower<'a> {
    columns: &'a [Vec<f64>],
    targets: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    rng: SplitMix64,
    importance: Vec<f64>,
    sample_size: f64,
    scratch: Vec<(f64, f64)>,
}

struct Split {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>) -> TreeNode {
        let n = rows.len();
        let first = self.targets[rows[0]];
        let (mut lo, mut hi, mut sum) = (first, first, 0.0);
        for &r in &rows {
            let y = self.targets[r];
            lo = lo.min(y);
            hi = hi.max(y);
            sum += y;
        }
        let leaf = |sum: f64| TreeNode::Leaf {
            prediction: if lo == hi { lo } else { (sum / n as f64).clamp(lo, hi) },
            n_samples: n,
        };
        if n <= self.min_leaf || lo == hi {
            return leaf(sum);
        }
        let mean = sum / n as f64;
        let Some(split) = self.best_split(&rows, mean) else {
            return leaf(sum);
        };

        let column = &self.columns[split.feature];
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| column[r] <= split.threshold);
        debug_assert!(!left.is_empty() && !right.is_empty());
        let gain = self.sse(&rows) - self.sse(&left) - self.sse(&right);
        self.importance[split.feature] += gain.max(0.0) / self.sample_size;
        let left = Box::new(self.grow(left));
        let right = Box::new(self.grow(right));
        TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        }
    }

    fn sse(&self, rows: &[usize]) -> f64 {
        let n = rows.len() as f64;
        let mean = rows.iter().map(|&r| self.targets[r]).sum::<f64>() / n;
        rows.iter()
            .map(|&r| {
                let d = self.targets[r] - mean;
                d * d
            })
            .sum()
    }

    /// Minimising the children's summed squared error is the same as
    /// maximising `S_l^2 / n_l + S_r^2 / n_r` over target sums; targets are
    /// centred on the node mean first to keep those sums small.
    fn best_split(&mut self, rows: &[usize], mean: f64) -> Option<Split> {
        let p = self.columns.len();
        let features: Vec<usize> = if self.mtry >= p {
            (0..p).collect()
        } else {
            let mut f = self.rng.sample_indices(p, self.mtry);
            f.sort_unstable();
            f
        };
        let n = rows.len();
        let mut best: Option<Split> = None;
        for f in features {
            let column = &self.columns[f];
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&r| (column[r], self.targets[r] - mean)));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[n - 1].0 {
                continue;
            }
            let total: f64 = self.scratch.iter().map(|s| s.1).sum();
            let mut left_sum = 0.0;
            for i in 0..n - 1 {
                left_sum += self.scratch[i].1;
                let (x, next) = (self.scratch[i].0, self.scratch[i + 1].0);
                if x == next {
                    continue;
                }
                let n_left = (i + 1) as f64;
                let n_right = (n - i - 1) as f64;
                let right_sum = total - left_sum;
                let score = left_sum * left_sum / n_left + right_sum * right_sum / n_right;
                if best.as_ref().map_or(true, |b| score > b.score) {
                    best = Some(Split {
                        feature: f,
                        threshold: midpoint(x, next),
                        score,
                    });
                }
            }
        }
        best
    }
}

/// Midpoint of two distinct consecutive values, nudged down to `lo` if
/// rounding would land it on `hi` (adjacent floats).
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let m = lo / 2.0 + hi / 2.0;
    if m >= hi || m < lo {
        lo
    } else {
        m
    }
}

fn to_columns(data: &FusedDataset) -> Vec<Vec<f64>> {
    let p = data.n_features();
    let mut columns = vec![Vec::with_capacity(data.n_rows()); p];
    for row in data.rows() {
        for (c, &v) in columns.iter_mut().zip(row) {
            c.push(v);
        }
    }
    columns
}

pub fn fit(data: &FusedDataset, config: &ForestConfig) -> Result<ForestModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let p = data.n_features();
    if p == 0 {
        return Err(Error::InvalidConfig("dataset has no features".into()));
    }
    let mtry = config.validate(p)?;
    if let Some(v) = data.values().iter().chain(data.targets()).find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(v.to_string()));
    }
    let columns = to_columns(data);
    let targets = data.targets();
    let n = data.n_rows();

    let grown: Vec<GrownTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = SplitMix64::new(derive_seed(config.seed, i as u64));
            let rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.below(n)).collect()
            } else {
                (0..n).collect()
            };
            let mut in_bag = vec![false; n];
            for &r in &rows {
                in_bag[r] = true;
            }
            let mut grower = Grower {
                columns: &columns,
                targets,
                mtry,
                min_leaf: config.min_leaf,
                rng,
                importance: vec![0.0; p],
                sample_size: n as f64,
                scratch: Vec::with_capacity(n),
            };
            let root = grower.grow(rows);
            let oob = (0..n)
                .filter(|&r| !in_bag[r])
                .map(|r| (r, root.predict_column_row(&columns, r)))
                .collect();
            GrownTree {
                root,
                importance: grower.importance,
                oob,
            }
        })
        .collect();

    let mut importances = vec![0.0; p];
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0usize; n];
    let mut trees = Vec::with_capacity(grown.len());
    for g in grown {
        for (acc, v) in importances.iter_mut().zip(&g.importance) {
            *acc += v;
        }
        for (r, pred) in g.oob {
            oob_sum[r] += pred;
            oob_count[r] += 1;
        }
        trees.push(g.root);
    }
    for v in &mut importances {
        *v /= config.n_trees as f64;
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    }

    let mut sq = 0.0;
    let mut covered = 0usize;
    for r in 0..n {
        if oob_count[r] > 0 {
            let e = oob_sum[r] / oob_count[r] as f64 - targets[r];
            sq += e * e;
            covered += 1;
        }
    }
    let oob_mse = (covered > 0).then(|| sq / covered as f64);

    let lo = targets.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ForestModel {
        config: config.clone(),
        feature_names: data.feature_names().to_vec(),
        target_range: (lo, hi),
        importances,
        oob_mse,
        trees,
    })
}

impl TreeNode {
    fn predict_column_row(&self, columns: &[Vec<f64>], row: usize) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { prediction, .. } => return *prediction,
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if columns[*feature][row] <= *threshold { left } else { right };
                }
            }
        }
    }
}

/// Mean of the trees' leaf predictions for `row`.
pub fn predict(model: &ForestModel, row: &[f64]) -> Result<f64> {
    if row.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            actual: row.len(),
        });
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(v.to_string()));
    }
    let sum: f64 = model.trees.iter().map(|t| t.predict(row)).sum();
    let (lo, hi) = model.target_range;
    Ok((sum / model.trees.len() as f64).clamp(lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: String,
    pub importance: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub ranked: Vec<RankedFeature>,
}

impl ImportanceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,feature,importance\n");
        for r in &self.ranked {
            out.push_str(&format!("{},{},{}\n", r.rank, r.name, r.importance));
        }
        out
    }
}

/// Features ordered by decreasing importance, ties by column index.
pub fn importance(model: &ForestModel) -> ImportanceReport {
    let mut order: Vec<usize> = (0..model.n_features()).collect();
    order.sort_by(|&a, &b| {
        model.importances[b]
            .total_cmp(&model.importances[a])
            .then(a.cmp(&b))
    });
    ImportanceReport {
        ranked: order
            .into_iter()
            .enumerate()
            .map(|(pos, index)| RankedFeature {
                index,
                name: model.feature_names[index].clone(),
                importance: model.importances[index],
                rank: pos + 1,
            })
            .collect(),
    }
}

pub fn top_k(report: &ImportanceReport, k: usize) -> Result<FeatureSubset> {
    if k == 0 || k > report.ranked.len() {
        return Err(Error::KOutOfRange {
            k,
            max: report.ranked.len(),
        });
    }
    let head = &report.ranked[..k];
    Ok(FeatureSubset {
        indices: head.iter().map(|r| r.index).collect(),
        names: head.iter().map(|r| r.name.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::time::Timestamp;

    fn dataset(rows: &[&[f64]], targets: &[f64]) -> FusedDataset {
        let p = rows[0].len();
        FusedDataset::new(
            (0..p).map(|j| format!("x{j}")).collect(),
            rows.iter().flat_map(|r| r.iter().copied()).collect(),
            targets.to_vec(),
            (0..targets.len()).map(|i| Timestamp::from_minutes(i as i64 * 180)).collect(),
        )
        .unwrap()
    }

    fn single_tree() -> ForestConfig {
        ForestConfig {
            n_trees: 1,
            mtry: Mtry::Fixed(1),
            min_leaf: 1,
            seed: 0,
            bootstrap: false,
        }
    }

    #[test]
    fn two_cluster_split() {
        let data = dataset(&[&[0.0], &[1.0], &[10.0], &[11.0]], &[0.0, 0.0, 5.0, 5.0]);
        let model = fit(&data, &single_tree()).unwrap();
        match &model.trees[0] {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } => {
                assert_eq!(*feature, 0);
                assert!(*threshold > 1.0 && *threshold < 10.0);
                assert_eq!(**left, TreeNode::Leaf { prediction: 0.0, n_samples: 2 });
                assert_eq!(**right, TreeNode::Leaf { prediction: 5.0, n_samples: 2 });
            }
            leaf => panic!("expected a split, got {leaf:?}"),
        }
        assert_eq!(model.importances, vec![1.0]);
    }

    #[test]
    fn constant_targets_give_single_leaves() {
        let data = dataset(&[&[0.0, 1.0], &[1.0, 3.0], &[2.0, 0.5], &[5.0, 2.0]], &[0.1; 4]);
        let cfg = ForestConfig {
            n_trees: 10,
            seed: 3,
            ..ForestConfig::default()
        };
        let model = fit(&data, &cfg).unwrap();
        for t in &model.trees {
            assert!(matches!(t, TreeNode::Leaf { prediction, .. } if *prediction == 0.1));
        }
        assert_eq!(model.importances, vec![0.0, 0.0]);
        assert_eq!(model.predict(&[9.0, 9.0]).unwrap(), 0.1);
    }

    #[test]
    fn min_leaf_five_keeps_root_leaf() {
        let data = dataset(&[&[1.0], &[2.0], &[3.0], &[4.0], &[5.0]], &[1.0, 2.0, 3.0, 4.0, 5.0]);
        let cfg = ForestConfig {
            min_leaf: 5,
            ..single_tree()
        };
        let model = fit(&data, &cfg).unwrap();
        assert_eq!(model.trees[0], TreeNode::Leaf { prediction: 3.0, n_samples: 5 });
    }

    #[test]
    fn forest_mean_of_trees() {
        let model = ForestModel {
            config: ForestConfig::default(),
            feature_names: vec!["x".into()],
            target_range: (0.0, 9.0),
            importances: vec![0.0],
            oob_mse: None,
            trees: vec![
                TreeNode::Leaf { prediction: 3.0, n_samples: 1 },
                TreeNode::Leaf { prediction: 5.0, n_samples: 1 },
            ],
        };
        assert_eq!(predict(&model, &[0.0]).unwrap(), 4.0);
        assert_eq!(
            predict(&model, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, actual: 2 })
        );
        assert!(matches!(predict(&model, &[f64::NAN]), Err(Error::NonFiniteValue(_))));
    }

    #[test]
    fn config_errors() {
        let data = dataset(&[&[0.0], &[1.0]], &[0.0, 1.0]);
        for cfg in [
            ForestConfig { n_trees: 0, ..single_tree() },
            ForestConfig { min_leaf: 0, ..single_tree() },
            ForestConfig { mtry: Mtry::Fixed(2), ..single_tree() },
            ForestConfig { mtry: Mtry::Fixed(0), ..single_tree() },
        ] {
            assert!(matches!(fit(&data, &cfg), Err(Error::InvalidConfig(_))));
        }
        assert_eq!(Mtry::Default.resolve(767), 255);
        assert_eq!(Mtry::Default.resolve(2), 1);
        assert_eq!(Mtry::Default.resolve(50), 16);
    }

    #[test]
    fn ranking_and_top_k() {
        let model = ForestModel {
            config: ForestConfig::default(),
            feature_names: vec!["a".into(), "b".into(), "c".into()],
            target_range: (0.0, 1.0),
            importances: vec![0.25, 0.5, 0.25],
            oob_mse: None,
            trees: vec![TreeNode::Leaf { prediction: 0.0, n_samples: 1 }],
        };
        let report = importance(&model);
        let names: Vec<&str> = report.ranked.iter().map(|r| r.name.as_str()).collect();
        assert_eq!(names, ["b", "a", "c"]);
        assert_eq!(report.ranked[2].rank, 3);
        let all = top_k(&report, 3).unwrap();
        assert_eq!(all.indices, vec![1, 0, 2]);
        assert_eq!(top_k(&report, 1).unwrap().names, vec!["b".to_string()]);
        assert_eq!(top_k(&report, 0), Err(Error::KOutOfRange { k: 0, max: 3 }));
        assert_eq!(top_k(&report, 4), Err(Error::KOutOfRange { k: 4, max: 3 }));
    }

    #[test]
    fn midpoint_of_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let m = midpoint(lo, hi);
        assert!(lo <= m && m < hi);
        assert_eq!(midpoint(1.0, 10.0), 5.5);
    }

    #[test]
    fn mtry_serde() {
        assert_eq!(serde_json::to_string(&Mtry::Default).unwrap(), "\"default\"");
        assert_eq!(serde_json::from_str::<Mtry>("12").unwrap(), Mtry::Fixed(12));
        assert!(serde_json::from_str::<Mtry>("\"p/3\"").is_err());
        assert_eq!("default".parse::<Mtry>().unwrap(), Mtry::Default);
    }
}

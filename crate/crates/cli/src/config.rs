//! Experiment manifests: flat `key = value` files with `#` comments.
//!
//! ```text
//! # compare.toml
//! data_dir = "d"
//! seed = 7
//! cutoff = "2021-04-01T00:00Z"
//! plans = ["RF", "RF top-100", "RF top-50", "RF top-50 L=2", "Linear"]
//! ```
//!
//! Every key mirrors a command-line flag; flags win over file values.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

use crate::UsageError;

/// An integer-or-word value such as `mtry = "default"` or `k_features = 50`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Word {
    Int(i64),
    Text(String),
}

impl std::fmt::Display for Word {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Word::Int(i) => write!(f, "{i}"),
            Word::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub solar: Option<PathBuf>,
    pub dst: Option<PathBuf>,
    pub kp: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,

    pub sw_lookback_minutes: Option<u32>,
    pub sw_step_minutes: Option<u32>,
    pub dst_lookback_hours: Option<u32>,
    pub kp_lookback_hours: Option<u32>,
    pub horizon_hours: Option<u32>,

    pub trees: Option<usize>,
    pub mtry: Option<Word>,
    pub min_leaf: Option<usize>,
    pub seed: Option<u64>,
    pub bootstrap: Option<bool>,
    pub threads: Option<usize>,

    pub model: Option<String>,
    pub k_features: Option<Word>,
    pub downsample_l: Option<u32>,
    pub downsample_threshold: Option<f64>,
    pub cutoff: Option<String>,
    pub train_fraction: Option<f64>,
    pub plans: Option<Vec<String>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        Self::parse(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())).into())
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.message().to_string())
    }
}

//! JSON container shared by forest and linear models.
//!
//! ```text
//! {"kind":"forest","config":{..},"feature_names":[..],"target_range":[lo,hi],
//!  "importances":[..],"oob_mse":..,"trees":[{"f":3,"t":0.5,"l":{"p":1.2,"n":4},"r":..}]}
//! {"kind":"linear","intercept":..,"coefficients":[..],"feature_names":[..]}
//! ```
//!
//! Reals are written in shortest round-trip form and parsed with exact
//! rounding, so a loaded model predicts bit-identically.

use serde::{Deserialize, Serialize};

use crate::baseline::LinearModel;
use crate::error::{Error, Result};
use crate::forest::{ForestModel, TreeNode};
use crate::fusion::FusedDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Forest(ForestModel),
    Linear(LinearModel),
}

impl TrainedModel {
    pub fn feature_names(&self) -> &[String] {
        match self {
            TrainedModel::Forest(m) => &m.feature_names,
            TrainedModel::Linear(m) => &m.feature_names,
        }
    }

    pub fn predict(&self, row: &[f64]) -> Result<f64> {
        match self {
            TrainedModel::Forest(m) => m.predict(row),
            TrainedModel::Linear(m) => m.predict(row),
        }
    }

    pub fn predict_dataset(&self, data: &FusedDataset) -> Result<Vec<f64>> {
        if data.feature_names() != self.feature_names() {
            return Err(Error::InvalidModel(
                "dataset columns do not match the model's feature names".into(),
            ));
        }
        data.rows().map(|r| self.predict(r)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model values are finite")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let model = TrainedModel::deserialize(&mut de)
            .and_then(|m| de.end().map(|_| m))
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        match self {
            TrainedModel::Forest(m) => {
                let p = m.feature_names.len();
                if m.trees.is_empty() {
                    return Err(Error::InvalidModel("forest has no trees".into()));
                }
                if m.importances.len() != p {
                    return Err(Error::InvalidModel("importance count differs from feature count".into()));
                }
                fn check(node: &TreeNode, p: usize) -> bool {
                    match node {
                        TreeNode::Leaf { prediction, .. } => prediction.is_finite(),
                        TreeNode::Internal {
                            feature,
                            threshold,
                            left,
                            right,
                        } => *feature < p && threshold.is_finite() && check(left, p) && check(right, p),
                    }
                }
                if !m.trees.iter().all(|t| check(t, p)) {
                    return Err(Error::InvalidModel("tree references an unknown feature".into()));
                }
            }
            TrainedModel::Linear(m) => {
                if m.coefficients.len() != m.feature_names.len() {
                    return Err(Error::InvalidModel(
                        "coefficient count differs from feature count".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl From<ForestModel> for TrainedModel {
    fn from(m: ForestModel) -> Self {
        TrainedModel::Forest(m)
    }
}

impl From<LinearModel> for TrainedModel {
    fn from(m: LinearModel) -> Self {
        TrainedModel::Linear(m)
    }
}

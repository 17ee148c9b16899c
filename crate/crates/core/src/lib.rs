//! Early prediction of the geomagnetic Kp index.
//!
//! The pipeline fuses three measurement streams sampled at different cadences
//! (5-minute solar wind, hourly Dst, 3-hourly Kp) into lagged feature vectors,
//! trains a random forest regressor on the Kp value a few hours ahead, and
//! scores predictions by the fraction that land within one Kp unit of the
//! observed value.
//!
//! Module map:
//!
//! - [`ingest`]: canonical CSV parsers and gap-aware [`MeasurementSeries`].
//! - [`fusion`]: lag-window feature construction, downsampling, selection, splits.
//! - [`forest`]: CART regression trees, bagging, impurity importance.
//! - [`baseline`]: ordinary least squares reference model.
//! - [`pca`]: principal components for visualising the feature space.
//! - [`eval`]: metrics and the end-to-end experiment protocol.
//! - [`datagen`]: seeded synthetic storm data in the canonical formats.

pub mod baseline;
pub mod datagen;
pub mod error;
pub mod eval;
pub mod forest;
pub mod fusion;
pub mod ingest;
pub mod model;
pub mod pca;
pub mod rng;
pub mod time;

pub use baseline::{fit_linear, LinearModel};
pub use datagen::{generate, SynthConfig};
pub use error::{Error, Result};
pub use eval::{
    accuracy_within_1, comparison_table, run_experiment, EvalReport, ExperimentPlan, KFeatures,
    ModelKind,
};
pub use forest::{fit, importance, top_k, ForestConfig, ForestModel, ImportanceReport, Mtry};
pub use fusion::{
    downsample_low_kp, fuse, select_features, split_by_time, FeatureSubset, FusedDataset, LagSpec,
};
pub use ingest::{MeasurementSeries, SolarQuantity, Sources};
pub use model::TrainedModel;
pub use pca::{fit_pca, PcaModel};
pub use time::Timestamp;

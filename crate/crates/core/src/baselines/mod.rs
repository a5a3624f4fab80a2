//! Baseline classifiers and the evaluation metrics shared by every model.

pub mod forest;
pub mod logistic;
pub mod metrics;

pub use forest::{fit_random_forest, RandomForest, RfParams};
pub use logistic::{fit_logistic_mle, LogisticModel};
pub use metrics::{auc, compare_models, compute_metrics, ComparisonTable, ConfusionCounts, ModelMetrics};

//! Fairness-aware oversampling for binary classification with one or more
//! protected attributes.
//!
//! The crate partitions a dataset into class × group clusters, grows every
//! cluster to the size of the largest one with a choice of interpolation
//! techniques, and evaluates downstream classifiers for balanced accuracy and
//! group fairness under stratified cross-validation.

pub mod classify;
pub mod dataset;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod neighbors;
pub mod oversample;

pub use classify::{predict, train, ClassifierKind, Hyperparams, TrainedModel};
pub use dataset::{ClusterIndex, ClusterKey, Dataset, DatasetSchema};
pub use error::{Error, Result};
pub use harness::{evaluate, run_experiment, stratified_folds, EvaluationReport, ExperimentPlan, ExperimentSettings};
pub use metrics::{balanced_accuracy, confusion, equal_opportunity, equalized_odds, statistical_parity};
pub use oversample::{oversample, Augmented, OversamplerConfig, SyntheticBatch, Technique};

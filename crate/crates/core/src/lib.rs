//! Differentially private random forests and a maximum-likelihood attack that
//! reconstructs their training data from the published noisy leaf counts.
//!
//! - [`dataset`]: binary datasets with one-hot groups, CSV binarization, sampling
//! - [`forest`]: ε-DP random forest training and soft-voting inference
//! - [`noise`]: pmf and log-likelihood of integer-cast Laplace noise
//! - [`reconstruction`]: the reconstruction problem and its exact and anytime solvers
//! - [`evaluation`]: matching-based error, baselines and leakage statistics

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod forest;
pub mod noise;
pub mod reconstruction;
pub mod rng;
pub mod stats;

pub use dataset::{sample_training_set, BinaryDataset, FeatureLayout, OneHotGroup};
pub use error::{Error, Result};
pub use forest::{train_dp_forest, CountMode, Forest, ForestParams, PrivacyBudget};
pub use noise::{DeltaVector, NoiseModel, TailMode};

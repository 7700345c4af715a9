//! Optimizing classification metrics that are only available as query
//! oracles, by eliciting example weights on a noisy training sample and
//! post-shifting a pre-trained class-probability model.

pub mod baselines;
pub mod basis;
pub mod classifier;
pub mod confusion;
pub mod data;
pub mod elicit;
pub mod error;
pub mod fw;
pub mod linalg;
pub mod logreg;
pub mod metrics;
pub mod plugin;
pub mod shiftlab;

pub use basis::{BasisKind, BasisMatrix, BasisSet};
pub use classifier::{DeterministicRule, RandomizedClassifier, SoftPredictions};
pub use confusion::{confusion, phi_confusions, ConfusionStats, PhiConfusions};
pub use data::{load_dataset, write_dataset, Dataset, ProbabilityModel, Schema};
pub use elicit::{elicit, ElicitConfig, ElicitationResult, EpsilonChoice, Split, WeightCoefficients, WeightMode};
pub use error::{Error, Result};
pub use metrics::{MetricSpec, MetricValue, OracleHandle};
pub use plugin::{pi_ew, pi_ew_metric, PostShiftRule};

//! Probability-thresholding bagging (PT-bagging) for binary and multiclass
//! imbalanced classification.
//!
//! A bagging ensemble of unpruned probability-estimation decision trees is
//! trained on plain bootstrap replicates, preserving the natural class
//! distribution. Class labels are then obtained a posteriori by ranking the
//! averaged posterior of each class against a per-class threshold vector:
//! the class maximizing `P(y = k | x) / lambda_k` is predicted. Setting the
//! thresholds to the training priors maximizes macro accuracy; a midpoint
//! threshold targets macro F1. The same fitted ensemble can be retargeted to
//! a different measure by changing only the thresholds.
//!
//! The crate also ships the rebalancing baselines the method is usually
//! compared against (exactly/roughly balanced undersampling, random
//! oversampling, SMOTE, multiclass under/over sampling), the evaluation
//! metrics used in imbalanced learning (macro accuracy, macro F1, PR curves,
//! stratified Brier score, reliability tables), Platt scaling, nonparametric
//! comparison statistics (Friedman/Nemenyi, Wilcoxon), and a benchmark
//! harness that runs the whole protocol under 5x2 cross-validation.

pub mod calibration;
pub mod data;
pub mod ensemble;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sampling;
pub mod stats;
pub mod thresholds;
pub mod tree;

pub use data::{AttributeKind, AttributeSpec, Cell, CvPlan, Dataset, PriorVector};
pub use ensemble::BaggedEnsemble;
pub use sampling::SamplerSpec;
pub use thresholds::ThresholdPolicy;
pub use tree::{ProbTree, TreeParams};

//! Uncertainty-aware score regression.
//!
//! This crate trains small feed-forward regressors that attach an
//! uncertainty estimate to every predicted score, and provides the
//! machinery around them: synthetic data generation with controlled
//! noise, post-hoc variance calibration, evaluation metrics, and
//! reproducible experiment protocols comparing the estimator families.
//!
//! The estimator families split by which kind of uncertainty they see:
//!
//! * sampling-based (`mcd`, `de`) — spread over stochastic forward
//!   passes or ensemble members; captures model uncertainty only;
//! * direct variance heads (`hts`, `kl`) — a second network output
//!   trained to predict the noise level of the data itself;
//! * combined (`hts_mcd`) — variance head plus sampling, summing the
//!   two sources;
//! * two-step (`dup`) — a frozen score model followed by a second
//!   network trained to predict the first one's error, which folds both
//!   sources into one number.
//!
//! Everything is `f64`, seeded, and deterministic: the same seed gives
//! the same weights, the same splits, and byte-identical reports.

pub mod calibration;
pub mod datagen;
pub mod estimators;
pub mod experiments;
pub mod metrics;
pub mod nn;
pub mod objectives;

pub use calibration::CalibrationScale;
pub use estimators::{EstimatorKind, PredictionSet, TrainedEstimator};
pub use experiments::{
    run_bench, run_comparison, run_dup_ablation, run_noisy_reference, run_ood_sharpness,
    ExperimentConfig, ExperimentError, SplitFractions, TrainingSettings,
};
pub use metrics::MetricsReport;
pub use nn::{Activation, Mlp, MlpSpec};
pub use objectives::GaussianPrediction;

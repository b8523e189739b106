//! Training objectives for score regression with uncertainty.
//!
//! Three families, all using natural logarithms and per-batch means:
//!
//! * plain regression — squared error on the score;
//! * Gaussian heads — a mean/log-variance pair trained either against
//!   the observed score (heteroscedastic negative log-likelihood, up to
//!   the constant `0.5 ln 2π` which has zero gradient) or against a
//!   Gaussian fitted to a set of annotator scores (closed-form
//!   KL divergence);
//! * error heads — a second-stage network predicting the absolute
//!   error of a frozen score model, with absolute, squared, or
//!   likelihood-style variants.
//!
//! Every loss exists twice: as a plain scalar function used by tests
//! and metrics, and as a tape builder (in [`batch`]) used by training
//! so gradients flow through the same expression.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Head outputs mapping to log-variance-like quantities are clamped to
/// this symmetric bound before entering any loss, keeping `exp` and
/// division well-behaved during early training.
pub const LOG_VARIANCE_BOUND: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("degenerate annotator variance ({variance}); need a strictly positive spread")]
    DegenerateAnnotatorVariance { variance: f64 },
    #[error("annotator target is invalid: {0}")]
    InvalidAnnotatorTarget(String),
}

/// A Gaussian belief about one score: mean plus log-variance.
///
/// Network heads produce log-variances inside `±`[`LOG_VARIANCE_BOUND`];
/// sampling-based estimators may land below that after variance
/// flooring, so the type itself only requires finite fields.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianPrediction {
    pub mean: f64,
    pub log_variance: f64,
}

impl GaussianPrediction {
    pub fn new(mean: f64, log_variance: f64) -> Self {
        GaussianPrediction { mean, log_variance }
    }

    /// Build from a plain variance (must be positive).
    pub fn from_variance(mean: f64, variance: f64) -> Self {
        assert!(variance > 0.0, "variance must be positive, got {variance}");
        GaussianPrediction { mean, log_variance: variance.ln() }
    }

    pub fn variance(&self) -> f64 {
        self.log_variance.exp()
    }

    /// Predicted standard deviation.
    pub fn sigma(&self) -> f64 {
        (0.5 * self.log_variance).exp()
    }
}

/// Gaussian summary of a set of annotator scores for one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorTarget {
    /// Mean annotator score.
    pub mean: f64,
    /// Variance of the annotator scores (1/k normalization).
    pub variance: f64,
    /// Number of annotators behind this summary.
    pub count: usize,
}

impl AnnotatorTarget {
    /// Summarize raw scores: mean and 1/k variance.
    pub fn from_scores(scores: &[f64]) -> Result<Self, ObjectiveError> {
        if scores.is_empty() {
            return Err(ObjectiveError::InvalidAnnotatorTarget("no annotator scores".into()));
        }
        let k = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / k;
        let variance = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / k;
        Ok(AnnotatorTarget { mean, variance, count: scores.len() })
    }

    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if self.count == 0 {
            return Err(ObjectiveError::InvalidAnnotatorTarget("count must be at least 1".into()));
        }
        if !(self.variance >= 0.0 && self.variance.is_finite() && self.mean.is_finite()) {
            return Err(ObjectiveError::InvalidAnnotatorTarget(format!(
                "mean {} / variance {} out of range",
                self.mean, self.variance
            )));
        }
        Ok(())
    }

    /// Copy with variance raised to at least `floor`. Trainers use this
    /// before the KL loss so unanimous annotators don't produce a
    /// zero-variance target.
    pub fn with_variance_floor(&self, floor: f64) -> Self {
        AnnotatorTarget { variance: self.variance.max(floor), ..*self }
    }
}

/// Observed absolute error of a frozen score model on one segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorTarget {
    /// `|predicted score - gold score|`, always nonnegative.
    pub error: f64,
}

/// Which second-stage error objective to train with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DupLoss {
    /// Squared error on the absolute error.
    Abs,
    /// Squared error on the squared error.
    Sq,
    /// Likelihood-style: treats the predicted error as a scale.
    Hts,
}

impl Default for DupLoss {
    /// The likelihood-style loss; the ablation differences are small
    /// but this one edges out the others.
    fn default() -> Self {
        DupLoss::Hts
    }
}

impl std::fmt::Display for DupLoss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DupLoss::Abs => write!(f, "abs"),
            DupLoss::Sq => write!(f, "sq"),
            DupLoss::Hts => write!(f, "hts"),
        }
    }
}

/// Squared error `(target - mean)^2`.
pub fn mse_loss(pred_mean: f64, target: f64) -> f64 {
    let d = target - pred_mean;
    d * d
}

/// Heteroscedastic Gaussian objective
/// `(target - mean)^2 / (2 sigma^2) + 0.5 ln sigma^2`.
///
/// The residual term shrinks the variance where the model is accurate;
/// the log term keeps it from collapsing to zero elsewhere.
pub fn hts_loss(pred: &GaussianPrediction, target: f64) -> f64 {
    let d = target - pred.mean;
    0.5 * d * d * (-pred.log_variance).exp() + 0.5 * pred.log_variance
}

/// Closed-form KL divergence from the annotator Gaussian
/// `N(mean*, var*)` to the predicted `N(mean, var)`:
/// `((mean* - mean)^2 + var*) / (2 var) + 0.5 ln(var / var*) - 0.5`.
///
/// Zero exactly when the two distributions coincide. A zero annotator
/// variance is rejected — callers floor it first.
pub fn kl_loss(pred: &GaussianPrediction, target: &AnnotatorTarget) -> Result<f64, ObjectiveError> {
    if !(target.variance > 0.0) {
        return Err(ObjectiveError::DegenerateAnnotatorVariance { variance: target.variance });
    }
    let d = target.mean - pred.mean;
    let inv_var = (-pred.log_variance).exp();
    Ok(0.5 * (d * d + target.variance) * inv_var + 0.5 * (pred.log_variance - target.variance.ln()) - 0.5)
}

/// Absolute-error regression: `(target_error - pred_error)^2`.
pub fn dup_abs_loss(pred_error: f64, target: &ErrorTarget) -> f64 {
    let d = target.error - pred_error;
    d * d
}

/// Squared-error regression: `(target_error^2 - pred_error^2)^2`.
pub fn dup_sq_loss(pred_error: f64, target: &ErrorTarget) -> f64 {
    let d = target.error * target.error - pred_error * pred_error;
    d * d
}

/// Likelihood-style error objective
/// `target_error^2 / (2 pred_error^2) + 0.5 ln pred_error^2`,
/// minimized exactly at `pred_error = target_error`.
///
/// `pred_error` must be strictly positive; the exponential head map
/// guarantees that for trained predictions.
pub fn dup_hts_loss(pred_error: f64, target: &ErrorTarget) -> f64 {
    assert!(pred_error > 0.0, "pred_error must be positive, got {pred_error}");
    let e2 = target.error * target.error;
    0.5 * e2 / (pred_error * pred_error) + pred_error.ln()
}

/// Tape builders producing per-batch mean losses. Each takes the raw
/// network output node(s) plus target constants and returns a scalar
/// loss node ready for `backward`.
pub mod batch {
    use super::{DupLoss, LOG_VARIANCE_BOUND};
    use crate::nn::{Graph, Matrix, NodeId};

    /// Split a two-column head into its mean column and clamped
    /// log-variance column.
    pub fn gaussian_head(g: &mut Graph, out: NodeId) -> (NodeId, NodeId) {
        let mean = g.slice_cols(out, 0, 1);
        let lv_raw = g.slice_cols(out, 1, 1);
        let lv = g.clamp(lv_raw, -LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND);
        (mean, lv)
    }

    /// Clamp a one-column head interpreted as a log-squared-error.
    pub fn error_head(g: &mut Graph, out: NodeId) -> NodeId {
        g.clamp(out, -LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND)
    }

    fn column(g: &mut Graph, values: &[f64]) -> NodeId {
        g.constant(Matrix::from_column(values))
    }

    /// Mean squared error of a one-column mean against targets.
    pub fn mse(g: &mut Graph, mean: NodeId, targets: &[f64]) -> NodeId {
        let t = column(g, targets);
        let d = g.sub(t, mean);
        let sq = g.square(d);
        g.mean_all(sq)
    }

    /// Batch heteroscedastic objective over a Gaussian head.
    pub fn hts(g: &mut Graph, mean: NodeId, log_var: NodeId, targets: &[f64]) -> NodeId {
        let t = column(g, targets);
        let d = g.sub(t, mean);
        let sq = g.square(d);
        let neg_lv = g.affine(log_var, -1.0, 0.0);
        let inv_var = g.exp(neg_lv);
        let weighted = g.mul(sq, inv_var);
        let half_weighted = g.affine(weighted, 0.5, 0.0);
        let half_lv = g.affine(log_var, 0.5, 0.0);
        let per_item = g.add(half_weighted, half_lv);
        g.mean_all(per_item)
    }

    /// Batch KL objective over a Gaussian head against per-record
    /// annotator means and (already floored, strictly positive)
    /// variances.
    pub fn kl(
        g: &mut Graph,
        mean: NodeId,
        log_var: NodeId,
        target_means: &[f64],
        target_vars: &[f64],
    ) -> NodeId {
        assert_eq!(target_means.len(), target_vars.len());
        assert!(target_vars.iter().all(|&v| v > 0.0), "annotator variances must be floored first");
        let tm = column(g, target_means);
        let tv = column(g, target_vars);
        let ln_tv: Vec<f64> = target_vars.iter().map(|v| v.ln()).collect();
        let ln_tv = column(g, &ln_tv);

        let d = g.sub(tm, mean);
        let d_sq = g.square(d);
        let num = g.add(d_sq, tv);
        let neg_lv = g.affine(log_var, -1.0, 0.0);
        let inv_var = g.exp(neg_lv);
        let ratio_term = g.mul(num, inv_var);
        let half_ratio = g.affine(ratio_term, 0.5, 0.0);
        let lv_diff = g.sub(log_var, ln_tv);
        let log_term = g.affine(lv_diff, 0.5, -0.5);
        let per_item = g.add(half_ratio, log_term);
        g.mean_all(per_item)
    }

    /// Batch second-stage error objective over a clamped
    /// log-squared-error head.
    pub fn dup(g: &mut Graph, log_sq_error: NodeId, loss: DupLoss, target_errors: &[f64]) -> NodeId {
        match loss {
            DupLoss::Abs => {
                let t = column(g, target_errors);
                let half_z = g.affine(log_sq_error, 0.5, 0.0);
                let eps_hat = g.exp(half_z);
                let d = g.sub(t, eps_hat);
                let sq = g.square(d);
                g.mean_all(sq)
            }
            DupLoss::Sq => {
                let t_sq: Vec<f64> = target_errors.iter().map(|e| e * e).collect();
                let t = column(g, &t_sq);
                let eps_sq = g.exp(log_sq_error);
                let d = g.sub(t, eps_sq);
                let sq = g.square(d);
                g.mean_all(sq)
            }
            DupLoss::Hts => {
                let t_sq: Vec<f64> = target_errors.iter().map(|e| e * e).collect();
                let t = column(g, &t_sq);
                let neg_z = g.affine(log_sq_error, -1.0, 0.0);
                let inv = g.exp(neg_z);
                let weighted = g.mul(t, inv);
                let half_weighted = g.affine(weighted, 0.5, 0.0);
                let half_z = g.affine(log_sq_error, 0.5, 0.0);
                let per_item = g.add(half_weighted, half_z);
                g.mean_all(per_item)
            }
        }
    }
}

//! The two-step direct error predictor.
//!
//! Step one trains an ordinary point regressor `M_Q` on its own data
//! split. Step two freezes `M_Q`, runs it over a *disjoint* split to
//! produce score predictions `q_hat`, and trains a second network
//! `M_E` — on the original features plus `q_hat` as one extra input —
//! to predict the absolute error `|q_hat - q*|` that `M_Q` actually
//! made there. At inference the predicted error doubles as the
//! standard deviation of a Gaussian around `q_hat`.
//!
//! The split discipline is the whole point: on `M_Q`'s own training
//! data its errors are optimistically small, so `M_E` must learn from
//! errors measured where `M_Q` has not memorized anything. Overlapping
//! ids are therefore rejected outright.
//!
//! `M_E` uses a narrower waist than the standard architecture — two
//! wide layers with a small bottleneck between them — which in
//! practice regularizes the error signal without hurting its ranking.

use super::{point_predict, EstimatorError, VARIANCE_FLOOR};
use crate::datagen::TrainingSet;
use crate::estimators::training::{fit, standard_spec, FitTargets, TrainingConfig, TrainingLog};
use crate::nn::{derive_stream, Activation, DropoutMode, Matrix, Mlp, MlpSpec};
use crate::objectives::{DupLoss, GaussianPrediction, LOG_VARIANCE_BOUND};

/// Width of the waist layer inside the error model.
pub const DUP_BOTTLENECK_DIM: usize = 16;

// Sub-seeds for the two training stages.
const STREAM_QUALITY: u64 = 20;
const STREAM_ERROR: u64 = 21;

fn error_model_spec(feature_dim: usize, dropout_rate: f64) -> MlpSpec {
    MlpSpec {
        input_dim: feature_dim + 1,
        hidden_sizes: vec![64, DUP_BOTTLENECK_DIM, 32],
        output_dim: 1,
        dropout_rate,
        activation: Activation::Tanh,
    }
}

/// A trained quality model plus the error model riding on it.
#[derive(Debug)]
pub struct DupPipeline {
    quality: Mlp,
    error: Mlp,
    loss: DupLoss,
}

impl DupPipeline {
    /// Reassemble a pipeline from its parts (e.g. from a checkpoint
    /// bundle), checking that the two networks actually fit together.
    pub fn from_parts(quality: Mlp, error: Mlp, loss: DupLoss) -> Result<Self, EstimatorError> {
        if quality.spec().output_dim != 1 || error.spec().output_dim != 1 {
            return Err(EstimatorError::InvalidConfig(
                "pipeline models must both have one-output heads".into(),
            ));
        }
        if error.spec().input_dim != quality.spec().input_dim + 1 {
            return Err(EstimatorError::InvalidConfig(format!(
                "error model must take features plus the predicted score: quality reads {}, error reads {}",
                quality.spec().input_dim,
                error.spec().input_dim
            )));
        }
        Ok(DupPipeline { quality, error, loss })
    }

    pub fn quality_model(&self) -> &Mlp {
        &self.quality
    }

    pub fn error_model(&self) -> &Mlp {
        &self.error
    }

    pub fn loss(&self) -> DupLoss {
        self.loss
    }

    /// First-stage scores alone, exactly as the pipeline itself uses
    /// them.
    pub fn quality_scores(&self, inputs: &Matrix) -> Result<Vec<f64>, EstimatorError> {
        point_predict(&self.quality, inputs)
    }

    /// Full two-step prediction: the score from `M_Q`, and `M_E`'s
    /// predicted error squared as the variance.
    pub fn predict(&self, inputs: &Matrix) -> Result<Vec<GaussianPrediction>, EstimatorError> {
        let q_hat = self.quality_scores(inputs)?;
        let augmented = append_column(inputs, &q_hat);
        let raw = self.error.forward(&augmented, DropoutMode::Inactive)?;
        Ok(q_hat
            .iter()
            .enumerate()
            .map(|(i, &mean)| {
                let z = raw.get(i, 0).clamp(-LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND);
                GaussianPrediction::from_variance(mean, z.exp().max(VARIANCE_FLOOR))
            })
            .collect())
    }
}

fn append_column(inputs: &Matrix, extra: &[f64]) -> Matrix {
    assert_eq!(inputs.rows(), extra.len());
    let cols = inputs.cols();
    let mut data = Vec::with_capacity(inputs.rows() * (cols + 1));
    for (i, &x) in extra.iter().enumerate() {
        data.extend_from_slice(inputs.row(i));
        data.push(x);
    }
    Matrix::from_vec(inputs.rows(), cols + 1, data)
}

fn check_splits(
    quality_data: &TrainingSet,
    error_data: &TrainingSet,
) -> Result<(), EstimatorError> {
    if quality_data.is_empty() {
        return Err(EstimatorError::EmptySplit { which: "quality" });
    }
    if error_data.is_empty() {
        return Err(EstimatorError::EmptySplit { which: "error" });
    }
    if quality_data.feature_dim() != error_data.feature_dim() {
        return Err(EstimatorError::FeatureDimMismatch {
            expected: quality_data.feature_dim(),
            got: error_data.feature_dim(),
        });
    }
    let quality_ids: std::collections::HashSet<&str> =
        quality_data.records().iter().map(|r| r.id.as_str()).collect();
    if let Some(shared) =
        error_data.records().iter().find(|r| quality_ids.contains(r.id.as_str()))
    {
        return Err(EstimatorError::OverlappingSplits { id: shared.id.clone() });
    }
    Ok(())
}

/// Freeze `M_Q`, measure its errors on the disjoint split, and build
/// the error model's training matrix (features plus predicted score).
fn error_stage_data(
    quality: &Mlp,
    error_data: &TrainingSet,
) -> Result<(Matrix, Vec<f64>), EstimatorError> {
    let inputs = error_data.features_matrix();
    let q_hat = point_predict(quality, &inputs)?;
    let abs_errors: Vec<f64> = error_data
        .records()
        .iter()
        .zip(&q_hat)
        .map(|(rec, &q)| (q - rec.gold_score).abs())
        .collect();
    Ok((append_column(&inputs, &q_hat), abs_errors))
}

/// Train the two-step pipeline: `M_Q` on `quality_data`, then `M_E` on
/// `error_data` against the absolute errors `M_Q` makes there. The two
/// splits must be disjoint by segment id.
pub fn dup_train(
    quality_data: &TrainingSet,
    error_data: &TrainingSet,
    loss: DupLoss,
    cfg: &TrainingConfig,
) -> Result<(DupPipeline, Vec<TrainingLog>), EstimatorError> {
    cfg.validate()?;
    check_splits(quality_data, error_data)?;

    let d = quality_data.feature_dim();
    let mut quality_cfg = cfg.clone();
    quality_cfg.seed = derive_stream(cfg.seed, STREAM_QUALITY);
    let (quality, quality_log) =
        super::train_point(standard_spec(d, 1, cfg), quality_data, &quality_cfg)?;

    let (augmented, abs_errors) = error_stage_data(&quality, error_data)?;

    let mut error_cfg = cfg.clone();
    error_cfg.seed = derive_stream(cfg.seed, STREAM_ERROR);
    let mut error_model =
        Mlp::init(error_model_spec(d, cfg.dropout_rate), derive_stream(error_cfg.seed, 0))?;
    let targets = FitTargets::Error { targets: abs_errors, loss };
    let error_log = fit(&mut error_model, &augmented, &targets, &error_cfg)?;

    let pipeline = DupPipeline::from_parts(quality, error_model, loss)?;
    Ok((pipeline, vec![quality_log, error_log]))
}

/// Continue training an existing pipeline on fresh splits: `M_Q` from
/// its current weights on `quality_data`, then `M_E` against the
/// errors the updated `M_Q` makes on `error_data`. Split discipline is
/// the same as for a fresh run.
pub fn dup_fine_tune(
    pipeline: &mut DupPipeline,
    quality_data: &TrainingSet,
    error_data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<Vec<TrainingLog>, EstimatorError> {
    cfg.validate()?;
    check_splits(quality_data, error_data)?;
    if quality_data.feature_dim() != pipeline.quality.spec().input_dim {
        return Err(EstimatorError::FeatureDimMismatch {
            expected: pipeline.quality.spec().input_dim,
            got: quality_data.feature_dim(),
        });
    }

    let mut quality_cfg = cfg.clone();
    quality_cfg.seed = derive_stream(cfg.seed, STREAM_QUALITY);
    let q_targets = FitTargets::Point(quality_data.gold_scores());
    let quality_log =
        fit(&mut pipeline.quality, &quality_data.features_matrix(), &q_targets, &quality_cfg)?;

    let (augmented, abs_errors) = error_stage_data(&pipeline.quality, error_data)?;

    let mut error_cfg = cfg.clone();
    error_cfg.seed = derive_stream(cfg.seed, STREAM_ERROR);
    let targets = FitTargets::Error { targets: abs_errors, loss: pipeline.loss };
    let error_log = fit(&mut pipeline.error, &augmented, &targets, &error_cfg)?;

    Ok(vec![quality_log, error_log])
}

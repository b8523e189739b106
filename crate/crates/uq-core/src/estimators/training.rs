//! The shared minibatch training loop and the three network trainers
//! built on it.
//!
//! One driver handles every objective: shuffle, batch, record the
//! forward pass on a tape, attach the objective head, backpropagate,
//! and apply an Adam step. Objectives differ only in which targets
//! they gather per batch and which head they attach, so the loop takes
//! a small target enum rather than a closure soup.
//!
//! Reproducibility: everything stochastic — weight init, epoch
//! shuffles, per-step dropout masks — derives from `config.seed`
//! through independent stream indices. The same config on the same
//! data yields bit-identical weights.

use super::EstimatorError;
use crate::datagen::TrainingSet;
use crate::nn::{
    derive_stream, AdamConfig, AdamState, DropoutMode, Graph, Matrix, Mlp, MlpSpec,
};
use crate::objectives::{batch, AnnotatorTarget, DupLoss};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Variance floor for annotator targets: unanimous annotators would
/// otherwise put a zero variance inside a logarithm.
pub const ANNOTATOR_VARIANCE_FLOOR: f64 = 1e-4;

// Stream indices for the independent RNG consumers hanging off one
// training seed.
const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DROPOUT: u64 = 2;

fn default_epochs() -> usize {
    40
}
fn default_batch_size() -> usize {
    32
}
fn default_learning_rate() -> f64 {
    1e-3
}
fn default_quality_fraction() -> f64 {
    0.5
}
fn default_dropout_rate() -> f64 {
    0.15
}

/// Knobs for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Root seed for init, shuffling, and dropout masks.
    #[serde(default)]
    pub seed: u64,
    /// Fraction of the data the two-step pipeline reserves for its
    /// first-stage model; ignored by every other estimator.
    #[serde(default = "default_quality_fraction")]
    pub dup_quality_fraction: f64,
    /// Dropout rate built into the networks this config trains. Zero
    /// is legal for training but the dropout-sampling estimators will
    /// refuse to predict with such a model.
    #[serde(default = "default_dropout_rate")]
    pub dropout_rate: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: default_epochs(),
            batch_size: default_batch_size(),
            learning_rate: default_learning_rate(),
            seed: 0,
            dup_quality_fraction: default_quality_fraction(),
            dropout_rate: default_dropout_rate(),
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.batch_size == 0 {
            return Err(EstimatorError::InvalidConfig("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(EstimatorError::InvalidConfig(format!(
                "learning_rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(self.dup_quality_fraction > 0.0 && self.dup_quality_fraction < 1.0) {
            return Err(EstimatorError::InvalidConfig(format!(
                "dup_quality_fraction must lie strictly between 0 and 1, got {}",
                self.dup_quality_fraction
            )));
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return Err(EstimatorError::InvalidConfig(format!(
                "dropout_rate must lie in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// The shared trunk architecture with this config's dropout rate.
pub(crate) fn standard_spec(input_dim: usize, output_dim: usize, cfg: &TrainingConfig) -> MlpSpec {
    MlpSpec { dropout_rate: cfg.dropout_rate, ..MlpSpec::standard(input_dim, output_dim) }
}

/// Per-epoch mean training loss, in the order epochs ran.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

/// Which objective head the driver attaches per batch.
pub(crate) enum FitTargets {
    /// Squared error of a one-output head against gold scores.
    Point(Vec<f64>),
    /// Gaussian likelihood of a two-output head against gold scores.
    Gaussian(Vec<f64>),
    /// Divergence of a two-output head from per-record annotator
    /// (mean, variance) pairs. Variances must already be floored.
    Annotator { means: Vec<f64>, variances: Vec<f64> },
    /// Second-stage error objective of a one-output head against
    /// absolute-error targets.
    Error { targets: Vec<f64>, loss: DupLoss },
}

impl FitTargets {
    fn len(&self) -> usize {
        match self {
            FitTargets::Point(t) | FitTargets::Gaussian(t) => t.len(),
            FitTargets::Annotator { means, .. } => means.len(),
            FitTargets::Error { targets, .. } => targets.len(),
        }
    }

    fn expected_outputs(&self) -> usize {
        match self {
            FitTargets::Point(_) | FitTargets::Error { .. } => 1,
            FitTargets::Gaussian(_) | FitTargets::Annotator { .. } => 2,
        }
    }
}

/// Run the minibatch loop over a model in place.
pub(crate) fn fit(
    model: &mut Mlp,
    inputs: &Matrix,
    targets: &FitTargets,
    cfg: &TrainingConfig,
) -> Result<TrainingLog, EstimatorError> {
    cfg.validate()?;
    let n = inputs.rows();
    assert_eq!(n, targets.len(), "inputs and targets out of sync");
    assert_eq!(
        model.spec().output_dim,
        targets.expected_outputs(),
        "objective head does not fit this model's output width"
    );
    if n == 0 {
        return Err(EstimatorError::EmptySplit { which: "training" });
    }

    let mut adam =
        AdamState::new(AdamConfig::with_learning_rate(cfg.learning_rate), model.spec().param_count());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_stream(cfg.seed, STREAM_SHUFFLE));
    let dropout_root = derive_stream(cfg.seed, STREAM_DROPOUT);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut step: u64 = 0;

    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch_inputs = gather_rows(inputs, chunk);
            let mut g = Graph::new();
            let (out, params) = model.forward_graph(
                &mut g,
                &batch_inputs,
                DropoutMode::Active { seed: derive_stream(dropout_root, step) },
            )?;
            let loss_node = attach_head(&mut g, out, targets, chunk);
            g.backward(loss_node)?;
            let loss = g.scalar(loss_node);
            if !loss.is_finite() {
                return Err(EstimatorError::TrainingDiverged { epoch, loss });
            }
            let grads = model.collect_gradients(&g, &params);
            adam.apply(model, &grads)?;
            loss_sum += loss * chunk.len() as f64;
            step += 1;
        }
        epoch_losses.push(loss_sum / n as f64);
    }
    Ok(TrainingLog { epoch_losses })
}

fn gather_rows(inputs: &Matrix, rows: &[usize]) -> Matrix {
    let cols = inputs.cols();
    let mut data = Vec::with_capacity(rows.len() * cols);
    for &r in rows {
        data.extend_from_slice(inputs.row(r));
    }
    Matrix::from_vec(rows.len(), cols, data)
}

fn gather(values: &[f64], rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&r| values[r]).collect()
}

fn attach_head(
    g: &mut Graph,
    out: crate::nn::NodeId,
    targets: &FitTargets,
    rows: &[usize],
) -> crate::nn::NodeId {
    match targets {
        FitTargets::Point(golds) => batch::mse(g, out, &gather(golds, rows)),
        FitTargets::Gaussian(golds) => {
            let (mean, log_var) = batch::gaussian_head(g, out);
            batch::hts(g, mean, log_var, &gather(golds, rows))
        }
        FitTargets::Annotator { means, variances } => {
            let (mean, log_var) = batch::gaussian_head(g, out);
            batch::kl(g, mean, log_var, &gather(means, rows), &gather(variances, rows))
        }
        FitTargets::Error { targets, loss } => {
            let z = batch::error_head(g, out);
            batch::dup(g, z, *loss, &gather(targets, rows))
        }
    }
}

fn check_spec(
    spec: &MlpSpec,
    data: &TrainingSet,
    output_dim: usize,
) -> Result<(), EstimatorError> {
    spec.validate()?;
    if spec.input_dim != data.feature_dim() {
        return Err(EstimatorError::FeatureDimMismatch {
            expected: spec.input_dim,
            got: data.feature_dim(),
        });
    }
    if spec.output_dim != output_dim {
        return Err(EstimatorError::InvalidConfig(format!(
            "this trainer needs a {output_dim}-output head, spec has {}",
            spec.output_dim
        )));
    }
    if data.is_empty() {
        return Err(EstimatorError::EmptySplit { which: "training" });
    }
    Ok(())
}

/// Train a point regressor (squared-error objective).
pub fn train_point(
    spec: MlpSpec,
    data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<(Mlp, TrainingLog), EstimatorError> {
    check_spec(&spec, data, 1)?;
    let mut model = Mlp::init(spec, derive_stream(cfg.seed, STREAM_INIT))?;
    let targets = FitTargets::Point(data.gold_scores());
    let log = fit(&mut model, &data.features_matrix(), &targets, cfg)?;
    Ok((model, log))
}

/// Train a heteroscedastic regressor: a two-output head under the
/// Gaussian likelihood, learning mean and input-dependent variance.
pub fn train_hts(
    spec: MlpSpec,
    data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<(Mlp, TrainingLog), EstimatorError> {
    check_spec(&spec, data, 2)?;
    let mut model = Mlp::init(spec, derive_stream(cfg.seed, STREAM_INIT))?;
    let targets = FitTargets::Gaussian(data.gold_scores());
    let log = fit(&mut model, &data.features_matrix(), &targets, cfg)?;
    Ok((model, log))
}

/// Summarize every record's annotator scores into floored (mean,
/// variance) fitting targets. Records with fewer than two scores are
/// rejected by id.
pub(crate) fn annotator_targets(data: &TrainingSet) -> Result<FitTargets, EstimatorError> {
    let mut means = Vec::with_capacity(data.len());
    let mut variances = Vec::with_capacity(data.len());
    for rec in data.records() {
        let scores = rec.annotator_scores.as_deref().unwrap_or(&[]);
        if scores.len() < 2 {
            return Err(EstimatorError::MissingAnnotations { id: rec.id.clone() });
        }
        let target = AnnotatorTarget::from_scores(scores)?.with_variance_floor(ANNOTATOR_VARIANCE_FLOOR);
        means.push(target.mean);
        variances.push(target.variance);
    }
    Ok(FitTargets::Annotator { means, variances })
}

/// Train a disagreement regressor: the predicted Gaussian is pulled
/// toward each record's annotator score distribution. Every record
/// must carry at least two annotator scores.
pub fn train_kl(
    spec: MlpSpec,
    data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<(Mlp, TrainingLog), EstimatorError> {
    check_spec(&spec, data, 2)?;
    let targets = annotator_targets(data)?;
    let mut model = Mlp::init(spec, derive_stream(cfg.seed, STREAM_INIT))?;
    let log = fit(&mut model, &data.features_matrix(), &targets, cfg)?;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{
        gen_heteroscedastic, gen_multi_annotator, labeling_function, Dataset, TrainRecord,
        TrainingSet,
    };
    use crate::estimators::{gaussian_predict, point_predict};
    use rand::Rng;

    fn line_data(n: usize, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..n)
            .map(|i| {
                let x = rng.gen_range(-1.0..1.0);
                TrainRecord {
                    id: format!("line-{i:04}"),
                    features: vec![x],
                    gold_score: 2.0 * x,
                    annotator_scores: None,
                }
            })
            .collect();
        TrainingSet::from_records(records).unwrap()
    }

    fn noiseless_data(n: usize, dim: usize, seed: u64) -> TrainingSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let records = (0..n)
            .map(|i| {
                let features: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                TrainRecord {
                    id: format!("clean-{i:04}"),
                    gold_score: labeling_function(&features),
                    features,
                    annotator_scores: None,
                }
            })
            .collect();
        TrainingSet::from_records(records).unwrap()
    }

    #[test]
    fn point_regressor_fits_a_line() {
        let train = line_data(256, 1);
        let held = line_data(128, 2);
        let cfg = TrainingConfig { epochs: 300, seed: 3, ..TrainingConfig::default() };
        let (model, log) = train_point(MlpSpec::standard(1, 1), &train, &cfg).unwrap();
        let preds = point_predict(&model, &held.features_matrix()).unwrap();
        let mse = held
            .gold_scores()
            .iter()
            .zip(&preds)
            .map(|(g, p)| (g - p) * (g - p))
            .sum::<f64>()
            / held.len() as f64;
        assert!(mse <= 1e-3, "held-out MSE {mse} on y = 2x");
        // Loss should broadly come down over training.
        assert!(log.epoch_losses.last().unwrap() < log.epoch_losses.first().unwrap());
    }

    #[test]
    fn zero_epochs_leave_the_initialization_untouched() {
        let train = line_data(64, 5);
        let cfg = TrainingConfig { epochs: 0, seed: 7, ..TrainingConfig::default() };
        let (model, log) = train_point(MlpSpec::standard(1, 1), &train, &cfg).unwrap();
        let fresh = Mlp::init(MlpSpec::standard(1, 1), derive_stream(7, STREAM_INIT)).unwrap();
        assert_eq!(model.params_flat(), fresh.params_flat());
        assert!(log.epoch_losses.is_empty());
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let train = gen_heteroscedastic(200, 4, 0.1, 0.5, 8).unwrap().training_view();
        let cfg = TrainingConfig { epochs: 5, seed: 11, ..TrainingConfig::default() };
        let (a, _) = train_hts(MlpSpec::standard(4, 2), &train, &cfg).unwrap();
        let (b, _) = train_hts(MlpSpec::standard(4, 2), &train, &cfg).unwrap();
        assert_eq!(a.params_flat(), b.params_flat());
        let other = TrainingConfig { seed: 12, ..cfg };
        let (c, _) = train_hts(MlpSpec::standard(4, 2), &train, &other).unwrap();
        assert_ne!(a.params_flat(), c.params_flat());
    }

    #[test]
    fn hts_recovers_a_constant_noise_level() {
        // Homoscedastic data: slope 0 makes sigma(x) = 0.3 everywhere.
        let data = gen_heteroscedastic(2400, 4, 0.3, 0.0, 13).unwrap();
        let train = data.subset(&(0..2000).collect::<Vec<_>>()).unwrap().training_view();
        let held = data.subset(&(2000..2400).collect::<Vec<_>>()).unwrap().training_view();
        let cfg = TrainingConfig { epochs: 60, seed: 2, ..TrainingConfig::default() };
        let (model, _) = train_hts(MlpSpec::standard(4, 2), &train, &cfg).unwrap();
        let preds = gaussian_predict(&model, &held.features_matrix()).unwrap();
        let mean_sigma = preds.iter().map(|p| p.sigma()).sum::<f64>() / preds.len() as f64;
        assert!(
            (0.2..=0.4).contains(&mean_sigma),
            "mean predicted sigma {mean_sigma} should be near the true 0.3"
        );
    }

    #[test]
    fn hts_drives_variance_down_on_noiseless_data() {
        // Training runs with dropout active, so train-time residuals
        // carry mask noise and the fitted sigma bottoms out at that
        // scale rather than at zero. The contract is that it lands
        // clearly below the sigma=0.3 band the homoscedastic test pins.
        let train = noiseless_data(1000, 4, 17);
        let cfg = TrainingConfig {
            epochs: 400,
            learning_rate: 3e-3,
            seed: 4,
            ..TrainingConfig::default()
        };
        let (model, _) = train_hts(MlpSpec::standard(4, 2), &train, &cfg).unwrap();
        let held = noiseless_data(300, 4, 18);
        let preds = gaussian_predict(&model, &held.features_matrix()).unwrap();
        let mean_sigma = preds.iter().map(|p| p.sigma()).sum::<f64>() / preds.len() as f64;
        assert!(
            mean_sigma <= 0.15,
            "noiseless data should floor sigma at the dropout-noise scale, got {mean_sigma}"
        );
    }

    #[test]
    fn kl_requires_annotator_scores_on_every_record() {
        let mut records: Vec<TrainRecord> = gen_multi_annotator(20, 3, 3, 0.2, 0.2, 19)
            .unwrap()
            .training_view()
            .records()
            .to_vec();
        records[7].annotator_scores = Some(vec![1.0]);
        let data = TrainingSet::from_records(records).unwrap();
        let cfg = TrainingConfig { epochs: 1, ..TrainingConfig::default() };
        let err = train_kl(MlpSpec::standard(3, 2), &data, &cfg).unwrap_err();
        match err {
            EstimatorError::MissingAnnotations { id } => assert!(id.contains("0007")),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn kl_converges_toward_the_floor_when_annotators_agree_exactly() {
        // Records where every annotator returned the same score: the
        // target variance is the floor, and with a trivially learnable
        // constant mean almost nothing else remains.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let records: Vec<TrainRecord> = (0..1000)
            .map(|i| {
                let features: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
                TrainRecord {
                    id: format!("agree-{i:04}"),
                    gold_score: 0.7,
                    annotator_scores: Some(vec![0.7; 5]),
                    features,
                }
            })
            .collect();
        let data = TrainingSet::from_records(records).unwrap();
        let cfg = TrainingConfig { epochs: 120, learning_rate: 3e-3, seed: 5, ..TrainingConfig::default() };
        let (model, _) = train_kl(MlpSpec::standard(4, 2), &data, &cfg).unwrap();
        let preds = gaussian_predict(&model, &data.features_matrix()).unwrap();
        let mean_var = preds.iter().map(|p| p.variance()).sum::<f64>() / preds.len() as f64;
        assert!(
            mean_var <= 10.0 * ANNOTATOR_VARIANCE_FLOOR,
            "unanimous annotators should pull variance toward the floor, got {mean_var}"
        );
    }

    #[test]
    fn kl_recovers_a_constant_disagreement_level() {
        let data = gen_multi_annotator(2400, 4, 5, 0.5, 0.5, 29).unwrap();
        let train = data.subset(&(0..2000).collect::<Vec<_>>()).unwrap().training_view();
        let held = data.subset(&(2000..2400).collect::<Vec<_>>()).unwrap().training_view();
        let cfg = TrainingConfig { epochs: 60, seed: 6, ..TrainingConfig::default() };
        let (model, _) = train_kl(MlpSpec::standard(4, 2), &train, &cfg).unwrap();
        let preds = gaussian_predict(&model, &held.features_matrix()).unwrap();
        let mean_sigma = preds.iter().map(|p| p.sigma()).sum::<f64>() / preds.len() as f64;
        assert!(
            (0.35..=0.65).contains(&mean_sigma),
            "annotator std 0.5 should give mean predicted sigma near it, got {mean_sigma}"
        );
    }

    #[test]
    fn kl_orders_two_disagreement_strata() {
        let data = gen_multi_annotator(1500, 4, 5, 0.1, 0.8, 37).unwrap();
        let train = data.training_view();
        let cfg = TrainingConfig { epochs: 50, seed: 7, ..TrainingConfig::default() };
        let (model, _) = train_kl(MlpSpec::standard(4, 2), &train, &cfg).unwrap();
        let held: Dataset = gen_multi_annotator(600, 4, 5, 0.1, 0.8, 38).unwrap();
        let preds = gaussian_predict(&model, &held.training_view().features_matrix()).unwrap();
        let (mut low, mut high) = (Vec::new(), Vec::new());
        for (rec, p) in held.records().iter().zip(&preds) {
            if rec.features[0] < 0.0 {
                low.push(p.sigma());
            } else {
                high.push(p.sigma());
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&high) > mean(&low),
            "high-disagreement stratum should get larger sigmas: {} vs {}",
            mean(&high),
            mean(&low)
        );
    }

    #[test]
    fn nan_inputs_abort_training_with_a_diagnostic() {
        // A learning rate large enough to blow the loss up to
        // non-finite territory within a few steps.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let records: Vec<TrainRecord> = (0..64)
            .map(|i| TrainRecord {
                id: format!("x-{i}"),
                features: vec![rng.gen_range(-1.0..1.0)],
                gold_score: 1e160,
                annotator_scores: None,
            })
            .collect();
        let data = TrainingSet::from_records(records).unwrap();
        let cfg = TrainingConfig { epochs: 5, ..TrainingConfig::default() };
        let err = train_point(MlpSpec::standard(1, 1), &data, &cfg).unwrap_err();
        assert!(
            matches!(err, EstimatorError::TrainingDiverged { .. })
                || matches!(err, EstimatorError::Nn(_)),
            "expected a divergence diagnostic, got {err}"
        );
    }

    #[test]
    fn spec_and_data_dimensions_must_agree() {
        let data = line_data(16, 1);
        let cfg = TrainingConfig::default();
        assert!(matches!(
            train_point(MlpSpec::standard(3, 1), &data, &cfg).unwrap_err(),
            EstimatorError::FeatureDimMismatch { .. }
        ));
        assert!(matches!(
            train_hts(MlpSpec::standard(1, 1), &data, &cfg).unwrap_err(),
            EstimatorError::InvalidConfig(_)
        ));
    }

    #[test]
    fn bad_training_configs_are_rejected() {
        let bad = TrainingConfig { batch_size: 0, ..TrainingConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig { learning_rate: 0.0, ..TrainingConfig::default() };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig { dup_quality_fraction: 1.0, ..TrainingConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn training_config_serde_fills_defaults() {
        let cfg: TrainingConfig = serde_json::from_str(r#"{"epochs": 10}"#).unwrap();
        assert_eq!(cfg.epochs, 10);
        assert_eq!(cfg.batch_size, 32);
        assert_eq!(cfg.learning_rate, 1e-3);
        assert_eq!(cfg.dup_quality_fraction, 0.5);
    }

    #[test]
    fn records_mentioning_segments_appear_in_divergence_errors() {
        // Guard the error shape: epoch index is carried through.
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let records: Vec<TrainRecord> = (0..32)
            .map(|i| TrainRecord {
                id: format!("y-{i}"),
                features: vec![rng.gen_range(-1.0..1.0)],
                gold_score: 1e160,
                annotator_scores: None,
            })
            .collect();
        let data = TrainingSet::from_records(records).unwrap();
        let cfg = TrainingConfig { epochs: 3, ..TrainingConfig::default() };
        match train_point(MlpSpec::standard(1, 1), &data, &cfg) {
            Err(EstimatorError::TrainingDiverged { loss, .. }) => assert!(!loss.is_finite()),
            Err(EstimatorError::Nn(_)) => {} // gradient blew up first
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}

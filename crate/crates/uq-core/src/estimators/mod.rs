//! The uncertainty estimators: six ways to attach a variance to a
//! predicted score.
//!
//! All estimators share the same output shape — a [`PredictionSet`] of
//! per-segment Gaussian predictions — but differ in where the variance
//! comes from:
//!
//! * **MCD** — variance of stochastic forward passes with dropout left
//!   on at inference (epistemic only);
//! * **DE** — variance across independently seeded point models
//!   (epistemic only);
//! * **HTS** — a second network head trained to predict the noise
//!   variance directly (aleatoric only);
//! * **HTS+MCD** — dropout sampling over the two-headed network,
//!   combining the spread of sampled means with the average predicted
//!   variance (total);
//! * **KL** — a two-headed network fitted to per-segment annotator
//!   score distributions (aleatoric, from disagreement);
//! * **DUP** — a two-step pipeline that first predicts the score, then
//!   predicts its own absolute error (total, learned directly).
//!
//! Training code consumes the oracle-free
//! [`TrainingSet`](crate::datagen::TrainingSet) view, so no estimator
//! can peek at generator ground truth even by accident.

mod dup;
mod training;

pub use dup::{dup_fine_tune, dup_train, DupPipeline, DUP_BOTTLENECK_DIM};
pub use training::{
    train_hts, train_kl, train_point, TrainingConfig, TrainingLog, ANNOTATOR_VARIANCE_FLOOR,
};
use training::{annotator_targets, fit, standard_spec, FitTargets};

use crate::calibration::{apply_scale, CalibrationScale};
use crate::datagen::TrainingSet;
use crate::nn::{derive_stream, DropoutMode, Matrix, Mlp, NnError};
use crate::objectives::{DupLoss, GaussianPrediction, ObjectiveError, LOG_VARIANCE_BOUND};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Lower bound applied to every reported variance. Keeps downstream
/// log-likelihoods finite when an estimator degenerates to zero spread.
pub const VARIANCE_FLOOR: f64 = 1e-8;

const BUNDLE_VERSION: u32 = 1;
const BUNDLE_MANIFEST: &str = "estimator.json";

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Data(#[from] crate::datagen::DataError),
    #[error("estimator configuration invalid: {0}")]
    InvalidConfig(String),
    #[error("MC dropout needs a positive dropout rate; this model was built with rate 0")]
    DropoutInactive,
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    TrainingDiverged { epoch: usize, loss: f64 },
    #[error("record '{id}' needs at least 2 annotator scores for disagreement training")]
    MissingAnnotations { id: String },
    #[error("segment id '{id}' appears in both pipeline splits")]
    OverlappingSplits { id: String },
    #[error("the {which} split is empty")]
    EmptySplit { which: &'static str },
    #[error("feature dimension mismatch: model expects {expected}, data has {got}")]
    FeatureDimMismatch { expected: usize, got: usize },
    #[error("duplicate prediction id '{id}'")]
    DuplicatePrediction { id: String },
    #[error("prediction for '{id}' is not finite")]
    NonFinitePrediction { id: String },
    #[error("checkpoint bundle I/O failed: {0}")]
    BundleIo(#[from] std::io::Error),
    #[error("checkpoint bundle is malformed: {0}")]
    BundleFormat(String),
    #[error("unsupported bundle version {got} (this build reads version {expected})")]
    BundleVersion { expected: u32, got: u32 },
}

/// One scored prediction, keyed by segment id.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionItem {
    pub id: String,
    pub pred: GaussianPrediction,
    pub gold: f64,
}

/// A batch of per-segment predictions with unique ids and finite
/// values — the input shape every evaluation metric consumes.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionSet {
    items: Vec<PredictionItem>,
}

impl PredictionSet {
    pub fn new(entries: Vec<(String, GaussianPrediction, f64)>) -> Result<Self, EstimatorError> {
        let mut seen = std::collections::HashSet::with_capacity(entries.len());
        let mut items = Vec::with_capacity(entries.len());
        for (id, pred, gold) in entries {
            if !seen.insert(id.clone()) {
                return Err(EstimatorError::DuplicatePrediction { id });
            }
            if !(pred.mean.is_finite() && pred.log_variance.is_finite() && gold.is_finite()) {
                return Err(EstimatorError::NonFinitePrediction { id });
            }
            items.push(PredictionItem { id, pred, gold });
        }
        Ok(PredictionSet { items })
    }

    pub fn items(&self) -> &[PredictionItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

fn default_mc_samples() -> usize {
    100
}
fn default_ensemble_members() -> usize {
    5
}

/// Which estimator to build, with its per-kind knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Point model, dropout active at inference, `samples` passes.
    Mcd {
        #[serde(default = "default_mc_samples")]
        samples: usize,
    },
    /// Ensemble of `members` independently seeded point models.
    De {
        #[serde(default = "default_ensemble_members")]
        members: usize,
    },
    /// Two-headed heteroscedastic network.
    Hts,
    /// Heteroscedastic network sampled with dropout: epistemic spread
    /// plus mean aleatoric variance.
    HtsMcd {
        #[serde(default = "default_mc_samples")]
        samples: usize,
    },
    /// Two-headed network fitted to annotator disagreement.
    Kl,
    /// Two-step direct error prediction.
    Dup {
        #[serde(default)]
        loss: DupLoss,
    },
}

impl EstimatorKind {
    /// Stable short name, used in file names and table rows.
    pub fn name(&self) -> String {
        match self {
            EstimatorKind::Mcd { .. } => "mcd".into(),
            EstimatorKind::De { .. } => "de".into(),
            EstimatorKind::Hts => "hts".into(),
            EstimatorKind::HtsMcd { .. } => "hts_mcd".into(),
            EstimatorKind::Kl => "kl".into(),
            EstimatorKind::Dup { loss } => format!("dup_{loss}"),
        }
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        match self {
            EstimatorKind::Mcd { samples } | EstimatorKind::HtsMcd { samples } => {
                if *samples < 2 {
                    return Err(EstimatorError::InvalidConfig(format!(
                        "sampling estimators need at least 2 samples, got {samples}"
                    )));
                }
            }
            EstimatorKind::De { members } => {
                if *members < 2 {
                    return Err(EstimatorError::InvalidConfig(format!(
                        "an ensemble needs at least 2 members, got {members}"
                    )));
                }
            }
            EstimatorKind::Hts | EstimatorKind::Kl | EstimatorKind::Dup { .. } => {}
        }
        Ok(())
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// A variance split into its two sources. Both parts are nonnegative
/// by construction; [`TotalUncertainty::total`] is their sum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TotalUncertainty {
    pub epistemic: f64,
    pub aleatoric: f64,
}

impl TotalUncertainty {
    pub fn new(epistemic: f64, aleatoric: f64) -> Self {
        assert!(
            epistemic >= 0.0 && aleatoric >= 0.0 && epistemic.is_finite() && aleatoric.is_finite(),
            "uncertainty components must be finite and nonnegative, got ({epistemic}, {aleatoric})"
        );
        TotalUncertainty { epistemic, aleatoric }
    }

    pub fn total(&self) -> f64 {
        self.epistemic + self.aleatoric
    }
}

fn mean_and_population_variance(samples: &[f64]) -> (f64, f64) {
    assert!(!samples.is_empty());
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Collapse point samples (dropout passes or ensemble members) into a
/// Gaussian: sample mean, population variance, floor-clamped.
pub fn combine_point_samples(samples: &[f64]) -> GaussianPrediction {
    let (mean, var) = mean_and_population_variance(samples);
    GaussianPrediction::from_variance(mean, var.max(VARIANCE_FLOOR))
}

/// Collapse Gaussian samples (dropout passes over a two-headed model)
/// into their mean plus the epistemic/aleatoric split: population
/// variance of the sampled means, and average of the sampled
/// variances.
pub fn combine_gaussian_samples(means: &[f64], variances: &[f64]) -> (f64, TotalUncertainty) {
    assert_eq!(means.len(), variances.len());
    let (mean, epistemic) = mean_and_population_variance(means);
    let aleatoric = variances.iter().sum::<f64>() / variances.len() as f64;
    (mean, TotalUncertainty::new(epistemic, aleatoric))
}

fn check_input(model: &Mlp, inputs: &Matrix) -> Result<(), EstimatorError> {
    if inputs.cols() != model.spec().input_dim {
        return Err(EstimatorError::FeatureDimMismatch {
            expected: model.spec().input_dim,
            got: inputs.cols(),
        });
    }
    Ok(())
}

/// Deterministic forward pass of a one-output model.
pub fn point_predict(model: &Mlp, inputs: &Matrix) -> Result<Vec<f64>, EstimatorError> {
    check_input(model, inputs)?;
    let out = model.forward(inputs, DropoutMode::Inactive)?;
    Ok((0..out.rows()).map(|i| out.get(i, 0)).collect())
}

/// Deterministic forward pass of a two-output model, reading the head
/// as (mean, log-variance) with the usual clamp and floor.
pub fn gaussian_predict(model: &Mlp, inputs: &Matrix) -> Result<Vec<GaussianPrediction>, EstimatorError> {
    check_input(model, inputs)?;
    let out = model.forward(inputs, DropoutMode::Inactive)?;
    Ok((0..out.rows())
        .map(|i| {
            let lv = out.get(i, 1).clamp(-LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND);
            GaussianPrediction::from_variance(out.get(i, 0), lv.exp().max(VARIANCE_FLOOR))
        })
        .collect())
}

/// Monte Carlo dropout: `samples` stochastic passes of a one-output
/// model with dropout kept active; per row, the sample mean is the
/// prediction and the population variance the (epistemic) uncertainty.
pub fn mc_dropout_predict(
    model: &Mlp,
    inputs: &Matrix,
    samples: usize,
    seed: u64,
) -> Result<Vec<GaussianPrediction>, EstimatorError> {
    check_input(model, inputs)?;
    if samples < 2 {
        return Err(EstimatorError::InvalidConfig(format!(
            "MC dropout needs at least 2 samples, got {samples}"
        )));
    }
    if model.spec().dropout_rate == 0.0 {
        return Err(EstimatorError::DropoutInactive);
    }
    let n = inputs.rows();
    let mut per_row: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); n];
    for m in 0..samples {
        let pass =
            model.forward(inputs, DropoutMode::Active { seed: derive_stream(seed, m as u64) })?;
        for (i, row) in per_row.iter_mut().enumerate() {
            row.push(pass.get(i, 0));
        }
    }
    Ok(per_row.iter().map(|row| combine_point_samples(row)).collect())
}

/// Deep-ensemble prediction: mean and population variance of the
/// member point predictions.
pub fn ensemble_predict(models: &[Mlp], inputs: &Matrix) -> Result<Vec<GaussianPrediction>, EstimatorError> {
    if models.len() < 2 {
        return Err(EstimatorError::InvalidConfig(format!(
            "an ensemble needs at least 2 members, got {}",
            models.len()
        )));
    }
    let mut member_outputs = Vec::with_capacity(models.len());
    for model in models {
        member_outputs.push(point_predict(model, inputs)?);
    }
    let n = inputs.rows();
    Ok((0..n)
        .map(|i| {
            let samples: Vec<f64> = member_outputs.iter().map(|o| o[i]).collect();
            combine_point_samples(&samples)
        })
        .collect())
}

/// Total-uncertainty prediction from a two-headed model under dropout
/// sampling: the spread of the sampled means (epistemic) plus the
/// average sampled variance (aleatoric).
pub fn hts_mcd_predict(
    model: &Mlp,
    inputs: &Matrix,
    samples: usize,
    seed: u64,
) -> Result<Vec<GaussianPrediction>, EstimatorError> {
    check_input(model, inputs)?;
    if samples < 2 {
        return Err(EstimatorError::InvalidConfig(format!(
            "MC dropout needs at least 2 samples, got {samples}"
        )));
    }
    if model.spec().dropout_rate == 0.0 {
        return Err(EstimatorError::DropoutInactive);
    }
    let n = inputs.rows();
    let mut means: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); n];
    let mut vars: Vec<Vec<f64>> = vec![Vec::with_capacity(samples); n];
    for m in 0..samples {
        let pass =
            model.forward(inputs, DropoutMode::Active { seed: derive_stream(seed, m as u64) })?;
        for i in 0..n {
            means[i].push(pass.get(i, 0));
            let lv = pass.get(i, 1).clamp(-LOG_VARIANCE_BOUND, LOG_VARIANCE_BOUND);
            vars[i].push(lv.exp());
        }
    }
    Ok((0..n)
        .map(|i| {
            let (mean, split) = combine_gaussian_samples(&means[i], &vars[i]);
            GaussianPrediction::from_variance(mean, split.total().max(VARIANCE_FLOOR))
        })
        .collect())
}

#[derive(Debug)]
enum ModelArtifact {
    Single(Mlp),
    Ensemble(Vec<Mlp>),
    Pipeline(DupPipeline),
}

/// A trained estimator plus everything needed to reproduce its
/// predictions: kind, weights, optional calibration, and the seed its
/// stochastic inference draws from.
#[derive(Debug)]
pub struct TrainedEstimator {
    kind: EstimatorKind,
    artifact: ModelArtifact,
    calibration: Option<CalibrationScale>,
    prediction_seed: u64,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    version: u32,
    kind: EstimatorKind,
    calibration: Option<CalibrationScale>,
    prediction_seed: u64,
    model_files: Vec<String>,
}

impl TrainedEstimator {
    /// Train an estimator of the given kind. The two-step pipeline
    /// splits `data` internally into its two disjoint training halves
    /// (fraction controlled by the training config); everything else
    /// trains on all of `data`.
    pub fn train(
        kind: &EstimatorKind,
        data: &TrainingSet,
        cfg: &TrainingConfig,
    ) -> Result<(Self, Vec<TrainingLog>), EstimatorError> {
        kind.validate()?;
        cfg.validate()?;
        let d = data.feature_dim();
        let (artifact, logs) = match kind {
            EstimatorKind::Mcd { .. } => {
                let (model, log) = train_point(standard_spec(d, 1, cfg), data, cfg)?;
                (ModelArtifact::Single(model), vec![log])
            }
            EstimatorKind::De { members } => {
                let mut models = Vec::with_capacity(*members);
                let mut logs = Vec::with_capacity(*members);
                for i in 0..*members {
                    let mut member_cfg = cfg.clone();
                    member_cfg.seed = derive_stream(cfg.seed, 1000 + i as u64);
                    let (model, log) = train_point(standard_spec(d, 1, cfg), data, &member_cfg)?;
                    models.push(model);
                    logs.push(log);
                }
                (ModelArtifact::Ensemble(models), logs)
            }
            EstimatorKind::Hts | EstimatorKind::HtsMcd { .. } => {
                let (model, log) = train_hts(standard_spec(d, 2, cfg), data, cfg)?;
                (ModelArtifact::Single(model), vec![log])
            }
            EstimatorKind::Kl => {
                let (model, log) = train_kl(standard_spec(d, 2, cfg), data, cfg)?;
                (ModelArtifact::Single(model), vec![log])
            }
            EstimatorKind::Dup { loss } => {
                let (quality_data, error_data) = split_for_pipeline(data, cfg)?;
                let (pipeline, logs) = dup_train(&quality_data, &error_data, *loss, cfg)?;
                (ModelArtifact::Pipeline(pipeline), logs)
            }
        };
        let est = TrainedEstimator {
            kind: kind.clone(),
            artifact,
            calibration: None,
            prediction_seed: derive_stream(cfg.seed, 40),
        };
        Ok((est, logs))
    }

    /// Continue training from the current weights on a new dataset —
    /// the "train on one labeling scheme, then adapt to another" flow.
    /// Seed streams mirror [`TrainedEstimator::train`], the pipeline
    /// re-splits `data` the same way, and any stored calibration is
    /// dropped because it no longer describes this model.
    pub fn fine_tune(
        &mut self,
        data: &TrainingSet,
        cfg: &TrainingConfig,
    ) -> Result<Vec<TrainingLog>, EstimatorError> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(EstimatorError::EmptySplit { which: "training" });
        }
        let logs = match (&self.kind, &mut self.artifact) {
            (EstimatorKind::Mcd { .. }, ModelArtifact::Single(model)) => {
                check_input_dim(model, data)?;
                let targets = FitTargets::Point(data.gold_scores());
                vec![fit(model, &data.features_matrix(), &targets, cfg)?]
            }
            (EstimatorKind::De { .. }, ModelArtifact::Ensemble(models)) => {
                let inputs = data.features_matrix();
                let targets = FitTargets::Point(data.gold_scores());
                let mut logs = Vec::with_capacity(models.len());
                for (i, model) in models.iter_mut().enumerate() {
                    check_input_dim(model, data)?;
                    let mut member_cfg = cfg.clone();
                    member_cfg.seed = derive_stream(cfg.seed, 1000 + i as u64);
                    logs.push(fit(model, &inputs, &targets, &member_cfg)?);
                }
                logs
            }
            (EstimatorKind::Hts | EstimatorKind::HtsMcd { .. }, ModelArtifact::Single(model)) => {
                check_input_dim(model, data)?;
                let targets = FitTargets::Gaussian(data.gold_scores());
                vec![fit(model, &data.features_matrix(), &targets, cfg)?]
            }
            (EstimatorKind::Kl, ModelArtifact::Single(model)) => {
                check_input_dim(model, data)?;
                let targets = annotator_targets(data)?;
                vec![fit(model, &data.features_matrix(), &targets, cfg)?]
            }
            (EstimatorKind::Dup { .. }, ModelArtifact::Pipeline(pipeline)) => {
                let (quality_data, error_data) = split_for_pipeline(data, cfg)?;
                dup_fine_tune(pipeline, &quality_data, &error_data, cfg)?
            }
            _ => unreachable!("artifact shape always matches the estimator kind"),
        };
        self.calibration = None;
        self.prediction_seed = derive_stream(cfg.seed, 40);
        Ok(logs)
    }

    pub fn kind(&self) -> &EstimatorKind {
        &self.kind
    }

    pub fn calibration(&self) -> Option<&CalibrationScale> {
        self.calibration.as_ref()
    }

    pub fn set_calibration(&mut self, cal: Option<CalibrationScale>) {
        self.calibration = cal;
    }

    /// The trained pipeline, when this estimator is the two-step kind.
    pub fn pipeline(&self) -> Option<&DupPipeline> {
        match &self.artifact {
            ModelArtifact::Pipeline(p) => Some(p),
            _ => None,
        }
    }

    /// Predict on a dataset view. Applies the stored calibration scale
    /// when one has been fitted.
    pub fn predict_set(&self, data: &TrainingSet) -> Result<PredictionSet, EstimatorError> {
        let inputs = data.features_matrix();
        let preds: Vec<GaussianPrediction> = match (&self.kind, &self.artifact) {
            (EstimatorKind::Mcd { samples }, ModelArtifact::Single(model)) => {
                mc_dropout_predict(model, &inputs, *samples, self.prediction_seed)?
            }
            (EstimatorKind::De { .. }, ModelArtifact::Ensemble(models)) => {
                ensemble_predict(models, &inputs)?
            }
            (EstimatorKind::Hts, ModelArtifact::Single(model)) => gaussian_predict(model, &inputs)?,
            (EstimatorKind::HtsMcd { samples }, ModelArtifact::Single(model)) => {
                hts_mcd_predict(model, &inputs, *samples, self.prediction_seed)?
            }
            (EstimatorKind::Kl, ModelArtifact::Single(model)) => gaussian_predict(model, &inputs)?,
            (EstimatorKind::Dup { .. }, ModelArtifact::Pipeline(pipeline)) => {
                pipeline.predict(&inputs)?
            }
            _ => unreachable!("artifact shape always matches kind"),
        };
        let entries = data
            .records()
            .iter()
            .zip(preds)
            .map(|(rec, pred)| (rec.id.clone(), pred, rec.gold_score))
            .collect();
        let set = PredictionSet::new(entries)?;
        Ok(match &self.calibration {
            Some(cal) => apply_scale(&set, cal),
            None => set,
        })
    }

    /// Write the estimator as a directory bundle: a manifest plus one
    /// checkpoint file per network.
    pub fn save_bundle(&self, dir: &Path) -> Result<(), EstimatorError> {
        std::fs::create_dir_all(dir)?;
        let model_files: Vec<String> = match &self.artifact {
            ModelArtifact::Single(model) => {
                model.save_checkpoint(&dir.join("model.json"))?;
                vec!["model.json".into()]
            }
            ModelArtifact::Ensemble(models) => {
                let mut files = Vec::with_capacity(models.len());
                for (i, model) in models.iter().enumerate() {
                    let name = format!("member-{i:02}.json");
                    model.save_checkpoint(&dir.join(&name))?;
                    files.push(name);
                }
                files
            }
            ModelArtifact::Pipeline(pipeline) => {
                pipeline.quality_model().save_checkpoint(&dir.join("quality.json"))?;
                pipeline.error_model().save_checkpoint(&dir.join("error.json"))?;
                vec!["quality.json".into(), "error.json".into()]
            }
        };
        let manifest = BundleManifest {
            version: BUNDLE_VERSION,
            kind: self.kind.clone(),
            calibration: self.calibration.clone(),
            prediction_seed: self.prediction_seed,
            model_files,
        };
        let json = serde_json::to_string_pretty(&manifest)
            .map_err(|e| EstimatorError::BundleFormat(e.to_string()))?;
        std::fs::write(dir.join(BUNDLE_MANIFEST), json)?;
        Ok(())
    }

    /// Load a bundle written by [`TrainedEstimator::save_bundle`].
    pub fn load_bundle(dir: &Path) -> Result<Self, EstimatorError> {
        let raw = std::fs::read_to_string(dir.join(BUNDLE_MANIFEST))?;
        let manifest: BundleManifest =
            serde_json::from_str(&raw).map_err(|e| EstimatorError::BundleFormat(e.to_string()))?;
        if manifest.version != BUNDLE_VERSION {
            return Err(EstimatorError::BundleVersion {
                expected: BUNDLE_VERSION,
                got: manifest.version,
            });
        }
        manifest.kind.validate()?;
        let load = |name: &str| Mlp::load_checkpoint(&dir.join(name));
        let artifact = match &manifest.kind {
            EstimatorKind::Dup { loss } => {
                if manifest.model_files.len() != 2 {
                    return Err(EstimatorError::BundleFormat(format!(
                        "pipeline bundle needs 2 model files, found {}",
                        manifest.model_files.len()
                    )));
                }
                let quality = load(&manifest.model_files[0])?;
                let error = load(&manifest.model_files[1])?;
                ModelArtifact::Pipeline(DupPipeline::from_parts(quality, error, *loss)?)
            }
            EstimatorKind::De { members } => {
                if manifest.model_files.len() != *members {
                    return Err(EstimatorError::BundleFormat(format!(
                        "ensemble bundle lists {} members but {} model files",
                        members,
                        manifest.model_files.len()
                    )));
                }
                let mut models = Vec::with_capacity(*members);
                for name in &manifest.model_files {
                    models.push(load(name)?);
                }
                ModelArtifact::Ensemble(models)
            }
            _ => {
                if manifest.model_files.len() != 1 {
                    return Err(EstimatorError::BundleFormat(format!(
                        "single-model bundle needs 1 model file, found {}",
                        manifest.model_files.len()
                    )));
                }
                ModelArtifact::Single(load(&manifest.model_files[0])?)
            }
        };
        Ok(TrainedEstimator {
            kind: manifest.kind,
            artifact,
            calibration: manifest.calibration,
            prediction_seed: manifest.prediction_seed,
        })
    }
}

fn check_input_dim(model: &Mlp, data: &TrainingSet) -> Result<(), EstimatorError> {
    if model.spec().input_dim != data.feature_dim() {
        return Err(EstimatorError::FeatureDimMismatch {
            expected: model.spec().input_dim,
            got: data.feature_dim(),
        });
    }
    Ok(())
}

/// Deterministically split a training set into the two disjoint halves
/// the two-step pipeline trains on.
fn split_for_pipeline(
    data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<(TrainingSet, TrainingSet), EstimatorError> {
    let n = data.len();
    if n < 2 {
        return Err(EstimatorError::EmptySplit { which: "pipeline" });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_stream(cfg.seed, 30));
    indices.shuffle(&mut rng);
    let n_q = ((cfg.dup_quality_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let quality = data.subset(&indices[..n_q])?;
    let error = data.subset(&indices[n_q..])?;
    Ok((quality, error))
}

//! Reproducible experiment protocols over the estimator families.
//!
//! Each runner is a pure function of its configuration (up to the
//! wall-clock fields of the benchmark): the corpus is generated or
//! loaded, split deterministically, and every estimator is trained,
//! calibrated, and scored under seeds derived from the one experiment
//! seed. Running the same config twice produces byte-identical report
//! files.
//!
//! A failing estimator does not abort a run — its row carries the
//! error message and the remaining rows are produced normally. Only
//! configuration problems and I/O failures abort.
//!
//! When `output_dir` is set, every runner writes three kinds of
//! artifact: a JSON report, an aligned text table with the best value
//! per column marked, and one CSV of per-segment predictions per
//! estimator for external plotting.

use crate::calibration::{fit_variance_scale, CalibrationError, CalibrationScale};
use crate::datagen::{DataError, Dataset, GeneratedData, SyntheticScenario, TrainingSet};
use crate::estimators::{
    point_predict, train_point, EstimatorError, EstimatorKind, PredictionSet, TrainedEstimator,
    TrainingConfig,
};
use crate::metrics::{report as metrics_report, sharpness, MetricsError, MetricsReport};
use crate::nn::{derive_stream, MlpSpec};
use crate::objectives::DupLoss;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

// Stream indices hanging off the experiment seed. Estimator training
// seeds sit at 50..=55 (one per kind, so adding an estimator to the
// list never changes another's run); the corpus split and the
// benchmark baseline get their own.
const STREAM_CORPUS_SPLIT: u64 = 31;
const STREAM_BASELINE: u64 = 56;

/// Benchmark repetitions when the config does not say otherwise.
pub const DEFAULT_BENCH_REPS: usize = 3;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("experiment configuration invalid: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error("report I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV writing failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
}

fn default_bench_reps() -> usize {
    DEFAULT_BENCH_REPS
}

/// Training hyperparameters as they appear in an experiment config.
/// Seeds are absent on purpose: every run derives its training seeds
/// from the experiment seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rate: f64,
}

impl Default for TrainingSettings {
    fn default() -> Self {
        let base = TrainingConfig::default();
        TrainingSettings {
            epochs: base.epochs,
            batch_size: base.batch_size,
            learning_rate: base.learning_rate,
            dropout_rate: base.dropout_rate,
        }
    }
}

/// How the corpus is carved up: the three-way train/dev/test split,
/// plus the share of the training split the two-step pipeline gives
/// its first-stage model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitFractions {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub dup_quality: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.7, dev: 0.1, test: 0.2, dup_quality: 0.5 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        for (name, v) in [("train", self.train), ("dev", self.dev), ("test", self.test)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "split fraction '{name}' must lie strictly between 0 and 1, got {v}"
                )));
            }
        }
        let sum = self.train + self.dev + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ExperimentError::InvalidConfig(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        if !(self.dup_quality > 0.0 && self.dup_quality < 1.0) {
            return Err(ExperimentError::InvalidConfig(format!(
                "dup_quality must lie strictly between 0 and 1, got {}",
                self.dup_quality
            )));
        }
        Ok(())
    }
}

/// One experiment, completely described. Data comes from exactly one
/// of `scenario` (generated) or `dataset` (a JSONL file); the optional
/// `ood_dataset` adds a shifted evaluation corpus to file-based runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<SyntheticScenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ood_dataset: Option<PathBuf>,
    #[serde(default)]
    pub estimators: Vec<EstimatorKind>,
    #[serde(default)]
    pub split: SplitFractions,
    #[serde(default)]
    pub training: TrainingSettings,
    /// Master seed; every split and training run derives from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_bench_reps")]
    pub bench_reps: usize,
    /// Where report files land. `None` keeps everything in memory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        match (&self.scenario, &self.dataset) {
            (Some(sc), None) => sc.validate()?,
            (None, Some(_)) => {}
            (Some(_), Some(_)) => {
                return Err(ExperimentError::InvalidConfig(
                    "give either a scenario or a dataset path, not both".into(),
                ))
            }
            (None, None) => {
                return Err(ExperimentError::InvalidConfig(
                    "a scenario or a dataset path is required".into(),
                ))
            }
        }
        if self.ood_dataset.is_some() && self.scenario.is_some() {
            return Err(ExperimentError::InvalidConfig(
                "ood_dataset only applies to file datasets; a domain_shift scenario carries its own shifted half".into(),
            ));
        }
        for kind in &self.estimators {
            kind.validate()
                .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        }
        self.split.validate()?;
        self.training_config_for(&EstimatorKind::Hts)
            .validate()
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
        if self.bench_reps < 3 {
            return Err(ExperimentError::InvalidConfig(format!(
                "bench_reps must be at least 3, got {}",
                self.bench_reps
            )));
        }
        Ok(())
    }

    /// The training config an estimator of this kind runs under. Each
    /// kind trains on its own seed stream, so results for one row
    /// never depend on which other rows were requested.
    pub fn training_config_for(&self, kind: &EstimatorKind) -> TrainingConfig {
        TrainingConfig {
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            learning_rate: self.training.learning_rate,
            seed: derive_stream(self.seed, kind_stream(kind)),
            dup_quality_fraction: self.split.dup_quality,
            dropout_rate: self.training.dropout_rate,
        }
    }

    /// Hex SHA-256 of the config with `output_dir` blanked, so moving
    /// the output does not change the identity of the run. Every
    /// report embeds this hash.
    pub fn config_hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        let json = serde_json::to_string(&canon).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn kind_stream(kind: &EstimatorKind) -> u64 {
    match kind {
        EstimatorKind::Mcd { .. } => 50,
        EstimatorKind::De { .. } => 51,
        EstimatorKind::Hts => 52,
        EstimatorKind::HtsMcd { .. } => 53,
        EstimatorKind::Kl => 54,
        EstimatorKind::Dup { .. } => 55,
    }
}

/// Materialize a config's corpus: the main dataset plus the
/// out-of-domain one when the config provides it (a shifted scenario
/// or an explicit `ood_dataset` path). The config must already be
/// valid.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<(Dataset, Option<Dataset>), ExperimentError> {
    match (&cfg.scenario, &cfg.dataset) {
        (Some(sc), None) => Ok(match sc.generate()? {
            GeneratedData::Single(main) => (main, None),
            GeneratedData::Shifted { in_domain, shifted } => (in_domain, Some(shifted)),
        }),
        (None, Some(path)) => {
            let main = Dataset::load_jsonl(path)?;
            let ood = match &cfg.ood_dataset {
                Some(p) => Some(Dataset::load_jsonl(p)?),
                None => None,
            };
            Ok((main, ood))
        }
        _ => Err(ExperimentError::InvalidConfig(
            "a scenario or a dataset path is required".into(),
        )),
    }
}

/// Deterministic three-way split. Records are grouped into units first
/// — noise-tagged records stick with their pair, everything else
/// stands alone — then each domain stratum is shuffled and cut at the
/// requested fractions, so strata stay balanced across splits and
/// paired variants never straddle a split boundary. Errors if any
/// split comes out empty.
pub fn split_dataset(
    ds: &Dataset,
    fractions: &SplitFractions,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset), ExperimentError> {
    fractions.validate()?;
    let records = ds.records();

    let mut units: Vec<Vec<usize>> = Vec::new();
    let mut pair_unit: HashMap<String, usize> = HashMap::new();
    for (i, rec) in records.iter().enumerate() {
        if rec.noise_tag.is_some() {
            let key = rec.pair_key().to_string();
            match pair_unit.get(&key) {
                Some(&u) => units[u].push(i),
                None => {
                    pair_unit.insert(key, units.len());
                    units.push(vec![i]);
                }
            }
        } else {
            units.push(vec![i]);
        }
    }

    // Strata in first-appearance order, so the walk is deterministic.
    let mut strata: Vec<(&str, Vec<usize>)> = Vec::new();
    let mut stratum_of: HashMap<&str, usize> = HashMap::new();
    for (u, unit) in units.iter().enumerate() {
        let tag = records[unit[0]].domain_tag.as_str();
        match stratum_of.get(tag) {
            Some(&s) => strata[s].1.push(u),
            None => {
                stratum_of.insert(tag, strata.len());
                strata.push((tag, vec![u]));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_stream(seed, STREAM_CORPUS_SPLIT));
    let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (_, mut unit_ids) in strata {
        unit_ids.shuffle(&mut rng);
        let n = unit_ids.len();
        let n_train = ((fractions.train * n as f64).round() as usize).min(n);
        let n_dev = ((fractions.dev * n as f64).round() as usize).min(n - n_train);
        for (slot, &u) in unit_ids.iter().enumerate() {
            let sink = if slot < n_train {
                &mut train
            } else if slot < n_train + n_dev {
                &mut dev
            } else {
                &mut test
            };
            sink.extend_from_slice(&units[u]);
        }
    }
    for (name, split) in [("train", &train), ("dev", &dev), ("test", &test)] {
        if split.is_empty() {
            return Err(ExperimentError::InvalidConfig(format!(
                "the {name} split is empty; enlarge the dataset or adjust the fractions"
            )));
        }
    }

    train.sort_unstable();
    dev.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train)?, ds.subset(&dev)?, ds.subset(&test)?))
}

// ---------------------------------------------------------------------
// Report shapes
// ---------------------------------------------------------------------

/// One estimator's line in a comparison-style report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationScale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Full comparison output: one calibrated, fully scored row per
/// requested estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub rows: Vec<ComparisonRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyReferenceRow {
    pub estimator: String,
    /// Fraction of pairs where the clean variant got the lower
    /// predicted variance; ties score half.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoisyReferenceReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    /// Complete clean/noisy pairs found in the test split.
    pub n_pairs: usize,
    pub rows: Vec<NoisyReferenceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodRow {
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharpness_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharpness_ood: Option<f64>,
    /// `sharpness_ood / sharpness_in`; above 1 means the estimator is
    /// less confident off-domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OodReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub n_train: usize,
    pub n_test_in: usize,
    pub n_ood: usize,
    pub rows: Vec<OodRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub estimator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inference_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub experiment: String,
    pub config_hash: String,
    pub seed: u64,
    pub reps: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<BenchRow>,
}

// ---------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------

fn require_estimators(cfg: &ExperimentConfig) -> Result<(), ExperimentError> {
    if cfg.estimators.is_empty() {
        return Err(ExperimentError::InvalidConfig("the estimator list is empty".into()));
    }
    Ok(())
}

fn prepare_output_dir(cfg: &ExperimentConfig) -> Result<Option<PathBuf>, ExperimentError> {
    match &cfg.output_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir.clone()))
        }
        None => Ok(None),
    }
}

/// Write one prediction per row as `id,mean,variance,gold`, the
/// format external plotting scripts consume.
pub fn write_predictions_csv(path: &Path, set: &PredictionSet) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["id", "mean", "variance", "gold"])?;
    for item in set.items() {
        w.write_record([
            item.id.as_str(),
            &format!("{}", item.pred.mean),
            &format!("{}", item.pred.variance()),
            &format!("{}", item.gold),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_row_csv(
    dir: Option<&Path>,
    index: usize,
    name: &str,
    suffix: &str,
    set: &PredictionSet,
) -> Result<Option<String>, ExperimentError> {
    match dir {
        Some(dir) => {
            let file = format!("predictions-{index:02}-{name}{suffix}.csv");
            write_predictions_csv(&dir.join(&file), set)?;
            Ok(Some(file))
        }
        None => Ok(None),
    }
}

fn emit_report(
    dir: Option<&Path>,
    stem: &str,
    json: &str,
    table: &str,
) -> Result<(), ExperimentError> {
    if let Some(dir) = dir {
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        std::fs::write(dir.join(format!("{stem}.txt")), table)?;
    }
    Ok(())
}

/// Train, calibrate on dev, score on test — the shared inner loop of
/// the comparison-style runs.
fn evaluate_kind(
    kind: &EstimatorKind,
    cfg: &ExperimentConfig,
    train: &TrainingSet,
    dev: &TrainingSet,
    test: &TrainingSet,
) -> Result<(MetricsReport, CalibrationScale, PredictionSet), ExperimentError> {
    let tc = cfg.training_config_for(kind);
    let (mut est, _) = TrainedEstimator::train(kind, train, &tc)?;
    let dev_preds = est.predict_set(dev)?;
    let scale = fit_variance_scale(&dev_preds, "dev")?;
    est.set_calibration(Some(scale.clone()));
    let test_preds = est.predict_set(test)?;
    let metrics = metrics_report(&test_preds)?;
    Ok((metrics, scale, test_preds))
}

fn comparison_rows(
    kinds: &[EstimatorKind],
    cfg: &ExperimentConfig,
    train: &TrainingSet,
    dev: &TrainingSet,
    test: &TrainingSet,
    out_dir: Option<&Path>,
) -> Result<Vec<ComparisonRow>, ExperimentError> {
    let mut rows = Vec::with_capacity(kinds.len());
    for (i, kind) in kinds.iter().enumerate() {
        let row = match evaluate_kind(kind, cfg, train, dev, test) {
            Ok((metrics, calibration, preds)) => {
                let predictions_file = write_row_csv(out_dir, i, &kind.name(), "", &preds)?;
                ComparisonRow {
                    estimator: kind.name(),
                    metrics: Some(metrics),
                    calibration: Some(calibration),
                    predictions_file,
                    error: None,
                }
            }
            Err(ExperimentError::Io(e)) => return Err(ExperimentError::Io(e)),
            Err(e) => ComparisonRow {
                estimator: kind.name(),
                metrics: None,
                calibration: None,
                predictions_file: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Train every requested estimator, calibrate it on the dev split, and
/// score all indicators on the test split.
pub fn run_comparison(cfg: &ExperimentConfig) -> Result<ComparisonReport, ExperimentError> {
    cfg.validate()?;
    require_estimators(cfg)?;
    let (main, _) = load_corpus(cfg)?;
    let (train, dev, test) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let (train_v, dev_v, test_v) =
        (train.training_view(), dev.training_view(), test.training_view());
    let out_dir = prepare_output_dir(cfg)?;

    let rows =
        comparison_rows(&cfg.estimators, cfg, &train_v, &dev_v, &test_v, out_dir.as_deref())?;
    let report = ComparisonReport {
        experiment: "comparison".into(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        n_train: train.len(),
        n_dev: dev.len(),
        n_test: test.len(),
        rows,
    };
    emit_report(
        out_dir.as_deref(),
        "comparison",
        &to_json(&report)?,
        &render_comparison_table(&report),
    )?;
    Ok(report)
}

/// Train three two-step pipelines differing only in the second-stage
/// loss, and score each like a comparison row. The shared seed stream
/// means all three reuse the identical first-stage model, so any
/// difference between rows is the error loss alone. The config's own
/// estimator list is ignored.
pub fn run_dup_ablation(cfg: &ExperimentConfig) -> Result<ComparisonReport, ExperimentError> {
    cfg.validate()?;
    let (main, _) = load_corpus(cfg)?;
    let (train, dev, test) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let (train_v, dev_v, test_v) =
        (train.training_view(), dev.training_view(), test.training_view());
    let out_dir = prepare_output_dir(cfg)?;

    let kinds = [
        EstimatorKind::Dup { loss: DupLoss::Abs },
        EstimatorKind::Dup { loss: DupLoss::Sq },
        EstimatorKind::Dup { loss: DupLoss::Hts },
    ];
    let rows = comparison_rows(&kinds, cfg, &train_v, &dev_v, &test_v, out_dir.as_deref())?;
    let report = ComparisonReport {
        experiment: "dup_ablation".into(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        n_train: train.len(),
        n_dev: dev.len(),
        n_test: test.len(),
        rows,
    };
    emit_report(
        out_dir.as_deref(),
        "dup_ablation",
        &to_json(&report)?,
        &render_comparison_table(&report),
    )?;
    Ok(report)
}

/// Collect the complete clean/noisy pairs of a split, as
/// `(clean_index, noisy_index)` into its record order.
fn collect_pairs(ds: &Dataset) -> Result<Vec<(usize, usize)>, ExperimentError> {
    let mut slots: Vec<(String, Option<usize>, Option<usize>)> = Vec::new();
    let mut by_key: HashMap<String, usize> = HashMap::new();
    for (i, rec) in ds.records().iter().enumerate() {
        let slot = match by_key.get(rec.pair_key()) {
            Some(&s) => s,
            None => {
                by_key.insert(rec.pair_key().to_string(), slots.len());
                slots.push((rec.pair_key().to_string(), None, None));
                slots.len() - 1
            }
        };
        match ds.records()[i].noise_tag.as_deref() {
            Some("ref_good") => slots[slot].1 = Some(i),
            Some("ref_bad") => slots[slot].2 = Some(i),
            Some(other) => {
                return Err(ExperimentError::InvalidConfig(format!(
                    "record '{}' has noise tag '{other}'; this protocol needs ref_good/ref_bad pairs",
                    rec.id
                )))
            }
            None => {
                return Err(ExperimentError::InvalidConfig(format!(
                    "record '{}' has no noise tag; this protocol needs ref_good/ref_bad pairs",
                    rec.id
                )))
            }
        }
    }
    let mut pairs = Vec::with_capacity(slots.len());
    for (key, good, bad) in slots {
        match (good, bad) {
            (Some(g), Some(b)) => pairs.push((g, b)),
            _ => {
                return Err(ExperimentError::InvalidConfig(format!(
                    "pair '{key}' is incomplete: it needs one ref_good and one ref_bad record"
                )))
            }
        }
    }
    if pairs.is_empty() {
        return Err(ExperimentError::InvalidConfig(
            "no reference pairs in the test split".into(),
        ));
    }
    Ok(pairs)
}

/// For every test pair, check whether the clean variant receives the
/// lower predicted variance. Calibration is skipped: it scales every
/// variance by the same positive factor, so it cannot change any
/// within-pair comparison.
pub fn run_noisy_reference(
    cfg: &ExperimentConfig,
) -> Result<NoisyReferenceReport, ExperimentError> {
    cfg.validate()?;
    require_estimators(cfg)?;
    let (main, _) = load_corpus(cfg)?;
    let (train, dev, test) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let pairs = collect_pairs(&test)?;
    let (train_v, test_v) = (train.training_view(), test.training_view());
    let out_dir = prepare_output_dir(cfg)?;

    let mut rows = Vec::with_capacity(cfg.estimators.len());
    for (i, kind) in cfg.estimators.iter().enumerate() {
        let tc = cfg.training_config_for(kind);
        let attempt = TrainedEstimator::train(kind, &train_v, &tc)
            .and_then(|(est, _)| est.predict_set(&test_v));
        let row = match attempt {
            Ok(preds) => {
                let items = preds.items();
                let credit: f64 = pairs
                    .iter()
                    .map(|&(g, b)| {
                        let (vg, vb) = (items[g].pred.variance(), items[b].pred.variance());
                        if vg < vb {
                            1.0
                        } else if vg == vb {
                            0.5
                        } else {
                            0.0
                        }
                    })
                    .sum();
                let predictions_file = write_row_csv(out_dir.as_deref(), i, &kind.name(), "", &preds)?;
                NoisyReferenceRow {
                    estimator: kind.name(),
                    accuracy: Some(credit / pairs.len() as f64),
                    predictions_file,
                    error: None,
                }
            }
            Err(e) => NoisyReferenceRow {
                estimator: kind.name(),
                accuracy: None,
                predictions_file: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    let report = NoisyReferenceReport {
        experiment: "noisy_reference".into(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        n_train: train.len(),
        n_dev: dev.len(),
        n_test: test.len(),
        n_pairs: pairs.len(),
        rows,
    };
    emit_report(
        out_dir.as_deref(),
        "noisy_reference",
        &to_json(&report)?,
        &render_noisy_reference_table(&report),
    )?;
    Ok(report)
}

/// Train in-domain, then compare mean predicted variance on the
/// in-domain test split against the out-of-domain corpus. Calibration
/// is skipped: the reported ratio is invariant to a common variance
/// scale.
pub fn run_ood_sharpness(cfg: &ExperimentConfig) -> Result<OodReport, ExperimentError> {
    cfg.validate()?;
    require_estimators(cfg)?;
    let (main, ood) = load_corpus(cfg)?;
    let ood = ood.ok_or_else(|| {
        ExperimentError::InvalidConfig(
            "this run needs an out-of-domain corpus: use a domain_shift scenario or set ood_dataset"
                .into(),
        )
    })?;
    if ood.feature_dim() != main.feature_dim() {
        return Err(ExperimentError::InvalidConfig(format!(
            "ood_dataset feature dimension {} does not match the main dataset's {}",
            ood.feature_dim(),
            main.feature_dim()
        )));
    }
    let (train, _dev, test) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let (train_v, test_v, ood_v) =
        (train.training_view(), test.training_view(), ood.training_view());
    let out_dir = prepare_output_dir(cfg)?;

    let mut rows = Vec::with_capacity(cfg.estimators.len());
    for (i, kind) in cfg.estimators.iter().enumerate() {
        let tc = cfg.training_config_for(kind);
        let attempt = TrainedEstimator::train(kind, &train_v, &tc).and_then(|(est, _)| {
            let pin = est.predict_set(&test_v)?;
            let pood = est.predict_set(&ood_v)?;
            Ok((pin, pood))
        });
        let row = match attempt {
            Ok((pin, pood)) => {
                let s_in = sharpness(&pin)?;
                let s_ood = sharpness(&pood)?;
                write_row_csv(out_dir.as_deref(), i, &kind.name(), "-in", &pin)?;
                write_row_csv(out_dir.as_deref(), i, &kind.name(), "-ood", &pood)?;
                OodRow {
                    estimator: kind.name(),
                    sharpness_in: Some(s_in),
                    sharpness_ood: Some(s_ood),
                    ratio: Some(s_ood / s_in),
                    error: None,
                }
            }
            Err(e) => OodRow {
                estimator: kind.name(),
                sharpness_in: None,
                sharpness_ood: None,
                ratio: None,
                error: Some(e.to_string()),
            },
        };
        rows.push(row);
    }
    let report = OodReport {
        experiment: "ood_sharpness".into(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        n_train: train.len(),
        n_test_in: test.len(),
        n_ood: ood.len(),
        rows,
    };
    emit_report(out_dir.as_deref(), "ood_sharpness", &to_json(&report)?, &render_ood_table(&report))?;
    Ok(report)
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

/// Wall-clock the train and inference phases of every estimator over
/// `bench_reps` repetitions, reporting medians in milliseconds. A
/// plain point regressor is timed first as the baseline row.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport, ExperimentError> {
    cfg.validate()?;
    require_estimators(cfg)?;
    let (main, _) = load_corpus(cfg)?;
    let (train, _dev, test) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let (train_v, test_v) = (train.training_view(), test.training_view());
    let test_features = test_v.features_matrix();
    let out_dir = prepare_output_dir(cfg)?;
    let reps = cfg.bench_reps;

    let mut rows = Vec::with_capacity(cfg.estimators.len() + 1);

    // Baseline: one point model, plain forward passes.
    let baseline = (|| -> Result<(f64, f64), ExperimentError> {
        let mut tc = cfg.training_config_for(&EstimatorKind::Hts);
        tc.seed = derive_stream(cfg.seed, STREAM_BASELINE);
        let d = train_v.feature_dim();
        let spec = MlpSpec { dropout_rate: tc.dropout_rate, ..MlpSpec::standard(d, 1) };
        let (mut train_times, mut infer_times) = (Vec::new(), Vec::new());
        for _ in 0..reps {
            let t0 = Instant::now();
            let (model, _) = train_point(spec.clone(), &train_v, &tc)?;
            train_times.push(t0.elapsed().as_secs_f64() * 1e3);
            let t1 = Instant::now();
            let _ = point_predict(&model, &test_features)?;
            infer_times.push(t1.elapsed().as_secs_f64() * 1e3);
        }
        Ok((median(&mut train_times), median(&mut infer_times)))
    })();
    rows.push(match baseline {
        Ok((t, i)) => BenchRow {
            estimator: "point".into(),
            train_ms: Some(t),
            inference_ms: Some(i),
            error: None,
        },
        Err(e) => BenchRow {
            estimator: "point".into(),
            train_ms: None,
            inference_ms: None,
            error: Some(e.to_string()),
        },
    });

    for kind in &cfg.estimators {
        let tc = cfg.training_config_for(kind);
        let attempt = (|| -> Result<(f64, f64), ExperimentError> {
            let (mut train_times, mut infer_times) = (Vec::new(), Vec::new());
            for _ in 0..reps {
                let t0 = Instant::now();
                let (est, _) = TrainedEstimator::train(kind, &train_v, &tc)?;
                train_times.push(t0.elapsed().as_secs_f64() * 1e3);
                let t1 = Instant::now();
                let _ = est.predict_set(&test_v)?;
                infer_times.push(t1.elapsed().as_secs_f64() * 1e3);
            }
            Ok((median(&mut train_times), median(&mut infer_times)))
        })();
        rows.push(match attempt {
            Ok((t, i)) => BenchRow {
                estimator: kind.name(),
                train_ms: Some(t),
                inference_ms: Some(i),
                error: None,
            },
            Err(e) => BenchRow {
                estimator: kind.name(),
                train_ms: None,
                inference_ms: None,
                error: Some(e.to_string()),
            },
        });
    }

    let report = BenchReport {
        experiment: "bench".into(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        reps,
        n_train: train.len(),
        n_test: test.len(),
        rows,
    };
    emit_report(out_dir.as_deref(), "bench", &to_json(&report)?, &render_bench_table(&report))?;
    Ok(report)
}

fn to_json<T: Serialize>(report: &T) -> Result<String, ExperimentError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

// ---------------------------------------------------------------------
// Table rendering
// ---------------------------------------------------------------------

#[derive(Clone, Copy)]
enum Best {
    Max,
    Min,
}

/// Format one numeric column, starring every value that ties the best.
fn format_column(values: &[Option<f64>], best: Best, decimals: usize) -> Vec<String> {
    let candidates: Vec<f64> = values.iter().flatten().copied().collect();
    let target = match best {
        Best::Max => candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Best::Min => candidates.iter().copied().fold(f64::INFINITY, f64::min),
    };
    values
        .iter()
        .map(|v| match v {
            None => "-".into(),
            Some(x) if !candidates.is_empty() && *x == target => {
                format!("{x:.decimals$}*")
            }
            Some(x) => format!("{x:.decimals$}"),
        })
        .collect()
}

/// Lay out one left-aligned label column, right-aligned numeric
/// columns, and a trailing free-text note column.
fn layout(headers: &[&str], labels: &[String], columns: &[Vec<String>], notes: &[String]) -> String {
    let n_rows = labels.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    widths[0] = widths[0].max(labels.iter().map(String::len).max().unwrap_or(0));
    for (c, col) in columns.iter().enumerate() {
        widths[c + 1] = widths[c + 1].max(col.iter().map(String::len).max().unwrap_or(0));
    }

    let mut out = String::new();
    let mut header_line = String::new();
    for (c, h) in headers.iter().enumerate() {
        if c > 0 {
            header_line.push_str("  ");
        }
        if c == 0 || c == headers.len() - 1 {
            header_line.push_str(&format!("{h:<w$}", w = widths[c]));
        } else {
            header_line.push_str(&format!("{h:>w$}", w = widths[c]));
        }
    }
    out.push_str(header_line.trim_end());
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    out.push_str(&rule.join("  "));
    out.push('\n');

    for r in 0..n_rows {
        let mut line = String::new();
        line.push_str(&format!("{:<w$}", labels[r], w = widths[0]));
        for (c, col) in columns.iter().enumerate() {
            line.push_str(&format!("  {:>w$}", col[r], w = widths[c + 1]));
        }
        if !notes[r].is_empty() {
            line.push_str(&format!("  {}", notes[r]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

fn note_of(error: &Option<String>) -> String {
    match error {
        Some(e) => e.replace('\n', " "),
        None => String::new(),
    }
}

/// Aligned text table for a comparison-style report.
pub fn render_comparison_table(r: &ComparisonReport) -> String {
    let labels: Vec<String> = r.rows.iter().map(|row| row.estimator.clone()).collect();
    let pick = |f: fn(&MetricsReport) -> Option<f64>| -> Vec<Option<f64>> {
        r.rows.iter().map(|row| row.metrics.as_ref().and_then(f)).collect()
    };
    let columns = vec![
        format_column(&pick(|m| m.pps), Best::Max, 4),
        format_column(&pick(|m| m.ups), Best::Max, 4),
        format_column(&pick(|m| Some(m.nll)), Best::Min, 4),
        format_column(&pick(|m| Some(m.ece)), Best::Min, 4),
        format_column(&pick(|m| Some(m.sharpness)), Best::Min, 4),
    ];
    let notes: Vec<String> = r.rows.iter().map(|row| note_of(&row.error)).collect();
    let mut out = format!(
        "{} | config {} | seed {}\nn_train {}  n_dev {}  n_test {}\n\n",
        r.experiment,
        &r.config_hash[..12],
        r.seed,
        r.n_train,
        r.n_dev,
        r.n_test
    );
    out.push_str(&layout(
        &["estimator", "pps", "ups", "nll", "ece", "sharpness", "note"],
        &labels,
        &columns,
        &notes,
    ));
    out.push_str("\n* best in column (pps/ups high; nll/ece/sharpness low)\n");
    out
}

pub fn render_noisy_reference_table(r: &NoisyReferenceReport) -> String {
    let labels: Vec<String> = r.rows.iter().map(|row| row.estimator.clone()).collect();
    let columns = vec![format_column(
        &r.rows.iter().map(|row| row.accuracy).collect::<Vec<_>>(),
        Best::Max,
        4,
    )];
    let notes: Vec<String> = r.rows.iter().map(|row| note_of(&row.error)).collect();
    let mut out = format!(
        "{} | config {} | seed {}\nn_train {}  n_test {}  pairs {}\n\n",
        r.experiment,
        &r.config_hash[..12],
        r.seed,
        r.n_train,
        r.n_test,
        r.n_pairs
    );
    out.push_str(&layout(&["estimator", "accuracy", "note"], &labels, &columns, &notes));
    out.push_str("\n* best in column (fraction of pairs where the clean reference got the lower predicted variance)\n");
    out
}

pub fn render_ood_table(r: &OodReport) -> String {
    let labels: Vec<String> = r.rows.iter().map(|row| row.estimator.clone()).collect();
    let columns = vec![
        format_column(&r.rows.iter().map(|row| row.sharpness_in).collect::<Vec<_>>(), Best::Min, 4),
        format_column(&r.rows.iter().map(|row| row.sharpness_ood).collect::<Vec<_>>(), Best::Min, 4),
        format_column(&r.rows.iter().map(|row| row.ratio).collect::<Vec<_>>(), Best::Max, 4),
    ];
    let notes: Vec<String> = r.rows.iter().map(|row| note_of(&row.error)).collect();
    let mut out = format!(
        "{} | config {} | seed {}\nn_train {}  n_test_in {}  n_ood {}\n\n",
        r.experiment,
        &r.config_hash[..12],
        r.seed,
        r.n_train,
        r.n_test_in,
        r.n_ood
    );
    out.push_str(&layout(
        &["estimator", "sharp_in", "sharp_ood", "ratio", "note"],
        &labels,
        &columns,
        &notes,
    ));
    out.push_str("\n* best in column (ratio above 1 = less confident off-domain)\n");
    out
}

pub fn render_bench_table(r: &BenchReport) -> String {
    let labels: Vec<String> = r.rows.iter().map(|row| row.estimator.clone()).collect();
    let columns = vec![
        format_column(&r.rows.iter().map(|row| row.train_ms).collect::<Vec<_>>(), Best::Min, 2),
        format_column(&r.rows.iter().map(|row| row.inference_ms).collect::<Vec<_>>(), Best::Min, 2),
    ];
    let notes: Vec<String> = r.rows.iter().map(|row| note_of(&row.error)).collect();
    let mut out = format!(
        "{} | config {} | seed {}\nmedians over {} reps  n_train {}  n_test {}\n\n",
        r.experiment,
        &r.config_hash[..12],
        r.seed,
        r.reps,
        r.n_train,
        r.n_test
    );
    out.push_str(&layout(
        &["estimator", "train_ms", "inference_ms", "note"],
        &labels,
        &columns,
        &notes,
    ));
    out.push_str("\n* fastest in column\n");
    out
}

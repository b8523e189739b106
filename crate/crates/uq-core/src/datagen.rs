//! Segment records, JSONL datasets, and synthetic scenario generators.
//!
//! A [`SegmentRecord`] is one scored item: a feature vector, a gold
//! score, optionally the raw annotator scores behind it, and optional
//! oracle fields (`true_sigma`, `noise_tag`) that exist so experiments
//! can score estimators against ground truth. Oracle fields never reach
//! an estimator: training code receives a [`TrainingSet`] view that
//! simply does not carry them.
//!
//! The on-disk format is JSON Lines — one record object per line, LF
//! separated. Loading is strict: unknown fields, duplicate ids, and
//! inconsistent feature dimensions are errors, and parse failures name
//! the offending line. Floats survive a save/load round trip bit for
//! bit.
//!
//! # Synthetic scenarios
//!
//! All generators share the labeling function [`labeling_function`]
//! (sum of sines of the feature components — smooth, nonlinear,
//! bounded) and draw features uniformly from `[-1, 1]^dim`. Each
//! scenario controls where the noise comes from:
//!
//! * `heteroscedastic` — label noise `sigma(x) = offset + slope * |x_0|`;
//! * `multi_annotator` — `k` annotator scores per record, with
//!   annotator spread picked by the sign of `x_0` (low vs high
//!   disagreement strata);
//! * `domain_shift` — an in-domain set plus a set translated along a
//!   random direction orthogonal to the noise-driving axis, so the
//!   aleatoric profile is unchanged by construction;
//! * `reference_pairs` — two records per underlying item, sharing the
//!   label function value but differing in the last feature (a
//!   reference-quality channel) and in label-noise scale.

use crate::nn::Matrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed record: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate segment id '{id}'")]
    DuplicateId { id: String },
    #[error("record '{id}' has {got} features but the dataset uses {expected}")]
    DimMismatch { id: String, got: usize, expected: usize },
    #[error("record '{id}' is invalid: {message}")]
    BadRecord { id: String, message: String },
    #[error("dataset is empty")]
    Empty,
    #[error("invalid scenario: {0}")]
    BadScenario(String),
}

/// One scored segment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub gold_score: f64,
    /// Raw annotator scores; when present, `gold_score` is their mean.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub annotator_scores: Option<Vec<f64>>,
    /// Which distribution the record was drawn from (e.g. "in", "ood").
    pub domain_tag: String,
    /// Oracle-only marker for noise provenance (e.g. "ref_good").
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub noise_tag: Option<String>,
    /// Oracle-only true noise standard deviation.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub true_sigma: Option<f64>,
}

impl SegmentRecord {
    fn validate(&self) -> Result<(), DataError> {
        let bad = |message: String| DataError::BadRecord { id: self.id.clone(), message };
        if self.id.is_empty() {
            return Err(DataError::BadRecord { id: "<empty>".into(), message: "empty id".into() });
        }
        if self.features.is_empty() {
            return Err(bad("no features".into()));
        }
        if self.features.iter().any(|f| !f.is_finite()) || !self.gold_score.is_finite() {
            return Err(bad("non-finite feature or score".into()));
        }
        if let Some(scores) = &self.annotator_scores {
            if scores.is_empty() {
                return Err(bad("annotator_scores present but empty".into()));
            }
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(bad("non-finite annotator score".into()));
            }
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            if (mean - self.gold_score).abs() > 1e-9 * self.gold_score.abs().max(1.0) {
                return Err(bad(format!(
                    "gold_score {} does not match annotator mean {}",
                    self.gold_score, mean
                )));
            }
        }
        if let Some(s) = self.true_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(bad(format!("true_sigma must be positive and finite, got {s}")));
            }
        }
        Ok(())
    }

    /// Key that groups the two variants of a reference pair: the id
    /// with its final `-...` segment stripped. Generated pair ids look
    /// like `rp-000123-good` / `rp-000123-bad`.
    pub fn pair_key(&self) -> &str {
        match self.id.rsplit_once('-') {
            Some((prefix, _)) => prefix,
            None => &self.id,
        }
    }
}

/// A validated collection of records with a single feature dimension
/// and unique ids.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    records: Vec<SegmentRecord>,
    feature_dim: usize,
}

impl Dataset {
    pub fn from_records(records: Vec<SegmentRecord>) -> Result<Self, DataError> {
        let first = records.first().ok_or(DataError::Empty)?;
        let feature_dim = first.features.len();
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for rec in &records {
            rec.validate()?;
            if rec.features.len() != feature_dim {
                return Err(DataError::DimMismatch {
                    id: rec.id.clone(),
                    got: rec.features.len(),
                    expected: feature_dim,
                });
            }
            if !seen.insert(rec.id.clone()) {
                return Err(DataError::DuplicateId { id: rec.id.clone() });
            }
        }
        Ok(Dataset { records, feature_dim })
    }

    pub fn records(&self) -> &[SegmentRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Write as JSON Lines. The float encoding round-trips exactly.
    pub fn save_jsonl(&self, path: &Path) -> Result<(), DataError> {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&serde_json::to_string(rec).expect("records always serialize"));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Load a JSON Lines file written by [`Dataset::save_jsonl`] (or by
    /// hand). Parse failures — including unknown fields — are reported
    /// with their 1-based line number.
    pub fn load_jsonl(path: &Path) -> Result<Self, DataError> {
        let raw = std::fs::read_to_string(path)?;
        let mut records = Vec::new();
        for (idx, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                return Err(DataError::Parse { line: idx + 1, message: "blank line".into() });
            }
            let rec: SegmentRecord = serde_json::from_str(line)
                .map_err(|e| DataError::Parse { line: idx + 1, message: e.to_string() })?;
            records.push(rec);
        }
        Dataset::from_records(records)
    }

    /// The oracle-free view handed to estimators.
    pub fn training_view(&self) -> TrainingSet {
        TrainingSet {
            records: self
                .records
                .iter()
                .map(|r| TrainRecord {
                    id: r.id.clone(),
                    features: r.features.clone(),
                    gold_score: r.gold_score,
                    annotator_scores: r.annotator_scores.clone(),
                })
                .collect(),
            feature_dim: self.feature_dim,
        }
    }

    /// Subset by record indices (order preserved, indices must be in
    /// range and yield a non-empty set).
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset, DataError> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        Dataset::from_records(records)
    }
}

/// What an estimator is allowed to see about a record: features, the
/// training target, and the raw annotator scores. No oracle fields.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainRecord {
    pub id: String,
    pub features: Vec<f64>,
    pub gold_score: f64,
    pub annotator_scores: Option<Vec<f64>>,
}

/// Oracle-free dataset view for training and prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    records: Vec<TrainRecord>,
    feature_dim: usize,
}

impl TrainingSet {
    /// Build a training set directly from records (no oracle fields
    /// involved), validating dimension consistency, id uniqueness, and
    /// finiteness.
    pub fn from_records(records: Vec<TrainRecord>) -> Result<Self, DataError> {
        let first = records.first().ok_or(DataError::Empty)?;
        let feature_dim = first.features.len();
        let mut seen = std::collections::HashSet::with_capacity(records.len());
        for rec in &records {
            if rec.features.len() != feature_dim {
                return Err(DataError::DimMismatch {
                    id: rec.id.clone(),
                    got: rec.features.len(),
                    expected: feature_dim,
                });
            }
            if rec.features.iter().any(|f| !f.is_finite()) || !rec.gold_score.is_finite() {
                return Err(DataError::BadRecord {
                    id: rec.id.clone(),
                    message: "non-finite feature or score".into(),
                });
            }
            if !seen.insert(rec.id.clone()) {
                return Err(DataError::DuplicateId { id: rec.id.clone() });
            }
        }
        Ok(TrainingSet { records, feature_dim })
    }

    pub fn records(&self) -> &[TrainRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Features stacked into an `n x dim` matrix, row per record.
    pub fn features_matrix(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.len() * self.feature_dim);
        for r in &self.records {
            data.extend_from_slice(&r.features);
        }
        Matrix::from_vec(self.len(), self.feature_dim, data)
    }

    pub fn gold_scores(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.gold_score).collect()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// Subset by record indices (order preserved; must be non-empty
    /// and in range).
    pub fn subset(&self, indices: &[usize]) -> Result<TrainingSet, DataError> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        TrainingSet::from_records(records)
    }
}

/// Default noise intercept for heteroscedastic scenarios.
pub fn default_noise_offset() -> f64 {
    0.1
}
/// Default noise slope on `|x_0|`.
pub fn default_noise_slope() -> f64 {
    0.5
}
fn default_annotators() -> usize {
    5
}
fn default_sigma_low() -> f64 {
    0.1
}
fn default_sigma_high() -> f64 {
    0.8
}
fn default_shift_magnitude() -> f64 {
    2.0
}
fn default_base_sigma() -> f64 {
    0.1
}
fn default_noise_ratio() -> f64 {
    5.0
}

/// Which noise-generating process a scenario uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Label noise `sigma(x) = noise_offset + noise_slope * |x_0|`.
    Heteroscedastic {
        #[serde(default = "default_noise_offset")]
        noise_offset: f64,
        #[serde(default = "default_noise_slope")]
        noise_slope: f64,
    },
    /// `annotators` scores per record; their spread is `sigma_low` for
    /// records with `x_0 < 0` and `sigma_high` otherwise.
    MultiAnnotator {
        #[serde(default = "default_annotators")]
        annotators: usize,
        #[serde(default = "default_sigma_low")]
        sigma_low: f64,
        #[serde(default = "default_sigma_high")]
        sigma_high: f64,
    },
    /// Heteroscedastic noise plus a second dataset translated by
    /// `shift_magnitude` along a random direction orthogonal to the
    /// noise axis.
    DomainShift {
        #[serde(default = "default_noise_offset")]
        noise_offset: f64,
        #[serde(default = "default_noise_slope")]
        noise_slope: f64,
        #[serde(default = "default_shift_magnitude")]
        shift_magnitude: f64,
    },
    /// Two records per item: a clean variant (label noise `base_sigma`)
    /// and a noisy one (`noise_ratio * base_sigma`), distinguished by
    /// the reference-quality channel in the last feature.
    ReferencePairs {
        #[serde(default = "default_base_sigma")]
        base_sigma: f64,
        #[serde(default = "default_noise_ratio")]
        noise_ratio: f64,
    },
}

/// A fully specified synthetic data request. For `reference_pairs`,
/// `n` counts underlying items, so the dataset holds `2 n` records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    #[serde(flatten)]
    pub kind: ScenarioKind,
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
}

/// What a scenario produces: one dataset, or an in-domain/shifted pair.
#[derive(Clone, Debug)]
pub enum GeneratedData {
    Single(Dataset),
    Shifted { in_domain: Dataset, shifted: Dataset },
}

impl SyntheticScenario {
    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: String| Err(DataError::BadScenario(m));
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        if self.dim == 0 {
            return bad("dim must be at least 1".into());
        }
        match &self.kind {
            ScenarioKind::Heteroscedastic { noise_offset, noise_slope } => {
                if !(*noise_offset > 0.0) || *noise_slope < 0.0 {
                    return bad(format!(
                        "need noise_offset > 0 and noise_slope >= 0, got ({noise_offset}, {noise_slope})"
                    ));
                }
            }
            ScenarioKind::MultiAnnotator { annotators, sigma_low, sigma_high } => {
                if *annotators < 2 {
                    return bad("need at least 2 annotators".into());
                }
                if !(*sigma_low > 0.0) || !(*sigma_high > 0.0) {
                    return bad("annotator sigmas must be positive".into());
                }
            }
            ScenarioKind::DomainShift { noise_offset, noise_slope, shift_magnitude } => {
                if !(*noise_offset > 0.0) || *noise_slope < 0.0 {
                    return bad("need noise_offset > 0 and noise_slope >= 0".into());
                }
                if *shift_magnitude < 0.0 {
                    return bad("shift_magnitude must be nonnegative".into());
                }
                if self.dim < 2 {
                    return bad("domain shift needs dim >= 2 (the shift avoids the noise axis)".into());
                }
            }
            ScenarioKind::ReferencePairs { base_sigma, noise_ratio } => {
                if !(*base_sigma > 0.0) {
                    return bad("base_sigma must be positive".into());
                }
                if !(*noise_ratio >= 1.0) {
                    return bad("noise_ratio must be at least 1".into());
                }
                if self.dim < 2 {
                    return bad("reference pairs need dim >= 2 (one feature is the quality channel)".into());
                }
            }
        }
        Ok(())
    }

    /// Run the generator for this scenario.
    pub fn generate(&self) -> Result<GeneratedData, DataError> {
        self.validate()?;
        match self.kind {
            ScenarioKind::Heteroscedastic { noise_offset, noise_slope } => Ok(GeneratedData::Single(
                gen_heteroscedastic(self.n, self.dim, noise_offset, noise_slope, self.seed)?,
            )),
            ScenarioKind::MultiAnnotator { annotators, sigma_low, sigma_high } => {
                Ok(GeneratedData::Single(gen_multi_annotator(
                    self.n, self.dim, annotators, sigma_low, sigma_high, self.seed,
                )?))
            }
            ScenarioKind::DomainShift { noise_offset, noise_slope, shift_magnitude } => {
                let (in_domain, shifted) = gen_domain_shift(
                    self.n, self.dim, noise_offset, noise_slope, shift_magnitude, self.seed,
                )?;
                Ok(GeneratedData::Shifted { in_domain, shifted })
            }
            ScenarioKind::ReferencePairs { base_sigma, noise_ratio } => Ok(GeneratedData::Single(
                gen_reference_pairs(self.n, self.dim, base_sigma, noise_ratio, self.seed)?,
            )),
        }
    }
}

/// The shared labeling function: `f(x) = sum_j sin(x_j)`. Smooth and
/// nonlinear but bounded, so desk-scale networks can fit it while the
/// noise processes stay visible.
pub fn labeling_function(features: &[f64]) -> f64 {
    features.iter().map(|x| x.sin()).sum()
}

fn uniform_features(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Heteroscedastic regression data: labels are `f(x)` plus Gaussian
/// noise with standard deviation `noise_offset + noise_slope * |x_0|`.
pub fn gen_heteroscedastic(
    n: usize,
    dim: usize,
    noise_offset: f64,
    noise_slope: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let features = uniform_features(&mut rng, dim);
            let sigma = noise_offset + noise_slope * features[0].abs();
            let eps: f64 = rng.sample(StandardNormal);
            SegmentRecord {
                id: format!("ht-{i:06}"),
                gold_score: labeling_function(&features) + sigma * eps,
                features,
                annotator_scores: None,
                domain_tag: "in".into(),
                noise_tag: None,
                true_sigma: Some(sigma),
            }
        })
        .collect();
    Dataset::from_records(records)
}

/// Multi-annotator data: `annotators` independent scores per record,
/// each `N(f(x), sigma_ann^2)` where `sigma_ann` is `sigma_low` for
/// `x_0 < 0` and `sigma_high` otherwise. The gold score is the
/// annotator mean.
pub fn gen_multi_annotator(
    n: usize,
    dim: usize,
    annotators: usize,
    sigma_low: f64,
    sigma_high: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let records = (0..n)
        .map(|i| {
            let features = uniform_features(&mut rng, dim);
            let sigma_ann = if features[0] < 0.0 { sigma_low } else { sigma_high };
            let center = labeling_function(&features);
            let scores: Vec<f64> = (0..annotators)
                .map(|_| {
                    let eps: f64 = rng.sample(StandardNormal);
                    center + sigma_ann * eps
                })
                .collect();
            let gold = scores.iter().sum::<f64>() / scores.len() as f64;
            SegmentRecord {
                id: format!("ma-{i:06}"),
                features,
                gold_score: gold,
                annotator_scores: Some(scores),
                domain_tag: "in".into(),
                noise_tag: None,
                true_sigma: Some(sigma_ann),
            }
        })
        .collect();
    Dataset::from_records(records)
}

/// In-domain data plus a translated copy of the distribution. The
/// shift direction is random but orthogonal to the noise-driving axis
/// (`x_0`), so the label-noise profile of the shifted set matches the
/// in-domain one by construction; only the feature support moves.
pub fn gen_domain_shift(
    n: usize,
    dim: usize,
    noise_offset: f64,
    noise_slope: f64,
    shift_magnitude: f64,
    seed: u64,
) -> Result<(Dataset, Dataset), DataError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Direction over components 1..dim, normalized then scaled.
    let mut shift = vec![0.0; dim];
    loop {
        let mut norm_sq = 0.0;
        for s in shift.iter_mut().skip(1) {
            let g: f64 = rng.sample(StandardNormal);
            *s = g;
            norm_sq += g * g;
        }
        if norm_sq > 1e-12 {
            let scale = shift_magnitude / norm_sq.sqrt();
            for s in shift.iter_mut().skip(1) {
                *s *= scale;
            }
            break;
        }
    }

    let mut make = |tag: &str, prefix: &str, shifted: bool| -> Vec<SegmentRecord> {
        (0..n)
            .map(|i| {
                let mut features = uniform_features(&mut rng, dim);
                if shifted {
                    for (f, s) in features.iter_mut().zip(&shift) {
                        *f += s;
                    }
                }
                let sigma = noise_offset + noise_slope * features[0].abs();
                let eps: f64 = rng.sample(StandardNormal);
                SegmentRecord {
                    id: format!("{prefix}-{i:06}"),
                    gold_score: labeling_function(&features) + sigma * eps,
                    features,
                    annotator_scores: None,
                    domain_tag: tag.into(),
                    noise_tag: None,
                    true_sigma: Some(sigma),
                }
            })
            .collect()
    };
    let in_domain = Dataset::from_records(make("in", "ds-in", false))?;
    let shifted_ds = Dataset::from_records(make("ood", "ds-ood", true))?;
    Ok((in_domain, shifted_ds))
}

/// Paired reference-quality data: each of `pairs` items emits a clean
/// record (label noise `base_sigma`) and a noisy one
/// (`noise_ratio * base_sigma`). Both share the same base features and
/// labeling-function value; they differ in the last feature — a
/// reference-quality channel near `+0.5` for clean and `-0.5` for
/// noisy — and in their noise draw. The labeling function sees only
/// the base features, never the channel.
pub fn gen_reference_pairs(
    pairs: usize,
    dim: usize,
    base_sigma: f64,
    noise_ratio: f64,
    seed: u64,
) -> Result<Dataset, DataError> {
    const CHANNEL_JITTER: f64 = 0.15;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(pairs * 2);
    for i in 0..pairs {
        let base = uniform_features(&mut rng, dim - 1);
        let center = labeling_function(&base);
        let mut emit = |suffix: &str, tag: &str, channel_center: f64, sigma: f64| {
            let jitter: f64 = rng.sample(StandardNormal);
            let eps: f64 = rng.sample(StandardNormal);
            let mut features = base.clone();
            features.push(channel_center + CHANNEL_JITTER * jitter);
            records.push(SegmentRecord {
                id: format!("rp-{i:06}-{suffix}"),
                features,
                gold_score: center + sigma * eps,
                annotator_scores: None,
                domain_tag: "in".into(),
                noise_tag: Some(tag.into()),
                true_sigma: Some(sigma),
            });
        };
        emit("good", "ref_good", 0.5, base_sigma);
        emit("bad", "ref_bad", -0.5, base_sigma * noise_ratio);
    }
    Dataset::from_records(records)
}

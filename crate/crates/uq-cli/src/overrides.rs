//! Experiment configuration assembly: an optional JSON config file,
//! with every field overridable by a flag of the same name.

use crate::failure::CliFailure;
use clap::Args;
use std::path::PathBuf;
use uq_core::experiments::{ExperimentConfig, SplitFractions, TrainingSettings, DEFAULT_BENCH_REPS};
use uq_core::EstimatorKind;

#[derive(Args, Debug)]
pub struct ConfigArgs {
    /// JSON experiment config; all flags below override its fields
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Inline scenario JSON (replaces the config's data source),
    /// e.g. '{"kind":"heteroscedastic","dim":8,"n":2000,"seed":7}'
    #[arg(long, value_name = "JSON")]
    pub scenario: Option<String>,

    /// Dataset file, one JSON segment record per line (replaces the
    /// config's data source)
    #[arg(long, value_name = "FILE")]
    pub dataset: Option<PathBuf>,

    /// Out-of-domain dataset file, evaluated but never trained on
    #[arg(long, value_name = "FILE")]
    pub ood_dataset: Option<PathBuf>,

    /// Estimators to run: comma-separated names (mcd, de, hts,
    /// hts_mcd, kl, dup, dup_abs, dup_sq, dup_hts) or a JSON array
    #[arg(long, value_name = "SPEC")]
    pub estimators: Option<String>,

    /// Split fractions JSON, e.g. '{"train":0.7,"dev":0.1,"test":0.2}'
    #[arg(long, value_name = "JSON")]
    pub split: Option<String>,

    /// Training settings JSON, e.g. '{"epochs":40,"batch_size":32}'
    #[arg(long, value_name = "JSON")]
    pub training: Option<String>,

    /// Training epochs (overrides training.epochs)
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,

    /// Minibatch size (overrides training.batch_size)
    #[arg(long, value_name = "N")]
    pub batch_size: Option<usize>,

    /// Adam learning rate (overrides training.learning_rate)
    #[arg(long, value_name = "F")]
    pub learning_rate: Option<f64>,

    /// Dropout rate in [0, 1) (overrides training.dropout_rate)
    #[arg(long, value_name = "F")]
    pub dropout_rate: Option<f64>,

    /// Master seed; splits and all training derive from it
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,

    /// Benchmark repetitions, at least 3
    #[arg(long, value_name = "N")]
    pub bench_reps: Option<usize>,

    /// Directory for report files (JSON, text table, prediction CSVs)
    #[arg(long, value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
}

fn parse_json<T: serde::de::DeserializeOwned>(what: &str, raw: &str) -> Result<T, CliFailure> {
    serde_json::from_str(raw)
        .map_err(|e| CliFailure::config(format!("{what} is malformed: {e}")))
}

/// Resolve one estimator name to its kind with default knobs.
fn kind_by_name(name: &str) -> Result<EstimatorKind, CliFailure> {
    let json = match name {
        "mcd" | "de" | "hts" | "hts_mcd" | "kl" | "dup" => format!(r#"{{"kind":"{name}"}}"#),
        "dup_abs" | "dup_sq" | "dup_hts" => {
            format!(r#"{{"kind":"dup","loss":"{}"}}"#, &name[4..])
        }
        other => {
            return Err(CliFailure::config(format!(
                "unknown estimator '{other}'; known names: mcd, de, hts, hts_mcd, kl, dup, dup_abs, dup_sq, dup_hts"
            )))
        }
    };
    parse_json("estimator", &json)
}

/// Parse an estimator list: a JSON array for full control over the
/// per-kind knobs, or comma-separated names for the defaults.
pub fn parse_estimators(spec: &str) -> Result<Vec<EstimatorKind>, CliFailure> {
    let trimmed = spec.trim();
    if trimmed.starts_with('[') {
        parse_json("the estimator list", trimmed)
    } else {
        trimmed.split(',').map(|n| kind_by_name(n.trim())).collect()
    }
}

/// Parse a single estimator: a name or a JSON object.
pub fn parse_one_estimator(spec: &str) -> Result<EstimatorKind, CliFailure> {
    let trimmed = spec.trim();
    if trimmed.starts_with('{') {
        parse_json("the estimator", trimmed)
    } else {
        kind_by_name(trimmed)
    }
}

fn empty_config() -> ExperimentConfig {
    ExperimentConfig {
        scenario: None,
        dataset: None,
        ood_dataset: None,
        estimators: Vec::new(),
        split: SplitFractions::default(),
        training: TrainingSettings::default(),
        seed: 0,
        bench_reps: DEFAULT_BENCH_REPS,
        output_dir: None,
    }
}

impl ConfigArgs {
    /// Build the effective config: file first, then flag overrides.
    pub fn assemble(&self) -> Result<ExperimentConfig, CliFailure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let raw = std::fs::read_to_string(path).map_err(|e| {
                    CliFailure::io(format!("cannot read config {}: {e}", path.display()))
                })?;
                parse_json(&format!("config {}", path.display()), &raw)?
            }
            None => empty_config(),
        };

        // A data-source flag replaces whatever source the file had;
        // giving both flags still fails validation, as it should.
        if let Some(raw) = &self.scenario {
            cfg.scenario = Some(parse_json("the scenario", raw)?);
            cfg.dataset = None;
            cfg.ood_dataset = None;
        }
        if let Some(path) = &self.dataset {
            cfg.dataset = Some(path.clone());
            cfg.scenario = None;
        }
        if let Some(path) = &self.ood_dataset {
            cfg.ood_dataset = Some(path.clone());
        }

        if let Some(spec) = &self.estimators {
            cfg.estimators = parse_estimators(spec)?;
        }
        if let Some(raw) = &self.split {
            cfg.split = parse_json("the split fractions", raw)?;
        }
        if let Some(raw) = &self.training {
            cfg.training = parse_json("the training settings", raw)?;
        }
        if let Some(v) = self.epochs {
            cfg.training.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.training.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.training.learning_rate = v;
        }
        if let Some(v) = self.dropout_rate {
            cfg.training.dropout_rate = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.bench_reps {
            cfg.bench_reps = v;
        }
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = Some(dir.clone());
        }
        Ok(cfg)
    }
}

//! The subcommand implementations. The experiment protocols live in
//! the library; this layer adds the single-model workflow (synthesize
//! data, train a bundle, calibrate it, score it) and turns results
//! into terminal output.

use crate::failure::CliFailure;
use crate::overrides::parse_one_estimator;
use std::collections::BTreeMap;
use std::path::Path;
use uq_core::calibration::{fit_variance_scale, CalibrationScale};
use uq_core::datagen::{Dataset, GeneratedData};
use uq_core::estimators::{PredictionSet, TrainingLog};
use uq_core::experiments::{
    load_corpus, render_bench_table, render_comparison_table, render_noisy_reference_table,
    render_ood_table, run_bench, run_comparison, run_dup_ablation, run_noisy_reference,
    run_ood_sharpness, split_dataset, write_predictions_csv, ComparisonReport, ComparisonRow,
    ExperimentConfig,
};
use uq_core::metrics;
use uq_core::{EstimatorKind, GaussianPrediction, TrainedEstimator};

/// Where `calibrate --per-tag` leaves its scales, inside the bundle
/// directory.
pub const PER_TAG_FILE: &str = "per_tag_calibration.json";

#[derive(serde::Serialize, serde::Deserialize)]
struct PerTagCalibration {
    scales: BTreeMap<String, CalibrationScale>,
}

/// Generate the configured scenario and write it as JSON lines.
pub fn synth(
    cfg: &ExperimentConfig,
    output: &Path,
    ood_output: Option<&Path>,
) -> Result<(), CliFailure> {
    let sc = cfg
        .scenario
        .as_ref()
        .ok_or_else(|| CliFailure::config("synth needs a scenario (--scenario or a config file)"))?;
    sc.validate()?;
    match sc.generate()? {
        GeneratedData::Single(ds) => {
            if ood_output.is_some() {
                return Err(CliFailure::config(
                    "--ood-output only applies to a domain_shift scenario",
                ));
            }
            ds.save_jsonl(output)?;
            println!("wrote {} records to {}", ds.len(), output.display());
        }
        GeneratedData::Shifted { in_domain, shifted } => {
            let ood_path = ood_output.ok_or_else(|| {
                CliFailure::config(
                    "this scenario also produces a shifted corpus; give --ood-output a path",
                )
            })?;
            in_domain.save_jsonl(output)?;
            shifted.save_jsonl(ood_path)?;
            println!("wrote {} in-domain records to {}", in_domain.len(), output.display());
            println!("wrote {} shifted records to {}", shifted.len(), ood_path.display());
        }
    }
    Ok(())
}

fn final_loss(logs: &[TrainingLog]) -> f64 {
    logs.last()
        .and_then(|log| log.epoch_losses.last())
        .copied()
        .unwrap_or(f64::NAN)
}

fn resolve_kind(
    cfg: &ExperimentConfig,
    estimator: Option<&str>,
) -> Result<EstimatorKind, CliFailure> {
    match estimator {
        Some(spec) => parse_one_estimator(spec),
        None => match cfg.estimators.as_slice() {
            [one] => Ok(one.clone()),
            _ => Err(CliFailure::config(
                "give --estimator, or a config whose estimator list has exactly one entry",
            )),
        },
    }
}

/// Train an estimator on the train split and save its bundle, or —
/// with `--resume-from` — continue training an existing bundle on the
/// configured data.
pub fn train(
    cfg: &ExperimentConfig,
    estimator: Option<&str>,
    model_dir: &Path,
    resume_from: Option<&Path>,
) -> Result<(), CliFailure> {
    cfg.validate()?;
    let (main, _) = load_corpus(cfg)?;
    let (train, _, _) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let view = train.training_view();

    match resume_from {
        Some(from) => {
            if estimator.is_some() {
                return Err(CliFailure::config(
                    "--estimator conflicts with --resume-from; the bundle fixes the estimator kind",
                ));
            }
            let mut est = TrainedEstimator::load_bundle(from)?;
            let tc = cfg.training_config_for(est.kind());
            let logs = est.fine_tune(&view, &tc)?;
            est.save_bundle(model_dir)?;
            println!(
                "resumed {} from {}; tuned on {} segments (final loss {:.6}); bundle at {}",
                est.kind().name(),
                from.display(),
                train.len(),
                final_loss(&logs),
                model_dir.display()
            );
        }
        None => {
            let kind = resolve_kind(cfg, estimator)?;
            let tc = cfg.training_config_for(&kind);
            let (est, logs) = TrainedEstimator::train(&kind, &view, &tc)?;
            est.save_bundle(model_dir)?;
            println!(
                "trained {} on {} segments (final loss {:.6}); bundle at {}",
                kind.name(),
                train.len(),
                final_loss(&logs),
                model_dir.display()
            );
        }
    }
    Ok(())
}

/// Group a prediction set by the domain tag of the records it was
/// computed from; order within each group is preserved.
fn group_by_tag(
    ds: &Dataset,
    preds: &PredictionSet,
) -> Result<BTreeMap<String, PredictionSet>, CliFailure> {
    let mut grouped: BTreeMap<String, Vec<(String, GaussianPrediction, f64)>> = BTreeMap::new();
    for (rec, item) in ds.records().iter().zip(preds.items()) {
        grouped
            .entry(rec.domain_tag.clone())
            .or_default()
            .push((item.id.clone(), item.pred, item.gold));
    }
    let mut sets = BTreeMap::new();
    for (tag, entries) in grouped {
        sets.insert(tag, PredictionSet::new(entries)?);
    }
    Ok(sets)
}

/// Fit the post-hoc variance scale on the dev split. Global mode
/// stores the scale inside the bundle; `--per-tag` fits one scale per
/// domain tag and writes them next to the bundle instead.
pub fn calibrate(
    cfg: &ExperimentConfig,
    model_dir: &Path,
    per_tag: bool,
) -> Result<(), CliFailure> {
    cfg.validate()?;
    let (main, _) = load_corpus(cfg)?;
    let (_, dev, _) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let mut est = TrainedEstimator::load_bundle(model_dir)?;
    // Fit against raw variances; a previously stored scale must not
    // compound.
    est.set_calibration(None);
    let preds = est.predict_set(&dev.training_view())?;

    if per_tag {
        let mut scales = BTreeMap::new();
        for (tag, set) in group_by_tag(&dev, &preds)? {
            let scale = fit_variance_scale(&set, &format!("dev[{tag}]"))?;
            println!("tag {tag}: variance scale {:.6} on {} dev segments", scale.scale, set.len());
            scales.insert(tag, scale);
        }
        let path = model_dir.join(PER_TAG_FILE);
        let json = serde_json::to_string_pretty(&PerTagCalibration { scales })
            .expect("calibration serializes");
        std::fs::write(&path, json + "\n")
            .map_err(|e| CliFailure::io(format!("cannot write {}: {e}", path.display())))?;
        println!("per-tag scales written to {}", path.display());
    } else {
        let scale = fit_variance_scale(&preds, "dev")?;
        est.set_calibration(Some(scale.clone()));
        est.save_bundle(model_dir)?;
        println!("fitted variance scale {:.6} on {} dev segments", scale.scale, preds.len());
    }
    Ok(())
}

fn apply_per_tag_scales(
    ds: &Dataset,
    preds: &PredictionSet,
    model_dir: &Path,
) -> Result<PredictionSet, CliFailure> {
    let path = model_dir.join(PER_TAG_FILE);
    let raw = std::fs::read_to_string(&path).map_err(|_| {
        CliFailure::config(format!(
            "no per-tag calibration at {}; run `uq calibrate --per-tag` first",
            path.display()
        ))
    })?;
    let cal: PerTagCalibration = serde_json::from_str(&raw)
        .map_err(|e| CliFailure::config(format!("{} is malformed: {e}", path.display())))?;
    let mut entries = Vec::with_capacity(preds.len());
    for (rec, item) in ds.records().iter().zip(preds.items()) {
        let scale = cal.scales.get(&rec.domain_tag).ok_or_else(|| {
            CliFailure::config(format!(
                "no fitted scale for domain tag '{}'; re-run `uq calibrate --per-tag` on matching data",
                rec.domain_tag
            ))
        })?;
        let pred = GaussianPrediction {
            mean: item.pred.mean,
            log_variance: item.pred.log_variance + scale.scale.ln(),
        };
        entries.push((item.id.clone(), pred, item.gold));
    }
    Ok(PredictionSet::new(entries)?)
}

/// Score a trained bundle on the test split and report all
/// indicators, as a one-row table in the comparison format.
pub fn evaluate(cfg: &ExperimentConfig, model_dir: &Path, per_tag: bool) -> Result<(), CliFailure> {
    cfg.validate()?;
    let (main, _) = load_corpus(cfg)?;
    let (train, dev, test) = split_dataset(&main, &cfg.split, cfg.seed)?;
    let mut est = TrainedEstimator::load_bundle(model_dir)?;

    let preds = if per_tag {
        est.set_calibration(None);
        let raw = est.predict_set(&test.training_view())?;
        apply_per_tag_scales(&test, &raw, model_dir)?
    } else {
        est.predict_set(&test.training_view())?
    };
    let report_row = ComparisonRow {
        estimator: est.kind().name(),
        metrics: Some(metrics::report(&preds)?),
        calibration: if per_tag { None } else { est.calibration().cloned() },
        predictions_file: None,
        error: None,
    };
    let mut report = ComparisonReport {
        experiment: "evaluate".into(),
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        n_train: train.len(),
        n_dev: dev.len(),
        n_test: test.len(),
        rows: vec![report_row],
    };

    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliFailure::io(format!("cannot create {}: {e}", dir.display())))?;
        let csv_name = format!("predictions-00-{}.csv", est.kind().name());
        write_predictions_csv(&dir.join(&csv_name), &preds)?;
        report.rows[0].predictions_file = Some(csv_name);
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(dir.join("evaluation.json"), json + "\n")
            .map_err(|e| CliFailure::io(format!("cannot write evaluation.json: {e}")))?;
        std::fs::write(dir.join("evaluation.txt"), render_comparison_table(&report))
            .map_err(|e| CliFailure::io(format!("cannot write evaluation.txt: {e}")))?;
    }
    print!("{}", render_comparison_table(&report));
    Ok(())
}

pub fn compare(cfg: &ExperimentConfig) -> Result<(), CliFailure> {
    let report = run_comparison(cfg)?;
    print!("{}", render_comparison_table(&report));
    Ok(())
}

pub fn noisy_ref(cfg: &ExperimentConfig) -> Result<(), CliFailure> {
    let report = run_noisy_reference(cfg)?;
    print!("{}", render_noisy_reference_table(&report));
    Ok(())
}

pub fn ood(cfg: &ExperimentConfig) -> Result<(), CliFailure> {
    let report = run_ood_sharpness(cfg)?;
    print!("{}", render_ood_table(&report));
    Ok(())
}

pub fn bench(cfg: &ExperimentConfig) -> Result<(), CliFailure> {
    let report = run_bench(cfg)?;
    print!("{}", render_bench_table(&report));
    Ok(())
}

pub fn ablate_dup(cfg: &ExperimentConfig) -> Result<(), CliFailure> {
    let report = run_dup_ablation(cfg)?;
    print!("{}", render_comparison_table(&report));
    Ok(())
}

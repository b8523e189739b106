//! Post-hoc variance calibration.
//!
//! Estimators rank uncertainty well before they get its absolute scale
//! right, so the standard fix is a single multiplicative factor on all
//! predicted variances, fitted on held-out data. For the Gaussian
//! negative log-likelihood that factor has a closed form: the mean of
//! `residual^2 / variance` over the development set, which is exactly
//! the scale minimizing dev NLL. No search needed.

use crate::estimators::PredictionSet;
use crate::objectives::GaussianPrediction;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("cannot calibrate on an empty prediction set")]
    EmptySet,
    #[error("all development residuals are zero; a zero variance scale is not usable")]
    DegenerateResiduals,
}

/// Objective the scale was fitted against. Only the Gaussian NLL
/// exists today; the enum keeps serialized scales self-describing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationObjective {
    Nll,
}

/// A fitted variance scale: every predicted variance is multiplied by
/// `scale` when applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScale {
    pub scale: f64,
    /// Identifier of the development set behind the fit.
    pub fitted_on: String,
    pub objective: CalibrationObjective,
}

/// Fit the NLL-optimal variance scale on a development set:
/// `s = mean(residual^2 / variance)`.
pub fn fit_variance_scale(
    dev: &PredictionSet,
    fitted_on: &str,
) -> Result<CalibrationScale, CalibrationError> {
    if dev.items().is_empty() {
        return Err(CalibrationError::EmptySet);
    }
    let n = dev.items().len() as f64;
    let s = dev
        .items()
        .iter()
        .map(|p| {
            let d = p.gold - p.pred.mean;
            d * d * (-p.pred.log_variance).exp()
        })
        .sum::<f64>()
        / n;
    if s <= 0.0 {
        return Err(CalibrationError::DegenerateResiduals);
    }
    Ok(CalibrationScale {
        scale: s,
        fitted_on: fitted_on.to_string(),
        objective: CalibrationObjective::Nll,
    })
}

/// Multiply every predicted variance by the fitted scale. Means are
/// untouched, so correlation metrics are invariant under this map.
pub fn apply_scale(set: &PredictionSet, cal: &CalibrationScale) -> PredictionSet {
    let ln_s = cal.scale.ln();
    let items = set
        .items()
        .iter()
        .map(|p| {
            (
                p.id.clone(),
                GaussianPrediction::new(p.pred.mean, p.pred.log_variance + ln_s),
                p.gold,
            )
        })
        .collect();
    PredictionSet::new(items).expect("rescaling preserves validity")
}

/// The single fixed variance minimizing NLL when every prediction must
/// share one uncertainty value: the mean squared residual.
pub fn optimal_fixed_variance(set: &PredictionSet) -> Result<f64, CalibrationError> {
    if set.items().is_empty() {
        return Err(CalibrationError::EmptySet);
    }
    let n = set.items().len() as f64;
    let v = set
        .items()
        .iter()
        .map(|p| {
            let d = p.gold - p.pred.mean;
            d * d
        })
        .sum::<f64>()
        / n;
    if v <= 0.0 {
        return Err(CalibrationError::DegenerateResiduals);
    }
    Ok(v)
}

//! Process-level failure reporting. Every error that escapes a
//! subcommand is folded into a [`CliFailure`] carrying the exit code
//! contract: 2 for configuration problems, 3 for training or
//! evaluation failures, 4 for I/O.

use uq_core::calibration::CalibrationError;
use uq_core::datagen::DataError;
use uq_core::estimators::EstimatorError;
use uq_core::experiments::ExperimentError;
use uq_core::metrics::MetricsError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug)]
pub struct CliFailure {
    pub code: i32,
    pub message: String,
}

impl CliFailure {
    pub fn config(message: impl Into<String>) -> Self {
        CliFailure { code: EXIT_CONFIG, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliFailure { code: EXIT_IO, message: message.into() }
    }
}

fn data_code(e: &DataError) -> i32 {
    match e {
        DataError::Io(_) => EXIT_IO,
        // Malformed or inconsistent records are bad input, not a
        // filesystem problem.
        _ => EXIT_CONFIG,
    }
}

fn estimator_code(e: &EstimatorError) -> i32 {
    match e {
        EstimatorError::InvalidConfig(_) => EXIT_CONFIG,
        EstimatorError::Data(d) => data_code(d),
        EstimatorError::BundleIo(_) => EXIT_IO,
        EstimatorError::BundleFormat(_) | EstimatorError::BundleVersion { .. } => EXIT_CONFIG,
        _ => EXIT_TRAINING,
    }
}

impl From<ExperimentError> for CliFailure {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::InvalidConfig(_) => EXIT_CONFIG,
            ExperimentError::Data(d) => data_code(d),
            ExperimentError::Estimator(est) => estimator_code(est),
            ExperimentError::Metrics(_) | ExperimentError::Calibration(_) => EXIT_TRAINING,
            ExperimentError::Io(_) | ExperimentError::Csv(_) | ExperimentError::Json(_) => EXIT_IO,
        };
        CliFailure { code, message: e.to_string() }
    }
}

impl From<EstimatorError> for CliFailure {
    fn from(e: EstimatorError) -> Self {
        CliFailure { code: estimator_code(&e), message: e.to_string() }
    }
}

impl From<DataError> for CliFailure {
    fn from(e: DataError) -> Self {
        CliFailure { code: data_code(&e), message: e.to_string() }
    }
}

impl From<CalibrationError> for CliFailure {
    fn from(e: CalibrationError) -> Self {
        CliFailure { code: EXIT_TRAINING, message: e.to_string() }
    }
}

impl From<MetricsError> for CliFailure {
    fn from(e: MetricsError) -> Self {
        CliFailure { code: EXIT_TRAINING, message: e.to_string() }
    }
}

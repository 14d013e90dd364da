use std::fmt::Display;
use std::path::Path;

use qbheat::extractor::{ExtractError, ImageError};
use qbheat::field::io::FormatError;
use qbheat::field::FieldError;
use qbheat::fitting::FitError;
use qbheat::linalg::LinalgError;
use qbheat::masking::MaskError;
use qbheat::predictor::PredictError;
use qbheat::spectrum::SpectrumError;
use thiserror::Error;

/// Failure of a subcommand, tagged with the exit code class.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn data(context: impl Display, err: impl Display) -> Self {
        CliError::Data(format!("{context}: {err}"))
    }
}

/// Classifies library errors into data and numerical failures.
pub trait Classify {
    fn is_numerical(&self) -> bool;
}

impl Classify for LinalgError {
    fn is_numerical(&self) -> bool {
        true
    }
}

impl Classify for FieldError {
    fn is_numerical(&self) -> bool {
        matches!(self, FieldError::Linalg(_) | FieldError::Overflow { .. })
    }
}

impl Classify for FormatError {
    fn is_numerical(&self) -> bool {
        false
    }
}

impl Classify for MaskError {
    fn is_numerical(&self) -> bool {
        false
    }
}

impl Classify for PredictError {
    fn is_numerical(&self) -> bool {
        matches!(self, PredictError::Linalg(_))
    }
}

impl Classify for FitError {
    fn is_numerical(&self) -> bool {
        match self {
            FitError::Linalg(_) | FitError::Diverged { .. } => true,
            FitError::Predict(e) => e.is_numerical(),
            _ => false,
        }
    }
}

impl Classify for SpectrumError {
    fn is_numerical(&self) -> bool {
        matches!(self, SpectrumError::Linalg(_) | SpectrumError::ZeroEnergy)
    }
}

impl Classify for ImageError {
    fn is_numerical(&self) -> bool {
        false
    }
}

impl Classify for ExtractError {
    fn is_numerical(&self) -> bool {
        false
    }
}

impl Classify for std::io::Error {
    fn is_numerical(&self) -> bool {
        false
    }
}

impl Classify for serde_json::Error {
    fn is_numerical(&self) -> bool {
        false
    }
}

impl Classify for csv::Error {
    fn is_numerical(&self) -> bool {
        false
    }
}

/// Attaches the offending input to a library error.
pub trait Context<T> {
    fn context(self, what: impl Display) -> Result<T, CliError>;

    fn at(self, path: &Path) -> Result<T, CliError>
    where
        Self: Sized,
    {
        self.context(path.display())
    }
}

impl<T, E: Classify + Display> Context<T> for Result<T, E> {
    fn context(self, what: impl Display) -> Result<T, CliError> {
        self.map_err(|e| {
            let msg = format!("{what}: {e}");
            if e.is_numerical() {
                CliError::Numerical(msg)
            } else {
                CliError::Data(msg)
            }
        })
    }
}

//! Fit output documents and the model inputs accepted by `predict`,
//! `spectrum` and `report`.

use std::path::Path;

use qbheat::fitting::{Estimator, FitReport};
use qbheat::predictor::LinearModelSet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context};
use crate::files;

/// Relative Frobenius errors of a fitted pair against known generators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthError {
    pub a_relative: f64,
    pub b_relative: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitEntry {
    #[serde(flatten)]
    pub report: FitReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_error: Option<TruthError>,
}

/// What `fit` writes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutput {
    pub inputs: Vec<String>,
    pub reports: Vec<FitEntry>,
}

/// A fit output, a single fit report, or a bare model set.
pub enum ModelSource {
    Reports(Vec<FitReport>),
    Single(LinearModelSet),
}

pub fn load(path: &Path) -> Result<ModelSource, CliError> {
    let value: serde_json::Value = files::read_json(path)?;
    if value.get("reports").is_some() {
        let out: FitOutput = serde_json::from_value(value).at(path)?;
        Ok(ModelSource::Reports(
            out.reports.into_iter().map(|e| e.report).collect(),
        ))
    } else if value.get("models").is_some() {
        let report: FitReport = serde_json::from_value(value).at(path)?;
        Ok(ModelSource::Reports(vec![report]))
    } else {
        let models: LinearModelSet = serde_json::from_value(value).at(path)?;
        Ok(ModelSource::Single(models))
    }
}

pub fn estimator_tag(e: Estimator) -> &'static str {
    match e {
        Estimator::ClosedForm => "closed-form",
        Estimator::GradientDescent => "gradient-descent",
    }
}

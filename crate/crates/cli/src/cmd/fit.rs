use std::path::{Path, PathBuf};

use qbheat::field::FeatureField;
use qbheat::fitting::{fit_multiscale, FitConfig, FitError, FitMode};
use qbheat::linalg::Matrix;
use qbheat::masking::{make_layout, Position, QuarterLayout};
use serde::Deserialize;

use super::models::{FitEntry, FitOutput, TruthError};
use crate::error::{CliError, Context};
use crate::files;
use crate::parallel;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of `.qbhf` fields (or a single field file).
    #[arg(long)]
    input: PathBuf,
    /// JSON output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Layout positions; every field is used once per position.
    #[arg(long = "position", value_name = "POSITION", default_value = "tl")]
    positions: Vec<Position>,
    /// Ridge least squares on horizontal and vertical pairs (the default).
    #[arg(long)]
    closed_form: bool,
    /// Gradient descent on the masked MSE; with --closed-form it starts
    /// from the closed-form fit.
    #[arg(long)]
    iterative: bool,
    #[arg(long)]
    ridge: Option<f64>,
    /// Maximum descent steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Descent step size.
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    stop_tol: Option<f64>,
    /// Rescale the batch to unit mean channel variance first.
    #[arg(long)]
    standardize: bool,
    /// `truth.json` from `gen`; adds recovery errors to each report.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
struct Truth {
    #[serde(rename = "A")]
    a: Matrix,
    #[serde(rename = "B")]
    b: Matrix,
}

fn relative(found: &Matrix, truth: &Matrix) -> f64 {
    if found.shape() != truth.shape() {
        return f64::INFINITY;
    }
    let diff: f64 = found
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    let norm = truth.frobenius_norm();
    if norm > 0.0 {
        diff / norm
    } else {
        diff
    }
}

pub fn load_fields(paths: &[PathBuf]) -> Result<Vec<FeatureField>, CliError> {
    let workers = parallel::max_workers()?;
    parallel::par_map(paths, workers, |p| files::load_field(p))
        .into_iter()
        .collect()
}

fn config(args: &Args) -> Result<FitConfig, CliError> {
    let mut cfg = FitConfig::default();
    if let Some(v) = args.ridge {
        cfg.ridge = v;
    }
    if let Some(v) = args.steps {
        cfg.max_steps = v;
    }
    if let Some(v) = args.lr {
        cfg.step_size = v;
    }
    if let Some(v) = args.stop_tol {
        cfg.stop_tol = v;
    }
    cfg.standardize = args.standardize;
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn layouts_for(
    path: &Path,
    field: &FeatureField,
    positions: &[Position],
) -> Result<Vec<QuarterLayout>, CliError> {
    positions
        .iter()
        .map(|&p| make_layout(field.height(), field.width(), p).at(path))
        .collect()
}

pub fn run(args: Args) -> Result<(), CliError> {
    let cfg = config(&args)?;
    let mode = match (args.closed_form, args.iterative) {
        (_, false) => FitMode::ClosedForm,
        (false, true) => FitMode::Iterative,
        (true, true) => FitMode::Both,
    };
    let truth: Option<Truth> = args.truth.as_deref().map(files::read_json).transpose()?;
    let paths = files::list_inputs(&args.input, &["qbhf"])?;
    if paths.is_empty() {
        return Err(CliError::data(args.input.display(), FitError::EmptyBatch));
    }
    let loaded = load_fields(&paths)?;
    let mut fields = Vec::new();
    let mut layouts = Vec::new();
    for (path, field) in paths.iter().zip(&loaded) {
        for layout in layouts_for(path, field, &args.positions)? {
            fields.push(field.clone());
            layouts.push(layout);
        }
    }
    let reports = fit_multiscale(&fields, &layouts, &cfg, mode).at(&args.input)?;
    let reports = reports
        .into_iter()
        .map(|report| {
            let truth_error = truth.as_ref().map(|t| TruthError {
                a_relative: relative(report.models.a(), &t.a),
                b_relative: relative(report.models.b(), &t.b),
            });
            FitEntry {
                report,
                truth_error,
            }
        })
        .collect();
    let out = FitOutput {
        inputs: paths.iter().map(|p| files::file_name(p)).collect(),
        reports,
    };
    files::write_json(args.output.as_deref(), &out)
}

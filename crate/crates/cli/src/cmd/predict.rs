use std::path::PathBuf;

use clap::ValueEnum;
use qbheat::masking::{make_layout, Direction, Position};
use qbheat::predictor::{predict_masked, LinearModelSet, MseReport, Variant};
use serde::Serialize;

use super::models::{self, ModelSource};
use crate::error::{CliError, Context};
use crate::files::{self, Precision};
use crate::parallel;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// A `.qbhf` field or a directory of them.
    #[arg(long)]
    input: PathBuf,
    /// Fit output, fit report or model set JSON.
    #[arg(long)]
    models: PathBuf,
    /// Output directory for `<stem>.pred.qbhf` and `mse.json`.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "tl")]
    position: Position,
    /// Convert the model set to this variant before predicting.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    #[value(name = "2")]
    Two,
    #[value(name = "4")]
    Four,
    #[value(name = "8")]
    Eight,
}

#[derive(Debug, Serialize)]
struct FieldMse {
    file: String,
    #[serde(flatten)]
    mse: MseReport,
}

#[derive(Debug, Serialize)]
struct Output {
    position: Position,
    variant: Variant,
    fields: Vec<FieldMse>,
}

fn convert(models: &LinearModelSet, to: VariantArg) -> Result<LinearModelSet, CliError> {
    let base = || {
        LinearModelSet::new(
            models.a().clone(),
            models.b().clone(),
            models.scale(),
            models.dx(),
            models.dy(),
        )
        .map(|m| {
            m.with_implicit_rule(models.implicit_rule())
                .with_diagonal_rule(models.diagonal_rule())
        })
    };
    let converted = match to {
        VariantArg::Two => base(),
        VariantArg::Four => base().and_then(|b| {
            b.with_left_up(
                models.generator(Direction::Left)?,
                models.generator(Direction::Up)?,
            )
        }),
        VariantArg::Eight => models.to_variant8(),
    };
    converted.context("model conversion")
}

pub fn run(args: Args) -> Result<(), CliError> {
    let paths = files::list_inputs(&args.input, &["qbhf"])?;
    if paths.is_empty() {
        return Err(CliError::data(args.input.display(), "no input fields"));
    }
    let scale = args.position.scale();
    let mut models = match models::load(&args.models)? {
        ModelSource::Single(m) => m,
        ModelSource::Reports(reports) => reports
            .into_iter()
            .rev()
            .find(|r| r.scale == scale)
            .map(|r| r.models)
            .ok_or_else(|| {
                CliError::data(
                    args.models.display(),
                    format!(
                        "no {} scale models for position {}",
                        scale.tag(),
                        args.position
                    ),
                )
            })?,
    };
    if let Some(v) = args.variant {
        models = convert(&models, v)?;
    }
    files::ensure_dir(&args.output)?;
    let workers = parallel::max_workers()?;
    let results = parallel::par_map(&paths, workers, |path| -> Result<FieldMse, CliError> {
        let field = files::load_field(path)?;
        let layout = make_layout(field.height(), field.width(), args.position).at(path)?;
        let (predicted, mse) = predict_masked(&field, &layout, &models).at(path)?;
        let out = args
            .output
            .join(format!("{}.pred.qbhf", files::file_stem(path)));
        files::save_field(&predicted, &out, args.precision)?;
        Ok(FieldMse {
            file: files::file_name(path),
            mse,
        })
    });
    let fields = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let out = Output {
        position: args.position,
        variant: models.variant(),
        fields,
    };
    files::write_json(Some(&args.output.join("mse.json")), &out)
}

use std::path::PathBuf;

use qbheat::spectrum::energy;

use super::models::{self, ModelSource};
use crate::error::{CliError, Context};
use crate::files::{self, fmt_f64};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// A fit output JSON or a directory of them.
    #[arg(long)]
    input: PathBuf,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let paths = files::list_inputs(&args.input, &["json"])?;
    if paths.is_empty() {
        return Err(CliError::data(args.input.display(), "no fit reports"));
    }
    let mut rows = Vec::new();
    for path in &paths {
        let reports = match models::load(path)? {
            ModelSource::Reports(r) => r,
            ModelSource::Single(_) => {
                return Err(CliError::data(
                    path.display(),
                    "expected fit output, found a model set",
                ))
            }
        };
        for r in reports {
            let ea = energy(r.models.a()).at(path)?;
            let eb = energy(r.models.b()).at(path)?;
            let ratio = if eb > 0.0 {
                fmt_f64(ea / eb)
            } else {
                String::new()
            };
            rows.push(vec![
                files::file_name(path),
                models::estimator_tag(r.estimator).to_string(),
                r.scale.tag().to_string(),
                fmt_f64(ea),
                fmt_f64(eb),
                ratio,
                fmt_f64(r.final_loss),
            ]);
        }
    }
    let header = [
        "source",
        "estimator",
        "scale",
        "energy_a",
        "energy_b",
        "energy_ratio",
        "final_loss",
    ];
    files::write_text(args.output.as_deref(), &files::csv_text(&header, &rows)?)
}

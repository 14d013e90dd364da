use std::path::{Path, PathBuf};

use qbheat::spectrum::{spatial_correlation, SpectrumError};
use serde::Serialize;

use crate::error::{CliError, Context};
use crate::files::{self, Format};
use crate::parallel;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// A `.qbhf` field or a directory of them.
    #[arg(long)]
    input: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Serialize)]
struct Row {
    file: String,
    /// Absent when every position is degenerate.
    score: Option<f64>,
    excluded_positions: usize,
    n_positions: usize,
}

#[derive(Debug, Serialize)]
struct Output {
    fields: Vec<Row>,
}

fn score(path: &Path) -> Result<Row, CliError> {
    let field = files::load_field(path)?;
    let file = files::file_name(path);
    match spatial_correlation(&field) {
        Ok(r) => Ok(Row {
            file,
            score: Some(r.score),
            excluded_positions: r.excluded_positions,
            n_positions: r.n_positions,
        }),
        Err(SpectrumError::Degenerate {
            usable,
            n_positions,
        }) => {
            log::warn!("{file}: {usable} usable positions of {n_positions}, no score");
            Ok(Row {
                file,
                score: None,
                excluded_positions: n_positions - usable,
                n_positions,
            })
        }
        Err(e) => Err(e).at(path),
    }
}

pub fn run(args: Args) -> Result<(), CliError> {
    let paths = files::list_inputs(&args.input, &["qbhf"])?;
    if paths.is_empty() {
        return Err(CliError::data(args.input.display(), "no input fields"));
    }
    let workers = parallel::max_workers()?;
    let rows = parallel::par_map(&paths, workers, |p| score(p))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    match args.format {
        Format::Json => files::write_json(args.output.as_deref(), &Output { fields: rows }),
        Format::Csv => {
            let rows: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.file.clone(),
                        r.score.map(files::fmt_f64).unwrap_or_default(),
                        r.excluded_positions.to_string(),
                        r.n_positions.to_string(),
                    ]
                })
                .collect();
            let text = files::csv_text(
                &["file", "score", "excluded_positions", "n_positions"],
                &rows,
            )?;
            files::write_text(args.output.as_deref(), &text)
        }
    }
}

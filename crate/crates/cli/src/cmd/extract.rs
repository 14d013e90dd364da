use std::fs;
use std::path::PathBuf;

use qbheat::extractor::{extract_features, read_image, ExtractorConfig};

use crate::error::{CliError, Context};
use crate::files::{self, Precision};
use crate::parallel;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// A PGM/PPM image or a directory of them.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for `<stem>.qbhf`.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output channels.
    #[arg(long, default_value_t = 8)]
    channels: usize,
    #[arg(long, default_value_t = 3)]
    kernel: usize,
    #[arg(long, default_value_t = 4)]
    stride: usize,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let cfg = ExtractorConfig {
        kernel: args.kernel,
        stride: args.stride,
        ..ExtractorConfig::new(args.seed, args.channels)
    };
    let paths = files::list_inputs(&args.input, &["pgm", "ppm", "pnm"])?;
    if paths.is_empty() {
        return Err(CliError::data(args.input.display(), "no input images"));
    }
    files::ensure_dir(&args.output)?;
    let workers = parallel::max_workers()?;
    parallel::par_map(&paths, workers, |path| -> Result<(), CliError> {
        let bytes = fs::read(path).at(path)?;
        let image = read_image(&bytes).at(path)?;
        let field = extract_features(&image, &cfg).at(path)?;
        let out = args.output.join(format!("{}.qbhf", files::file_stem(path)));
        files::save_field(&field, &out, args.precision)
    })
    .into_iter()
    .collect()
}

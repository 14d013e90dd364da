use std::path::PathBuf;

use qbheat::field::{heat_step, FeatureField, ScalarHeatField};
use qbheat::rng;

use crate::error::{CliError, Context};
use crate::files::{self, fmt_f64, Precision};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Initial temperature as a single-channel `.qbhf`; seeded uniform
    /// noise in [0, 1) when absent.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory for frames and `summary.csv`.
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 32)]
    height: usize,
    #[arg(long, default_value_t = 32)]
    width: usize,
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Number of time steps.
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Time step; defaults to the stability limit spacing²/4.
    #[arg(long)]
    dt: Option<f64>,
    /// Write a frame every this many steps (and after the last).
    #[arg(long, default_value_t = 10)]
    every: usize,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

fn initial(args: &Args) -> Result<ScalarHeatField, CliError> {
    match &args.input {
        Some(path) => {
            let f = files::load_field(path)?;
            if f.channels() != 1 {
                return Err(CliError::data(
                    path.display(),
                    format!("expected 1 channel, found {}", f.channels()),
                ));
            }
            ScalarHeatField::new(f.height(), f.width(), f.spacing(), f.values().to_vec()).at(path)
        }
        None => {
            let mut r = rng::seeded(args.seed);
            let values = (0..args.height * args.width)
                .map(|_| rng::unit(&mut r))
                .collect();
            ScalarHeatField::new(args.height, args.width, args.spacing, values)
                .map_err(|e| CliError::Usage(format!("grid: {e}")))
        }
    }
}

fn frame(u: &ScalarHeatField) -> Result<FeatureField, CliError> {
    FeatureField::new(u.height(), u.width(), 1, u.spacing(), u.values().to_vec()).context("frame")
}

pub fn run(args: Args) -> Result<(), CliError> {
    if args.every == 0 {
        return Err(CliError::Usage("--every must be at least 1".into()));
    }
    let mut u = initial(&args)?;
    let dt = args.dt.unwrap_or_else(|| u.stability_limit());
    files::ensure_dir(&args.output)?;
    let digits = args.steps.to_string().len().max(4);
    let save = |u: &ScalarHeatField, step: usize| {
        let path = args.output.join(format!("frame_{step:0digits$}.qbhf"));
        files::save_field(&frame(u)?, &path, args.precision)
    };
    let mut rows = vec![vec![
        "0".to_string(),
        fmt_f64(u.total()),
        fmt_f64(u.max_abs()),
    ]];
    save(&u, 0)?;
    for step in 1..=args.steps {
        u = heat_step(&u, dt).context(format!("--dt {dt}"))?;
        rows.push(vec![
            step.to_string(),
            fmt_f64(u.total()),
            fmt_f64(u.max_abs()),
        ]);
        if step % args.every == 0 || step == args.steps {
            save(&u, step)?;
        }
    }
    let text = files::csv_text(&["step", "total", "max_abs"], &rows)?;
    files::write_text(Some(&args.output.join("summary.csv")), &text)
}

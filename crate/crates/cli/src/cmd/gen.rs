use std::path::PathBuf;

use clap::ValueEnum;
use qbheat::field::{generate_exact_field, random_commuting_pair, random_vector};
use qbheat::field::{FieldGenSpec, GenMode};
use qbheat::linalg::Matrix;
use qbheat::rng;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context};
use crate::files::{self, Precision};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSON spec file.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for `field_NNN.qbhf` and `truth.json`.
    #[arg(long)]
    output: PathBuf,
    /// Overrides the spec seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the spec mode.
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Continuous,
    Discrete,
}

impl From<Mode> for GenMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Continuous => GenMode::Continuous,
            Mode::Discrete => GenMode::Discrete,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomCommuting {
    rho_max: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(rename = "C")]
    channels: usize,
    #[serde(rename = "H")]
    height: usize,
    #[serde(rename = "W")]
    width: usize,
    spacing: f64,
    mode: GenMode,
    seed: u64,
    #[serde(rename = "A")]
    a: Option<Matrix>,
    #[serde(rename = "B")]
    b: Option<Matrix>,
    #[serde(rename = "random-commuting")]
    random_commuting: Option<RandomCommuting>,
    /// Origin vector shared by every field; drawn per field when absent.
    z0: Option<Vec<f64>>,
    #[serde(default = "one")]
    count: usize,
    #[serde(default = "one")]
    step_cells: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Serialize)]
struct TruthField {
    file: String,
    z0: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct Truth {
    #[serde(rename = "C")]
    channels: usize,
    #[serde(rename = "H")]
    height: usize,
    #[serde(rename = "W")]
    width: usize,
    spacing: f64,
    mode: GenMode,
    seed: u64,
    step_cells: usize,
    #[serde(rename = "A")]
    a: Matrix,
    #[serde(rename = "B")]
    b: Matrix,
    fields: Vec<TruthField>,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let spec: SpecFile = files::read_json(&args.input)?;
    let bad = |msg: String| CliError::data(args.input.display(), msg);
    let seed = args.seed.unwrap_or(spec.seed);
    let mode = args.mode.map_or(spec.mode, GenMode::from);
    let c = spec.channels;
    if c == 0 || spec.count == 0 {
        return Err(bad("C and count must be at least 1".into()));
    }
    let mut r = rng::seeded(seed);
    let (a, b) = match (spec.a, spec.b, spec.random_commuting) {
        (Some(a), Some(b), None) => (a, b),
        (None, None, Some(rc)) => {
            if !(rc.rho_max.is_finite() && rc.rho_max >= 0.0) {
                return Err(bad(format!(
                    "rho_max must be non-negative, got {}",
                    rc.rho_max
                )));
            }
            random_commuting_pair(c, rc.rho_max, &mut r).at(&args.input)?
        }
        _ => return Err(bad("give either both A and B or random-commuting".into())),
    };
    for (name, m) in [("A", &a), ("B", &b)] {
        if m.shape() != (c, c) {
            return Err(bad(format!(
                "{name} must be {c}x{c}, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
    }
    if let Some(z0) = &spec.z0 {
        if z0.len() != c {
            return Err(bad(format!("z0 must have {c} entries, got {}", z0.len())));
        }
    }

    // Field files store spacing as f32; generate on that exact grid so the
    // data and the header agree.
    let spacing = spec.spacing as f32 as f64;
    if spacing != spec.spacing {
        log::info!("spacing {} rounded to {spacing} for storage", spec.spacing);
    }
    files::ensure_dir(&args.output)?;
    let width = (spec.count - 1).to_string().len().max(3);
    let mut truth_fields = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let z0 = spec.z0.clone().unwrap_or_else(|| random_vector(c, &mut r));
        let gen_spec = FieldGenSpec::new(a.clone(), b.clone(), z0.clone(), mode)
            .and_then(|s| s.with_step_cells(spec.step_cells))
            .at(&args.input)?;
        let field =
            generate_exact_field(&gen_spec, spec.height, spec.width, spacing).at(&args.input)?;
        let name = format!("field_{i:0width$}.qbhf");
        files::save_field(&field, &args.output.join(&name), args.precision)?;
        truth_fields.push(TruthField { file: name, z0 });
    }
    let truth = Truth {
        channels: c,
        height: spec.height,
        width: spec.width,
        spacing,
        mode,
        seed,
        step_cells: spec.step_cells,
        a,
        b,
        fields: truth_fields,
    };
    files::write_json(Some(&args.output.join("truth.json")), &truth)?;
    log::info!("wrote {} fields to {}", spec.count, args.output.display());
    Ok(())
}

use std::path::PathBuf;

use qbheat::fitting::{Estimator, FitReport};
use qbheat::masking::Scale;
use qbheat::predictor::LinearModelSet;
use qbheat::spectrum::{energy_ratio, normalized_spectrum, report_alignment, SpectrumReport};
use serde::Serialize;

use super::models::{self, estimator_tag, ModelSource};
use crate::error::{CliError, Context};
use crate::files::{self, fmt_f64, Format};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Fit output, fit report or model set JSON.
    #[arg(long)]
    input: PathBuf,
    /// JSON file (stdout when absent) or, for CSV, a directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Debug, Serialize)]
struct Entry {
    label: String,
    scale: Scale,
    #[serde(skip_serializing_if = "Option::is_none")]
    estimator: Option<Estimator>,
    #[serde(rename = "A")]
    a: SpectrumReport,
    #[serde(rename = "B")]
    b: SpectrumReport,
    energy_ratio: f64,
    /// Alignment between the normalized spectra of A and B.
    alignment_ab: f64,
}

/// Same-estimator comparison of two scales.
#[derive(Debug, Serialize)]
struct CrossScale {
    left: String,
    right: String,
    alignment_a: f64,
    alignment_b: f64,
    ratio_relative_difference: f64,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    entries: Vec<EntrySummary<'a>>,
    cross_scale: &'a [CrossScale],
}

#[derive(Debug, Serialize)]
struct EntrySummary<'a> {
    label: &'a str,
    energy_a: f64,
    energy_b: f64,
    energy_ratio: f64,
    alignment_ab: f64,
}

#[derive(Debug, Serialize)]
struct Output {
    entries: Vec<Entry>,
    cross_scale: Vec<CrossScale>,
}

fn entry(
    label: String,
    models: &LinearModelSet,
    estimator: Option<Estimator>,
) -> Result<Entry, CliError> {
    let what = format!("models {label}");
    let a = normalized_spectrum(models.a(), &format!("{label}-A")).context(&what)?;
    let b = normalized_spectrum(models.b(), &format!("{label}-B")).context(&what)?;
    Ok(Entry {
        energy_ratio: energy_ratio(models.a(), models.b()).context(&what)?,
        alignment_ab: report_alignment(&a, &b).context(&what)?,
        label,
        scale: models.scale(),
        estimator,
        a,
        b,
    })
}

fn entries(source: ModelSource) -> Result<Vec<Entry>, CliError> {
    match source {
        ModelSource::Single(m) => Ok(vec![entry(m.scale().tag().to_string(), &m, None)?]),
        ModelSource::Reports(reports) => reports
            .iter()
            .map(|r: &FitReport| {
                let label = format!("{}-{}", r.scale.tag(), estimator_tag(r.estimator));
                entry(label, &r.models, Some(r.estimator))
            })
            .collect(),
    }
}

fn cross_scale(entries: &[Entry]) -> Result<Vec<CrossScale>, CliError> {
    let mut out = Vec::new();
    for (i, l) in entries.iter().enumerate() {
        for r in &entries[i + 1..] {
            if l.scale == r.scale || l.estimator != r.estimator {
                continue;
            }
            let what = format!("{} vs {}", l.label, r.label);
            out.push(CrossScale {
                left: l.label.clone(),
                right: r.label.clone(),
                alignment_a: report_alignment(&l.a, &r.a).context(&what)?,
                alignment_b: report_alignment(&l.b, &r.b).context(&what)?,
                ratio_relative_difference: (l.energy_ratio - r.energy_ratio).abs()
                    / l.energy_ratio.abs().max(r.energy_ratio.abs()),
            });
        }
    }
    Ok(out)
}

fn spectrum_csv(report: &SpectrumReport) -> Result<String, CliError> {
    let rows: Vec<Vec<String>> = report
        .eigenvalues
        .iter()
        .zip(&report.magnitudes)
        .zip(&report.normalized)
        .enumerate()
        .map(|(i, ((z, m), n))| {
            vec![
                i.to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
                fmt_f64(*m),
                fmt_f64(*n),
            ]
        })
        .collect();
    files::csv_text(
        &["index", "re", "im", "magnitude", "normalized_magnitude"],
        &rows,
    )
}

pub fn run(args: Args) -> Result<(), CliError> {
    let entries = entries(models::load(&args.input)?)?;
    let cross = cross_scale(&entries)?;
    match args.format {
        Format::Json => files::write_json(
            args.output.as_deref(),
            &Output {
                entries,
                cross_scale: cross,
            },
        ),
        Format::Csv => {
            let dir = args.output.ok_or_else(|| {
                CliError::Usage("--format csv needs an --output directory".into())
            })?;
            files::ensure_dir(&dir)?;
            for e in &entries {
                for report in [&e.a, &e.b] {
                    let path = dir.join(format!("{}.csv", report.matrix_tag));
                    files::write_text(Some(&path), &spectrum_csv(report)?)?;
                }
            }
            let summary = Summary {
                entries: entries
                    .iter()
                    .map(|e| EntrySummary {
                        label: &e.label,
                        energy_a: e.a.energy,
                        energy_b: e.b.energy,
                        energy_ratio: e.energy_ratio,
                        alignment_ab: e.alignment_ab,
                    })
                    .collect(),
                cross_scale: &cross,
            };
            files::write_json(Some(&dir.join("summary.json")), &summary)
        }
    }
}

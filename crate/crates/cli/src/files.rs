use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use qbheat::field::io;
use qbheat::field::FeatureField;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CliError, Context};

/// Payload precision of written QBHF files.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    /// Version 1, f32 values.
    #[default]
    F32,
    /// Version 2, f64 values.
    F64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    #[default]
    Json,
}

/// `path` itself if it is a file, else the files in it with extension
/// `ext`, sorted by name.
pub fn list_inputs(path: &Path, ext: &[&str]) -> Result<Vec<PathBuf>, CliError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let entries = fs::read_dir(path).at(path)?;
    let mut files = Vec::new();
    for entry in entries {
        let p = entry.at(path)?.path();
        let matches = p
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| ext.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if p.is_file() && matches {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

pub fn file_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| file_name(path))
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).at(path)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let bytes = fs::read(path).at(path)?;
    serde_json::from_slice(&bytes).at(path)
}

/// Pretty JSON with a trailing newline, to `path` or stdout.
pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).context("JSON output")?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).at(p),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .context("stdout"),
    }
}

/// CSV with a header row and '\n' line endings.
pub fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).context("CSV output")?;
    for row in rows {
        w.write_record(row).context("CSV output")?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Data(format!("CSV output: {e}")))?;
    String::from_utf8(bytes).map_err(|e| CliError::Data(format!("CSV output: {e}")))
}

pub fn load_field(path: &Path) -> Result<FeatureField, CliError> {
    io::load(path).at(path)
}

pub fn save_field(field: &FeatureField, path: &Path, precision: Precision) -> Result<(), CliError> {
    match precision {
        Precision::F32 => io::save(field, path),
        Precision::F64 => io::save_f64(field, path),
    }
    .at(path)
}

/// Shortest round-trip form, with an exponent for very large or small
/// magnitudes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

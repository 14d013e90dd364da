//! Spectrum diagnostics for model matrices and the spatial-correlation score
//! of feature fields.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::FeatureField;
use crate::linalg::{eigen_spectrum, Complex64, LinalgError, Matrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectrumError {
    #[error("matrix B has zero spectrum energy")]
    ZeroEnergy,
    #[error("spectra have different lengths: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("spatial correlation needs at least 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("all but {usable} of {n_positions} positions have zero channel variance")]
    Degenerate { usable: usize, n_positions: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub matrix_tag: String,
    /// Eigenvalues ordered by descending magnitude.
    pub eigenvalues: Vec<Complex64>,
    pub magnitudes: Vec<f64>,
    /// Magnitudes divided by their sum; all zero when the energy is zero.
    pub normalized: Vec<f64>,
    pub energy: f64,
}

/// Sum of eigenvalue magnitudes.
pub fn energy(m: &Matrix) -> Result<f64, SpectrumError> {
    Ok(eigen_spectrum(m, false)?.magnitudes().iter().sum())
}

/// `E(A) / E(B)`.
pub fn energy_ratio(a: &Matrix, b: &Matrix) -> Result<f64, SpectrumError> {
    let eb = energy(b)?;
    if eb <= 0.0 {
        return Err(SpectrumError::ZeroEnergy);
    }
    Ok(energy(a)? / eb)
}

pub fn normalized_spectrum(m: &Matrix, tag: &str) -> Result<SpectrumReport, SpectrumError> {
    let eig = eigen_spectrum(m, false)?;
    let magnitudes = eig.magnitudes();
    let energy: f64 = magnitudes.iter().sum();
    let normalized = if energy > 0.0 {
        magnitudes.iter().map(|v| v / energy).collect()
    } else {
        vec![0.0; magnitudes.len()]
    };
    Ok(SpectrumReport {
        matrix_tag: tag.to_string(),
        eigenvalues: eig.eigenvalues,
        magnitudes,
        normalized,
        energy,
    })
}

/// Largest difference between the sorted normalized magnitude sequences.
pub fn alignment(m1: &Matrix, m2: &Matrix) -> Result<f64, SpectrumError> {
    let r1 = normalized_spectrum(m1, "")?;
    let r2 = normalized_spectrum(m2, "")?;
    report_alignment(&r1, &r2)
}

pub fn report_alignment(r1: &SpectrumReport, r2: &SpectrumReport) -> Result<f64, SpectrumError> {
    if r1.normalized.len() != r2.normalized.len() {
        return Err(SpectrumError::DimensionMismatch {
            left: r1.normalized.len(),
            right: r2.normalized.len(),
        });
    }
    Ok(r1
        .normalized
        .iter()
        .zip(&r2.normalized)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub score: f64,
    pub excluded_positions: usize,
    pub n_positions: usize,
}

/// Mean absolute Pearson correlation (over channels) between the feature
/// vectors of distinct positions. Positions whose vector has zero variance
/// are left out and counted.
pub fn spatial_correlation(field: &FeatureField) -> Result<CorrelationReport, SpectrumError> {
    let c = field.channels();
    if c < 2 {
        return Err(SpectrumError::TooFewChannels(c));
    }
    let n_positions = field.cell_count();
    let mut units: Vec<Vec<f64>> = Vec::with_capacity(n_positions);
    for cell in field.values().chunks(c) {
        let mean = cell.iter().sum::<f64>() / c as f64;
        let centered: Vec<f64> = cell.iter().map(|v| v - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = cell.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm <= f64::EPSILON * c as f64 * scale || norm == 0.0 {
            continue;
        }
        units.push(centered.into_iter().map(|v| v / norm).collect());
    }
    let n = units.len();
    if n < 2 {
        return Err(SpectrumError::Degenerate {
            usable: n,
            n_positions,
        });
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = units[i].iter().zip(&units[j]).map(|(a, b)| a * b).sum();
            sum += dot.abs().min(1.0);
        }
    }
    Ok(CorrelationReport {
        score: 2.0 * sum / (n * (n - 1)) as f64,
        excluded_positions: n_positions - n,
        n_positions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_energies() {
        assert!((energy(&Matrix::identity(4)).unwrap() - 4.0).abs() < 1e-14);
        assert!((energy(&Matrix::from_diag(&[3.0, -4.0])).unwrap() - 7.0).abs() < 1e-14);
        let rot = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!((energy(&rot).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ratios() {
        let i = Matrix::identity(3);
        assert!((energy_ratio(&i.scaled(2.0), &i).unwrap() - 2.0).abs() < 1e-14);
        assert!((energy_ratio(&i, &i).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(
            energy_ratio(&i, &Matrix::zeros(3, 3)),
            Err(SpectrumError::ZeroEnergy)
        );
    }

    #[test]
    fn normalized_identity() {
        let r = normalized_spectrum(&Matrix::identity(5), "I").unwrap();
        assert!(r.normalized.iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert_eq!(r.matrix_tag, "I");
    }

    #[test]
    fn alignment_removes_scale() {
        let m = Matrix::from_rows(&[
            vec![1.0, 2.0, 0.0],
            vec![-1.0, 0.5, 3.0],
            vec![0.2, 0.0, -2.0],
        ])
        .unwrap();
        assert!(alignment(&m, &m.scaled(-3.5)).unwrap() < 1e-12);
        assert_eq!(alignment(&m, &m).unwrap(), 0.0);
        assert!(matches!(
            alignment(&m, &Matrix::identity(2)),
            Err(SpectrumError::DimensionMismatch { left: 3, right: 2 })
        ));
    }

    #[test]
    fn identical_vectors_correlate_fully() {
        let f = FeatureField::constant(4, 5, 1.0, &[1.0, -2.0, 0.5]).unwrap();
        let r = spatial_correlation(&f).unwrap();
        assert!((r.score - 1.0).abs() < 1e-12);
        assert_eq!((r.excluded_positions, r.n_positions), (0, 20));
    }

    #[test]
    fn flat_vectors_are_excluded() {
        let f = FeatureField::constant(3, 3, 1.0, &[2.0, 2.0]).unwrap();
        assert_eq!(
            spatial_correlation(&f),
            Err(SpectrumError::Degenerate {
                usable: 0,
                n_positions: 9
            })
        );
        let f = FeatureField::from_fn(2, 2, 2, 1.0, |r, c| {
            if r == 0 && c == 0 {
                vec![1.0, 1.0]
            } else {
                vec![r as f64, c as f64 + 2.0]
            }
        })
        .unwrap();
        let r = spatial_correlation(&f).unwrap();
        assert_eq!(r.excluded_positions, 1);
        assert!((0.0..=1.0).contains(&r.score));
    }
}

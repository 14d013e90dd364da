//! Dense real linear algebra: products, LU solves, ridge least squares,
//! the matrix exponential and complex eigen-spectra of nonsymmetric matrices.
//!
//! Everything here is a pure function of its inputs. Tolerances live in
//! [`NumericSettings`]; the plain entry points use its defaults and each has
//! a `*_with` form taking explicit settings.

mod decomp;
mod eigen;
mod expm;
mod matrix;

pub use decomp::{
    complex_solve, determinant, inverse, least_squares, least_squares_with, solve, solve_with, Lu,
};
pub use eigen::{eigen_spectrum, eigen_spectrum_with, EigenDecomposition};
pub use expm::{mat_exp, mat_exp_with};
pub use matrix::Matrix;

pub use num_complex::Complex64;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("matrix has a zero dimension")]
    Empty,
    #[error("{op}: expected a square matrix, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("non-finite matrix entry")]
    NonFinite,
    #[error("matrix is singular to working precision (pivot column {pivot_col})")]
    Singular { pivot_col: usize },
    #[error(
        "eigenvalue iteration did not converge: {remaining} eigenvalues left after {iterations} sweeps"
    )]
    NoConvergence { remaining: usize, iterations: usize },
    #[error("ridge must be finite and non-negative, got {0}")]
    InvalidRidge(f64),
    #[error("dimension {dim} exceeds the supported maximum {max}")]
    TooLarge { dim: usize, max: usize },
}

/// Every numeric tolerance used by the crate, in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericSettings {
    /// Scaling-and-squaring reduces the Frobenius norm to at most this.
    pub expm_scaled_norm: f64,
    /// Taylor summation stops once a term's Frobenius norm drops below this.
    pub expm_term_tol: f64,
    pub expm_max_terms: usize,
    /// A pivot below `pivot_tol · max|entry|` is treated as singular.
    pub pivot_tol: f64,
    /// QR sweeps allowed per eigenvalue before reporting non-convergence.
    pub eig_sweeps_per_value: usize,
    pub eig_max_dim: usize,
    /// `‖AB − BA‖_F ≤ commute_tol · ‖A‖_F · ‖B‖_F` counts as commuting.
    pub commute_tol: f64,
    /// Generated fields with any magnitude above this are rejected.
    pub overflow_limit: f64,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            expm_scaled_norm: 0.5,
            expm_term_tol: 1e-16,
            expm_max_terms: 64,
            pivot_tol: 1e-14,
            eig_sweeps_per_value: 100,
            eig_max_dim: 4096,
            commute_tol: 1e-8,
            overflow_limit: 1e12,
        }
    }
}

pub(crate) fn require_square(m: &Matrix, op: &'static str) -> Result<(), LinalgError> {
    if m.is_square() {
        Ok(())
    } else {
        Err(LinalgError::NotSquare {
            op,
            rows: m.rows(),
            cols: m.cols(),
        })
    }
}

/// Whether `a` and `b` commute within the default tolerance.
pub fn commutes(a: &Matrix, b: &Matrix) -> bool {
    commutes_with(a, b, &NumericSettings::default())
}

pub fn commutes_with(a: &Matrix, b: &Matrix, settings: &NumericSettings) -> bool {
    match a.commutator(b) {
        Ok(c) => {
            c.frobenius_norm() <= settings.commute_tol * a.frobenius_norm() * b.frobenius_norm()
        }
        Err(_) => false,
    }
}

//! Multi-channel feature fields `z(x, y) ∈ R^C` sampled on a uniform grid,
//! plus the scalar heat equation they generalize.
//!
//! Coordinates: `x` runs along columns (width), `y` along rows (height),
//! physical position of cell `(row, col)` is `(col·spacing, row·spacing)`.

mod generate;
mod heat;
pub mod io;
mod stencil;

pub use generate::{
    generate_eigen_expansion_field, generate_exact_field, random_commuting_pair, random_vector,
    FieldGenSpec, GenMode,
};
pub use heat::{heat_step, ScalarHeatField};
pub use stencil::{
    compute_s, cross_derivative_residual, forward_difference, laplacian_residual, Axis,
};

use thiserror::Error;

use crate::linalg::LinalgError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error(
        "invalid field shape {height}x{width}x{channels} (need H, W >= {min_extent} and C >= 1)"
    )]
    InvalidShape {
        height: usize,
        width: usize,
        channels: usize,
        min_extent: usize,
    },
    #[error("grid spacing must be finite and positive, got {0}")]
    InvalidSpacing(f64),
    #[error("expected {expected} values, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("field contains a non-finite value")]
    NonFinite,
    #[error("matrix is {found}x{found} but the field has {expected} channels")]
    ChannelMismatch { expected: usize, found: usize },
    #[error("A and B do not commute: ‖AB − BA‖_F = {residual:.3e} exceeds {bound:.3e}")]
    NotCommuting { residual: f64, bound: f64 },
    #[error("generated value {value:.3e} exceeds the overflow limit {limit:.1e}")]
    Overflow { value: f64, limit: f64 },
    #[error("eigen-expansion needs distinct eigenvalues of A (closest pair {gap:.3e} apart)")]
    RepeatedEigenvalues { gap: f64 },
    #[error("offset {offset} out of range for an axis of extent {extent}")]
    OffsetOutOfRange { offset: usize, extent: usize },
    #[error("derivative order {0} unsupported (use 1 or 2)")]
    UnsupportedOrder(usize),
    #[error("time step {dt} violates the explicit stability bound dx²/4 = {limit}")]
    UnstableStep { dt: f64, limit: f64 },
    #[error("discrete step must be at least one cell")]
    InvalidStep,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Feature vectors on an H×W grid, stored `(row, col, channel)` with the
/// channel index fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureField {
    height: usize,
    width: usize,
    channels: usize,
    spacing: f64,
    values: Vec<f64>,
}

impl FeatureField {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        spacing: f64,
        values: Vec<f64>,
    ) -> Result<Self, FieldError> {
        check_shape(height, width, channels, 2)?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(FieldError::InvalidSpacing(spacing));
        }
        let expected = height * width * channels;
        if values.len() != expected {
            return Err(FieldError::LengthMismatch {
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self {
            height,
            width,
            channels,
            spacing,
            values,
        })
    }

    /// Builds a field cell by cell; `f(row, col)` returns the C-vector.
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        spacing: f64,
        mut f: impl FnMut(usize, usize) -> Vec<f64>,
    ) -> Result<Self, FieldError> {
        let mut values = Vec::with_capacity(height * width * channels);
        for row in 0..height {
            for col in 0..width {
                let v = f(row, col);
                if v.len() != channels {
                    return Err(FieldError::ChannelMismatch {
                        expected: channels,
                        found: v.len(),
                    });
                }
                values.extend(v);
            }
        }
        Self::new(height, width, channels, spacing, values)
    }

    /// The collapse solution: the same vector at every cell.
    pub fn constant(
        height: usize,
        width: usize,
        spacing: f64,
        value: &[f64],
    ) -> Result<Self, FieldError> {
        Self::from_fn(height, width, value.len(), spacing, |_, _| value.to_vec())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell_count(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    fn offset(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        (row * self.width + col) * self.channels
    }

    /// The C-vector at `(row, col)`.
    #[inline]
    pub fn at(&self, row: usize, col: usize) -> &[f64] {
        let o = self.offset(row, col);
        &self.values[o..o + self.channels]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut [f64] {
        let o = self.offset(row, col);
        &mut self.values[o..o + self.channels]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Spatial variance of each channel over all cells.
    pub fn channel_variances(&self) -> Vec<f64> {
        let n = self.cell_count() as f64;
        let mut mean = vec![0.0; self.channels];
        for cell in self.values.chunks(self.channels) {
            for (m, v) in mean.iter_mut().zip(cell) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; self.channels];
        for cell in self.values.chunks(self.channels) {
            for ((s, v), m) in var.iter_mut().zip(cell).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        var.iter_mut().for_each(|s| *s /= n);
        var
    }

    /// Returns a copy with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }

    /// Returns a copy with a fresh `noise()` draw added to every stored value.
    pub fn perturbed(&self, mut noise: impl FnMut() -> f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + noise()).collect(),
            ..self.clone()
        }
    }
}

pub(crate) fn check_shape(
    height: usize,
    width: usize,
    channels: usize,
    min_extent: usize,
) -> Result<(), FieldError> {
    if height < min_extent || width < min_extent || channels < 1 {
        return Err(FieldError::InvalidShape {
            height,
            width,
            channels,
            min_extent,
        });
    }
    Ok(())
}

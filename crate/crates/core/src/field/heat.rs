use super::{check_shape, FieldError};

/// Scalar temperature `u(x, y)` on a grid with reflective (zero-flux)
/// boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarHeatField {
    height: usize,
    width: usize,
    spacing: f64,
    values: Vec<f64>,
}

impl ScalarHeatField {
    pub fn new(
        height: usize,
        width: usize,
        spacing: f64,
        values: Vec<f64>,
    ) -> Result<Self, FieldError> {
        check_shape(height, width, 1, 3)?;
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(FieldError::InvalidSpacing(spacing));
        }
        if values.len() != height * width {
            return Err(FieldError::LengthMismatch {
                expected: height * width,
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        Ok(Self {
            height,
            width,
            spacing,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest stable explicit-Euler step, `dx²/4`.
    pub fn stability_limit(&self) -> f64 {
        self.spacing * self.spacing / 4.0
    }
}

/// One explicit-Euler step of `∂u/∂t = ∂²u/∂x² + ∂²u/∂y²` with the five-point
/// Laplacian. Boundaries mirror the edge cell, so the discrete Laplacian sums
/// to zero and total heat is conserved.
pub fn heat_step(u: &ScalarHeatField, dt: f64) -> Result<ScalarHeatField, FieldError> {
    let limit = u.stability_limit();
    if !(dt.is_finite() && dt >= 0.0) || dt > limit {
        return Err(FieldError::UnstableStep { dt, limit });
    }
    let (h, w) = (u.height, u.width);
    let r = dt / (u.spacing * u.spacing);
    let at = |row: usize, col: usize| u.values[row * w + col];
    let mut next = Vec::with_capacity(h * w);
    for row in 0..h {
        let up = row.saturating_sub(1);
        let down = (row + 1).min(h - 1);
        for col in 0..w {
            let left = col.saturating_sub(1);
            let right = (col + 1).min(w - 1);
            let c = at(row, col);
            let lap = (at(up, col) - c)
                + (at(down, col) - c)
                + (at(row, left) - c)
                + (at(row, right) - c);
            next.push(c + r * lap);
        }
    }
    Ok(ScalarHeatField {
        values: next,
        ..u.clone()
    })
}

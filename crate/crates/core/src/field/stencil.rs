use serde::{Deserialize, Serialize};

use super::{FeatureField, FieldError};
use crate::linalg::{solve, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Along columns (width).
    X,
    /// Along rows (height).
    Y,
}

/// `z(· + offset·h) − z(·)` along `axis`, on the sub-grid where both cells
/// exist (the extent along `axis` shrinks by `offset`).
pub fn forward_difference(
    field: &FeatureField,
    axis: Axis,
    offset: usize,
) -> Result<FeatureField, FieldError> {
    let extent = match axis {
        Axis::X => field.width(),
        Axis::Y => field.height(),
    };
    if offset == 0 || offset >= extent {
        return Err(FieldError::OffsetOutOfRange { offset, extent });
    }
    let (h, w) = match axis {
        Axis::X => (field.height(), field.width() - offset),
        Axis::Y => (field.height() - offset, field.width()),
    };
    let (dr, dc) = match axis {
        Axis::X => (0, offset),
        Axis::Y => (offset, 0),
    };
    let c = field.channels();
    let mut values = Vec::with_capacity(h * w * c);
    for row in 0..h {
        for col in 0..w {
            let far = field.at(row + dr, col + dc);
            values.extend(far.iter().zip(field.at(row, col)).map(|(a, b)| a - b));
        }
    }
    // A one-cell result along an axis is still a valid difference, so build
    // the struct directly rather than through the H, W >= 2 constructor.
    Ok(FeatureField {
        height: h,
        width: w,
        channels: c,
        spacing: field.spacing(),
        values,
    })
}

/// Coupling matrix of the anisotropic Laplacian, `S = −A²(B²)⁻¹`, so that
/// `A² + S·B² = 0`.
pub fn compute_s(a: &Matrix, b: &Matrix) -> Result<Matrix, FieldError> {
    let a2 = a.matmul(a)?;
    let b2 = b.matmul(b)?;
    // S·B² = −A²  ⇔  (B²)ᵀ·Sᵀ = −(A²)ᵀ
    let st = solve(&b2.transpose(), &(-&a2).transpose())?;
    Ok(st.transpose())
}

/// Central-difference derivative of order 1 or 2 at an interior cell,
/// accumulated into `out`.
fn central_derivative(
    field: &FeatureField,
    axis: Axis,
    order: usize,
    row: usize,
    col: usize,
    out: &mut [f64],
) {
    let h = field.spacing();
    let (prev, next) = match axis {
        Axis::X => (field.at(row, col - 1), field.at(row, col + 1)),
        Axis::Y => (field.at(row - 1, col), field.at(row + 1, col)),
    };
    let cur = field.at(row, col);
    match order {
        1 => {
            for ((o, n), p) in out.iter_mut().zip(next).zip(prev) {
                *o = (n - p) / (2.0 * h);
            }
        }
        2 => {
            for (((o, n), p), c) in out.iter_mut().zip(next).zip(prev).zip(cur) {
                *o = ((n + p) - 2.0 * c) / (h * h);
            }
        }
        _ => unreachable!("order checked by caller"),
    }
}

/// RMS over interior cells of `‖D²ₓz + S·D²ᵧz‖₂`, with second-order central
/// differences and the one-cell border excluded.
pub fn laplacian_residual(field: &FeatureField, s: &Matrix) -> Result<f64, FieldError> {
    check_channels(field, s)?;
    if field.height() < 3 || field.width() < 3 {
        return Err(FieldError::InvalidShape {
            height: field.height(),
            width: field.width(),
            channels: field.channels(),
            min_extent: 3,
        });
    }
    combined_residual(field, 2, 2, s, 1.0)
}

/// RMS over interior cells of `‖Dⁿₓz − Aⁿ(Bᵐ)⁻¹Dᵐᵧz‖₂` for orders 1 or 2.
pub fn cross_derivative_residual(
    field: &FeatureField,
    a: &Matrix,
    b: &Matrix,
    n: usize,
    m: usize,
) -> Result<f64, FieldError> {
    for order in [n, m] {
        if !(1..=2).contains(&order) {
            return Err(FieldError::UnsupportedOrder(order));
        }
    }
    check_channels(field, a)?;
    check_channels(field, b)?;
    if field.height() < 3 || field.width() < 3 {
        return Err(FieldError::InvalidShape {
            height: field.height(),
            width: field.width(),
            channels: field.channels(),
            min_extent: 3,
        });
    }
    let an = a.powi(n as u32);
    let bm = b.powi(m as u32);
    // K = Aⁿ(Bᵐ)⁻¹  ⇔  (Bᵐ)ᵀKᵀ = (Aⁿ)ᵀ
    let k = solve(&bm.transpose(), &an.transpose())?.transpose();
    combined_residual(field, n, m, &k, -1.0)
}

/// RMS of `‖Dⁿₓz + sign·K·Dᵐᵧz‖` over the interior.
fn combined_residual(
    field: &FeatureField,
    n: usize,
    m: usize,
    k: &Matrix,
    sign: f64,
) -> Result<f64, FieldError> {
    let c = field.channels();
    let mut dx = vec![0.0; c];
    let mut dy = vec![0.0; c];
    let mut mapped = vec![0.0; c];
    let mut sum = 0.0;
    let mut count = 0usize;
    for row in 1..field.height() - 1 {
        for col in 1..field.width() - 1 {
            central_derivative(field, Axis::X, n, row, col, &mut dx);
            central_derivative(field, Axis::Y, m, row, col, &mut dy);
            k.mat_vec_into(&dy, &mut mapped);
            sum += dx
                .iter()
                .zip(&mapped)
                .map(|(a, b)| (a + sign * b).powi(2))
                .sum::<f64>();
            count += 1;
        }
    }
    Ok((sum / count as f64).sqrt())
}

fn check_channels(field: &FeatureField, m: &Matrix) -> Result<(), FieldError> {
    if m.shape() != (field.channels(), field.channels()) {
        return Err(FieldError::ChannelMismatch {
            expected: field.channels(),
            found: m.rows(),
        });
    }
    Ok(())
}

use super::{require_square, LinalgError, Matrix, NumericSettings};

/// Matrix exponential `e^{M·t}` by scaling and squaring.
///
/// `M·t` is scaled by `2^-k` until its Frobenius norm is at most
/// `expm_scaled_norm`, the Taylor series is summed until a term's norm drops
/// below `expm_term_tol`, and the result is squared `k` times.
pub fn mat_exp(m: &Matrix, t: f64) -> Result<Matrix, LinalgError> {
    mat_exp_with(m, t, &NumericSettings::default())
}

pub fn mat_exp_with(m: &Matrix, t: f64, settings: &NumericSettings) -> Result<Matrix, LinalgError> {
    require_square(m, "mat_exp")?;
    if !m.is_finite() || !t.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let n = m.rows();
    let a = m.scaled(t);
    let norm = a.frobenius_norm();

    let mut squarings = 0i32;
    while norm * 0.5f64.powi(squarings) > settings.expm_scaled_norm {
        squarings += 1;
    }
    let scaled = a.scaled(0.5f64.powi(squarings));

    let mut sum = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=settings.expm_max_terms {
        term = (&term * &scaled).scaled(1.0 / k as f64);
        sum += &term;
        if term.frobenius_norm() < settings.expm_term_tol {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    if !sum.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(sum)
}

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{FeatureField, FieldError};
use crate::linalg::{complex_solve, eigen_spectrum, mat_exp, Matrix, NumericSettings};
use crate::rng::{self, SeedRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GenMode {
    /// `z(x, y) = e^{Ax} e^{By} z0`.
    Continuous,
    /// Forward-difference recurrence `z(x+Δ, y) = (I + ΔA) z(x, y)`,
    /// `z(x, y+Δ) = (I + ΔB) z(x, y)`.
    Discrete,
}

/// Ground truth for a synthetic field: the commuting pair `(A, B)` and the
/// vector at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGenSpec {
    a: Matrix,
    b: Matrix,
    z0: Vec<f64>,
    mode: GenMode,
    step_cells: usize,
    coefficients: Option<Vec<Complex64>>,
}

impl FieldGenSpec {
    pub fn new(a: Matrix, b: Matrix, z0: Vec<f64>, mode: GenMode) -> Result<Self, FieldError> {
        let c = z0.len();
        for m in [&a, &b] {
            if m.shape() != (c, c) {
                return Err(FieldError::ChannelMismatch {
                    expected: c,
                    found: m.rows(),
                });
            }
        }
        if c == 0 {
            return Err(FieldError::InvalidShape {
                height: 0,
                width: 0,
                channels: 0,
                min_extent: 2,
            });
        }
        if !a.is_finite() || !b.is_finite() || z0.iter().any(|v| !v.is_finite()) {
            return Err(FieldError::NonFinite);
        }
        let settings = NumericSettings::default();
        let residual = a.commutator(&b)?.frobenius_norm();
        let bound = settings.commute_tol * a.frobenius_norm() * b.frobenius_norm();
        if residual > bound {
            return Err(FieldError::NotCommuting { residual, bound });
        }
        Ok(Self {
            a,
            b,
            z0,
            mode,
            step_cells: 1,
            coefficients: None,
        })
    }

    /// Discrete mode only: apply the recurrence across blocks of `cells`
    /// grid cells, so `Δ = cells · spacing`. Inside a block the field follows
    /// the exponential solution. With the default of one cell every step is
    /// a forward-difference step.
    pub fn with_step_cells(mut self, cells: usize) -> Result<Self, FieldError> {
        if cells == 0 {
            return Err(FieldError::InvalidStep);
        }
        self.step_cells = cells;
        Ok(self)
    }

    /// Expansion coefficients `c_i` for [`generate_eigen_expansion_field`];
    /// when absent they are solved from `z0`.
    pub fn with_coefficients(mut self, coefficients: Vec<Complex64>) -> Result<Self, FieldError> {
        if coefficients.len() != self.channels() {
            return Err(FieldError::ChannelMismatch {
                expected: self.channels(),
                found: coefficients.len(),
            });
        }
        self.coefficients = Some(coefficients);
        Ok(self)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn z0(&self) -> &[f64] {
        &self.z0
    }

    pub fn mode(&self) -> GenMode {
        self.mode
    }

    pub fn step_cells(&self) -> usize {
        self.step_cells
    }

    pub fn channels(&self) -> usize {
        self.z0.len()
    }
}

/// Samples the exact solution of `∂z/∂x = Az`, `∂z/∂y = Bz` (continuous mode)
/// or its forward-difference counterpart (discrete mode) on an H×W grid.
pub fn generate_exact_field(
    spec: &FieldGenSpec,
    height: usize,
    width: usize,
    spacing: f64,
) -> Result<FeatureField, FieldError> {
    super::check_shape(height, width, spec.channels(), 2)?;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(FieldError::InvalidSpacing(spacing));
    }
    warn_if_coarse(spec, spacing);

    let (col_ops, row_ops) = match spec.mode {
        GenMode::Continuous => (
            exponential_ops(&spec.a, width, spacing)?,
            exponential_ops(&spec.b, height, spacing)?,
        ),
        GenMode::Discrete => (
            recurrence_ops(&spec.a, width, spacing, spec.step_cells)?,
            recurrence_ops(&spec.b, height, spacing, spec.step_cells)?,
        ),
    };

    let c = spec.channels();
    let mut values = vec![0.0; height * width * c];
    for (row, row_op) in row_ops.iter().enumerate() {
        let base = row_op.mat_vec(&spec.z0);
        for (col, col_op) in col_ops.iter().enumerate() {
            let o = (row * width + col) * c;
            col_op.mat_vec_into(&base, &mut values[o..o + c]);
        }
    }
    check_overflow(&values)?;
    FeatureField::new(height, width, c, spacing, values)
}

/// `e^{M·k·h}` for k = 0..count.
fn exponential_ops(m: &Matrix, count: usize, spacing: f64) -> Result<Vec<Matrix>, FieldError> {
    (0..count)
        .map(|k| mat_exp(m, k as f64 * spacing).map_err(FieldError::from))
        .collect()
}

/// Transition from cell 0 to cell k: `(I + ΔM)^{k div s} · e^{M·(k mod s)·h}`
/// with `Δ = s·h`.
fn recurrence_ops(
    m: &Matrix,
    count: usize,
    spacing: f64,
    step_cells: usize,
) -> Result<Vec<Matrix>, FieldError> {
    let delta = step_cells as f64 * spacing;
    let step = m.scaled(delta).plus_identity(1.0);
    let within: Vec<Matrix> = exponential_ops(m, step_cells.min(count), spacing)?;
    let mut ops = Vec::with_capacity(count);
    let mut power = Matrix::identity(m.rows());
    for k in 0..count {
        let r = k % step_cells;
        if k > 0 && r == 0 {
            power = &step * &power;
        }
        ops.push(if r == 0 {
            power.clone()
        } else {
            &power * &within[r]
        });
    }
    Ok(ops)
}

/// The eigen-expansion route: `z(x, y) = Re Σ c_i e^{λ_i x + π_i y} v_i`,
/// where `v_i` are eigenvectors of A (shared by B), `λ_i`, `π_i` the
/// eigenvalues of A and B, and `Σ c_i v_i = z0`.
///
/// Requires A to have distinct eigenvalues; always samples the continuous
/// solution regardless of `spec.mode`.
pub fn generate_eigen_expansion_field(
    spec: &FieldGenSpec,
    height: usize,
    width: usize,
    spacing: f64,
) -> Result<FeatureField, FieldError> {
    super::check_shape(height, width, spec.channels(), 2)?;
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(FieldError::InvalidSpacing(spacing));
    }
    let c = spec.channels();
    let eig = eigen_spectrum(&spec.a, true)?;
    let lambdas = &eig.eigenvalues;
    let vectors = eig.eigenvectors.as_ref().expect("eigenvectors requested");

    let scale = eig.spectral_radius().max(1.0);
    let mut gap = f64::INFINITY;
    for i in 0..c {
        for j in i + 1..c {
            gap = gap.min((lambdas[i] - lambdas[j]).norm());
        }
    }
    if gap <= 1e-8 * scale {
        return Err(FieldError::RepeatedEigenvalues { gap });
    }

    // B shares the eigenvectors; its eigenvalue is the Rayleigh quotient.
    let pis: Vec<Complex64> = vectors
        .iter()
        .map(|v| {
            let bv: Vec<Complex64> = (0..c)
                .map(|i| (0..c).map(|j| v[j] * spec.b[(i, j)]).sum())
                .collect();
            let num: Complex64 = v.iter().zip(&bv).map(|(vi, bvi)| vi.conj() * bvi).sum();
            let den: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            num / den
        })
        .collect();

    let coefficients = match &spec.coefficients {
        Some(given) => given.clone(),
        None => {
            // Solve V c = z0, V's columns the eigenvectors.
            let mut basis = vec![Complex64::new(0.0, 0.0); c * c];
            for (col, v) in vectors.iter().enumerate() {
                for (row, &z) in v.iter().enumerate() {
                    basis[row * c + col] = z;
                }
            }
            let rhs: Vec<Complex64> = spec.z0.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            complex_solve(&basis, &rhs)?
        }
    };

    let mut values = Vec::with_capacity(height * width * c);
    for row in 0..height {
        let y = row as f64 * spacing;
        for col in 0..width {
            let x = col as f64 * spacing;
            let mut z = vec![Complex64::new(0.0, 0.0); c];
            for i in 0..c {
                let w = coefficients[i] * (lambdas[i] * x + pis[i] * y).exp();
                for (zk, vk) in z.iter_mut().zip(&vectors[i]) {
                    *zk += w * vk;
                }
            }
            values.extend(z.iter().map(|v| v.re));
        }
    }
    check_overflow(&values)?;
    FeatureField::new(height, width, c, spacing, values)
}

fn check_overflow(values: &[f64]) -> Result<(), FieldError> {
    let limit = NumericSettings::default().overflow_limit;
    let worst = values.iter().fold(0.0_f64, |m, v| {
        if v.is_nan() {
            f64::INFINITY
        } else {
            m.max(v.abs())
        }
    });
    if worst > limit {
        return Err(FieldError::Overflow {
            value: worst,
            limit,
        });
    }
    Ok(())
}

fn warn_if_coarse(spec: &FieldGenSpec, spacing: f64) {
    for (name, m) in [("A", &spec.a), ("B", &spec.b)] {
        if let Ok(e) = eigen_spectrum(m, false) {
            let product = spacing * e.spectral_radius();
            if product > 0.5 {
                log::warn!(
                    "spacing·ρ({name}) = {product:.3} > 0.5; the sampled solution grows or decays quickly"
                );
            }
        }
    }
}

/// Standard-normal vector of length `c`.
pub fn random_vector(c: usize, rng: &mut SeedRng) -> Vec<f64> {
    (0..c).map(|_| rng::normal(rng)).collect()
}

/// A commuting pair built as two polynomials `p(M)`, `q(M)` of one random
/// Gaussian matrix, each rescaled to spectral radius `rho_max`.
pub fn random_commuting_pair(
    c: usize,
    rho_max: f64,
    rng: &mut SeedRng,
) -> Result<(Matrix, Matrix), FieldError> {
    let norm = 1.0 / (c as f64).sqrt();
    let base = Matrix::from_fn(c, c, |_, _| rng::normal(rng) * norm);
    let square = &base * &base;
    let mut polynomial = || -> Result<Matrix, FieldError> {
        let coeffs = [
            rng::uniform(rng, -0.5, 0.5),
            rng::uniform(rng, 0.5, 1.5) * if rng::unit(rng) < 0.5 { -1.0 } else { 1.0 },
            rng::uniform(rng, -0.5, 0.5),
        ];
        let p = &(&base.scaled(coeffs[1]) + &square.scaled(coeffs[2])).plus_identity(coeffs[0]);
        let radius = eigen_spectrum(p, false)?.spectral_radius();
        Ok(if radius > 0.0 {
            p.scaled(rho_max / radius)
        } else {
            p.clone()
        })
    };
    let a = polynomial()?;
    let b = polynomial()?;
    Ok((a, b))
}

use num_complex::Complex64;

use super::{require_square, LinalgError, Matrix, NumericSettings};

/// LU factorization with partial pivoting, `P·M = L·U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: Matrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    /// Factors `m`, failing when a pivot falls below `pivot_tol · max|m|`.
    pub fn factor(m: &Matrix, settings: &NumericSettings) -> Result<Self, LinalgError> {
        require_square(m, "lu")?;
        if !m.is_finite() {
            return Err(LinalgError::NonFinite);
        }
        let n = m.rows();
        let threshold = settings.pivot_tol * m.max_abs();
        let mut lu = m.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;

        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|r| (r, lu[(r, k)].abs()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if pmax <= threshold || pmax == 0.0 {
                return Err(LinalgError::Singular { pivot_col: k });
            }
            if p != k {
                for c in 0..n {
                    let tmp = lu[(k, c)];
                    lu[(k, c)] = lu[(p, c)];
                    lu[(p, c)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            for r in k + 1..n {
                let factor = lu[(r, k)] / pivot;
                lu[(r, k)] = factor;
                if factor != 0.0 {
                    for c in k + 1..n {
                        let u = lu[(k, c)];
                        lu[(r, c)] -= factor * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn dim(&self) -> usize {
        self.lu.rows()
    }

    pub fn determinant(&self) -> f64 {
        (0..self.dim()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    /// Solves `M·X = rhs` for every column of `rhs`.
    pub fn solve(&self, rhs: &Matrix) -> Result<Matrix, LinalgError> {
        let n = self.dim();
        if rhs.rows() != n {
            return Err(LinalgError::DimensionMismatch {
                op: "solve",
                left: (n, n),
                right: rhs.shape(),
            });
        }
        let k = rhs.cols();
        let mut x = Matrix::from_fn(n, k, |r, c| rhs[(self.perm[r], c)]);
        for c in 0..k {
            for r in 1..n {
                let mut s = x[(r, c)];
                for j in 0..r {
                    s -= self.lu[(r, j)] * x[(j, c)];
                }
                x[(r, c)] = s;
            }
            for r in (0..n).rev() {
                let mut s = x[(r, c)];
                for j in r + 1..n {
                    s -= self.lu[(r, j)] * x[(j, c)];
                }
                x[(r, c)] = s / self.lu[(r, r)];
            }
        }
        Ok(x)
    }
}

/// Solves `M·X = rhs` by partially pivoted LU.
pub fn solve(m: &Matrix, rhs: &Matrix) -> Result<Matrix, LinalgError> {
    solve_with(m, rhs, &NumericSettings::default())
}

pub fn solve_with(
    m: &Matrix,
    rhs: &Matrix,
    settings: &NumericSettings,
) -> Result<Matrix, LinalgError> {
    require_square(m, "solve")?;
    if rhs.rows() != m.rows() {
        return Err(LinalgError::DimensionMismatch {
            op: "solve",
            left: m.shape(),
            right: rhs.shape(),
        });
    }
    Lu::factor(m, settings)?.solve(rhs)
}

pub fn inverse(m: &Matrix) -> Result<Matrix, LinalgError> {
    require_square(m, "inverse")?;
    solve(m, &Matrix::identity(m.rows()))
}

/// Determinant via LU; a singular matrix yields `0.0` rather than an error.
pub fn determinant(m: &Matrix) -> Result<f64, LinalgError> {
    require_square(m, "determinant")?;
    let relaxed = NumericSettings {
        pivot_tol: 0.0,
        ..NumericSettings::default()
    };
    match Lu::factor(m, &relaxed) {
        Ok(lu) => Ok(lu.determinant()),
        Err(LinalgError::Singular { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Ridge regression for a linear map between paired columns.
///
/// `x` and `y` are C×N (one sample per column). Returns the C×C matrix
/// minimizing `‖Y − M·X‖²_F + ridge·‖M‖²_F`, which equals
/// `Y·Xᵀ·(X·Xᵀ + ridge·I)⁻¹`. The normal equations are never formed: the
/// problem is solved by Householder QR of the stacked system
/// `[Xᵀ; √ridge·I]·Mᵀ ≈ [Yᵀ; 0]`.
pub fn least_squares(x: &Matrix, y: &Matrix, ridge: f64) -> Result<Matrix, LinalgError> {
    least_squares_with(x, y, ridge, &NumericSettings::default())
}

pub fn least_squares_with(
    x: &Matrix,
    y: &Matrix,
    ridge: f64,
    settings: &NumericSettings,
) -> Result<Matrix, LinalgError> {
    if x.shape() != y.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "least_squares",
            left: x.shape(),
            right: y.shape(),
        });
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(LinalgError::InvalidRidge(ridge));
    }
    if !x.is_finite() || !y.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let (c, n) = x.shape();
    let extra = if ridge > 0.0 { c } else { 0 };
    let m = n + extra;
    if m < c {
        return Err(LinalgError::Singular { pivot_col: m });
    }

    // Column-major working copies: design[j] is column j of the stacked design.
    let sqrt_ridge = ridge.sqrt();
    let mut design: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut col = x.row(j).to_vec();
            col.extend((0..extra).map(|i| if i == j { sqrt_ridge } else { 0.0 }));
            col
        })
        .collect();
    let mut target: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut col = y.row(j).to_vec();
            col.resize(m, 0.0);
            col
        })
        .collect();

    let mut diag = vec![0.0; c];
    for k in 0..c {
        let norm = design[k][k..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            diag[k] = 0.0;
            continue;
        }
        let alpha = if design[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = design[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|a| a * a).sum();
        if vnorm2 == 0.0 {
            diag[k] = alpha;
            continue;
        }
        let reflect = |col: &mut Vec<f64>| {
            let dot: f64 = col[k..].iter().zip(&v).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (a, b) in col[k..].iter_mut().zip(&v) {
                *a -= f * b;
            }
        };
        for col in design.iter_mut().skip(k) {
            reflect(col);
        }
        for col in target.iter_mut() {
            reflect(col);
        }
        diag[k] = design[k][k];
    }

    let scale = diag.iter().fold(0.0_f64, |a, d| a.max(d.abs()));
    for (k, d) in diag.iter().enumerate() {
        if d.abs() <= settings.pivot_tol * scale || *d == 0.0 {
            return Err(LinalgError::Singular { pivot_col: k });
        }
    }

    // Back-substitute R·W = Qᵀ·target, W = Mᵀ.
    let mut w = Matrix::zeros(c, c);
    for out_col in 0..c {
        for r in (0..c).rev() {
            let mut s = target[out_col][r];
            for j in r + 1..c {
                s -= design[j][r] * w[(j, out_col)];
            }
            w[(r, out_col)] = s / design[r][r];
        }
    }
    Ok(w.transpose())
}

/// Solves a dense complex system `A·x = b`, `a` row-major n×n.
pub fn complex_solve(a: &[Complex64], b: &[Complex64]) -> Result<Vec<Complex64>, LinalgError> {
    let n = b.len();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    if a.len() != n * n {
        return Err(LinalgError::DimensionMismatch {
            op: "complex_solve",
            left: (a.len() / n.max(1), n),
            right: (n, 1),
        });
    }
    let settings = NumericSettings::default();
    let scale = a.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|r| (r, m[r * n + k].norm()))
            .fold(
                (k, -1.0),
                |best, cur| if cur.1 > best.1 { cur } else { best },
            );
        if pmax <= settings.pivot_tol * scale || pmax == 0.0 {
            return Err(LinalgError::Singular { pivot_col: k });
        }
        if p != k {
            for c in 0..n {
                m.swap(k * n + c, p * n + c);
            }
            x.swap(k, p);
        }
        let pivot = m[k * n + k];
        for r in k + 1..n {
            let f = m[r * n + k] / pivot;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            for c in k..n {
                let u = m[k * n + c];
                m[r * n + c] -= f * u;
            }
            let xk = x[k];
            x[r] -= f * xk;
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= m[r * n + c] * x[c];
        }
        x[r] = s / m[r * n + r];
    }
    Ok(x)
}

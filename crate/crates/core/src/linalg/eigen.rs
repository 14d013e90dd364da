use num_complex::Complex64;

use super::{require_square, LinalgError, Matrix, NumericSettings};

/// Complex eigen-spectrum of a real square matrix.
///
/// Eigenvalues are sorted by descending magnitude (ties: larger real part,
/// then larger imaginary part first), so complex-conjugate pairs are adjacent
/// with the positive imaginary part leading.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<Complex64>,
    /// Unit-norm eigenvectors, parallel to `eigenvalues`, when requested.
    pub eigenvectors: Option<Vec<Vec<Complex64>>>,
    pub source_dim: usize,
}

impl EigenDecomposition {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.eigenvalues.iter().map(|z| z.norm()).collect()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.first().map_or(0.0, |z| z.norm())
    }

    pub fn sum(&self) -> Complex64 {
        self.eigenvalues.iter().sum()
    }

    pub fn product(&self) -> Complex64 {
        self.eigenvalues.iter().product()
    }

    /// Index pairs `(i, i+1)` holding complex-conjugate eigenvalues.
    pub fn conjugate_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        let mut i = 0;
        while i + 1 < self.eigenvalues.len() {
            let (a, b) = (self.eigenvalues[i], self.eigenvalues[i + 1]);
            if a.im != 0.0 && a.re == b.re && a.im == -b.im {
                pairs.push((i, i + 1));
                i += 2;
            } else {
                i += 1;
            }
        }
        pairs
    }
}

pub fn eigen_spectrum(m: &Matrix, want_vectors: bool) -> Result<EigenDecomposition, LinalgError> {
    eigen_spectrum_with(m, want_vectors, &NumericSettings::default())
}

pub fn eigen_spectrum_with(
    m: &Matrix,
    want_vectors: bool,
    settings: &NumericSettings,
) -> Result<EigenDecomposition, LinalgError> {
    require_square(m, "eigen_spectrum")?;
    let n = m.rows();
    if n > settings.eig_max_dim {
        return Err(LinalgError::TooLarge {
            dim: n,
            max: settings.eig_max_dim,
        });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }

    let mut h = m.clone();
    balance(&mut h);
    reduce_to_hessenberg(&mut h);
    let mut eigenvalues = hessenberg_qr(h, settings.eig_sweeps_per_value)?;
    eigenvalues.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });

    let eigenvectors = want_vectors.then(|| {
        let mut vectors: Vec<Vec<Complex64>> = Vec::with_capacity(n);
        for (i, &lambda) in eigenvalues.iter().enumerate() {
            // The conjugate of a conjugate pair's leading vector is exact.
            if lambda.im < 0.0 && i > 0 && eigenvalues[i - 1] == lambda.conj() {
                let prev: Vec<Complex64> = vectors[i - 1].iter().map(|z| z.conj()).collect();
                vectors.push(prev);
            } else {
                vectors.push(inverse_iteration(m, lambda));
            }
        }
        vectors
    });

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        source_dim: n,
    })
}

/// Diagonal similarity scaling by powers of two so that row and column
/// norms are comparable; improves eigenvalue accuracy, preserves the spectrum.
fn balance(a: &mut Matrix) {
    const RADIX: f64 = 2.0;
    let n = a.rows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / RADIX;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                let inv = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= inv;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Householder reduction to upper Hessenberg form (orthogonal similarity).
fn reduce_to_hessenberg(a: &mut Matrix) {
    let n = a.rows();
    if n < 3 {
        return;
    }
    for k in 0..n - 2 {
        let norm = (k + 1..n).map(|i| a[(i, k)].powi(2)).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[(k + 1, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k + 1..n).map(|i| a[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // A ← (I − 2vvᵀ/vᵀv) A
        for j in 0..n {
            let dot: f64 = (k + 1..n).zip(&v).map(|(i, vi)| vi * a[(i, j)]).sum();
            let f = 2.0 * dot / vnorm2;
            for (i, vi) in (k + 1..n).zip(&v) {
                a[(i, j)] -= f * vi;
            }
        }
        // A ← A (I − 2vvᵀ/vᵀv)
        for i in 0..n {
            let dot: f64 = (k + 1..n).zip(&v).map(|(j, vj)| a[(i, j)] * vj).sum();
            let f = 2.0 * dot / vnorm2;
            for (j, vj) in (k + 1..n).zip(&v) {
                a[(i, j)] -= f * vj;
            }
        }
        for i in k + 2..n {
            a[(i, k)] = 0.0;
        }
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix, deflating 1×1 and
/// 2×2 blocks off the bottom. Exceptional shifts every 10 stalled sweeps.
fn hessenberg_qr(mut a: Matrix, sweep_budget: usize) -> Result<Vec<Complex64>, LinalgError> {
    let n = a.rows();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }

    let mut total_sweeps = 0usize;
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut its = 0usize;
    while nn >= 0 {
        let nu = nn as usize;
        // Find a negligible subdiagonal element.
        let mut l = nu;
        while l >= 1 {
            let mut s = a[(l - 1, l - 1)].abs() + a[(l, l)].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[(l, l - 1)].abs() <= eps * s {
                a[(l, l - 1)] = 0.0;
                break;
            }
            l -= 1;
        }

        let mut x = a[(nu, nu)];
        if l == nu {
            out[nu] = Complex64::new(x + t, 0.0);
            nn -= 1;
            its = 0;
            continue;
        }
        let mut y = a[(nu - 1, nu - 1)];
        let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
        if l == nu - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let z = q.abs().sqrt();
            x += t;
            if q >= 0.0 {
                let z = p + z.copysign(p);
                let hi = x + z;
                let lo = if z != 0.0 { x - w / z } else { hi };
                out[nu - 1] = Complex64::new(hi, 0.0);
                out[nu] = Complex64::new(lo, 0.0);
            } else {
                out[nu - 1] = Complex64::new(x + p, z);
                out[nu] = Complex64::new(x + p, -z);
            }
            nn -= 2;
            its = 0;
            continue;
        }

        if its >= sweep_budget {
            return Err(LinalgError::NoConvergence {
                remaining: nu + 1,
                iterations: total_sweeps,
            });
        }
        if its > 0 && its.is_multiple_of(10) {
            t += x;
            for i in 0..=nu {
                a[(i, i)] -= x;
            }
            let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;
        total_sweeps += 1;

        // Look for two consecutive small subdiagonal elements.
        let mut m = nu - 2;
        let (mut p, mut q, mut r);
        loop {
            let z = a[(m, m)];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
            q = a[(m + 1, m + 1)] - z - rr - ss;
            r = a[(m + 2, m + 1)];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in m + 2..=nu {
            a[(i, i - 2)] = 0.0;
            if i != m + 2 {
                a[(i, i - 3)] = 0.0;
            }
        }

        // Double-shift QR step on rows/columns l..=nu.
        for k in m..nu {
            if k != m {
                p = a[(k, k - 1)];
                q = a[(k + 1, k - 1)];
                r = if k != nu - 1 { a[(k + 2, k - 1)] } else { 0.0 };
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = (p * p + q * q + r * r).sqrt().copysign(p);
            if s == 0.0 {
                continue;
            }
            if k == m {
                if l != m {
                    a[(k, k - 1)] = -a[(k, k - 1)];
                }
            } else {
                a[(k, k - 1)] = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            let z = r / s;
            q /= p;
            r /= p;
            for j in k..=nu {
                let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                if k != nu - 1 {
                    pp += r * a[(k + 2, j)];
                    a[(k + 2, j)] -= pp * z;
                }
                a[(k + 1, j)] -= pp * y;
                a[(k, j)] -= pp * x;
            }
            let mmin = nu.min(k + 3);
            for i in l..=mmin {
                let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                if k != nu - 1 {
                    pp += z * a[(i, k + 2)];
                    a[(i, k + 2)] -= pp * r;
                }
                a[(i, k + 1)] -= pp * q;
                a[(i, k)] -= pp;
            }
        }
    }
    Ok(out)
}

/// Eigenvector for `lambda` by shifted inverse iteration on the original
/// matrix in complex arithmetic. Returned with unit 2-norm and the
/// largest-magnitude component real and positive.
fn inverse_iteration(m: &Matrix, lambda: Complex64) -> Vec<Complex64> {
    let n = m.rows();
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let shift = lambda + Complex64::new(scale * 1e-12, scale * 1e-13);
    let mut shifted: Vec<Complex64> = m
        .as_slice()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    for i in 0..n {
        shifted[i * n + i] -= shift;
    }
    let lu = ComplexLu::factor(shifted, n, scale * f64::EPSILON);

    let mut v: Vec<Complex64> = (0..n)
        .map(|i| Complex64::new(1.0 / (i as f64 + 1.0).sqrt(), 0.0))
        .collect();
    normalize(&mut v);
    let tolerance = 1e-10 * scale;
    for step in 0..8 {
        v = lu.solve(&v);
        normalize(&mut v);
        if step >= 2 && residual_norm(m, lambda, &v) <= tolerance {
            break;
        }
    }

    let lead = v
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(Complex64::new(1.0, 0.0));
    if lead.norm() > 0.0 {
        let phase = lead.conj() / lead.norm();
        for z in &mut v {
            *z *= phase;
        }
    }
    v
}

fn normalize(v: &mut [Complex64]) {
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 && norm.is_finite() {
        for z in v.iter_mut() {
            *z /= norm;
        }
    }
}

/// `‖M·v − λ·v‖₂`.
pub(crate) fn residual_norm(m: &Matrix, lambda: Complex64, v: &[Complex64]) -> f64 {
    let n = m.rows();
    (0..n)
        .map(|i| {
            let mv: Complex64 = (0..n).map(|j| v[j] * m[(i, j)]).sum();
            (mv - lambda * v[i]).norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// LU for inverse iteration: exactly-zero or tiny pivots are replaced by a
/// small value instead of failing, since the shifted matrix is meant to be
/// nearly singular.
struct ComplexLu {
    lu: Vec<Complex64>,
    perm: Vec<usize>,
    n: usize,
}

impl ComplexLu {
    fn factor(mut a: Vec<Complex64>, n: usize, tiny: f64) -> Self {
        let mut perm: Vec<usize> = (0..n).collect();
        let tiny = tiny.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| a[x * n + k].norm().total_cmp(&a[y * n + k].norm()))
                .unwrap_or(k);
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            if a[k * n + k].norm() < tiny {
                a[k * n + k] = Complex64::new(tiny, 0.0);
            }
            let pivot = a[k * n + k];
            for r in k + 1..n {
                let f = a[r * n + k] / pivot;
                a[r * n + k] = f;
                for c in k + 1..n {
                    let u = a[k * n + c];
                    a[r * n + c] -= f * u;
                }
            }
        }
        Self { lu: a, perm, n }
    }

    fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut x: Vec<Complex64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 1..n {
            let row = &self.lu[r * n..r * n + r];
            let s: Complex64 = row.iter().zip(&x[..r]).map(|(l, v)| l * v).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let row = &self.lu[r * n + r + 1..(r + 1) * n];
            let s: Complex64 = row.iter().zip(&x[r + 1..]).map(|(u, v)| u * v).sum();
            x[r] = (x[r] - s) / self.lu[r * n + r];
        }
        x
    }
}

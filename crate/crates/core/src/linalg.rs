//! Small dense kernels for the primal-form ridge computations.
//!
//! Everything here works on `p × p` systems with `p` small and fixed, so the
//! routines are plain loops over row-major storage. The only factorization is
//! Cholesky: every system solved in this crate is `X'X + aI`, which is
//! symmetric positive (semi)definite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used for symmetry checks.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Cholesky pivots must exceed this multiple of the largest diagonal entry.
pub const PIVOT_TOL: f64 = 1e-12;

/// Dense row-major matrix with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidInput(format!(
                "matrix must be non-empty, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(p: usize) -> Self {
        let mut m = Self::zeros(p, p);
        for i in 0..p {
            m.data[i * p + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// `X'X` for this matrix `X`.
    pub fn gram(&self) -> Matrix {
        let p = self.cols;
        let mut g = Matrix::zeros(p, p);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..p {
                let xi = row[i];
                if xi == 0.0 {
                    continue;
                }
                for j in i..p {
                    g.data[i * p + j] += xi * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                g.data[i * p + j] = g.data[j * p + i];
            }
        }
        g
    }

    /// `X'v`.
    pub fn transpose_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.rows, v.len())?;
        let mut out = vec![0.0; self.cols];
        for (r, &vr) in v.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.row(r)) {
                *o += x * vr;
            }
        }
        Ok(out)
    }

    /// `Xv`.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, v.len())?;
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    pub fn add_diagonal(&mut self, a: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self.data[i * self.cols + i] += a;
        }
    }

    /// Adds `s · v v'` in place.
    pub fn add_outer(&mut self, v: &[f64], s: f64) -> Result<()> {
        if !self.is_square() {
            return Err(Error::InvalidInput("add_outer needs a square matrix".into()));
        }
        check_len(self.rows, v.len())?;
        let p = self.cols;
        for i in 0..p {
            for j in 0..p {
                self.data[i * p + j] += s * v[i] * v[j];
            }
        }
        Ok(())
    }

    /// Largest absolute asymmetry, as `(row, col, gap)`.
    fn max_asymmetry(&self) -> (usize, usize, f64) {
        let mut worst = (0, 0, 0.0);
        for i in 0..self.rows {
            for j in 0..i {
                let gap = (self.get(i, j) - self.get(j, i)).abs();
                if gap > worst.2 {
                    worst = (i, j, gap);
                }
            }
        }
        worst
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Fails with `NotSymmetric` unless entries agree within the relative tolerance.
    pub fn check_symmetric(&self) -> Result<()> {
        if !self.is_square() {
            return Err(Error::InvalidInput(format!(
                "expected a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let (row, col, gap) = self.max_asymmetry();
        if gap > SYMMETRY_TOL * self.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NotSymmetric { row, col, gap });
        }
        Ok(())
    }

    /// `(M + M')/2`.
    pub fn symmetrized(&self) -> Matrix {
        let mut out = self.clone();
        let p = self.cols;
        for i in 0..p {
            for j in 0..i {
                let m = 0.5 * (self.get(i, j) + self.get(j, i));
                out.data[i * p + j] = m;
                out.data[j * p + i] = m;
            }
        }
        out
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Lower-triangular Cholesky factor `L` with `M = L L'`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factorizes the symmetrized input. A pivot at or below
    /// `PIVOT_TOL · max|diag|` is reported as `SingularSystem`.
    pub fn factor(m: &Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidInput(format!(
                "cholesky needs a square matrix, got {}x{}",
                m.rows, m.cols
            )));
        }
        let m = m.symmetrized();
        let n = m.rows;
        let max_diag = (0..n).fold(0.0_f64, |acc, i| acc.max(m.get(i, i).abs()));
        let tol = PIVOT_TOL * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut d = m.get(j, j);
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > tol) {
                return Err(Error::SingularSystem { column: j, pivot: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L z = b`.
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.l[i * n + k] * z[k];
            }
            z[i] = s / self.l[i * n + i];
        }
        z
    }

    /// Solves `M x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let n = self.n;
        let mut x = self.forward(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        Ok(x)
    }

    /// `v' M⁻¹ v`, evaluated as `‖L⁻¹ v‖²` so it is never negative.
    pub fn inverse_quad_form(&self, v: &[f64]) -> Result<f64> {
        check_len(self.n, v.len())?;
        Ok(self.forward(v).iter().map(|z| z * z).sum())
    }
}

/// Returns `true` iff the Cholesky factorization succeeds with positive pivots.
pub fn is_positive_definite(m: &Matrix) -> Result<bool> {
    m.check_symmetric()?;
    match Cholesky::factor(m) {
        Ok(_) => Ok(true),
        Err(Error::SingularSystem { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

/// `X'X + aI`, checked against the design `x` and ridge parameter `a`.
pub fn ridge_gram(x: &Matrix, a: f64) -> Result<Matrix> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::domain("a", a, "[0, inf)"));
    }
    let mut g = x.gram();
    g.add_diagonal(a);
    Ok(g)
}

/// Ridge weights `(X'X + aI)⁻¹ X'Y`.
pub fn ridge_solve(x: &Matrix, y: &[f64], a: f64) -> Result<Vec<f64>> {
    let chol = Cholesky::factor(&ridge_gram(x, a)?)?;
    chol.solve(&x.transpose_mul_vec(y)?)
}

/// Ridge fit on a training design together with the leverage quantities of
/// one test object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageProfile {
    /// Ridge weight vector fitted on the training design.
    pub weights: Vec<f64>,
    /// Point prediction `x_n' ŵ` for the test object.
    pub prediction: f64,
    /// Fitted values `x_i' ŵ` of the training objects.
    pub fitted: Vec<f64>,
    /// `g_n = x_n' (X'X + aI)⁻¹ x_n`.
    pub test_leverage: f64,
    /// `g_i = x_i' (X'X + aI)⁻¹ x_n`; may be negative.
    pub cross_leverages: Vec<f64>,
}

impl LeverageProfile {
    /// Training residuals `y_i - ŷ_i`.
    pub fn residuals(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.fitted).map(|(y, f)| y - f).collect()
    }
}

/// One factorization of `X'X + aI` yields the weights, the test leverage
/// and every cross-leverage.
pub fn leverage_profile(x: &Matrix, y: &[f64], x_test: &[f64], a: f64) -> Result<LeverageProfile> {
    check_len(x.rows(), y.len())?;
    check_len(x.cols(), x_test.len())?;
    let chol = Cholesky::factor(&ridge_gram(x, a)?)?;
    let weights = chol.solve(&x.transpose_mul_vec(y)?)?;
    let u = chol.solve(x_test)?;
    let test_leverage = chol.inverse_quad_form(x_test)?;
    let mut fitted = Vec::with_capacity(x.rows());
    let mut cross_leverages = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = x.row(r);
        fitted.push(dot(row, &weights));
        cross_leverages.push(dot(row, &u));
    }
    Ok(LeverageProfile {
        prediction: dot(x_test, &weights),
        weights,
        fitted,
        test_leverage,
        cross_leverages,
    })
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues and the eigenvectors as columns of a row-major matrix.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    m.check_symmetric()?;
    let n = m.rows();
    let mut a = m.symmetrized();
    let mut v = Matrix::identity(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a.get(i, j).powi(2))
            .sum();
        let scale: f64 = a.as_slice().iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (a.get(q, q) - a.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }
    let values = (0..n).map(|i| a.get(i, i)).collect();
    Ok((values, v))
}

/// `μ'Σ⁻¹μ` with `Σ = C + μμ'`, computed as `s/(1+s)` where `s = μ'C⁻¹μ`.
///
/// A singular `C` is handled as the limit of `C + δI` for `δ ↓ 0`: any
/// component of `μ` in the null space of `C` drives `s` to infinity and the
/// result to 1; otherwise `s` is the pseudo-inverse quadratic form.
pub fn quadform_identity(mu: &[f64], c: &Matrix) -> Result<f64> {
    check_len(c.rows(), mu.len())?;
    let (values, vectors) = symmetric_eigen(c)?;
    let lmax = values.iter().fold(0.0_f64, |m, &l| m.max(l));
    let null_tol = PIVOT_TOL * lmax;
    let mu_norm2 = dot(mu, mu);
    if mu_norm2 == 0.0 {
        return Ok(0.0);
    }
    let mut s = 0.0;
    for (k, &lambda) in values.iter().enumerate() {
        let proj: f64 = (0..mu.len()).map(|i| vectors.get(i, k) * mu[i]).sum();
        let proj2 = proj * proj;
        if lambda <= null_tol {
            if proj2 > 1e-20 * mu_norm2 {
                return Ok(1.0);
            }
        } else {
            s += proj2 / lambda;
        }
    }
    Ok((s / (1.0 + s)).clamp(0.0, 1.0))
}

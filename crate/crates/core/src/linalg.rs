//! Dense linear algebra for small symmetric systems.
//!
//! Covariance matrices in this crate are at most a few hundred rows, so a
//! plain row-major `Vec<f64>` with textbook factorizations is sufficient.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

/// Relative tolerance used when checking symmetry of input matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Relative ridge applied when an unregularized factorization fails.
pub const DEFAULT_RELATIVE_RIDGE: f64 = 1e-10;

/// Number of times the ridge is doubled before giving up.
pub const MAX_RIDGE_DOUBLINGS: usize = 6;

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITERS: usize = 10_000;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row slices; all rows must have the same length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                    context: "matrix row length",
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x`
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        out
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
                context: "matrix product",
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                found: other.rows * other.cols,
                context: "matrix difference",
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    /// Spectral norm `‖A‖₂` by power iteration on `AᵀA`.
    pub fn spectral_norm(&self) -> f64 {
        let (rows, cols) = (self.rows, self.cols);
        if rows == 0 || cols == 0 {
            return 0.0;
        }
        let lambda = power_iteration(cols, |x| self.tr_matvec(&self.matvec(x)));
        libm::sqrt(lambda.max(0.0))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A square matrix known to be symmetric (to [`SYMMETRY_TOL`]) with finite entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(Matrix);

impl SymMatrix {
    /// Validates symmetry and finiteness, then symmetrizes exactly.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.rows != m.cols {
            return Err(Error::DimensionMismatch {
                expected: m.rows,
                found: m.cols,
                context: "square matrix",
            });
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix"));
        }
        let scale = m.data.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let n = m.rows;
        let mut m = m;
        for i in 0..n {
            for j in 0..i {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if (a - b).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::NotSymmetric { row: i, col: j });
                }
                let avg = 0.5 * (a + b);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        Ok(Self(m))
    }

    /// Builds a symmetric matrix from its lower triangle (`j <= i`).
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Self(m)
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self(Matrix::from_diagonal(diag))
    }

    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)]).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)]).collect()
    }

    pub fn with_ridge(&self, ridge: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..m.rows {
            m[(i, i)] += ridge;
        }
        SymMatrix(m)
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        let d = other.0.scaled(-1.0);
        self.0.sub(&d).map(SymMatrix)
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.0.sub(&other.0).map(SymMatrix)
    }

    pub fn scaled(&self, s: f64) -> SymMatrix {
        SymMatrix(self.0.scaled(s))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.0.matvec(x)
    }

    /// Principal submatrix on `idx` (in the given order).
    pub fn submatrix(&self, idx: &[usize]) -> SymMatrix {
        SymMatrix::from_lower_fn(idx.len(), |i, j| self.0[(idx[i], idx[j])])
    }

    /// Largest absolute eigenvalue, by power iteration.
    pub fn spectral_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let lambda = power_iteration(self.dim(), |x| {
            // Iterating on A² keeps the Rayleigh quotient non-negative even for
            // indefinite A; the norm is its square root.
            let y = self.0.matvec(x);
            self.0.matvec(&y)
        })
        .max(0.0);
        libm::sqrt(lambda)
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Cholesky factor `A + ridge·I = L Lᵀ`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    lower: Matrix,
    ridge: f64,
    escalated: bool,
}

impl Cholesky {
    /// Factors `a + ridge·I`; fails on the first pivot that is not
    /// numerically positive.
    pub fn factor(a: &SymMatrix, ridge: f64) -> Result<Self> {
        let n = a.dim();
        let max_diag = (0..n).fold(0.0f64, |m, i| m.max((a[(i, i)] + ridge).abs()));
        let floor = (n.max(1) as f64) * f64::EPSILON * max_diag;
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)] + ridge;
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !d.is_finite() || d <= floor || d <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    context: "cholesky",
                });
            }
            let ljj = libm::sqrt(d);
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let mut s = a[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self {
            lower: l,
            ridge,
            escalated: false,
        })
    }

    /// Factors `a + ridge·I`, and on failure retries with a ridge of
    /// `max(2·ridge, 1e-10·trace/n)` doubled up to six times.
    pub fn factor_regularized(a: &SymMatrix, ridge: f64) -> Result<Self> {
        match Self::factor(a, ridge) {
            Ok(c) => Ok(c),
            Err(_) => {
                let n = a.dim().max(1) as f64;
                let mean_diag = a.trace() / n;
                let scale = if mean_diag > 0.0 { mean_diag } else { 1.0 };
                let mut r = (2.0 * ridge).max(DEFAULT_RELATIVE_RIDGE * scale);
                for _ in 0..=MAX_RIDGE_DOUBLINGS {
                    if let Ok(mut c) = Self::factor(a, r) {
                        c.escalated = true;
                        return Ok(c);
                    }
                    r *= 2.0;
                }
                Err(Error::NotPositiveDefinite {
                    context: "cholesky after ridge escalation",
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.rows
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    /// Ridge actually added to the diagonal.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    /// Whether the ridge had to be increased beyond the requested value.
    pub fn escalated(&self) -> bool {
        self.escalated
    }

    /// Solves `L z = b`.
    pub fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut z = b.to_vec();
        for i in 0..n {
            let row = self.lower.row(i);
            let s = z[i] - dot(&row[..i], &z[..i]);
            z[i] = s / row[i];
        }
        z
    }

    /// Solves `Lᵀ x = z`.
    pub fn backward(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = z.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lower[(k, i)] * x[k];
            }
            x[i] = s / self.lower[(i, i)];
        }
        x
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.backward(&self.forward(b))
    }

    /// `bᵀ A⁻¹ b`
    pub fn quad_form(&self, b: &[f64]) -> f64 {
        let z = self.forward(b);
        dot(&z, &z)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim())
            .map(|i| libm::log(self.lower[(i, i)]))
            .sum::<f64>()
    }

    pub fn inverse(&self) -> SymMatrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        SymMatrix::from_lower_fn(n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)]))
    }

    /// `‖(A + ridge·I)⁻¹‖₂` by power iteration with repeated solves.
    pub fn inverse_spectral_norm(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let lambda = power_iteration(self.dim(), |x| {
            let y = self.solve(x);
            self.solve(&y)
        });
        libm::sqrt(lambda.max(0.0))
    }
}

/// Solves `(A + ridge·I) x = b` by Cholesky.
pub fn cholesky_solve(a: &SymMatrix, b: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
            context: "right-hand side",
        });
    }
    if ridge < 0.0 {
        return Err(Error::InvalidArgument("ridge must be non-negative".into()));
    }
    Ok(Cholesky::factor(a, ridge)?.solve(b))
}

/// Result of a greedy diagonal-pivoted Cholesky factorization.
///
/// `factor` holds `L` with rows in the original index order, so that
/// `W ≈ L Lᵀ`; its column `k` belongs to pivot `pivots[k]`.
#[derive(Clone, Debug)]
pub struct PivotedCholesky {
    factor: Matrix,
    pivots: Vec<usize>,
    rank: usize,
    residual_diag: Vec<f64>,
}

impl PivotedCholesky {
    /// Full permutation: the `rank` chosen pivots followed by the unused
    /// indices in increasing order.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn selected(&self) -> &[usize] {
        &self.pivots[..self.rank]
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Residual diagonal of each chosen pivot at the moment it was chosen.
    pub fn residual_diag(&self) -> &[f64] {
        &self.residual_diag
    }

    /// The `n × rank` factor, rows in original order.
    pub fn factor(&self) -> &Matrix {
        &self.factor
    }

    /// Lower-triangular factor of the principal submatrix on the first `k`
    /// pivots (rows and columns in pivot order).
    pub fn leading_factor(&self, k: usize) -> Cholesky {
        let k = k.min(self.rank);
        let lower = Matrix::from_fn(k, k, |i, j| {
            if j <= i {
                self.factor[(self.pivots[i], j)]
            } else {
                0.0
            }
        });
        Cholesky {
            lower,
            ridge: 0.0,
            escalated: false,
        }
    }

    /// `L Lᵀ` in original ordering.
    pub fn reconstruct(&self) -> SymMatrix {
        let n = self.factor.rows;
        SymMatrix::from_lower_fn(n, |i, j| {
            dot(self.factor.row(i), self.factor.row(j))
        })
    }
}

/// Pivoted Cholesky: at each step pivots on the largest residual diagonal
/// (lowest index on ties) and stops once it drops to
/// `threshold · (initial max diagonal)` or all columns are used.
pub fn pivoted_cholesky(w: &SymMatrix, threshold: f64) -> Result<PivotedCholesky> {
    let n = w.dim();
    let mut d = w.diagonal();
    let max0 = d.iter().fold(0.0f64, |a, &v| a.max(v));
    let neg_tol = -1e-8 * max0.max(f64::MIN_POSITIVE);
    if let Some(&v) = d.iter().find(|&&v| v < neg_tol) {
        return Err(Error::NegativeDiagonal { step: 0, value: v });
    }
    let mut used = vec![false; n];
    let mut pivots = Vec::with_capacity(n);
    let mut residual = Vec::with_capacity(n);
    let mut cols: Vec<Vec<f64>> = Vec::new();
    let stop = threshold * max0;

    for step in 0..n {
        let mut best: Option<usize> = None;
        for j in 0..n {
            if used[j] {
                continue;
            }
            if d[j] < neg_tol {
                return Err(Error::NegativeDiagonal { step, value: d[j] });
            }
            match best {
                Some(b) if d[j] <= d[b] => {}
                _ => best = Some(j),
            }
        }
        let Some(p) = best else { break };
        if d[p] <= stop || d[p] <= 0.0 {
            break;
        }
        let lpp = libm::sqrt(d[p]);
        let mut col = vec![0.0; n];
        col[p] = lpp;
        for j in 0..n {
            if used[j] || j == p {
                continue;
            }
            let mut s = w[(j, p)];
            for c in &cols {
                s -= c[j] * c[p];
            }
            col[j] = s / lpp;
            d[j] -= col[j] * col[j];
        }
        used[p] = true;
        residual.push(d[p]);
        d[p] = 0.0;
        pivots.push(p);
        cols.push(col);
    }

    let rank = pivots.len();
    pivots.extend((0..n).filter(|&j| !used[j]));
    let factor = Matrix::from_fn(n, rank, |i, k| cols[k][i]);
    Ok(PivotedCholesky {
        factor,
        pivots,
        rank,
        residual_diag: residual,
    })
}

/// Right side of `‖(A+ΔA)⁻¹ − A⁻¹‖₂ ≤ ‖A⁻¹‖₂² ‖ΔA‖₂`.
pub fn inverse_perturbation_bound(a: &SymMatrix, da: &SymMatrix) -> Result<f64> {
    if a.dim() != da.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: da.dim(),
            context: "perturbation",
        });
    }
    let chol = Cholesky::factor(a, 0.0).map_err(|_| Error::Singular { context: "A" })?;
    let perturbed = a.add(da)?;
    Cholesky::factor(&perturbed, 0.0).map_err(|_| Error::Singular { context: "A + dA" })?;
    let inv_norm = chol.inverse_spectral_norm();
    Ok(inv_norm * inv_norm * da.spectral_norm())
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator.
pub(crate) fn power_iteration(n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> f64 {
    // Fixed pseudo-random start so that results are reproducible.
    let mut state: u64 = 0x9E37_79B9_7F4A_7C15;
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.5 + (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let nx = norm2(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        let y = apply(&x);
        let ny = norm2(&y);
        if ny == 0.0 || !ny.is_finite() {
            return if ny.is_finite() { 0.0 } else { f64::INFINITY };
        }
        let next = dot(&x, &y);
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            // One more application gives ‖A x‖ ≥ xᵀAx for the converged vector.
            return next.max(ny_of(&mut apply, &x));
        }
        lambda = next;
    }
    lambda
}

fn ny_of(apply: &mut impl FnMut(&[f64]) -> Vec<f64>, x: &[f64]) -> f64 {
    norm2(&apply(x))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

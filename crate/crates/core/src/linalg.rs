//! Dense symmetric kernels: Cholesky factorization, triangular solve and
//! inversion, and a cyclic Jacobi eigensolver.
//!
//! Symmetric and lower-triangular matrices share one storage scheme: the lower
//! triangle packed row by row, so entry `(i, j)` with `j <= i` lives at
//! `i * (i + 1) / 2 + j` and row `i` is the contiguous slice of length `i + 1`.

use crate::error::{GdcError, Result};
use crate::scalar::{dot, Real};

/// Jacobi sweeps allowed before giving up.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to `‖A‖_F`.
pub const JACOBI_REL_TOL: f64 = 1e-12;

#[inline]
pub(crate) fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

#[inline]
fn row_start(i: usize) -> usize {
    i * (i + 1) / 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    order: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(order: usize) -> Self {
        assert!(order >= 1, "matrix order must be positive");
        Self { order, data: vec![T::zero(); packed_len(order)] }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        m.add_to_diagonal(T::one());
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, v) in diag.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    pub fn from_packed(order: usize, data: Vec<T>) -> Result<Self> {
        if order == 0 {
            return Err(GdcError::DimensionMismatch { expected: 1, found: 0 });
        }
        if data.len() != packed_len(order) {
            return Err(GdcError::DimensionMismatch { expected: packed_len(order), found: data.len() });
        }
        Ok(Self { order, data })
    }

    /// Builds a matrix from `f(i, j)` evaluated on the lower triangle only.
    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            for j in 0..=i {
                m.data[row_start(i) + j] = f(i, j);
            }
        }
        m
    }

    /// Reads the lower triangle of a row-major `order x order` array.
    pub fn from_dense_lower(order: usize, dense: &[T]) -> Result<Self> {
        if dense.len() != order * order {
            return Err(GdcError::DimensionMismatch { expected: order * order, found: dense.len() });
        }
        Ok(Self::from_fn(order, |i, j| dense[i * order + j]))
    }

    /// Maximum-likelihood covariance of `n` rows of width `d` about `mean`
    /// (divisor `n`).
    pub fn sample_covariance(rows: &[T], n: usize, d: usize, mean: &[T]) -> Self {
        assert_eq!(rows.len(), n * d);
        assert_eq!(mean.len(), d);
        let mut m = Self::zeros(d);
        let mut centered = vec![T::zero(); d];
        for row in rows.chunks_exact(d) {
            for ((c, x), mu) in centered.iter_mut().zip(row).zip(mean) {
                *c = *x - *mu;
            }
            for i in 0..d {
                let xi = centered[i];
                let dst = &mut m.data[row_start(i)..row_start(i) + i + 1];
                for (acc, xj) in dst.iter_mut().zip(&centered[..=i]) {
                    *acc += xi * *xj;
                }
            }
        }
        let inv_n = T::one() / T::from_count(n);
        for v in &mut m.data {
            *v *= inv_n;
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        self.data[row_start(r) + c]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let (r, c) = if j <= i { (i, j) } else { (j, i) };
        self.data[row_start(r) + c] = v;
    }

    pub fn packed(&self) -> &[T] {
        &self.data
    }

    pub fn add_to_diagonal(&mut self, v: T) {
        for i in 0..self.order {
            self.data[row_start(i) + i] += v;
        }
    }

    pub fn trace(&self) -> T {
        (0..self.order).map(|i| self.data[row_start(i) + i]).sum()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.order {
            for j in 0..=i {
                let v = self.data[row_start(i) + j];
                s += if i == j { v * v } else { T::lit(2.0) * v * v };
            }
        }
        s.sqrt()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let d = self.order;
        let mut out = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.order);
        (0..self.order).map(|i| (0..self.order).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }
}

/// Lower-triangular matrix with implicit zeros above the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T> {
    order: usize,
    data: Vec<T>,
}

impl<T: Real> LowerTriangular<T> {
    pub fn identity(order: usize) -> Self {
        assert!(order >= 1, "matrix order must be positive");
        let mut data = vec![T::zero(); packed_len(order)];
        for i in 0..order {
            data[row_start(i) + i] = T::one();
        }
        Self { order, data }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::identity(diag.len());
        for (i, v) in diag.iter().enumerate() {
            m.data[row_start(i) + i] = *v;
        }
        m
    }

    pub fn from_packed(order: usize, data: Vec<T>) -> Result<Self> {
        if order == 0 {
            return Err(GdcError::DimensionMismatch { expected: 1, found: 0 });
        }
        if data.len() != packed_len(order) {
            return Err(GdcError::DimensionMismatch { expected: packed_len(order), found: data.len() });
        }
        Ok(Self { order, data })
    }

    pub fn from_fn(order: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::identity(order);
        for i in 0..order {
            for j in 0..=i {
                m.data[row_start(i) + j] = f(i, j);
            }
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if j > i {
            T::zero()
        } else {
            self.data[row_start(i) + j]
        }
    }

    /// Entries `(i, 0..=i)`.
    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[row_start(i)..row_start(i) + i + 1]
    }

    pub fn packed(&self) -> &[T] {
        &self.data
    }

    pub fn diagonal(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.order).map(move |i| self.data[row_start(i) + i])
    }

    /// `L x`, one contiguous dot product per row.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.order);
        (0..self.order).map(|i| dot(self.row(i), &x[..=i])).collect()
    }

    /// `‖L x‖²` without materializing `L x`.
    #[inline]
    pub fn mul_vec_norm_sq(&self, x: &[T]) -> T {
        debug_assert_eq!(x.len(), self.order);
        let mut acc = T::zero();
        for i in 0..self.order {
            let z = dot(self.row(i), &x[..=i]);
            acc += z * z;
        }
        acc
    }

    /// `‖L x_r‖²` for each of the `out.len()` row-major vectors in `xs`. Each
    /// row of `L` is read once for the whole block; the per-vector arithmetic
    /// is identical to [`LowerTriangular::mul_vec_norm_sq`].
    pub fn block_norm_sq(&self, xs: &[T], out: &mut [T]) {
        let n = self.order;
        debug_assert_eq!(xs.len(), out.len() * n);
        out.iter_mut().for_each(|o| *o = T::zero());
        for i in 0..n {
            let l = self.row(i);
            for (o, x) in out.iter_mut().zip(xs.chunks_exact(n)) {
                let z = dot(l, &x[..=i]);
                *o += z * z;
            }
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        let d = self.order;
        let mut out = vec![T::zero(); d * d];
        for i in 0..d {
            out[i * d..i * d + i + 1].copy_from_slice(self.row(i));
        }
        out
    }
}

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct Spectrum<T> {
    pub values: Vec<T>,
    /// Eigenvector `j` occupies `vectors[j * d..(j + 1) * d]`.
    vectors: Vec<T>,
    order: usize,
    pub sweeps: usize,
}

impl<T: Real> Spectrum<T> {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vector(&self, j: usize) -> &[T] {
        &self.vectors[j * self.order..(j + 1) * self.order]
    }

    pub fn vectors(&self) -> impl Iterator<Item = &[T]> {
        self.vectors.chunks_exact(self.order)
    }
}

/// Row-wise (Banachiewicz) Cholesky factorization `A = C Cᵀ`.
///
/// A pivot `A_jj - Σ_k C_jk²` at or below `d · ε_mach · max_i A_ii` is reported
/// as [`GdcError::NotPositiveDefinite`]: for a rank-deficient input the exact
/// pivot is zero and the computed one is rounding noise of at most that size.
pub fn cholesky_factor<T: Real>(a: &SymMatrix<T>) -> Result<LowerTriangular<T>> {
    let d = a.order;
    let max_diag = (0..d).map(|i| a.get(i, i)).fold(T::zero(), |m, v| m.max(v));
    let tol = T::from_count(d) * T::epsilon() * max_diag;
    let mut data = vec![T::zero(); packed_len(d)];
    for i in 0..d {
        let (done, rest) = data.split_at_mut(row_start(i));
        let row_i = &mut rest[..=i];
        for j in 0..i {
            let row_j = &done[row_start(j)..row_start(j) + j + 1];
            let s = dot(&row_i[..j], &row_j[..j]);
            row_i[j] = (a.data[row_start(i) + j] - s) / row_j[j];
        }
        let pivot = a.data[row_start(i) + i] - dot(&row_i[..i], &row_i[..i]);
        if !(pivot > tol) {
            return Err(GdcError::NotPositiveDefinite { pivot: i, value: pivot.to_f64_lossy() });
        }
        row_i[i] = pivot.sqrt();
    }
    Ok(LowerTriangular { order: d, data })
}

/// Forward substitution for `C z = b`.
pub fn solve_lower<T: Real>(c: &LowerTriangular<T>, b: &[T]) -> Result<Vec<T>> {
    if b.len() != c.order {
        return Err(GdcError::DimensionMismatch { expected: c.order, found: b.len() });
    }
    let mut z = Vec::with_capacity(c.order);
    for i in 0..c.order {
        let row = c.row(i);
        if !(row[i] > T::zero()) {
            return Err(GdcError::ZeroDiagonal { index: i });
        }
        let s = dot(&row[..i], &z[..i]);
        z.push((b[i] - s) / row[i]);
    }
    Ok(z)
}

/// Inverse of a lower-triangular matrix with positive diagonal.
///
/// Solves `C w_j = e_j` column by column; each column only touches the
/// contiguous tails of the rows of `C`. The diagonal of the result is exactly
/// `1 / C_jj`.
pub fn invert_lower<T: Real>(c: &LowerTriangular<T>) -> Result<LowerTriangular<T>> {
    let d = c.order;
    for (i, v) in c.diagonal().enumerate() {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(GdcError::ZeroDiagonal { index: i });
        }
    }
    let mut out = vec![T::zero(); packed_len(d)];
    let mut col = vec![T::zero(); d];
    for j in 0..d {
        col[j] = T::one() / c.get(j, j);
        out[row_start(j) + j] = col[j];
        for i in j + 1..d {
            let row = c.row(i);
            let s = dot(&row[j..i], &col[j..i]);
            col[i] = -s / row[i];
            out[row_start(i) + j] = col[i];
        }
    }
    Ok(LowerTriangular { order: d, data: out })
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
pub fn sym_eig<T: Real>(a: &SymMatrix<T>) -> Result<Spectrum<T>> {
    let d = a.order;
    let mut m = a.to_dense();
    let mut v = vec![T::zero(); d * d];
    for i in 0..d {
        v[i * d + i] = T::one();
    }
    let norm = a.frobenius_norm();
    let tol = T::lit(JACOBI_REL_TOL).max(T::epsilon()) * norm;

    let off_norm = |m: &[T]| -> T {
        let mut s = T::zero();
        for p in 0..d {
            for q in p + 1..d {
                s += m[p * d + q] * m[p * d + q];
            }
        }
        (T::lit(2.0) * s).sqrt()
    };

    let mut sweeps = 0;
    loop {
        let off = off_norm(&m);
        if off <= tol {
            break;
        }
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(GdcError::ConvergenceFailure { sweeps, off_norm: off.to_f64_lossy() });
        }
        sweeps += 1;
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (T::lit(2.0) * apq);
                let t = if theta.is_infinite() {
                    T::zero()
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                if t == T::zero() {
                    // Off-diagonal entry is negligible next to the diagonal gap.
                    m[p * d + q] = T::zero();
                    m[q * d + p] = T::zero();
                    continue;
                }
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = m[k * d + p];
                    let akq = m[k * d + q];
                    m[k * d + p] = c * akp - s * akq;
                    m[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = m[p * d + k];
                    let aqk = m[q * d + k];
                    m[p * d + k] = c * apk - s * aqk;
                    m[q * d + k] = s * apk + c * aqk;
                }
                m[p * d + q] = T::zero();
                m[q * d + p] = T::zero();
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..d).collect();
    idx.sort_by(|&x, &y| m[y * d + y].partial_cmp(&m[x * d + x]).unwrap_or(std::cmp::Ordering::Equal));
    let values = idx.iter().map(|&j| m[j * d + j]).collect();
    let mut vectors = Vec::with_capacity(d * d);
    for &j in &idx {
        vectors.extend((0..d).map(|k| v[k * d + j]));
    }
    Ok(Spectrum { values, vectors, order: d, sweeps })
}

//! One regularized Gaussian per class.
//!
//! The covariance is never inverted explicitly. Fitting factors
//! `Σ̂ = Σ + εI = C Cᵀ` and keeps `W = C⁻¹`, so that `Σ̂⁻¹ = Wᵀ W` and the
//! Mahalanobis term is `‖W (e − μ)‖²`, one triangular mat-vec per query.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{GdcError, Result};
use crate::linalg::{cholesky_factor, invert_lower, LowerTriangular, SymMatrix};
use crate::scalar::Real;

/// Regularization used when none is given.
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassGaussian<T> {
    pub class_id: usize,
    pub label: String,
    pub mean: Vec<T>,
    /// Inverse Cholesky factor of the regularized covariance. Shared so that
    /// synthetic models can reuse one factor across many components.
    pub inv_factor: Arc<LowerTriangular<T>>,
    /// `log|Σ̂| = −2 Σ_i log W_ii`.
    pub log_det_cov: T,
    pub n_ref: usize,
    pub eps: T,
}

impl<T: Real> ClassGaussian<T> {
    /// Assembles a component from precomputed parts, checking its invariants.
    pub fn from_parts(
        class_id: usize,
        label: impl Into<String>,
        mean: Vec<T>,
        inv_factor: Arc<LowerTriangular<T>>,
        n_ref: usize,
        eps: T,
    ) -> Result<Self> {
        let label = label.into();
        if mean.len() != inv_factor.order() {
            return Err(GdcError::DimensionMismatch { expected: inv_factor.order(), found: mean.len() });
        }
        if n_ref == 0 {
            return Err(GdcError::EmptyClass { label });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(GdcError::NonFinite { context: format!("mean of `{label}`") });
        }
        for (i, w) in inv_factor.diagonal().enumerate() {
            if !(w > T::zero()) || !w.is_finite() {
                return Err(GdcError::ZeroDiagonal { index: i });
            }
        }
        let log_det_cov = log_det_from_inverse_factor(&inv_factor);
        Ok(Self { class_id, label, mean, inv_factor, log_det_cov, n_ref, eps })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Squared Mahalanobis distance `(e − μ)ᵀ Σ̂⁻¹ (e − μ)`.
    pub fn mahalanobis_sq(&self, e: &[T]) -> Result<T> {
        if e.len() != self.dim() {
            return Err(GdcError::DimensionMismatch { expected: self.dim(), found: e.len() });
        }
        let diff: Vec<T> = e.iter().zip(&self.mean).map(|(x, m)| *x - *m).collect();
        Ok(self.inv_factor.mul_vec_norm_sq(&diff))
    }

    /// Log-density with a caller-provided scratch buffer; used by batch scoring.
    #[inline]
    pub(crate) fn log_density_with(&self, e: &[T], scratch: &mut [T]) -> T {
        for ((s, x), m) in scratch.iter_mut().zip(e).zip(&self.mean) {
            *s = *x - *m;
        }
        self.log_density_from_quad(self.inv_factor.mul_vec_norm_sq(scratch))
    }

    /// Log-densities of the row-major vectors in `rows`, one per entry of `out`.
    pub(crate) fn block_log_density(&self, rows: &[T], scratch: &mut [T], out: &mut [T]) {
        let d = self.dim();
        for (s, e) in scratch.chunks_exact_mut(d).zip(rows.chunks_exact(d)) {
            for ((s, x), m) in s.iter_mut().zip(e).zip(&self.mean) {
                *s = *x - *m;
            }
        }
        self.inv_factor.block_norm_sq(&scratch[..rows.len()], out);
        for o in out.iter_mut() {
            *o = self.log_density_from_quad(*o);
        }
    }

    #[inline]
    fn log_density_from_quad(&self, quad: T) -> T {
        let d = T::from_count(self.dim());
        let half = T::lit(0.5);
        -(d * half) * T::lit((2.0 * PI).ln()) - half * self.log_det_cov - half * quad
    }
}

/// `log|Σ̂|` from the diagonal of `W = C⁻¹`.
pub fn log_det_from_inverse_factor<T: Real>(w: &LowerTriangular<T>) -> T {
    T::lit(-2.0) * w.diagonal().map(|v| v.ln()).sum::<T>()
}

/// Fits mean and ML covariance of `refs` (`n` rows of width `d`, row-major),
/// regularizes with `eps · I` and stores the inverse Cholesky factor.
pub fn fit_class<T: Real>(
    refs: &[T],
    d: usize,
    eps: T,
    class_id: usize,
    label: impl Into<String>,
) -> Result<ClassGaussian<T>> {
    let label = label.into();
    if d == 0 {
        return Err(GdcError::DimensionMismatch { expected: 1, found: 0 });
    }
    if !refs.len().is_multiple_of(d) {
        return Err(GdcError::DimensionMismatch { expected: d, found: refs.len() % d });
    }
    let n = refs.len() / d;
    if n == 0 {
        return Err(GdcError::EmptyClass { label });
    }
    if !(eps >= T::zero()) || !eps.is_finite() {
        return Err(GdcError::InvalidEps(eps.to_f64_lossy()));
    }
    if refs.iter().any(|v| !v.is_finite()) {
        return Err(GdcError::NonFinite { context: format!("reference rows of `{label}`") });
    }

    let mut mean = vec![T::zero(); d];
    for row in refs.chunks_exact(d) {
        for (m, x) in mean.iter_mut().zip(row) {
            *m += *x;
        }
    }
    let inv_n = T::one() / T::from_count(n);
    for m in &mut mean {
        *m *= inv_n;
    }

    let mut cov = SymMatrix::sample_covariance(refs, n, d, &mean);
    cov.add_to_diagonal(eps);
    let factor = cholesky_factor(&cov)?;
    let inv_factor = invert_lower(&factor)?;
    let log_det_cov = log_det_from_inverse_factor(&inv_factor);
    Ok(ClassGaussian { class_id, label, mean, inv_factor: Arc::new(inv_factor), log_det_cov, n_ref: n, eps })
}

/// `−(d/2) ln 2π − ½ log|Σ̂| − ½ ‖W (e − μ)‖²`.
pub fn log_density<T: Real>(g: &ClassGaussian<T>, e: &[T]) -> Result<T> {
    if e.len() != g.dim() {
        return Err(GdcError::DimensionMismatch { expected: g.dim(), found: e.len() });
    }
    let mut scratch = vec![T::zero(); g.dim()];
    Ok(g.log_density_with(e, &mut scratch))
}

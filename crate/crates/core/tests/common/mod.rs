//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the factorization, solve, or eigen code of the
//! crate: dense matrices are plain row-major `Vec<f64>`.
#![allow(dead_code)]

use gdc_core::archive::EmbeddingArchive;
use gdc_core::SymMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matmul(a: &[f64], b: &[f64], n: usize, m: usize, p: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        for k in 0..m {
            let aik = a[i * m + k];
            for j in 0..p {
                out[i * p + j] += aik * b[k * p + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], n: usize, m: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            out[j * n + i] = a[i * m + j];
        }
    }
    out
}

/// `B Bᵀ + I` with `B` uniform in `[-1, 1)`.
pub fn random_spd_dense(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let b: Vec<f64> = (0..d * d).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut a = matmul(&b, &transpose(&b, d, d), d, d, d);
    for i in 0..d {
        a[i * d + i] += 1.0;
    }
    a
}

pub fn random_spd(rng: &mut ChaCha8Rng, d: usize) -> SymMatrix {
    SymMatrix::from_dense_lower(d, &random_spd_dense(rng, d)).unwrap()
}

pub fn random_symmetric_dense(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let mut a = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let v = rng.random_range(-1.0..1.0);
            a[i * d + j] = v;
            a[j * d + i] = v;
        }
    }
    a
}

/// Gauss–Jordan inverse with partial pivoting, plus the determinant.
pub fn dense_inverse_det(a: &[f64], d: usize) -> (Vec<f64>, f64) {
    let mut m = a.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    let mut det = 1.0;
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| m[x * d + col].abs().partial_cmp(&m[y * d + col].abs()).unwrap()).unwrap();
        if piv != col {
            for k in 0..d {
                m.swap(piv * d + k, col * d + k);
                inv.swap(piv * d + k, col * d + k);
            }
            det = -det;
        }
        let p = m[col * d + col];
        det *= p;
        for k in 0..d {
            m[col * d + k] /= p;
            inv[col * d + k] /= p;
        }
        for r in 0..d {
            if r != col {
                let f = m[r * d + col];
                if f != 0.0 {
                    for k in 0..d {
                        m[r * d + k] -= f * m[col * d + k];
                        inv[r * d + k] -= f * inv[col * d + k];
                    }
                }
            }
        }
    }
    (inv, det)
}

/// Multivariate normal log-density from an explicit inverse and determinant.
pub fn brute_log_density(mean: &[f64], cov: &[f64], e: &[f64]) -> f64 {
    let d = mean.len();
    let (inv, det) = dense_inverse_det(cov, d);
    let diff: Vec<f64> = e.iter().zip(mean).map(|(x, m)| x - m).collect();
    let mut quad = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad += diff[i] * inv[i * d + j] * diff[j];
        }
    }
    -0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() - 0.5 * det.ln() - 0.5 * quad
}

/// Outer-product (Gaussian-elimination style) Cholesky: at step `i` peel off
/// `L_i` and update the trailing block by `B − b bᵀ / a_ii`; the factor is the
/// product `L_1 L_2 ⋯ L_n`.
pub fn recursive_cholesky(a: &[f64], d: usize) -> Vec<f64> {
    let mut cur = a.to_vec();
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        l[i * d + i] = 1.0;
    }
    for i in 0..d {
        let aii = cur[i * d + i];
        assert!(aii > 0.0);
        let s = aii.sqrt();
        let mut li = vec![0.0; d * d];
        for k in 0..d {
            li[k * d + k] = 1.0;
        }
        li[i * d + i] = s;
        for k in i + 1..d {
            li[k * d + i] = cur[k * d + i] / s;
        }
        let mut next = cur.clone();
        for r in i + 1..d {
            for c in i + 1..d {
                next[r * d + c] = cur[r * d + c] - cur[r * d + i] * cur[c * d + i] / aii;
            }
        }
        for k in 0..d {
            next[i * d + k] = if k == i { 1.0 } else { 0.0 };
            next[k * d + i] = if k == i { 1.0 } else { 0.0 };
        }
        cur = next;
        l = matmul(&l, &li, d, d, d);
    }
    l
}

/// Number of eigenvalues of `a` below `x`: negative pivots of the LDLᵀ
/// elimination of `a − xI` (Sylvester's law of inertia).
fn count_below(a: &[f64], d: usize, x: f64) -> usize {
    let mut m = a.to_vec();
    for i in 0..d {
        m[i * d + i] -= x;
    }
    let mut negatives = 0;
    for k in 0..d {
        let mut p = m[k * d + k];
        if p == 0.0 {
            p = -1e-300;
        }
        if p < 0.0 {
            negatives += 1;
        }
        for r in k + 1..d {
            let f = m[r * d + k] / p;
            for c in k + 1..d {
                m[r * d + c] -= f * m[k * d + c];
            }
        }
    }
    negatives
}

/// All eigenvalues of a symmetric matrix by bisection on the inertia count,
/// descending.
pub fn bisection_eigenvalues(a: &[f64], d: usize) -> Vec<f64> {
    let radius = (0..d).map(|i| (0..d).map(|j| a[i * d + j].abs()).sum::<f64>()).fold(0.0, f64::max) + 1.0;
    let mut out = Vec::with_capacity(d);
    for k in 0..d {
        // k-th smallest: smallest x with count_below(x) > k.
        let (mut lo, mut hi) = (-radius, radius);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if count_below(a, d, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo < 1e-15 * radius {
                break;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    out.reverse();
    out
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Lower Cholesky factor via the Banachiewicz recurrence written out densely;
/// used only to draw correlated samples.
pub fn dense_cholesky(a: &[f64], d: usize) -> Vec<f64> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                l[i * d + i] = (a[i * d + i] - s).sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    l
}

/// A Gaussian with explicit mean and dense covariance, for drawing samples.
pub struct TrueGaussian {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
    chol: Vec<f64>,
}

impl TrueGaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Self {
        let d = mean.len();
        let chol = dense_cholesky(&cov, d);
        Self { mean, cov, chol }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.dim();
        let z = normal_vec(rng, d);
        (0..d).map(|i| self.mean[i] + (0..=i).map(|k| self.chol[i * d + k] * z[k]).sum::<f64>()).collect()
    }

    pub fn sample_rows(&self, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).flat_map(|_| self.sample(rng)).collect()
    }
}

pub fn to_f32(v: &[f64]) -> Vec<f32> {
    v.iter().map(|x| *x as f32).collect()
}

/// Classes with small random means and axis-aligned standard deviations in
/// `[0.5, 3.0)`; returns the archive of `n` rows per class.
pub fn axis_gaussian_archive(rng: &mut ChaCha8Rng, classes: usize, d: usize, n: usize, cube: bool) -> EmbeddingArchive {
    let mut a = EmbeddingArchive::new(d).unwrap();
    for c in 0..classes {
        let mean: Vec<f64> = (0..d).map(|_| rng.random_range(-0.5..0.5)).collect();
        let scale: Vec<f64> = (0..d).map(|_| rng.random_range(0.5..3.0)).collect();
        let values: Vec<f32> = (0..n * d)
            .map(|i| {
                let j = i % d;
                let z: f64 = rng.sample(StandardNormal);
                let v = mean[j] + scale[j] * z;
                (if cube { v * v * v } else { v }) as f32
            })
            .collect();
        a.push_class(format!("c{c}"), values).unwrap();
    }
    a
}

mod common;

use common::*;
use gdc_core::linalg::{self, LowerTriangular as Lower};
use gdc_core::{cholesky_factor, invert_lower, solve_lower, sym_eig, GdcError, LowerTriangular, SymMatrix};
use proptest::prelude::*;
use rand::Rng;

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn reconstruction_d50() {
    let mut rng = rng(1);
    let dense = random_spd_dense(&mut rng, 50);
    let a = SymMatrix::from_dense_lower(50, &dense).unwrap();
    let l = cholesky_factor(&a).unwrap().to_dense();
    let recon = matmul(&l, &transpose(&l, 50, 50), 50, 50, 50);
    assert!(max_abs_diff(&recon, &dense) <= 1e-10 * a.max_abs());
}

#[test]
fn factor_matches_outer_product_variant() {
    let mut rng = rng(2);
    for d in 1..=8 {
        for _ in 0..20 {
            let dense = random_spd_dense(&mut rng, d);
            let l = cholesky_factor(&SymMatrix::from_dense_lower(d, &dense).unwrap()).unwrap();
            assert!(max_abs_diff(&l.to_dense(), &recursive_cholesky(&dense, d)) <= 1e-12);
        }
    }
}

#[test]
fn factor_has_positive_diagonal_and_zero_upper() {
    let mut rng = rng(3);
    let l = cholesky_factor(&random_spd(&mut rng, 12)).unwrap();
    assert!(l.diagonal().all(|v| v > 0.0));
    let dense = l.to_dense();
    for i in 0..12 {
        for j in i + 1..12 {
            assert_eq!(dense[i * 12 + j], 0.0);
        }
    }
}

#[test]
fn indefinite_and_negative_diagonal_fail() {
    let a = SymMatrix::from_dense_lower(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
    assert!(matches!(cholesky_factor(&a), Err(GdcError::NotPositiveDefinite { pivot: 1, .. })));
    let a = SymMatrix::from_diagonal(&[1.0, -1.0, 1.0]);
    assert!(matches!(cholesky_factor(&a), Err(GdcError::NotPositiveDefinite { pivot: 1, .. })));
    let mut rng = rng(4);
    for _ in 0..50 {
        let d = rng.random_range(2..10);
        let mut dense = random_spd_dense(&mut rng, d);
        // Subtract more than the largest eigenvalue from one direction.
        let shift = 2.0 * (0..d).map(|i| dense[i * d + i]).sum::<f64>();
        dense[0] -= shift;
        let a = SymMatrix::from_dense_lower(d, &dense).unwrap();
        assert!(matches!(cholesky_factor(&a), Err(GdcError::NotPositiveDefinite { .. })));
    }
}

#[test]
fn rank_deficient_fails_until_regularized() {
    // Outer product of one vector: rank one.
    let v = [1.0, 2.0, -1.0, 0.5];
    let mut a = SymMatrix::from_fn(4, |i, j| v[i] * v[j]);
    assert!(matches!(cholesky_factor(&a), Err(GdcError::NotPositiveDefinite { .. })));
    a.add_to_diagonal(1e-8);
    assert!(cholesky_factor(&a).is_ok());
}

#[test]
fn solve_residual() {
    let mut rng = rng(5);
    let d = 20;
    let c = cholesky_factor(&random_spd(&mut rng, d)).unwrap();
    let b: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
    let x = solve_lower(&c, &b).unwrap();
    let r = c.mul_vec(&x);
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(max_abs_diff(&r, &b) <= 1e-12 * scale);
}

#[test]
fn inverse_times_factor_is_identity() {
    let mut rng = rng(6);
    let d = 50;
    let c = cholesky_factor(&random_spd(&mut rng, d)).unwrap();
    let w = invert_lower(&c).unwrap();
    let prod = matmul(&w.to_dense(), &c.to_dense(), d, d, d);
    let mut eye = vec![0.0; d * d];
    (0..d).for_each(|i| eye[i * d + i] = 1.0);
    assert!(max_abs_diff(&prod, &eye) <= 1e-10);
    for (i, wd) in w.diagonal().enumerate() {
        assert_eq!(wd, 1.0 / c.get(i, i));
    }
}

#[test]
fn inverse_factor_gives_precision_matrix() {
    let mut rng = rng(7);
    let d = 9;
    let dense = random_spd_dense(&mut rng, d);
    let w = invert_lower(&cholesky_factor(&SymMatrix::from_dense_lower(d, &dense).unwrap()).unwrap()).unwrap();
    let wd = w.to_dense();
    let precision = matmul(&transpose(&wd, d, d), &wd, d, d, d);
    let (oracle, _) = dense_inverse_det(&dense, d);
    assert!(max_abs_diff(&precision, &oracle) <= 1e-10);
}

#[test]
fn identity_is_a_fixed_point() {
    for d in [1, 2, 7, 33] {
        let c = cholesky_factor(&SymMatrix::identity(d)).unwrap();
        assert_eq!(c, LowerTriangular::identity(d));
        assert_eq!(invert_lower(&c).unwrap(), LowerTriangular::identity(d));
    }
}

#[test]
fn eigenvalues_match_inertia_bisection() {
    let mut rng = rng(8);
    for d in [1, 2, 5, 10, 17] {
        let dense = random_symmetric_dense(&mut rng, d);
        let a = SymMatrix::from_dense_lower(d, &dense).unwrap();
        let spec = sym_eig(&a).unwrap();
        let oracle = bisection_eigenvalues(&dense, d);
        assert!(max_abs_diff(&spec.values, &oracle) <= 1e-10, "d={d}: {:?} vs {oracle:?}", spec.values);
    }
}

#[test]
fn eigenpairs_satisfy_definition() {
    let mut rng = rng(9);
    let d = 24;
    let a = random_spd(&mut rng, d);
    let spec = sym_eig(&a).unwrap();
    assert!(spec.values.windows(2).all(|w| w[0] >= w[1]));
    let sum: f64 = spec.values.iter().sum();
    assert!((sum - a.trace()).abs() <= 1e-10 * a.trace());
    for (j, v) in spec.vectors().enumerate() {
        let av = a.mul_vec(v);
        let resid = av.iter().zip(v).map(|(x, y)| (x - spec.values[j] * y).abs()).fold(0.0, f64::max);
        assert!(resid <= 1e-9 * spec.values[0], "pair {j}: {resid}");
        for (k, u) in spec.vectors().enumerate() {
            let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
            let want = if j == k { 1.0 } else { 0.0 };
            assert!((dot - want).abs() <= 1e-10);
        }
    }
}

#[test]
fn eigenvalues_of_psd_matrix_are_nonnegative() {
    let mut rng = rng(10);
    let (n, d) = (5, 12);
    let rows: Vec<f64> = normal_vec(&mut rng, n * d);
    let mean = vec![0.0; d];
    let spec = sym_eig(&SymMatrix::sample_covariance(&rows, n, d, &mean)).unwrap();
    let tol = 1e-12 * spec.values[0];
    assert!(spec.values.iter().all(|v| *v >= -tol));
    assert!(spec.values[n..].iter().all(|v| v.abs() <= tol));
}

#[test]
fn dimension_checks() {
    let c = Lower::identity(3);
    assert!(matches!(solve_lower(&c, &[1.0, 2.0]), Err(GdcError::DimensionMismatch { expected: 3, found: 2 })));
    assert!(SymMatrix::from_packed(3, vec![0.0; 5]).is_err());
    assert!(linalg::LowerTriangular::<f64>::from_packed(2, vec![1.0; 3]).is_ok());
}

#[test]
fn f32_factor_is_close_to_f64() {
    let mut rng = rng(11);
    let d = 16;
    let dense = random_spd_dense(&mut rng, d);
    let a64 = SymMatrix::from_dense_lower(d, &dense).unwrap();
    let dense32: Vec<f32> = dense.iter().map(|v| *v as f32).collect();
    let a32 = gdc_core::SymMatrixF32::from_dense_lower(d, &dense32).unwrap();
    let l64 = cholesky_factor(&a64).unwrap().to_dense();
    let l32 = cholesky_factor(&a32).unwrap().to_dense();
    let diff = l64.iter().zip(&l32).map(|(x, y)| (x - *y as f64).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reconstruction_holds(seed in any::<u64>(), d in 1usize..40) {
        let mut rng = rng(seed);
        let dense = random_spd_dense(&mut rng, d);
        let a = SymMatrix::from_dense_lower(d, &dense).unwrap();
        let l = cholesky_factor(&a).unwrap().to_dense();
        let recon = matmul(&l, &transpose(&l, d, d), d, d, d);
        prop_assert!(max_abs_diff(&recon, &dense) <= 1e-10 * a.max_abs());
    }

    #[test]
    fn block_norm_matches_single(seed in any::<u64>(), d in 1usize..30, m in 1usize..9) {
        let mut rng = rng(seed);
        let c = cholesky_factor(&random_spd(&mut rng, d)).unwrap();
        let xs = normal_vec(&mut rng, m * d);
        let mut out = vec![0.0; m];
        c.block_norm_sq(&xs, &mut out);
        for (r, x) in xs.chunks_exact(d).enumerate() {
            prop_assert_eq!(out[r].to_bits(), c.mul_vec_norm_sq(x).to_bits());
        }
    }
}

//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's numerical routines.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Cyclic Jacobi eigenvalue iteration for a symmetric matrix. Returns
/// eigenvalues descending with matching eigenvector columns.
pub fn jacobi_eigen(s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = s.nrows();
    let mut a = s.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[(i, j)].powi(2)).sum();
        if off < 1e-30 * a.norm_squared().max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - sn * vkq;
                    v[(k, q)] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let vals = idx.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, idx[c])]);
    (vals, vecs)
}

/// Γ(h) by explicit loops with divisor T.
pub fn brute_lag_cov(y: &DMatrix<f64>, h: usize) -> DMatrix<f64> {
    let (n, t) = y.shape();
    let mean: Vec<f64> = (0..n).map(|i| (0..t).map(|s| y[(i, s)]).sum::<f64>() / t as f64).collect();
    DMatrix::from_fn(n, n, |i, j| {
        let mut acc = 0.0;
        for s in 0..t - h {
            acc += (y[(i, s)] - mean[i]) * (y[(j, s + h)] - mean[j]);
        }
        acc / t as f64
    })
}

/// d(λ_j) by O(T) summation per component, angles formed directly.
pub fn brute_dft(y: &DMatrix<f64>, j: i64) -> Vec<(f64, f64)> {
    let (n, t) = y.shape();
    let lam = 2.0 * std::f64::consts::PI * j as f64 / t as f64;
    let scale = 1.0 / (2.0 * std::f64::consts::PI * t as f64).sqrt();
    (0..n)
        .map(|i| {
            let (mut re, mut im) = (0.0, 0.0);
            for s in 1..=t {
                let a = lam * s as f64;
                re += y[(i, s - 1)] * a.cos();
                im -= y[(i, s - 1)] * a.sin();
            }
            (re * scale, im * scale)
        })
        .collect()
}

/// Aligns the sign of each column of `b` to the matching column of `a`.
pub fn align_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    for c in 0..a.ncols() {
        if a.column(c).dot(&b.column(c)) < 0.0 {
            out.column_mut(c).neg_mut();
        }
    }
    out
}

/// Largest principal angle (radians) between the column spaces of a and b.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let qa = a.clone().qr().q();
    let qb = b.clone().qr().q();
    let m = qa.transpose() * qb;
    let sv = m.svd(false, false).singular_values;
    let smallest = sv.iter().cloned().fold(f64::INFINITY, f64::min).min(1.0);
    smallest.acos()
}

/// The loading matrix of the five-series worked example.
pub fn example_a() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        4,
        &[
            1.0, 0.0, 0.0, 0.0, //
            0.5, 1.0, 0.0, 0.0, //
            0.0, 0.5, 1.0, 0.0, //
            0.0, 0.0, 0.5, 1.0, //
            0.0, 0.0, 0.0, 0.5,
        ],
    )
}

pub fn example_omega() -> DVector<f64> {
    DVector::from_vec(vec![1.5, -1.0, 0.0, -4.0, 5.0])
}

pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

/// Proptest configuration for integration tests: no regression files, since
/// the runner cannot locate a crate root from `tests/`.
pub fn pt_config(cases: u32) -> proptest::test_runner::Config {
    proptest::test_runner::Config {
        cases,
        failure_persistence: Some(Box::new(proptest::test_runner::FileFailurePersistence::Off)),
        ..Default::default()
    }
}

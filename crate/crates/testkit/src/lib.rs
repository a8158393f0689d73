//! Brute-force oracles and fixture builders shared by the test suites.
//!
//! Nothing here calls into `stockcast-core`: every routine is a separate,
//! deliberately naive computation that the library is checked against.

#![allow(clippy::needless_range_loop)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use statrs::distribution::{ContinuousCDF, StudentsT};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Gauss–Jordan elimination with partial pivoting on a dense copy.
pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)]).chain([b[i]]).collect())
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        assert!(p.abs() > 0.0, "singular system in oracle");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let factor = m[row][col];
                if factor != 0.0 {
                    for k in col..=n {
                        m[row][k] -= factor * m[col][k];
                    }
                }
            }
        }
    }
    DVector::from_iterator(n, m.iter().map(|r| r[n]))
}

/// `(XᵀX)⁻¹Xᵀy` with an intercept column prepended, from explicit sums.
/// Returns `[intercept, slopes...]`.
pub fn normal_equations(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let (n, k) = x.shape();
    let p = k + 1;
    let col = |i: usize, j: usize| if j == 0 { 1.0 } else { x[(i, j - 1)] };
    let mut xtx = DMatrix::zeros(p, p);
    let mut xty = DVector::zeros(p);
    for i in 0..n {
        for a in 0..p {
            xty[a] += col(i, a) * y[i];
            for b in 0..p {
                xtx[(a, b)] += col(i, a) * col(i, b);
            }
        }
    }
    dense_solve(&xtx, &xty).iter().copied().collect()
}

/// Well-conditioned random regression problem with mixed column scales.
pub fn random_problem(seed: u64, n: usize, d: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut r = rng(seed);
    let scales: Vec<f64> = (0..d).map(|_| 10f64.powf(r.random_range(-1.0..2.0))).collect();
    let offsets: Vec<f64> = (0..d).map(|_| r.random_range(-5.0..5.0)).collect();
    let x = DMatrix::from_fn(n, d, |_, j| {
        offsets[j] + scales[j] * r.sample::<f64, _>(StandardNormal)
    });
    let beta: Vec<f64> = (0..d).map(|_| r.random_range(-3.0..3.0)).collect();
    let y = (0..n)
        .map(|i| {
            1.5 + (0..d).map(|j| beta[j] * x[(i, j)]).sum::<f64>()
                + 2.0 * r.sample::<f64, _>(StandardNormal)
        })
        .collect();
    (x, y)
}

/// Design whose full-model OLS p-values equal `target_p` exactly.
///
/// Columns are orthonormal and orthogonal to the intercept, so `(XᵀX)⁻¹` has
/// unit slope diagonal; the residual is a further orthogonal direction scaled
/// to give unit residual variance, so every t statistic equals its slope.
pub fn exact_p_design(seed: u64, n: usize, target_p: &[f64]) -> (DMatrix<f64>, Vec<f64>) {
    let k = target_p.len();
    assert!(n > k + 2);
    let df = (n - k - 1) as f64;
    let student = StudentsT::new(0.0, 1.0, df).unwrap();
    let mut r = rng(seed);
    let mut basis: Vec<DVector<f64>> = vec![DVector::from_element(n, 1.0 / (n as f64).sqrt())];
    while basis.len() < k + 2 {
        let mut v = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
        for _ in 0..2 {
            for b in &basis {
                let proj = v.dot(b);
                v.axpy(-proj, b, 1.0);
            }
        }
        basis.push(v.normalize());
    }
    let x = DMatrix::from_fn(n, k, |i, j| basis[j + 1][i]);
    let residual = &basis[k + 1] * df.sqrt();
    let y = (0..n)
        .map(|i| {
            let signal: f64 = target_p
                .iter()
                .enumerate()
                .map(|(j, &p)| student.inverse_cdf(1.0 - p / 2.0) * x[(i, j)])
                .sum();
            50.0 + signal + residual[i]
        })
        .collect();
    (x, y)
}

/// Central finite-difference Jacobian of `f` at `params`.
pub fn finite_difference_jacobian(
    f: impl Fn(&[f64]) -> Vec<f64>,
    params: &[f64],
    h: f64,
) -> DMatrix<f64> {
    let m = f(params).len();
    let mut jac = DMatrix::zeros(m, params.len());
    let mut p = params.to_vec();
    for c in 0..params.len() {
        p[c] = params[c] + h;
        let plus = f(&p);
        p[c] = params[c] - h;
        let minus = f(&p);
        p[c] = params[c];
        for s in 0..m {
            jac[(s, c)] = (plus[s] - minus[s]) / (2.0 * h);
        }
    }
    jac
}

/// Unit-variance, zero-mean non-Gaussian sources: uniform, Laplace,
/// centred exponential and a symmetric bimodal mixture, cycling by column.
pub fn non_gaussian_sources(seed: u64, n: usize, k: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    let exp = Exp::new(1.0).unwrap();
    DMatrix::from_fn(n, k, |_, j| match j % 4 {
        0 => r.random_range(-3f64.sqrt()..3f64.sqrt()),
        1 => {
            let sign = if r.random::<bool>() { 1.0 } else { -1.0 };
            sign * exp.sample(&mut r) / 2f64.sqrt()
        }
        2 => exp.sample(&mut r) - 1.0,
        _ => {
            let centre = if r.random::<bool>() { 0.9 } else { -0.9 };
            centre + 0.4359 * r.sample::<f64, _>(StandardNormal)
        }
    })
}

/// Random mixing matrix with entries in [-1, 1].
pub fn random_mixing(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

/// Independent N(0, sd²) entries.
pub fn gaussian_matrix(seed: u64, rows: usize, cols: usize, sd: f64) -> DMatrix<f64> {
    let mut r = rng(seed);
    DMatrix::from_fn(rows, cols, |_, _| sd * r.sample::<f64, _>(StandardNormal))
}

/// Textbook Gaussian-kernel average with no stability shift.
pub fn kernel_average(exemplars: &[Vec<f64>], targets: &[f64], spread: f64, x: &[f64]) -> f64 {
    let mut numer = 0.0;
    let mut denom = 0.0;
    for (e, y) in exemplars.iter().zip(targets) {
        let d2: f64 = e.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
        let w = (-d2 / (2.0 * spread * spread)).exp();
        numer += w * y;
        denom += w;
    }
    numer / denom
}

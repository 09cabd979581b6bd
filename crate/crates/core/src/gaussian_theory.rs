//! Closed-form second-order moments of Gaussian quadratic forms used as
//! exactly checkable oracles for the simulator and estimators.
//!
//! The `var_mean_*` formulas treat `(eta(0), ..., eta(n-1))` as having a
//! tridiagonal correlation matrix with `rho` on the first off-diagonals. The
//! `exact_*` variants use the full stationary AR(1) correlation
//! `rho^|i - k|` instead.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check<T: Real>(rho: T, n: usize) -> Result<()> {
    if !(rho >= T::zero() && rho < T::one()) || n < 2 {
        return Err(Error::Parameter(format!("need 0 <= rho < 1 and n >= 2, got rho = {rho}, n = {n}")));
    }
    Ok(())
}

/// `Var[(1/n) sum eta^2] = 2/n + 4 (1/n - 1/n^2) rho^2`.
pub fn var_mean_eta_squared<T: Real>(rho: T, n: usize) -> Result<T> {
    check(rho, n)?;
    let nf = T::from_count(n);
    Ok(T::lit(2.0) / nf + T::lit(4.0) * (T::one() / nf - T::one() / (nf * nf)) * rho * rho)
}

/// `Var[(1/(n-1)) sum eta(i) eta(i+1)] = ((n-1) + 2(n-2) rho^2 + (n-1) rho^2) / (n-1)^2`.
pub fn var_mean_cross<T: Real>(rho: T, n: usize) -> Result<T> {
    check(rho, n)?;
    let m = T::from_count(n - 1);
    let r2 = rho * rho;
    Ok((m + T::lit(2.0) * T::from_count(n - 2) * r2 + m * r2) / (m * m))
}

/// `K_1 = 2 + 4 rho^2`, the limit of `n Var[(1/n) sum eta^2]`.
pub fn k1<T: Real>(rho: T) -> T {
    T::lit(2.0) + T::lit(4.0) * rho * rho
}

/// `K_2 = 1 + 3 rho^2`, the limit of `n Var[(1/(n-1)) sum eta(i) eta(i+1)]`.
pub fn k2<T: Real>(rho: T) -> T {
    T::one() + T::lit(3.0) * rho * rho
}

/// `Var[y^T Q y] = 2 tr(Q L Q L) + 4 mu^T Q L Q mu` for `y ~ N(mu, L)`.
pub fn quadratic_form_variance<T: Real>(q: ArrayView2<T>, lambda: ArrayView2<T>, mu: ArrayView1<T>) -> Result<T> {
    let d = q.nrows();
    if q.ncols() != d || lambda.dim() != (d, d) || mu.len() != d {
        return Err(Error::Dimension { expected: d, got: mu.len() });
    }
    let scale = q.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    for i in 0..d {
        for j in 0..i {
            if (q[[i, j]] - q[[j, i]]).abs() > T::lit(1e-12) * scale {
                return Err(Error::Parameter("quadratic form matrix must be symmetric".into()));
            }
        }
    }
    let ql = q.dot(&lambda);
    let tr: T = (0..d).map(|i| (0..d).map(|k| ql[[i, k]] * ql[[k, i]]).sum::<T>()).sum();
    let qlq = ql.dot(&q);
    let mean_term = mu.dot(&qlq.dot(&mu));
    Ok(T::lit(2.0) * tr + T::lit(4.0) * mean_term)
}

/// Stationary unit-variance AR(1) correlation matrix `rho^|i - k|`.
pub fn ar1_correlation<T: Real>(rho: T, n: usize) -> Array2<T> {
    Array2::from_shape_fn((n, n), |(i, k)| rho.powi(i.abs_diff(k) as i32))
}

/// Tridiagonal correlation matrix with `rho` on the first off-diagonals.
pub fn tridiagonal_correlation<T: Real>(rho: T, n: usize) -> Array2<T> {
    Array2::from_shape_fn((n, n), |(i, k)| match i.abs_diff(k) {
        0 => T::one(),
        1 => rho,
        _ => T::zero(),
    })
}

/// `Var[(1/n) sum eta^2]` for a stationary AR(1), in `O(n)`.
pub fn exact_var_mean_eta_squared<T: Real>(rho: T, n: usize) -> Result<T> {
    check(rho, n)?;
    let r2 = rho * rho;
    let mut s = T::from_count(n);
    let mut p = T::one();
    for d in 1..n {
        p *= r2;
        s += T::lit(2.0) * T::from_count(n - d) * p;
    }
    let nf = T::from_count(n);
    Ok(T::lit(2.0) * s / (nf * nf))
}

/// `Var[(1/(n-1)) sum eta(i) eta(i+1)]` for a stationary AR(1), in `O(n)`.
pub fn exact_var_mean_cross<T: Real>(rho: T, n: usize) -> Result<T> {
    check(rho, n)?;
    let m = n - 1;
    let r2 = rho * rho;
    let mut s = T::from_count(m) * (T::one() + r2);
    let mut p = T::one();
    for d in 1..m {
        p *= r2;
        s += T::lit(4.0) * T::from_count(m - d) * p;
    }
    let mf = T::from_count(m);
    Ok(s / (mf * mf))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianOracleReport<T> {
    pub rho: T,
    pub n: usize,
    pub var_eta_sq_mean: T,
    pub var_cross_mean: T,
    pub k1: T,
    pub k2: T,
    /// `n` times the variances; bounded by 6 and 4.
    pub k1_tilde: T,
    pub k2_tilde: T,
}

impl<T: Real> GaussianOracleReport<T> {
    pub fn new(rho: T, n: usize) -> Result<Self> {
        let v1 = var_mean_eta_squared(rho, n)?;
        let v2 = var_mean_cross(rho, n)?;
        let nf = T::from_count(n);
        Ok(Self { rho, n, var_eta_sq_mean: v1, var_cross_mean: v2, k1: k1(rho), k2: k2(rho), k1_tilde: nf * v1, k2_tilde: nf * v2 })
    }

    /// `K~_1 + K~_2`, at most 10.
    pub fn s_bound(&self) -> T {
        self.k1_tilde + self.k2_tilde
    }
}

/// Sample mean and variance with the standard error of each
/// (the latter from the sample fourth central moment).
#[derive(Debug, Clone, Copy)]
pub struct MomentSummary {
    pub mean: f64,
    pub mean_se: f64,
    pub var: f64,
    pub var_se: f64,
}

pub fn summarize(x: ArrayView1<f64>) -> MomentSummary {
    let r = x.len() as f64;
    let mean = x.sum() / r;
    let c = x.mapv(|v| v - mean);
    let m2 = c.mapv(|v| v * v).sum() / r;
    let m4 = c.mapv(|v| v.powi(4)).sum() / r;
    let var = m2 * r / (r - 1.0);
    MomentSummary { mean, mean_se: (var / r).sqrt(), var, var_se: ((m4 - m2 * m2).max(0.0) / r).sqrt() }
}

/// Statistics `(1/n) sum eta^2` and `(1/(n-1)) sum eta(i) eta(i+1)` of one path.
pub fn path_statistics(eta: ArrayView1<f64>) -> (f64, f64) {
    let n = eta.len();
    let sq = eta.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let cross = (0..n - 1).map(|i| eta[i] * eta[i + 1]).sum::<f64>() / (n - 1) as f64;
    (sq, cross)
}

//! Empirical covariance operator of discretised curves, its
//! eigendecomposition, and the estimators expressed in the empirical
//! eigenbasis.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::estimators::{self, BasisTag, OperatorEstimate};
use crate::linalg::symmetric_eigen;
use crate::scalar::Real;
use crate::simulator::{CoefficientSeries, FunctionalSample};

/// Leading eigenpairs of an empirical covariance operator.
#[derive(Debug, Clone)]
pub struct EmpiricalEigenSystem<T> {
    /// `C_{n,j}`, descending.
    pub eigenvalues: Array1<T>,
    /// `p x k`, column `j` is `phi_{n,j}` on the grid.
    pub eigenvectors: Array2<T>,
    pub quad_weights: Array1<T>,
}

impl<T: Real> EmpiricalEigenSystem<T> {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Coefficients `<X_i, phi_{n,j}>` for `j < k_n`.
    pub fn project(&self, curves: ArrayView2<T>, k_n: usize) -> Result<Array2<T>> {
        if k_n > self.k() {
            return Err(Error::Parameter(format!("k_n = {k_n} exceeds {} eigenpairs", self.k())));
        }
        if curves.ncols() != self.quad_weights.len() {
            return Err(Error::Dimension { expected: self.quad_weights.len(), got: curves.ncols() });
        }
        let phi = self.eigenvectors.slice(ndarray::s![.., ..k_n]);
        let weighted = &phi * &self.quad_weights.view().insert_axis(Axis(1));
        Ok(curves.dot(&weighted))
    }

    /// Curve `sum_j a_j phi_{n,j}` on the grid.
    pub fn synthesize(&self, coeffs: ArrayView1<T>) -> Array1<T> {
        let k = coeffs.len();
        self.eigenvectors.slice(ndarray::s![.., ..k]).dot(&coeffs)
    }

    pub fn flip(&mut self, j: usize) {
        self.eigenvectors.column_mut(j).mapv_inplace(|v| -v);
    }
}

/// `(1/n) sum_i X_i(t_s) X_i(t_t)`.
pub fn empirical_covariance<T: Real>(sample: &FunctionalSample<T>) -> Result<Array2<T>> {
    if sample.n() < 2 {
        return Err(Error::Parameter(format!("need n >= 2 curves, got {}", sample.n())));
    }
    let c = &sample.curves;
    Ok(c.t().dot(c) / T::from_count(sample.n()))
}

/// Top `k` eigenpairs of the integral operator with kernel `cov` under the
/// quadrature rule `weights`. If `reference` (`k x p`, one function per row)
/// is given, each eigenvector is oriented to have a nonnegative inner product
/// with the matching reference function, otherwise so that its first entry above
/// roundoff level is positive.
pub fn eigen_decompose<T: Real>(
    cov: ArrayView2<T>,
    weights: ArrayView1<T>,
    k: usize,
    reference: Option<ArrayView2<T>>,
) -> Result<EmpiricalEigenSystem<T>> {
    let p = cov.nrows();
    if cov.ncols() != p || weights.len() != p {
        return Err(Error::Dimension { expected: p, got: weights.len() });
    }
    if k == 0 || k > p {
        return Err(Error::Parameter(format!("k = {k} outside 1..={p}")));
    }
    if weights.iter().any(|&w| !(w > T::zero())) {
        return Err(Error::Parameter("quadrature weights must be positive".into()));
    }
    let sw = weights.mapv(|w| w.sqrt());
    let mut b = Array2::from_shape_fn((p, p), |(s, t)| sw[s] * cov[[s, t]] * sw[t]);
    // symmetrise against roundoff in the caller's covariance
    for s in 0..p {
        for t in 0..s {
            let v = (b[[s, t]] + b[[t, s]]) / T::lit(2.0);
            b[[s, t]] = v;
            b[[t, s]] = v;
        }
    }
    let eig = symmetric_eigen(b.view())?;
    let eigenvalues = eig.values.slice(ndarray::s![..k]).mapv(|v| v.max(T::zero()));
    let mut vectors = Array2::zeros((p, k));
    for j in 0..k {
        let mut col = Array1::from_shape_fn(p, |s| eig.vectors[[s, j]] / sw[s]);
        let sign = match reference {
            Some(r) if j < r.nrows() => (0..p).map(|s| weights[s] * col[s] * r[[j, s]]).sum::<T>(),
            _ => {
                // entries at roundoff level (e.g. at Dirichlet endpoints) do not count
                let tol = col.iter().fold(T::zero(), |m, v| m.max(v.abs())) * T::lit(1e-6);
                col.iter().copied().find(|v| v.abs() > tol).unwrap_or(T::one())
            }
        };
        if sign < T::zero() {
            col.mapv_inplace(|v| -v);
        }
        vectors.column_mut(j).assign(&col);
    }
    Ok(EmpiricalEigenSystem { eigenvalues, eigenvectors: vectors, quad_weights: weights.to_owned() })
}

fn projected<T: Real>(sample: &FunctionalSample<T>, eig: &EmpiricalEigenSystem<T>, k_n: usize) -> Result<CoefficientSeries<T>> {
    if k_n == 0 {
        return Err(Error::Parameter("k_n must be at least 1".into()));
    }
    for j in 0..k_n.min(eig.k()) {
        if !(eig.eigenvalues[j] > T::zero()) {
            return Err(Error::DegenerateComponent { component: j + 1 });
        }
    }
    CoefficientSeries::new(eig.project(sample.curves.view(), k_n)?, "empirical", 0)
}

fn tag<T>(mut e: OperatorEstimate<T>) -> OperatorEstimate<T> {
    e.basis_tag = BasisTag::Empirical;
    e
}

/// Componentwise estimator on the empirical eigenbasis.
pub fn empirical_componentwise<T: Real>(
    sample: &FunctionalSample<T>,
    eig: &EmpiricalEigenSystem<T>,
    k_n: usize,
) -> Result<OperatorEstimate<T>> {
    let x = projected(sample, eig, k_n)?;
    estimators::componentwise(&x, k_n).map(tag)
}

pub fn empirical_bosq<T: Real>(
    sample: &FunctionalSample<T>,
    eig: &EmpiricalEigenSystem<T>,
    k_n: usize,
) -> Result<OperatorEstimate<T>> {
    let x = projected(sample, eig, k_n)?;
    estimators::bosq(&x, k_n).map(tag)
}

pub fn empirical_guillas<T: Real>(
    sample: &FunctionalSample<T>,
    eig: &EmpiricalEigenSystem<T>,
    k_n: usize,
    a_n: T,
) -> Result<OperatorEstimate<T>> {
    let x = projected(sample, eig, k_n)?;
    estimators::guillas(&x, k_n, a_n).map(tag)
}

/// Grid values of `rho_hat(X_{n-1})` for an empirical-basis estimate.
pub fn predict_curve<T: Real>(
    est: &OperatorEstimate<T>,
    eig: &EmpiricalEigenSystem<T>,
    last_curve: ArrayView1<T>,
) -> Result<Array1<T>> {
    let x = eig.project(last_curve.insert_axis(Axis(0)), est.k_n)?;
    let coeffs = estimators::plug_in_predict(est, x.row(0))?;
    Ok(eig.synthesize(coeffs.view()))
}

/// Almost-sure convergence diagnostic for the projection estimator.
#[derive(Debug, Clone)]
pub struct BosqCondition<T> {
    /// `b_1 = 2 sqrt 2 / (C_1 - C_2)`, `b_j = 2 sqrt 2 max(1/(C_{j-1} - C_j), 1/(C_j - C_{j+1}))`.
    pub b: Vec<T>,
    /// `n C_{k_n}^2 / (ln n (sum_{j <= k_n} b_j)^2)`.
    pub ratio: T,
}

/// Needs `C_1..C_{k_n + 1}` in `c`.
pub fn bosq_as_condition<T: Real>(c: &[T], n: usize, k_n: usize) -> Result<BosqCondition<T>> {
    if k_n == 0 || c.len() < k_n + 1 {
        return Err(Error::Parameter(format!("need {} eigenvalues for k_n = {k_n}, got {}", k_n + 1, c.len())));
    }
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2, got {n}")));
    }
    let two_root2 = T::lit(2.0) * T::SQRT_2();
    let gap = |j: usize| -> Result<T> {
        let g = c[j] - c[j + 1];
        if g > T::zero() {
            Ok(T::one() / g)
        } else {
            Err(Error::SpectralGap(j + 1, j + 2))
        }
    };
    let mut b = Vec::with_capacity(k_n);
    for j in 0..k_n {
        let right = gap(j)?;
        let inv = if j == 0 { right } else { gap(j - 1)?.max(right) };
        b.push(two_root2 * inv);
    }
    let sum: T = b.iter().copied().sum();
    let nf = T::from_count(n);
    let ratio = nf * c[k_n - 1] * c[k_n - 1] / (nf.ln() * sum * sum);
    Ok(BosqCondition { b, ratio })
}

/// Ratios along a grid of sample sizes and whether they fail to increase
/// anywhere (a sign the condition does not diverge on that grid).
pub fn bosq_condition_path<T: Real>(
    c: &[T],
    ns: &[usize],
    k_of_n: impl Fn(usize) -> usize,
) -> Result<(Vec<T>, bool)> {
    let ratios: Vec<T> = ns.iter().map(|&n| bosq_as_condition(c, n, k_of_n(n)).map(|d| d.ratio)).collect::<Result<_>>()?;
    let non_divergent = ratios.windows(2).any(|w| w[1] <= w[0]);
    Ok((ratios, non_divergent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{truncation_level, TruncationRule};
    use crate::quadrature::Grid;
    use crate::simulator::{assemble_curves, basis_matrix, simulate_diagonal};
    use crate::spectral_model::OperatorModel;

    fn setup(n: usize, p: usize, seed: u64) -> (OperatorModel<f64>, FunctionalSample<f64>) {
        let m = OperatorModel::default();
        let grid = Grid::uniform(m.interval, p).unwrap();
        let coeffs = simulate_diagonal(&m, n, 30, seed).unwrap();
        let s = assemble_curves(&coeffs, &m, &grid).unwrap();
        (m, s)
    }

    #[test]
    fn repeated_curve_is_rank_one() {
        let grid = Grid::uniform(Default::default(), 11).unwrap();
        let f = grid.points.mapv(|t: f64| t * (4.0 - t));
        let curves = Array2::from_shape_fn((4, 11), |(_, m)| f[m]);
        let s = FunctionalSample::new(grid.clone(), curves).unwrap();
        let c = empirical_covariance(&s).unwrap();
        for a in 0..11 {
            for b in 0..11 {
                assert!((c[[a, b]] - f[a] * f[b]).abs() < 1e-12);
            }
        }
        let e = eigen_decompose(c.view(), grid.weights.view(), 3, None).unwrap();
        assert!((e.eigenvalues[0] - grid.norm_sq(f.view())).abs() < 1e-10);
        assert!(e.eigenvalues[1].abs() < 1e-10);
    }

    #[test]
    fn recovers_synthetic_modes() {
        let m = OperatorModel::<f64>::default();
        let grid = Grid::uniform(m.interval, 201).unwrap();
        let phi = basis_matrix(&m, &grid, 4);
        let lam = [3.0, 1.5, 0.7, 0.2];
        let mut cov = Array2::zeros((201, 201));
        for j in 0..4 {
            let v = phi.row(j);
            for s in 0..201 {
                for t in 0..201 {
                    cov[[s, t]] += lam[j] * v[s] * v[t];
                }
            }
        }
        let e = eigen_decompose(cov.view(), grid.weights.view(), 4, Some(phi.view())).unwrap();
        // trapezoid on the sine grid is exact, so modes come back unchanged
        for j in 0..4 {
            assert!((e.eigenvalues[j] - lam[j]).abs() < 1e-6);
            let err = (&e.eigenvectors.column(j) - &phi.row(j)).iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(err < 1e-6, "mode {j}: {err}");
        }
    }

    #[test]
    fn orthonormal_and_sorted() {
        let (m, s) = setup(400, 61, 2);
        let cov = empirical_covariance(&s).unwrap();
        let phi = basis_matrix(&m, &s.grid, 10);
        let e = eigen_decompose(cov.view(), s.grid.weights.view(), 10, Some(phi.view())).unwrap();
        assert!(e.eigenvalues.windows(2).into_iter().all(|w| w[0] >= w[1]));
        let wphi = &e.eigenvectors * &s.grid.weights.view().insert_axis(Axis(1));
        let gram = e.eigenvectors.t().dot(&wphi);
        let res = (&gram - &Array2::<f64>::eye(10)).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(res < 1e-8, "{res}");
        for j in 0..10 {
            assert!(s.grid.inner(e.eigenvectors.column(j), phi.row(j)) >= 0.0);
        }
        assert!(eigen_decompose(cov.view(), s.grid.weights.view(), 62, None).is_err());
    }

    #[test]
    fn leading_eigenvalue_and_trace() {
        let n = 100_000;
        let (m, s) = setup(n, 41, 4);
        let cov = empirical_covariance(&s).unwrap();
        let e = eigen_decompose(cov.view(), s.grid.weights.view(), 3, None).unwrap();
        let r = m.rho(1);
        let se = m.c(1) * (2.0 * (1.0 + r * r) / (1.0 - r * r) / n as f64).sqrt();
        assert!((e.eigenvalues[0] - m.c(1)).abs() < 4.0 * se, "{} vs {}", e.eigenvalues[0], m.c(1));
        let trace: f64 = (0..41).map(|a| s.grid.weights[a] * cov[[a, a]]).sum();
        let total = m.trace_partial(30);
        assert!((trace - total).abs() < 0.05 * total, "{trace} vs {total}");
    }

    #[test]
    fn predictions_ignore_eigenvector_signs() {
        let (m, s) = setup(3000, 51, 6);
        let cov = empirical_covariance(&s).unwrap();
        let e = eigen_decompose(cov.view(), s.grid.weights.view(), 5, None).unwrap();
        let mut f = e.clone();
        f.flip(1);
        f.flip(3);
        let last = s.curves.row(s.n() - 1);
        for which in 0..3 {
            let run = |eig: &EmpiricalEigenSystem<f64>| {
                let est = match which {
                    0 => empirical_componentwise(&s, eig, 5),
                    1 => empirical_bosq(&s, eig, 5),
                    _ => empirical_guillas(&s, eig, 5, 0.5 * eig.eigenvalues[4]),
                }
                .unwrap();
                predict_curve(&est, eig, last).unwrap()
            };
            let diff = (&run(&e) - &run(&f)).iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(diff < 1e-12, "method {which}: {diff}");
        }
        let _ = m;
    }

    #[test]
    fn bessel_inequality() {
        let (_, s) = setup(200, 51, 8);
        let cov = empirical_covariance(&s).unwrap();
        let e = eigen_decompose(cov.view(), s.grid.weights.view(), 8, None).unwrap();
        let x = e.project(s.curves.view(), 8).unwrap();
        for i in 0..s.n() {
            let proj: f64 = x.row(i).iter().map(|v| v * v).sum();
            assert!(proj <= s.grid.norm_sq(s.curves.row(i)) * (1.0 + 1e-10));
        }
    }

    #[test]
    fn componentwise_uses_empirical_eigenvalues() {
        let (_, s) = setup(500, 51, 10);
        let cov = empirical_covariance(&s).unwrap();
        let e = eigen_decompose(cov.view(), s.grid.weights.view(), 4, None).unwrap();
        let x = e.project(s.curves.view(), 4).unwrap();
        for j in 0..4 {
            let c: f64 = x.column(j).iter().map(|v| v * v).sum::<f64>() / 500.0;
            assert!((c - e.eigenvalues[j]).abs() < 1e-10 * e.eigenvalues[0]);
        }
        let est = empirical_componentwise(&s, &e, 4).unwrap();
        assert_eq!(est.basis_tag, BasisTag::Empirical);
    }

    #[test]
    fn condition_coefficients() {
        let c = [4.0, 1.0, 0.5, 0.1];
        let d = bosq_as_condition(&c, 100, 1).unwrap();
        assert!((d.b[0] - 2.0 * 2f64.sqrt() / 3.0).abs() < 1e-15);
        let d = bosq_as_condition(&c, 100, 3).unwrap();
        assert!((d.b[1] - 2.0 * 2f64.sqrt() * 2.0).abs() < 1e-14);
        assert!((d.b[2] - 2.0 * 2f64.sqrt() * 2.5).abs() < 1e-14);
        assert!(matches!(bosq_as_condition(&[1.0, 1.0, 0.5], 100, 2), Err(Error::SpectralGap(1, 2))));
    }

    #[test]
    fn condition_along_log_rule() {
        let m = OperatorModel::<f64>::default();
        let c: Vec<f64> = (1..=20).map(|j| m.c(j)).collect();
        let ns: Vec<usize> = (0..20).map(|t| 15000 + 20000 * t).collect();
        let k = |n| truncation_level(&TruncationRule::LogN, n);
        let (ratios, flagged) = bosq_condition_path(&c, &ns, k).unwrap();
        // increases while k_n is constant, drops at every jump of k_n
        for w in 0..ns.len() - 1 {
            if k(ns[w]) == k(ns[w + 1]) {
                assert!(ratios[w + 1] > ratios[w]);
            } else {
                assert!(ratios[w + 1] < ratios[w]);
            }
        }
        assert!(flagged);
        assert!(ratios.iter().all(|&r| r < 1e-7));
        let (_, flagged) = bosq_condition_path(&c, &ns, |_| 3).unwrap();
        assert!(!flagged);
    }
}

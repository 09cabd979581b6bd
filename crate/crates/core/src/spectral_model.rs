//! Closed-form eigenstructure of the Dirichlet negative Laplacian on an
//! interval, and the operator triple (C, rho, R_eps) built from it.
//!
//! All three operators share the sine eigenbasis
//! `phi_j(x) = sqrt(2/(b-a)) sin(pi j (x-a)/(b-a))`, with eigenvalues
//!
//! ```text
//! lambda_j  = (pi j / (b-a))^2
//! C_j       = lambda_j^(-delta1/2)
//! rho_j     = (lambda_j / (lambda_1 - eps))^(-delta2/2)
//! sigma_j^2 = C_j (1 - rho_j^2)
//! ```

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub a: T,
    pub b: T,
}

impl<T: Real> Interval<T> {
    pub fn new(a: T, b: T) -> Result<Self> {
        if !(b > a) {
            return Err(Error::Domain(format!("interval requires b > a, got ({a}, {b})")));
        }
        Ok(Self { a, b })
    }

    #[inline]
    pub fn length(&self) -> T {
        self.b - self.a
    }

    #[inline]
    pub fn contains(&self, x: T) -> bool {
        x >= self.a && x <= self.b
    }
}

impl<T: Real> Default for Interval<T> {
    fn default() -> Self {
        Self { a: T::zero(), b: T::lit(4.0) }
    }
}

/// `lambda_j = pi^2 j^2 / (b-a)^2`.
pub fn laplacian_eigenvalue<T: Real>(j: usize, iv: &Interval<T>) -> T {
    debug_assert!(j >= 1);
    let w = T::PI() * T::from_count(j) / iv.length();
    w * w
}

/// L2-orthonormal Dirichlet eigenfunction evaluated at `x`.
pub fn basis_function<T: Real>(j: usize, iv: &Interval<T>, x: T) -> Result<T> {
    if !iv.contains(x) {
        return Err(Error::Domain(format!("x = {x} outside [{}, {}]", iv.a, iv.b)));
    }
    Ok(basis_unchecked(j, iv, x))
}

#[inline]
pub(crate) fn basis_unchecked<T: Real>(j: usize, iv: &Interval<T>, x: T) -> T {
    let len = iv.length();
    (T::lit(2.0) / len).sqrt() * (T::PI() * T::from_count(j) * (x - iv.a) / len).sin()
}

/// Spectral description of a diagonal Gaussian ARH(1) model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorModel<T> {
    pub interval: Interval<T>,
    /// Decay exponent of the covariance eigenvalues.
    pub delta1: T,
    /// Decay exponent of the autocorrelation eigenvalues.
    pub delta2: T,
    /// Shift below the first Laplacian eigenvalue.
    pub epsilon: T,
    /// Number of spectral components used when evaluating series.
    pub m: usize,
}

impl<T: Real> Default for OperatorModel<T> {
    fn default() -> Self {
        Self {
            interval: Interval::default(),
            delta1: T::lit(2.4),
            delta2: T::lit(1.1),
            epsilon: T::lit(0.01),
            m: 50,
        }
    }
}

impl<T: Real> OperatorModel<T> {
    pub fn new(interval: Interval<T>, delta1: T, delta2: T, epsilon: T, m: usize) -> Self {
        Self { interval, delta1, delta2, epsilon, m }
    }

    /// Same model with a different covariance decay exponent.
    pub fn with_delta1(mut self, delta1: T) -> Self {
        self.delta1 = delta1;
        self
    }

    pub fn lambda(&self, j: usize) -> T {
        laplacian_eigenvalue(j, &self.interval)
    }

    pub fn c(&self, j: usize) -> T {
        c_eigenvalue(j, self)
    }

    pub fn rho(&self, j: usize) -> T {
        rho_eigenvalue(j, self)
    }

    pub fn sigma2(&self, j: usize) -> T {
        noise_eigenvalue(j, self)
    }

    /// `(C_1..C_k, rho_1..rho_k)`.
    pub fn spectrum(&self, k: usize) -> DiagonalSpectrum<T> {
        DiagonalSpectrum {
            c: (1..=k).map(|j| self.c(j)).collect(),
            rho: (1..=k).map(|j| self.rho(j)).collect(),
        }
    }

    /// `sum_{j<=k} C_j`.
    pub fn trace_partial(&self, k: usize) -> T {
        (1..=k).map(|j| self.c(j)).sum()
    }

    pub fn validate(&self) -> Result<ModelDiagnostics<T>> {
        validate_model(self)
    }
}

/// `C_j = (pi j/(b-a))^(-delta1)`.
pub fn c_eigenvalue<T: Real>(j: usize, model: &OperatorModel<T>) -> T {
    let w = T::PI() * T::from_count(j) / model.interval.length();
    w.powf(-model.delta1)
}

/// `rho_j = (lambda_j/(lambda_1 - eps))^(-delta2/2)`.
///
/// Returns NaN when `eps >= lambda_1`; [`validate_model`] reports that case.
pub fn rho_eigenvalue<T: Real>(j: usize, model: &OperatorModel<T>) -> T {
    let shifted = model.lambda(1) - model.epsilon;
    if !(shifted > T::zero()) {
        return T::nan();
    }
    (model.lambda(j) / shifted).powf(-model.delta2 / T::lit(2.0))
}

/// `sigma_j^2 = C_j (1 - rho_j^2)`.
pub fn noise_eigenvalue<T: Real>(j: usize, model: &OperatorModel<T>) -> T {
    let r = model.rho(j);
    model.c(j) * (T::one() - r * r)
}

/// Per-component coefficient and variance sequences of a diagonal model.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalSpectrum<T> {
    pub c: Vec<T>,
    pub rho: Vec<T>,
}

impl<T: Real> DiagonalSpectrum<T> {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelDiagnostics<T> {
    /// `sum_{j<=M} C_j`.
    pub trace_partial_sum: T,
    /// `sup_j rho_j = rho_1`.
    pub sup_rho: T,
    /// `sum_{j<=M} rho_j^2`.
    pub hilbert_schmidt_partial_sum: T,
    /// `sum_{j<=M} sigma_j^2`.
    pub noise_trace_partial_sum: T,
}

/// Checks the model assumptions and reports the partial sums witnessing
/// trace-class covariance and Hilbert-Schmidt autocorrelation.
pub fn validate_model<T: Real>(model: &OperatorModel<T>) -> Result<ModelDiagnostics<T>> {
    let mut violations = Vec::new();
    let iv = model.interval;
    if !(iv.b > iv.a) {
        violations.push(format!("interval requires b > a, got ({}, {})", iv.a, iv.b));
    }
    if !(model.delta1 > T::one()) {
        violations.push(format!("delta1 must exceed 1 (trace class), got {}", model.delta1));
    }
    if !(model.delta2 > T::one() && model.delta2 < T::lit(2.0)) {
        violations.push(format!("delta2 must lie in (1, 2), got {}", model.delta2));
    }
    let lambda1 = model.lambda(1);
    if !(model.epsilon > T::zero() && model.epsilon < lambda1) {
        violations.push(format!(
            "epsilon must lie in (0, lambda_1 = {lambda1}), got {}",
            model.epsilon
        ));
    }
    if model.m == 0 {
        violations.push("spectral truncation M must be positive".into());
    }
    if !violations.is_empty() {
        return Err(Error::Model(violations));
    }

    let mut trace = T::zero();
    let mut hs = T::zero();
    let mut noise = T::zero();
    let mut prev: Option<(T, T)> = None;
    for j in 1..=model.m {
        let (c, r, s2) = (model.c(j), model.rho(j), model.sigma2(j));
        if !(r > T::zero() && r < T::one()) {
            violations.push(format!("rho_{j} = {r} outside (0, 1)"));
        }
        if !(s2 > T::zero()) {
            violations.push(format!("sigma_{j}^2 = {s2} not positive"));
        }
        if let Some((pc, pr)) = prev {
            if !(c < pc) {
                violations.push(format!("C_{j} = {c} not below C_{} = {pc}", j - 1));
            }
            if !(r < pr) {
                violations.push(format!("rho_{j} = {r} not below rho_{} = {pr}", j - 1));
            }
        }
        prev = Some((c, r));
        trace += c;
        hs += r * r;
        noise += s2;
    }
    if !violations.is_empty() {
        return Err(Error::Model(violations));
    }
    Ok(ModelDiagnostics {
        trace_partial_sum: trace,
        sup_rho: model.rho(1),
        hilbert_schmidt_partial_sum: hs,
        noise_trace_partial_sum: noise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn paper_model() -> OperatorModel<f64> {
        OperatorModel::default()
    }

    #[test]
    fn laplacian_eigenvalues() {
        let iv = Interval::new(0.0, 4.0).unwrap();
        let l1 = laplacian_eigenvalue(1, &iv);
        assert!((l1 - PI * PI / 16.0).abs() < 1e-15);
        assert!((l1 - 0.616850).abs() < 1e-6);
        assert!((laplacian_eigenvalue(2, &iv) - 4.0 * l1).abs() < 1e-14);
        let unit = Interval::new(0.0, 1.0).unwrap();
        assert!((laplacian_eigenvalue(1, &unit) - PI * PI).abs() < 1e-13);
    }

    #[test]
    fn basis_values_and_domain() {
        let iv = Interval::new(0.0, 4.0).unwrap();
        let v = basis_function(1, &iv, 2.0).unwrap();
        assert!((v - 0.5f64.sqrt()).abs() < 1e-15);
        for j in 1..10 {
            assert!(basis_function(j, &iv, 0.0).unwrap().abs() < 1e-15);
            assert!(basis_function(j, &iv, 4.0).unwrap().abs() < 1e-13);
        }
        assert!(matches!(basis_function(1, &iv, 4.5), Err(Error::Domain(_))));
        assert!(matches!(basis_function(1, &iv, -0.1), Err(Error::Domain(_))));
        // shifted interval still vanishes at its own endpoints
        let sh = Interval::new(1.0f64, 3.5).unwrap();
        assert!(basis_function(3, &sh, 1.0).unwrap().abs() < 1e-15);
        assert!(basis_function(3, &sh, 3.5).unwrap().abs() < 1e-13);
    }

    #[test]
    fn unit_norm_by_trapezoid() {
        let iv = Interval::new(0.0, 4.0).unwrap();
        let p = 2048;
        let h = 4.0 / (p - 1) as f64;
        for j in [1usize, 2, 7, 20] {
            let mut s = 0.0;
            for m in 0..p {
                let x = m as f64 * h;
                let w = if m == 0 || m == p - 1 { h / 2.0 } else { h };
                s += w * basis_function(j, &iv, x.min(4.0)).unwrap().powi(2);
            }
            assert!((s - 1.0).abs() < 1e-6, "j={j} norm {s}");
        }
    }

    #[test]
    fn covariance_eigenvalues() {
        let m = paper_model();
        let c1 = m.c(1);
        assert!((c1 - (PI / 4.0).powf(-2.4)).abs() < 1e-14);
        assert!((c1 - 1.7857).abs() < 1e-4);
        for j in 1..50 {
            let r = m.c(2 * j) / m.c(j);
            assert!((r - 2f64.powf(-2.4)).abs() < 1e-13);
            // power law: C_j j^delta1 constant
            let k = m.c(j) * (j as f64).powf(2.4);
            assert!((k - c1).abs() / c1 < 1e-12);
        }
    }

    #[test]
    fn covariance_partial_sums_cauchy() {
        let m = paper_model();
        let mut s = 0.0;
        let mut checkpoints = Vec::new();
        for j in 1..=1_000_000usize {
            let c = m.c(j);
            assert!(c > 0.0);
            s += c;
            if j.is_power_of_two() {
                checkpoints.push((j, s));
            }
        }
        // tail beyond J is bounded by C_1 J^{1-delta1}/(delta1-1)
        for &(j, sj) in &checkpoints {
            let tail_bound = m.c(1) * (j as f64).powf(1.0 - 2.4) / 1.4;
            assert!(s - sj <= tail_bound + 1e-9, "j={j}");
        }
        assert!(s < 2.5);
    }

    #[test]
    fn autocorrelation_eigenvalues() {
        let m = paper_model();
        let r1 = m.rho(1);
        let lam1 = PI * PI / 16.0;
        let expected_sq = (lam1 / (lam1 - 0.01)).powf(-1.1);
        assert!((r1 * r1 - expected_sq).abs() < 1e-14);
        assert!((r1 * r1 - 0.9822).abs() < 1e-4);
        assert!((r1 - 0.9911).abs() < 1e-4);
        let mut hs = 0.0;
        for j in 1..2000 {
            let (a, b) = (m.rho(j), m.rho(j + 1));
            assert!(a > b && b > 0.0 && a < 1.0);
            hs += a * a;
        }
        // tail comparison with j^{-2.2}: sum_{j>=2000} rho_j^2 <= rho_1^2 * 1999^{-1.2}/1.2
        let tail = r1 * r1 * 1999f64.powf(-1.2) / 1.2;
        assert!(tail < 1e-3 && hs.is_finite());
    }

    #[test]
    fn noise_eigenvalues() {
        let m = paper_model();
        for j in 1..30 {
            let r = m.rho(j);
            assert_eq!(m.sigma2(j), m.c(j) * (1.0 - r * r));
        }
        let s1 = m.sigma2(1);
        assert!((s1 - 1.7857 * (1.0 - 0.9822)).abs() < 1e-3);
        assert!((s1 - 0.0318).abs() < 1e-4);
        let st: f64 = (1..=50).map(|j| m.sigma2(j)).sum();
        assert!(st < m.trace_partial(50));
    }

    #[test]
    fn validation() {
        let d = paper_model().validate().unwrap();
        assert!(d.sup_rho < 1.0);
        assert!(d.trace_partial_sum > 2.4 && d.trace_partial_sum < 2.5);
        assert!(d.noise_trace_partial_sum < d.trace_partial_sum);

        let bad = paper_model().with_delta1(0.9);
        match bad.validate() {
            Err(Error::Model(v)) => assert!(v.iter().any(|s| s.contains("delta1"))),
            other => panic!("{other:?}"),
        }
        let mut at_lambda = paper_model();
        at_lambda.epsilon = at_lambda.lambda(1);
        assert!(matches!(at_lambda.validate(), Err(Error::Model(_))));
        let mut d2 = paper_model();
        d2.delta2 = 2.0;
        assert!(d2.validate().is_err());
    }

    #[test]
    fn generic_over_f32() {
        let m: OperatorModel<f32> = OperatorModel::default();
        assert!((m.c(1) - 1.7857).abs() < 1e-3);
        assert!(m.validate().is_ok());
    }
}

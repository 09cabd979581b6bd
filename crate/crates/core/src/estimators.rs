//! Moment-based estimators of the autocorrelation operator in a fixed
//! orthonormal basis, truncation rules and the plug-in predictor.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::scalar::Real;
use crate::simulator::CoefficientSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisTag {
    Theoretical,
    Empirical,
}

/// `k_n x k_n` coefficient matrix of an estimated operator; entry `(l, j)`
/// is `<rho_hat(phi_j), phi_l>`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorEstimate<T> {
    pub matrix: Array2<T>,
    pub basis_tag: BasisTag,
    pub k_n: usize,
}

impl<T: Real> OperatorEstimate<T> {
    pub fn diagonal(&self) -> Array1<T> {
        self.matrix.diag().to_owned()
    }

    pub fn predict(&self, last: ArrayView1<T>) -> Result<Array1<T>> {
        plug_in_predict(self, last)
    }
}

fn check_k<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize) -> Result<()> {
    if k_n == 0 || k_n > coeffs.k() {
        return Err(Error::Parameter(format!("k_n = {k_n} outside 1..={}", coeffs.k())));
    }
    Ok(())
}

/// Lag-one cross moment `(1/(n-1)) sum X_{i,j} X_{i+1,j}` and variance
/// `(1/n) sum X_{i,j}^2` of component `j` (zero-based).
pub fn moment_estimates<T: Real>(coeffs: &CoefficientSeries<T>, j: usize) -> Result<(T, T)> {
    check_k(coeffs, j + 1)?;
    let (d, c) = raw_sums(coeffs.values.column(j));
    let n = coeffs.n();
    Ok((d / T::from_count(n - 1), c / T::from_count(n)))
}

fn raw_sums<T: Real>(col: ArrayView1<T>) -> (T, T) {
    let mut cross = T::zero();
    let mut sq = T::zero();
    let n = col.len();
    for i in 0..n {
        sq += col[i] * col[i];
        if i + 1 < n {
            cross += col[i] * col[i + 1];
        }
    }
    (cross, sq)
}

/// Lag-one cross-covariance matrix, entry `(l, j) = (1/(n-1)) sum X_{i,j} X_{i+1,l}`.
pub fn cross_covariance<T: Real>(values: ArrayView2<T>, k_n: usize) -> Array2<T> {
    let n = values.nrows();
    let x = values.slice(ndarray::s![.., ..k_n]);
    let head = x.slice(ndarray::s![..n - 1, ..]);
    let tail = x.slice(ndarray::s![1.., ..]);
    tail.t().dot(&head) / T::from_count(n - 1)
}

/// Uncentered covariance matrix `(1/n) sum X_i X_i^T` of the first `k_n` components.
pub fn covariance<T: Real>(values: ArrayView2<T>, k_n: usize) -> Array2<T> {
    let n = values.nrows();
    let x = values.slice(ndarray::s![.., ..k_n]);
    x.t().dot(&x) / T::from_count(n)
}

fn variances<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize) -> Result<Vec<T>> {
    let n = T::from_count(coeffs.n());
    (0..k_n)
        .map(|j| {
            let c = coeffs.values.column(j).iter().map(|&v| v * v).sum::<T>() / n;
            if c > T::zero() {
                Ok(c)
            } else {
                Err(Error::DegenerateComponent { component: j + 1 })
            }
        })
        .collect()
}

/// Diagonal estimator `rho_hat_j = (n/(n-1)) sum X_{i,j} X_{i+1,j} / sum X_{i,j}^2`.
pub fn componentwise<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize) -> Result<OperatorEstimate<T>> {
    check_k(coeffs, k_n)?;
    let n = coeffs.n();
    let bound = T::from_count(n) / T::from_count(n - 1);
    let mut m = Array2::zeros((k_n, k_n));
    for j in 0..k_n {
        let (cross, sq) = raw_sums(coeffs.values.column(j));
        if !(sq > T::zero()) {
            return Err(Error::DegenerateComponent { component: j + 1 });
        }
        let c = sq / T::from_count(n);
        let d = cross / T::from_count(n - 1);
        let r = d / c;
        debug_assert!(r.abs() <= bound * (T::one() + T::epsilon() * T::lit(16.0)));
        m[[j, j]] = r.max(-bound).min(bound);
    }
    Ok(OperatorEstimate { matrix: m, basis_tag: BasisTag::Theoretical, k_n })
}

/// Projection estimator with entry `(l, j) = D_hat(l, j) / C_hat_j`.
pub fn bosq<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize) -> Result<OperatorEstimate<T>> {
    check_k(coeffs, k_n)?;
    let c = variances(coeffs, k_n)?;
    Ok(scaled_cross(coeffs, k_n, &c))
}

/// Bosq's estimator with each `1/C_hat_j` replaced by `1/max(C_hat_j, a_n)`.
pub fn guillas<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize, a_n: T) -> Result<OperatorEstimate<T>> {
    if !(a_n > T::zero()) {
        return Err(Error::Parameter(format!("threshold a_n must be positive, got {a_n}")));
    }
    check_k(coeffs, k_n)?;
    let c: Vec<T> = variances(coeffs, k_n)?.into_iter().map(|c| c.max(a_n)).collect();
    Ok(scaled_cross(coeffs, k_n, &c))
}

fn scaled_cross<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize, denom: &[T]) -> OperatorEstimate<T> {
    let n = coeffs.n();
    let mut m = Array2::zeros((k_n, k_n));
    for j in 0..k_n {
        // same summation order as `componentwise` so the diagonals agree exactly
        let cj = denom[j];
        for l in 0..k_n {
            let mut s = T::zero();
            for i in 0..n - 1 {
                s += coeffs.values[[i, j]] * coeffs.values[[i + 1, l]];
            }
            m[[l, j]] = s / T::from_count(n - 1) / cj;
        }
    }
    OperatorEstimate { matrix: m, basis_tag: BasisTag::Theoretical, k_n }
}

/// `D_hat C_hat^{-1}` with the full `k_n x k_n` covariance matrix, for bases
/// in which the covariance is not diagonal.
pub fn bosq_full<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize) -> Result<OperatorEstimate<T>> {
    full_inverse(coeffs, k_n, None)
}

/// [`bosq_full`] with the covariance eigenvalues floored at `a_n`.
pub fn guillas_full<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize, a_n: T) -> Result<OperatorEstimate<T>> {
    if !(a_n > T::zero()) {
        return Err(Error::Parameter(format!("threshold a_n must be positive, got {a_n}")));
    }
    full_inverse(coeffs, k_n, Some(a_n))
}

fn full_inverse<T: Real>(coeffs: &CoefficientSeries<T>, k_n: usize, floor: Option<T>) -> Result<OperatorEstimate<T>> {
    check_k(coeffs, k_n)?;
    let c = covariance(coeffs.values.view(), k_n);
    let d = cross_covariance(coeffs.values.view(), k_n);
    let eig = symmetric_eigen(c.view())?;
    let mut inv_vals = Array1::zeros(k_n);
    for (q, &mu) in eig.values.iter().enumerate() {
        let mu = match floor {
            Some(a) => mu.max(a),
            None => mu,
        };
        if !(mu > T::zero()) {
            return Err(Error::RankDeficient { index: q + 1, value: mu.as_f64() });
        }
        inv_vals[q] = T::one() / mu;
    }
    let c_inv = (&eig.vectors * &inv_vals).dot(&eig.vectors.t());
    Ok(OperatorEstimate { matrix: d.dot(&c_inv), basis_tag: BasisTag::Theoretical, k_n })
}

/// Default threshold `beta * C_{k_n}`.
pub fn default_threshold<T: Real>(c_kn: T, beta: T) -> T {
    beta * c_kn
}

/// Coefficients of `rho_hat(X_{n-1})`.
pub fn plug_in_predict<T: Real>(est: &OperatorEstimate<T>, last: ArrayView1<T>) -> Result<Array1<T>> {
    if last.len() < est.k_n {
        return Err(Error::Dimension { expected: est.k_n, got: last.len() });
    }
    Ok(est.matrix.dot(&last.slice(ndarray::s![..est.k_n])))
}

/// Rule producing the number of estimated components from the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationRule {
    /// `n^(1/alpha)`
    PowerAlpha { alpha: f64 },
    /// `n^((1 - 2 eps) / (delta1 (4 + 2 gamma)))`
    GuillasEx2 { delta1: f64, gamma: f64, epsilon: f64 },
    /// `ln n`
    LogN,
    /// `e' n^(1/(8 delta1 + 2))`
    GuillasEx4 { delta1: f64, e_prime: f64 },
}

impl TruncationRule {
    /// Example-2 rule with `gamma = 2`, `eps = 0.04 delta1`.
    pub fn guillas_ex2(delta1: f64) -> Self {
        Self::GuillasEx2 { delta1, gamma: 2.0, epsilon: 0.04 * delta1 }
    }

    /// Example-4 rule with `e' = 1.7`.
    pub fn guillas_ex4(delta1: f64) -> Self {
        Self::GuillasEx4 { delta1, e_prime: 1.7 }
    }

    fn raw(&self, n: f64) -> f64 {
        match *self {
            Self::PowerAlpha { alpha } => n.powf(1.0 / alpha),
            Self::GuillasEx2 { delta1, gamma, epsilon } => {
                n.powf((1.0 - 2.0 * epsilon) / (delta1 * (4.0 + 2.0 * gamma)))
            }
            Self::LogN => n.ln(),
            Self::GuillasEx4 { delta1, e_prime } => e_prime * n.powf(1.0 / (8.0 * delta1 + 2.0)),
        }
    }

    /// Unclamped `floor` of the rule, used to detect degenerate settings.
    pub fn unclamped(&self, n: usize) -> usize {
        let r = self.raw(n as f64);
        // absorb rounding of exact powers such as 64^(1/6)
        (r * (1.0 + 1e-12)).floor().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Self::PowerAlpha { alpha } => alpha > 0.0,
            Self::GuillasEx2 { delta1, gamma, epsilon } => delta1 > 0.0 && gamma >= 1.0 && epsilon < 0.5,
            Self::LogN => true,
            Self::GuillasEx4 { delta1, e_prime } => delta1 > 0.0 && e_prime > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Parameter(format!("invalid truncation rule {self}")))
        }
    }
}

impl fmt::Display for TruncationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::PowerAlpha { alpha } => write!(f, "power_alpha({alpha})"),
            Self::GuillasEx2 { delta1, gamma, epsilon } => write!(f, "guillas_ex2({delta1},{gamma},{epsilon})"),
            Self::LogN => write!(f, "log_n"),
            Self::GuillasEx4 { delta1, e_prime } => write!(f, "guillas_ex4({delta1},{e_prime})"),
        }
    }
}

/// Parses `kind` plus a comma-separated parameter list as used in config files.
impl FromStr for TruncationRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, params) = match s.find('(') {
            Some(p) if s.ends_with(')') => (&s[..p], &s[p + 1..s.len() - 1]),
            _ => (s, ""),
        };
        let vals: Vec<f64> = params
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| v.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {v:?} in {s:?}"))))
            .collect::<Result<_>>()?;
        let rule = match (kind.trim(), vals.as_slice()) {
            ("power_alpha", [a]) => Self::PowerAlpha { alpha: *a },
            ("guillas_ex2", [d]) => Self::guillas_ex2(*d),
            ("guillas_ex2", [d, g, e]) => Self::GuillasEx2 { delta1: *d, gamma: *g, epsilon: *e },
            ("log_n", []) => Self::LogN,
            ("guillas_ex4", [d]) => Self::guillas_ex4(*d),
            ("guillas_ex4", [d, e]) => Self::GuillasEx4 { delta1: *d, e_prime: *e },
            _ => return Err(Error::Config(format!("unknown truncation rule {s:?}"))),
        };
        rule.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(rule)
    }
}

/// `k_n` for sample size `n`: floor of the rule, clamped to `[1, n - 1]`.
pub fn truncation_level(rule: &TruncationRule, n: usize) -> usize {
    rule.unclamped(n).clamp(1, n.saturating_sub(1).max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;
    use crate::simulator::simulate_spectrum;
    use crate::spectral_model::{DiagonalSpectrum, OperatorModel};
    use ndarray::array;

    fn series(v: Array2<f64>) -> CoefficientSeries<f64> {
        CoefficientSeries::new(v, "t", 0).unwrap()
    }

    #[test]
    fn constant_and_alternating_columns() {
        let n = 10;
        let mut v = Array2::zeros((n, 2));
        for i in 0..n {
            v[[i, 0]] = 1.5;
            v[[i, 1]] = if i % 2 == 0 { 1.5 } else { -1.5 };
        }
        let s = series(v);
        let (d, c) = moment_estimates(&s, 0).unwrap();
        assert!((d - 2.25).abs() < 1e-14 && (c - 2.25).abs() < 1e-14);
        let (d, c) = moment_estimates(&s, 1).unwrap();
        assert!((d + 2.25).abs() < 1e-14 && (c - 2.25).abs() < 1e-14);
    }

    #[test]
    fn large_sample_variance() {
        let m = OperatorModel::<f64>::default();
        let n = 100_000;
        let s = simulate_spectrum(&m.spectrum(3), n, 3, 0).unwrap();
        for j in 0..3 {
            let (_, c) = moment_estimates(&s, j).unwrap();
            let r = m.rho(j + 1);
            // variance of the sample second moment of an AR(1)
            let se = m.c(j + 1) * (2.0 * (1.0 + r * r) / (1.0 - r * r) / n as f64).sqrt();
            assert!((c - m.c(j + 1)).abs() < 4.0 * se, "j={j} c={c}");
        }
    }

    #[test]
    fn white_noise_componentwise() {
        let spec = DiagonalSpectrum { c: vec![1.0f64], rho: vec![0.0] };
        let n = 100_000;
        let s = simulate_spectrum(&spec, n, 17, 0).unwrap();
        let r = componentwise(&s, 1).unwrap().matrix[[0, 0]];
        assert!(r.abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn diag_bosq_equals_componentwise() {
        let m = OperatorModel::<f64>::default();
        let s = simulate_spectrum(&m.spectrum(5), 2000, 8, 1).unwrap();
        let cw = componentwise(&s, 5).unwrap();
        let b = bosq(&s, 5).unwrap();
        for j in 0..5 {
            assert_eq!(cw.matrix[[j, j]], b.matrix[[j, j]]);
        }
        assert_eq!(bosq(&s, 1).unwrap().matrix, componentwise(&s, 1).unwrap().matrix);
    }

    #[test]
    fn guillas_threshold_limits() {
        let m = OperatorModel::<f64>::default();
        let s = simulate_spectrum(&m.spectrum(4), 3000, 5, 0).unwrap();
        let c: Vec<f64> = (0..4).map(|j| moment_estimates(&s, j).unwrap().1).collect();
        let cmin = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let cmax = c.iter().cloned().fold(0.0, f64::max);
        let b = bosq(&s, 4).unwrap();
        assert_eq!(guillas(&s, 4, cmin).unwrap().matrix, b.matrix);
        let a = 2.0 * cmax;
        let g = guillas(&s, 4, a).unwrap();
        for l in 0..4 {
            for j in 0..4 {
                let want = b.matrix[[l, j]] * c[j] / a;
                assert!((g.matrix[[l, j]] - want).abs() < 1e-12 * want.abs().max(1e-300));
            }
        }
        assert!(matches!(guillas(&s, 4, 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn degenerate_component_named() {
        let mut v = Array2::from_elem((5, 3), 1.0);
        v.column_mut(1).fill(0.0);
        let s = series(v);
        assert!(matches!(componentwise(&s, 3), Err(Error::DegenerateComponent { component: 2 })));
        assert!(matches!(bosq(&s, 3), Err(Error::DegenerateComponent { component: 2 })));
    }

    #[test]
    fn full_inverse_agrees_when_covariance_is_diagonal() {
        // orthogonal columns make the sample covariance exactly diagonal
        let v: Array2<f64> = array![[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]];
        let s = series(v);
        let b = bosq(&s, 2).unwrap();
        let f = bosq_full(&s, 2).unwrap();
        for (x, y) in b.matrix.iter().zip(f.matrix.iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn prediction_shapes() {
        let zero = OperatorEstimate { matrix: Array2::<f64>::zeros((3, 3)), basis_tag: BasisTag::Theoretical, k_n: 3 };
        let x = array![1.0, -2.0, 0.5, 9.0];
        assert_eq!(plug_in_predict(&zero, x.view()).unwrap(), array![0.0, 0.0, 0.0]);
        let id = OperatorEstimate { matrix: Array2::eye(3), ..zero.clone() };
        assert_eq!(plug_in_predict(&id, x.view()).unwrap(), array![1.0, -2.0, 0.5]);
        let d = OperatorEstimate { matrix: Array2::from_diag(&array![0.5, 0.1, 2.0]), ..zero.clone() };
        assert_eq!(d.predict(x.view()).unwrap(), array![0.5, -0.2, 1.0]);
        assert!(plug_in_predict(&zero, array![1.0].view()).is_err());
    }

    #[test]
    fn truncation_examples() {
        let pa = |a| TruncationRule::PowerAlpha { alpha: a };
        assert_eq!(truncation_level(&pa(5.0), 15000), 6);
        assert_eq!(truncation_level(&pa(6.0), 15000), 4);
        let g2 = TruncationRule::guillas_ex2(61.0 / 60.0);
        assert_eq!(truncation_level(&g2, 15000), 2);
        assert_eq!(truncation_level(&g2, 215000), 4);
        assert_eq!(truncation_level(&TruncationRule::LogN, 15000), 9);
        assert_eq!(truncation_level(&TruncationRule::LogN, 35000), 10);
        let g4 = TruncationRule::guillas_ex4(2.4);
        assert_eq!(truncation_level(&g4, 15000), 2);
        assert_eq!(truncation_level(&g4, 175000), 3);
        assert_eq!(truncation_level(&pa(6.0), 64), 2);
        assert_eq!(truncation_level(&pa(0.5), 10), 9);
        assert_eq!(truncation_level(&TruncationRule::LogN, 2), 1);
    }

    fn rows<const W: usize>(t: &[[f64; W]]) -> Vec<&[f64]> {
        t.iter().map(|r| &r[..]).collect()
    }

    #[test]
    fn truncation_matches_every_published_level() {
        let pa = |a| TruncationRule::PowerAlpha { alpha: a };
        let check = |rows: &[&[f64]], col: usize, rule: TruncationRule| {
            for r in rows {
                assert_eq!(truncation_level(&rule, r[0] as usize), r[col] as usize, "{rule} n={}", r[0]);
            }
        };
        check(&rows(&reference::TABLE1), 1, pa(5.0));
        check(&rows(&reference::TABLE1), 4, pa(6.0));
        check(&rows(&reference::TABLE2), 1, pa(6.0));
        check(&rows(&reference::TABLE3), 1, TruncationRule::guillas_ex2(61.0 / 60.0));
        check(&rows(&reference::TABLE5), 1, pa(6.0));
        check(&rows(&reference::TABLE6), 1, TruncationRule::guillas_ex4(2.4));
        check(&rows(&reference::TABLE9), 1, pa(6.0));
        check(&rows(&reference::TABLE8), 1, pa(6.0));
        check(&rows(&reference::TABLE8), 4, pa(10.0));
        check(&rows(&reference::TABLE4), 1, TruncationRule::LogN);
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("power_alpha(6)".parse::<TruncationRule>().unwrap(), TruncationRule::PowerAlpha { alpha: 6.0 });
        assert_eq!("log_n".parse::<TruncationRule>().unwrap(), TruncationRule::LogN);
        assert_eq!("guillas_ex4(2.4)".parse::<TruncationRule>().unwrap(), TruncationRule::guillas_ex4(2.4));
        assert!("power_alpha".parse::<TruncationRule>().is_err());
        assert!("guillas_ex2(1, 2, 0.7)".parse::<TruncationRule>().is_err());
    }
}

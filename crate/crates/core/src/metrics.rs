//! Error summaries for estimated operators and predictions.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::quadrature::Grid;
use crate::scalar::Real;
use crate::spectral_model::OperatorModel;

/// `(1/N) sum_w sum_{j <= k_n} (rho_j - rho_hat_j^w)^2` over replicated
/// diagonal estimates.
pub fn emse_rho<T: Real>(estimates: &[ArrayView1<T>], truth: &[T], k_n: usize) -> Result<T> {
    if estimates.is_empty() {
        return Err(Error::Parameter("need at least one replication".into()));
    }
    if truth.len() < k_n {
        return Err(Error::Dimension { expected: k_n, got: truth.len() });
    }
    let mut total = T::zero();
    for e in estimates {
        if e.len() < k_n {
            return Err(Error::Dimension { expected: k_n, got: e.len() });
        }
        total += (0..k_n).map(|j| (truth[j] - e[j]) * (truth[j] - e[j])).sum::<T>();
    }
    Ok(total / T::from_count(estimates.len()))
}

/// Squared Hilbert-Schmidt distance between two coefficient matrices.
pub fn hs_distance_sq<T: Real>(a: ArrayView2<T>, b: ArrayView2<T>) -> Result<T> {
    if a.dim() != b.dim() {
        return Err(Error::Dimension { expected: a.nrows(), got: b.nrows() });
    }
    Ok(a.iter().zip(b.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum())
}

/// `sigma_X^2 = sum_{j <= k_n} C_j`.
pub fn sigma_x_sq<T: Real>(model: &OperatorModel<T>, k_n: usize) -> T {
    (1..=k_n).map(|j| model.c(j)).sum()
}

/// Upper bound `sqrt(emse) * sigma_X` on the mean prediction error.
pub fn ub_emae<T: Real>(emse: T, model: &OperatorModel<T>, k_n: usize) -> Result<T> {
    if !(emse >= T::zero()) {
        return Err(Error::Parameter(format!("emse must be >= 0, got {emse}")));
    }
    Ok(emse.sqrt() * sigma_x_sq(model, k_n).sqrt())
}

/// How an element of `H` is represented.
#[derive(Debug, Clone, Copy)]
pub enum Representation<'a, T> {
    /// Coordinates in an orthonormal basis.
    Coefficients,
    /// Values on a quadrature grid.
    Grid(&'a Grid<T>),
}

/// `|truth - pred|_H`.
pub fn prediction_error_h_norm<T: Real>(truth: ArrayView1<T>, pred: ArrayView1<T>, repr: Representation<'_, T>) -> Result<T> {
    if truth.len() != pred.len() {
        return Err(Error::Dimension { expected: truth.len(), got: pred.len() });
    }
    match repr {
        Representation::Coefficients => {
            Ok(truth.iter().zip(pred.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt())
        }
        Representation::Grid(g) => {
            if g.len() != truth.len() {
                return Err(Error::Dimension { expected: g.len(), got: truth.len() });
            }
            Ok(g.distance_sq(truth, pred).sqrt())
        }
    }
}

/// Least-squares line through `(ln n, ln value)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn rate_fit(ns: &[f64], values: &[f64]) -> Result<RateFit> {
    if ns.len() != values.len() {
        return Err(Error::Dimension { expected: ns.len(), got: values.len() });
    }
    if ns.len() < 4 {
        return Err(Error::Parameter(format!("rate fit needs at least 4 points, got {}", ns.len())));
    }
    if ns.iter().chain(values).any(|&v| !(v > 0.0)) {
        return Err(Error::Domain("rate fit needs positive sample sizes and metric values".into()));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("rate fit needs at least two distinct sample sizes".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept: my - slope * mx, r2 })
}

/// Mean and standard error of the mean.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::basis_matrix;
    use ndarray::{array, Array1};

    #[test]
    fn emse_cases() {
        let truth = [0.9f64, 0.5, 0.2];
        let exact = Array1::from(truth.to_vec());
        assert_eq!(emse_rho(&[exact.view(), exact.view()], &truth, 3).unwrap(), 0.0);
        let off = array![0.9, 0.45, 0.2];
        assert!((emse_rho(&[off.view()], &truth, 3).unwrap() - 0.0025).abs() < 1e-15);
        assert!((emse_rho(&[off.view()], &truth, 1).unwrap()).abs() < 1e-15);
        assert!(emse_rho::<f64>(&[], &truth, 1).is_err());
    }

    #[test]
    fn ub_identity() {
        let m = OperatorModel::<f64>::default();
        assert_eq!(ub_emae(0.0, &m, 4).unwrap(), 0.0);
        let e = 2.45e-4;
        let ub = ub_emae(e, &m, 4).unwrap();
        assert_eq!(ub, e.sqrt() * sigma_x_sq(&m, 4).sqrt());
        assert!(ub_emae(-1.0, &m, 4).is_err());
    }

    #[test]
    fn coefficient_and_grid_norms_agree() {
        let m = OperatorModel::<f64>::default();
        let g = Grid::uniform(m.interval, 2048).unwrap();
        let a = array![0.3, -0.2, 0.1, 0.05];
        let b = array![0.25, -0.1, 0.0, 0.07];
        let phi = basis_matrix(&m, &g, 4);
        let (fa, fb) = (phi.t().dot(&a), phi.t().dot(&b));
        let c = prediction_error_h_norm(a.view(), b.view(), Representation::Coefficients).unwrap();
        let q = prediction_error_h_norm(fa.view(), fb.view(), Representation::Grid(&g)).unwrap();
        assert!((c - q).abs() < 1e-4);
        assert_eq!(prediction_error_h_norm(a.view(), a.view(), Representation::Coefficients).unwrap(), 0.0);
        assert!(prediction_error_h_norm(a.view(), b.view(), Representation::Grid(&g)).is_err());
    }

    #[test]
    fn rates() {
        let ns = [1e3, 2e3, 5e3, 1e4, 5e4];
        let inv: Vec<f64> = ns.iter().map(|n| 3.0 / n).collect();
        let f = rate_fit(&ns, &inv).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-10 && (f.r2 - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
        let half: Vec<f64> = ns.iter().map(|n| 0.7 / n.sqrt()).collect();
        assert!((rate_fit(&ns, &half).unwrap().slope + 0.5).abs() < 1e-10);
        assert!(rate_fit(&ns[..3], &inv[..3]).is_err());
        assert!(rate_fit(&ns, &[1.0, 0.0, 1.0, 1.0, 1.0]).is_err());
    }
}

//! Exact stationary generation of Gaussian ARH(1) coefficient processes and
//! conversion between coefficient and curve representations.
//!
//! In the diagonal case each component is the scaled AR(1) recursion
//! `eta_j(i) = rho_j eta_j(i-1) + sqrt(1 - rho_j^2) z_j(i)` started from
//! `eta_j(0) ~ N(0, 1)`, and `X_{i,j} = sqrt(C_j) eta_j(i)`.

use std::io::Write;

use log::info;
use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::linalg::{cholesky, clip_to_positive_definite, discrete_lyapunov, spectral_radius};
use crate::quadrature::Grid;
use crate::rng::{standard_normal, stream};
use crate::scalar::Real;
use crate::spectral_model::{basis_unchecked, DiagonalSpectrum, OperatorModel};

/// `n x k` matrix of projections `X_{i,j} = <X_i, phi_j>`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSeries<T> {
    pub values: Array2<T>,
    pub model_tag: String,
    pub seed: u64,
    pub replication: u64,
}

impl<T: Real> CoefficientSeries<T> {
    pub fn new(values: Array2<T>, model_tag: impl Into<String>, seed: u64) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::Parameter(format!("series needs n >= 2, got {}", values.nrows())));
        }
        if values.ncols() < 1 {
            return Err(Error::Parameter("series needs at least one component".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite coefficient".into()));
        }
        Ok(Self { values, model_tag: model_tag.into(), seed, replication: 0 })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.values.ncols()
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    pub fn last(&self) -> ArrayView1<'_, T> {
        self.values.row(self.n() - 1)
    }

    /// Series restricted to the first `n` time points.
    pub fn head(&self, n: usize) -> Result<Self> {
        let n = n.min(self.n());
        let mut out = Self::new(self.values.slice(ndarray::s![..n, ..]).to_owned(), self.model_tag.clone(), self.seed)?;
        out.replication = self.replication;
        Ok(out)
    }

    /// CSV with one row per time index.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.k()).map(|j| format!("x{j}")).collect();
        writeln!(w, "i,{}", header.join(","))?;
        for (i, row) in self.values.outer_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{i},{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Discretised curves with the quadrature rule used for inner products.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample<T> {
    pub grid: Grid<T>,
    /// `n x p`, one curve per row.
    pub curves: Array2<T>,
}

impl<T: Real> FunctionalSample<T> {
    pub fn new(grid: Grid<T>, curves: Array2<T>) -> Result<Self> {
        if curves.ncols() != grid.len() {
            return Err(Error::Dimension { expected: grid.len(), got: curves.ncols() });
        }
        Ok(Self { grid, curves })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.curves.nrows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.curves.ncols()
    }
}

/// Generates a diagonal Gaussian ARH(1) coefficient series from the model's
/// first `k` eigenvalues. Replication index 0 of `seed`.
pub fn simulate_diagonal<T: Real>(
    model: &OperatorModel<T>,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<CoefficientSeries<T>> {
    simulate_spectrum(&model.spectrum(k), n, seed, 0)
}

/// Diagonal generation from explicit `(C_j, rho_j)` sequences; component `j`
/// draws from stream `(seed, replication, j)`.
pub fn simulate_spectrum<T: Real>(
    spec: &DiagonalSpectrum<T>,
    n: usize,
    seed: u64,
    replication: u64,
) -> Result<CoefficientSeries<T>> {
    let k = spec.len();
    if n < 2 || k < 1 {
        return Err(Error::Parameter(format!("need n >= 2 and k >= 1, got n={n}, k={k}")));
    }
    let mut values = Array2::<T>::zeros((n, k));
    for j in 0..k {
        let (c, rho) = (spec.c[j], spec.rho[j]);
        if !(rho.abs() < T::one()) || !(c >= T::zero()) {
            return Err(Error::Model(vec![format!("component {}: need |rho| < 1, C >= 0", j + 1)]));
        }
        let scale = c.sqrt();
        let innov = (T::one() - rho * rho).sqrt();
        let mut rng = stream(seed, replication, j as u64);
        let mut eta: T = standard_normal(&mut rng);
        values[[0, j]] = scale * eta;
        for i in 1..n {
            eta = rho * eta + innov * standard_normal::<T, _>(&mut rng);
            values[[i, j]] = scale * eta;
        }
    }
    let mut out = CoefficientSeries::new(values, "diagonal", seed)?;
    out.replication = replication;
    Ok(out)
}

/// Magnitudes of the banded autocorrelation and innovation-covariance
/// coefficients: entries at distance `a` are `sqrt(upper / (denom a^2))` etc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandProfile<T> {
    pub rho_upper: T,
    pub rho_lower: T,
    pub sigma_upper: T,
    pub sigma_lower: T,
    pub denom: T,
    pub width: usize,
}

impl<T: Real> Default for BandProfile<T> {
    fn default() -> Self {
        Self {
            rho_upper: T::lit(0.01),
            rho_lower: T::lit(0.02),
            sigma_upper: T::lit(0.015),
            sigma_lower: T::lit(0.01),
            denom: T::lit(5.0),
            width: 5,
        }
    }
}

/// Vector AR(1) in the first `k` eigen-directions with a full transition
/// matrix.
#[derive(Debug, Clone)]
pub struct NonDiagonalModel<T> {
    pub k: usize,
    /// Entry `(l, j)` maps input component `j` to output component `l`.
    pub rho_matrix: Array2<T>,
    /// Symmetric positive definite innovation covariance (after repair).
    pub noise_cov: Array2<T>,
    /// Extra transitions discarded after the stationary start.
    pub burn_in: usize,
    /// Number of eigenvalues lifted during positive-definite repair.
    pub repaired_eigenvalues: usize,
    noise_chol: Array2<T>,
    stationary_chol: Array2<T>,
    pub stationary_cov: Array2<T>,
}

impl<T: Real> NonDiagonalModel<T> {
    pub fn new(rho_matrix: Array2<T>, noise_cov: Array2<T>, burn_in: usize) -> Result<Self> {
        let k = rho_matrix.nrows();
        if rho_matrix.ncols() != k || noise_cov.dim() != (k, k) {
            return Err(Error::Dimension { expected: k, got: noise_cov.nrows() });
        }
        let radius = spectral_radius(rho_matrix.view());
        if !(radius < T::one()) {
            return Err(Error::Model(vec![format!(
                "spectral radius of the autocorrelation matrix is {radius}, must be < 1"
            )]));
        }
        let (noise_cov, repaired) = clip_to_positive_definite(noise_cov.view(), T::lit(1e-12))?;
        if repaired > 0 {
            info!("innovation covariance repaired: {repaired} eigenvalues lifted to 1e-12");
        }
        let noise_chol = cholesky(noise_cov.view())
            .map_err(|e| Error::Model(vec![format!("innovation covariance not positive definite: {e}")]))?;
        let stationary_cov = discrete_lyapunov(rho_matrix.view(), noise_cov.view())?;
        let stationary_chol = cholesky(stationary_cov.view())
            .map_err(|e| Error::Model(vec![format!("stationary covariance not positive definite: {e}")]))?;
        Ok(Self {
            k,
            rho_matrix,
            noise_cov,
            burn_in,
            repaired_eigenvalues: repaired,
            noise_chol,
            stationary_chol,
            stationary_cov,
        })
    }

    /// Banded model: diagonal taken from `model`, off-diagonal squares from
    /// `profile`, positive square roots.
    pub fn banded(model: &OperatorModel<T>, k: usize, profile: BandProfile<T>, burn_in: usize) -> Result<Self> {
        let mut rho = Array2::<T>::zeros((k, k));
        let mut sigma = Array2::<T>::zeros((k, k));
        for j in 0..k {
            rho[[j, j]] = model.rho(j + 1);
            sigma[[j, j]] = model.sigma2(j + 1);
        }
        for a in 1..=profile.width {
            let d = profile.denom * T::from_count(a * a);
            for j in 0..k.saturating_sub(a) {
                rho[[j, j + a]] = (profile.rho_upper / d).sqrt();
                rho[[j + a, j]] = (profile.rho_lower / d).sqrt();
                sigma[[j, j + a]] = profile.sigma_upper / d;
                sigma[[j + a, j]] = profile.sigma_lower / d;
            }
        }
        Self::new(rho, sigma, burn_in)
    }

    /// Diagonal model embedded as a (trivially) non-diagonal one.
    pub fn diagonal(spec: &DiagonalSpectrum<T>, burn_in: usize) -> Result<Self> {
        let rho = Array2::from_diag(&Array1::from(spec.rho.clone()));
        let sig = Array2::from_diag(&Array1::from_iter(
            spec.c.iter().zip(&spec.rho).map(|(&c, &r)| c * (T::one() - r * r)),
        ));
        Self::new(rho, sig, burn_in)
    }
}

/// Simulates `X_i = P X_{i-1} + eps_i` from the exact stationary law.
pub fn simulate_nondiagonal<T: Real>(
    nd: &NonDiagonalModel<T>,
    n: usize,
    seed: u64,
    replication: u64,
) -> Result<CoefficientSeries<T>> {
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2, got {n}")));
    }
    let k = nd.k;
    let mut rngs: Vec<_> = (0..k).map(|j| stream(seed, replication, j as u64)).collect();
    let mut z = Array1::<T>::zeros(k);
    let mut draw = |z: &mut Array1<T>| {
        for (zj, r) in z.iter_mut().zip(rngs.iter_mut()) {
            *zj = standard_normal(r);
        }
    };
    draw(&mut z);
    let mut x = lower_mul(&nd.stationary_chol, &z);
    for _ in 0..nd.burn_in {
        draw(&mut z);
        x = nd.rho_matrix.dot(&x) + lower_mul(&nd.noise_chol, &z);
    }
    let mut values = Array2::<T>::zeros((n, k));
    values.row_mut(0).assign(&x);
    for i in 1..n {
        draw(&mut z);
        x = nd.rho_matrix.dot(&x) + lower_mul(&nd.noise_chol, &z);
        values.row_mut(i).assign(&x);
    }
    let mut out = CoefficientSeries::new(values, "nondiagonal", seed)?;
    out.replication = replication;
    Ok(out)
}

fn lower_mul<T: Real>(l: &Array2<T>, z: &Array1<T>) -> Array1<T> {
    let k = z.len();
    Array1::from_shape_fn(k, |i| {
        let mut s = T::zero();
        for c in 0..=i {
            s += l[[i, c]] * z[c];
        }
        s
    })
}

/// `k x p` matrix of basis functions sampled on the grid.
pub fn basis_matrix<T: Real>(model: &OperatorModel<T>, grid: &Grid<T>, k: usize) -> Array2<T> {
    Array2::from_shape_fn((k, grid.len()), |(j, m)| basis_unchecked(j + 1, &model.interval, grid.points[m]))
}

/// `curves(i, .) = sum_j X_{i,j} phi_j(grid)`.
pub fn assemble_curves<T: Real>(
    coeffs: &CoefficientSeries<T>,
    model: &OperatorModel<T>,
    grid: &Grid<T>,
) -> Result<FunctionalSample<T>> {
    if grid.interval.a < model.interval.a || grid.interval.b > model.interval.b {
        return Err(Error::Domain("grid extends outside the model interval".into()));
    }
    let phi = basis_matrix(model, grid, coeffs.k());
    FunctionalSample::new(grid.clone(), coeffs.values.dot(&phi))
}

/// Quadrature projections `sum_m w_m X_i(t_m) phi_j(t_m)`, `j = 1..k`.
pub fn project_curves<T: Real>(
    sample: &FunctionalSample<T>,
    model: &OperatorModel<T>,
    k: usize,
) -> Result<CoefficientSeries<T>> {
    if k < 1 {
        return Err(Error::Parameter("k must be at least 1".into()));
    }
    let weighted = basis_matrix(model, &sample.grid, k) * &sample.grid.weights;
    let values = sample.curves.dot(&weighted.t());
    CoefficientSeries::new(values, "projected", 0)
}

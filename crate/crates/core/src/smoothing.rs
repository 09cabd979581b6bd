//! Cubic smoothing splines, the functional kernel predictor and the
//! penalized rank-`q` linear predictor.

use std::fmt;
use std::str::FromStr;

use log::warn;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::empirical::{eigen_decompose, empirical_covariance};
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, symmetric_eigen};
use crate::scalar::Real;
use crate::simulator::FunctionalSample;

/// Natural cubic smoothing spline on fixed knots, diagonalised once
/// (Demmler-Reinsch basis) so that any penalty is a diagonal rescaling.
///
/// With knots `t_1 < ... < t_p` the fit to data `y` minimises
/// `sum (y_m - f(t_m))^2 + lambda * int f''^2`, and equals
/// `U diag(1 / (1 + lambda kappa)) U^T y`.
#[derive(Debug, Clone)]
pub struct SplineSmoother<T> {
    basis: Array2<T>,
    kappa: Array1<T>,
}

impl<T: Real> SplineSmoother<T> {
    pub fn new(knots: ArrayView1<T>) -> Result<Self> {
        let p = knots.len();
        if p < 4 {
            return Err(Error::Parameter(format!("spline smoothing needs p >= 4 knots, got {p}")));
        }
        let h: Vec<T> = (0..p - 1).map(|i| knots[i + 1] - knots[i]).collect();
        if h.iter().any(|&d| !(d > T::zero())) {
            return Err(Error::Parameter("knots must be strictly increasing".into()));
        }
        let m = p - 2;
        let mut q = Array2::<T>::zeros((p, m));
        let mut r = Array2::<T>::zeros((m, m));
        let (three, six) = (T::lit(3.0), T::lit(6.0));
        for c in 0..m {
            // column c corresponds to interior knot c + 1
            q[[c, c]] = T::one() / h[c];
            q[[c + 1, c]] = -T::one() / h[c] - T::one() / h[c + 1];
            q[[c + 2, c]] = T::one() / h[c + 1];
            r[[c, c]] = (h[c] + h[c + 1]) / three;
            if c + 1 < m {
                r[[c, c + 1]] = h[c + 1] / six;
                r[[c + 1, c]] = h[c + 1] / six;
            }
        }
        let rinv_qt = solve_spd(r.view(), q.t())?;
        let mut k = q.dot(&rinv_qt);
        for a in 0..p {
            for b in 0..a {
                let v = (k[[a, b]] + k[[b, a]]) / T::lit(2.0);
                k[[a, b]] = v;
                k[[b, a]] = v;
            }
        }
        let eig = symmetric_eigen(k.view())?;
        let kappa = eig.values.mapv(|v| v.max(T::zero()));
        Ok(Self { basis: eig.vectors, kappa })
    }

    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    fn factors(&self, lambda: T) -> Array1<T> {
        self.kappa.mapv(|k| T::one() / (T::one() + lambda * k))
    }

    /// Smooths every row of `curves`. `lambda = 0` interpolates.
    pub fn smooth(&self, curves: ArrayView2<T>, lambda: T) -> Result<Array2<T>> {
        if curves.ncols() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: curves.ncols() });
        }
        if !(lambda >= T::zero()) {
            return Err(Error::Parameter(format!("smoothing penalty must be >= 0, got {lambda}")));
        }
        if lambda == T::zero() {
            return Ok(curves.to_owned());
        }
        let coeffs = curves.dot(&self.basis) * &self.factors(lambda);
        Ok(coeffs.dot(&self.basis.t()))
    }

    /// Pooled generalized cross-validation score
    /// `(1/(n p)) sum_i |(I - A) y_i|^2 / (1 - tr A / p)^2`.
    pub fn gcv_score(&self, power: ArrayView1<T>, n: usize, lambda: T) -> T {
        let p = T::from_count(self.len());
        let f = self.factors(lambda);
        let rss: T = f.iter().zip(power.iter()).map(|(&f, &s)| (T::one() - f) * (T::one() - f) * s).sum();
        let tr: T = f.sum();
        let denom = T::one() - tr / p;
        rss / (T::from_count(n) * p) / (denom * denom)
    }

    /// Penalty minimising the pooled GCV score over all rows of `curves`.
    pub fn gcv(&self, curves: ArrayView2<T>) -> Result<(T, T)> {
        if curves.ncols() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: curves.ncols() });
        }
        let scores = curves.dot(&self.basis);
        let power = scores.mapv(|v| v * v).sum_axis(Axis(0));
        let n = curves.nrows();
        let kmax = self.kappa.iter().copied().fold(T::zero(), T::max);
        let kmin = self
            .kappa
            .iter()
            .copied()
            .filter(|&k| k > kmax * T::lit(1e-12))
            .fold(kmax, T::min);
        if !(kmax > T::zero()) {
            return Err(Error::Numerical("degenerate spline penalty".into()));
        }
        let lo = (T::lit(1e-6) / kmax).ln();
        let hi = (T::lit(1e6) / kmin).ln();
        let steps = 160;
        let at = |s: T| self.gcv_score(power.view(), n, s.exp());
        let mut best = (0, T::infinity());
        let grid: Vec<T> = (0..=steps).map(|i| lo + (hi - lo) * T::from_count(i) / T::from_count(steps)).collect();
        for (i, &s) in grid.iter().enumerate() {
            let v = at(s);
            if v < best.1 {
                best = (i, v);
            }
        }
        let (mut a, mut b) = (grid[best.0.saturating_sub(1)], grid[(best.0 + 1).min(steps)]);
        let g = T::lit(0.618_033_988_749_895);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if at(c) < at(d) {
                b = d;
            } else {
                a = c;
            }
        }
        let s = (a + b) / T::lit(2.0);
        let (s, v) = if at(s) <= best.1 { (s, at(s)) } else { (grid[best.0], best.1) };
        Ok((s.exp(), v))
    }
}

/// Replaces each curve by its cubic smoothing spline with penalty `lambda`.
pub fn smooth_curves<T: Real>(sample: &FunctionalSample<T>, lambda: T) -> Result<FunctionalSample<T>> {
    let s = SplineSmoother::new(sample.grid.points.view())?;
    FunctionalSample::new(sample.grid.clone(), s.smooth(sample.curves.view(), lambda)?)
}

#[derive(Debug, Clone)]
pub struct KernelPrediction<T> {
    pub curve: Array1<T>,
    /// Every kernel weight underflowed and the plain mean was returned.
    pub underflow: bool,
}

/// Nadaraya-Watson predictor over successor curves with Gaussian kernel
/// `K(u) = exp(-u^2 / 2)` at `u = |X_i - x|^2 / h`.
pub fn kernel_predict<T: Real>(history: &FunctionalSample<T>, x: ArrayView1<T>, h: T) -> Result<KernelPrediction<T>> {
    let n = history.n();
    if n < 2 {
        return Err(Error::Parameter(format!("kernel prediction needs n >= 2 curves, got {n}")));
    }
    if !(h > T::zero()) {
        return Err(Error::Parameter(format!("bandwidth must be positive, got {h}")));
    }
    if x.len() != history.p() {
        return Err(Error::Dimension { expected: history.p(), got: x.len() });
    }
    let half = T::lit(0.5);
    let weights: Array1<T> = (0..n - 1)
        .map(|i| {
            let u = history.grid.distance_sq(history.curves.row(i), x) / h;
            (-half * u * u).exp()
        })
        .collect();
    let total = weights.sum();
    let successors = history.curves.slice(ndarray::s![1.., ..]);
    if total > T::zero() && total.is_finite() {
        Ok(KernelPrediction { curve: weights.dot(&successors) / total, underflow: false })
    } else {
        warn!("all kernel weights underflowed at h = {h}; using the unweighted mean");
        let mean = successors.mean_axis(Axis(0)).expect("n >= 2");
        Ok(KernelPrediction { curve: mean, underflow: true })
    }
}

/// Smoothing parameter of the penalized FPCA fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Gcv,
    Fixed(f64),
}

impl FromStr for Penalty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gcv" => Ok(Self::Gcv),
            v => match v.parse::<f64>() {
                Ok(l) if l >= 0.0 => Ok(Self::Fixed(l)),
                _ => Err(Error::Config(format!("penalty must be 'gcv' or a number >= 0, got {v:?}"))),
            },
        }
    }
}

impl fmt::Display for Penalty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gcv => write!(f, "gcv"),
            Self::Fixed(l) => write!(f, "{l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizedFpcaConfig {
    pub q: usize,
    pub l: Penalty,
}

impl Default for PenalizedFpcaConfig {
    fn default() -> Self {
        Self { q: 7, l: Penalty::Gcv }
    }
}

#[derive(Debug, Clone)]
pub struct FpcaPrediction<T> {
    pub curve: Array1<T>,
    /// Penalty `l` actually used.
    pub l: T,
    pub smoothed: FunctionalSample<T>,
}

/// Rank-`q` linear predictor `D_hat C_hat^{-1}(x)` built from spline-smoothed
/// curves, with `C_hat` inverted on its leading `q`-dimensional eigenspace.
///
/// The spline penalty on the sum of squares is `p * l`, matching the
/// `1/p`-scaled fidelity term of the rank-constrained criterion.
pub fn penalized_fpca_predict<T: Real>(
    sample: &FunctionalSample<T>,
    cfg: PenalizedFpcaConfig,
    x: ArrayView1<T>,
) -> Result<FpcaPrediction<T>> {
    let (n, p) = (sample.n(), sample.p());
    if n < 2 {
        return Err(Error::Parameter(format!("need n >= 2 curves, got {n}")));
    }
    if cfg.q == 0 || cfg.q > p {
        return Err(Error::Parameter(format!("rank q = {} outside 1..={p}", cfg.q)));
    }
    if x.len() != p {
        return Err(Error::Dimension { expected: p, got: x.len() });
    }
    let spline = SplineSmoother::new(sample.grid.points.view())?;
    let pf = T::from_count(p);
    let l = match cfg.l {
        Penalty::Fixed(l) => T::lit(l),
        Penalty::Gcv => spline.gcv(sample.curves.view())?.0 / pf,
    };
    let smoothed = FunctionalSample::new(sample.grid.clone(), spline.smooth(sample.curves.view(), l * pf)?)?;
    let curve = rank_q_apply(&smoothed, cfg.q, x)?;
    Ok(FpcaPrediction { curve, l, smoothed })
}

fn rank_q_apply<T: Real>(smoothed: &FunctionalSample<T>, q: usize, x: ArrayView1<T>) -> Result<Array1<T>> {
    let n = smoothed.n();
    let cov = empirical_covariance(smoothed)?;
    let eig = eigen_decompose(cov.view(), smoothed.grid.weights.view(), q, None)?;
    let scale = eig.eigenvalues[0].max(T::one());
    for (j, &mu) in eig.eigenvalues.iter().enumerate() {
        if !(mu > T::lit(1e-12) * scale) {
            return Err(Error::RankDeficient { index: j + 1, value: mu.as_f64() });
        }
    }
    let xc = eig.project(x.insert_axis(Axis(0)), q)?;
    let a = Array1::from_shape_fn(q, |j| xc[[0, j]] / eig.eigenvalues[j]);
    let scores = eig.project(smoothed.curves.slice(ndarray::s![..n - 1, ..]), q)?;
    let w = scores.dot(&a) / T::from_count(n - 1);
    Ok(w.dot(&smoothed.curves.slice(ndarray::s![1.., ..])))
}

/// `(1/p) sum_m (truth(t_m) - pred(t_m))^2`.
pub fn pointwise_emae<T: Real>(truth: ArrayView1<T>, pred: ArrayView1<T>) -> Result<T> {
    if truth.len() != pred.len() || truth.is_empty() {
        return Err(Error::Dimension { expected: truth.len(), got: pred.len() });
    }
    let s: T = truth.iter().zip(pred.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum();
    Ok(s / T::from_count(truth.len()))
}

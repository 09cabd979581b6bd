//! Periodic orthogonal wavelet transform, Sobolev-weighted shrinkage of
//! detail coefficients, and the projection estimator on wavelet-smoothed,
//! centered curves.

use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::empirical::{eigen_decompose, empirical_covariance, predict_curve, EmpiricalEigenSystem};
use crate::error::{Error, Result};
use crate::estimators::{self, BasisTag, OperatorEstimate};
use crate::scalar::Real;
use crate::simulator::{CoefficientSeries, FunctionalSample};
use crate::spectral_model::OperatorModel;

/// Daubechies scaling filter with four vanishing moments.
#[allow(clippy::excessive_precision)]
const DB4: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_211,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_627,
    0.032_883_011_666_885_199_735,
    -0.010_597_401_785_069_032_105,
];

/// Haar scaling filter.
const HAAR: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletFamily {
    Haar,
    Daubechies4,
}

impl WaveletFamily {
    pub fn lowpass(&self) -> &'static [f64] {
        match self {
            Self::Haar => &HAAR,
            Self::Daubechies4 => &DB4,
        }
    }
}

impl FromStr for WaveletFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "haar" | "db1" => Ok(Self::Haar),
            "db4" | "daubechies4" => Ok(Self::Daubechies4),
            o => Err(Error::Config(format!("unknown wavelet family {o:?}"))),
        }
    }
}

impl std::fmt::Display for WaveletFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Haar => "haar",
            Self::Daubechies4 => "db4",
        })
    }
}

/// Transform layout. Sample values of a length-`2^J` curve are taken as the
/// finest-level scaling coefficients; levels run `j0 .. J - 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletSpec<T> {
    pub family: WaveletFamily,
    pub j0: usize,
    pub j_max: usize,
    /// Sobolev order of the penalty.
    pub s: T,
}

impl<T: Real> WaveletSpec<T> {
    /// db4, `j0 = 3`, `J = log2 p`.
    pub fn for_length(p: usize, s: T) -> Result<Self> {
        if !p.is_power_of_two() {
            return Err(Error::Parameter(format!("curve length {p} is not a power of two")));
        }
        let spec = Self { family: WaveletFamily::Daubechies4, j0: 3, j_max: p.trailing_zeros() as usize, s };
        spec.validate(p)?;
        Ok(spec)
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.j0 >= self.j_max {
            return Err(Error::Parameter(format!("need j0 < J, got j0 = {}, J = {}", self.j0, self.j_max)));
        }
        if p != 1 << self.j_max {
            return Err(Error::Parameter(format!("curve length {p} differs from 2^J = {}", 1usize << self.j_max)));
        }
        if !(self.s > T::lit(0.5)) {
            return Err(Error::Parameter(format!("Sobolev order must exceed 1/2, got {}", self.s)));
        }
        Ok(())
    }
}

/// Scaling coefficients at level `j0` and details at levels `j0 .. J - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTree<T> {
    pub j0: usize,
    pub approx: Vec<T>,
    /// `details[l]` holds level `j0 + l`, of length `2^(j0 + l)`.
    pub details: Vec<Vec<T>>,
}

impl<T: Real> CoefficientTree<T> {
    pub fn energy(&self) -> T {
        self.approx.iter().chain(self.details.iter().flatten()).map(|&v| v * v).sum()
    }
}

fn filters<T: Real>(family: WaveletFamily) -> (Vec<T>, Vec<T>) {
    let h: Vec<T> = family.lowpass().iter().map(|&v| T::lit(v)).collect();
    let len = h.len();
    let g = (0..len)
        .map(|k| if k % 2 == 0 { h[len - 1 - k] } else { -h[len - 1 - k] })
        .collect();
    (h, g)
}

pub fn dwt<T: Real>(curve: ArrayView1<T>, spec: &WaveletSpec<T>) -> Result<CoefficientTree<T>> {
    spec.validate(curve.len())?;
    let (h, g) = filters::<T>(spec.family);
    let mut a: Vec<T> = curve.to_vec();
    let mut details = Vec::with_capacity(spec.j_max - spec.j0);
    while a.len() > 1 << spec.j0 {
        let len = a.len();
        let half = len / 2;
        let mut lo = vec![T::zero(); half];
        let mut hi = vec![T::zero(); half];
        for k in 0..half {
            for (m, (&hm, &gm)) in h.iter().zip(&g).enumerate() {
                let x = a[(2 * k + m) % len];
                lo[k] += hm * x;
                hi[k] += gm * x;
            }
        }
        details.push(hi);
        a = lo;
    }
    details.reverse();
    Ok(CoefficientTree { j0: spec.j0, approx: a, details })
}

pub fn idwt<T: Real>(tree: &CoefficientTree<T>, spec: &WaveletSpec<T>) -> Result<Array1<T>> {
    if tree.j0 != spec.j0 || tree.details.len() != spec.j_max - spec.j0 || tree.approx.len() != 1 << spec.j0 {
        return Err(Error::Parameter("coefficient tree does not match the wavelet spec".into()));
    }
    let (h, g) = filters::<T>(spec.family);
    let mut a = tree.approx.clone();
    for d in &tree.details {
        if d.len() != a.len() {
            return Err(Error::Dimension { expected: a.len(), got: d.len() });
        }
        let len = 2 * a.len();
        let mut out = vec![T::zero(); len];
        for k in 0..a.len() {
            for (m, (&hm, &gm)) in h.iter().zip(&g).enumerate() {
                out[(2 * k + m) % len] += hm * a[k] + gm * d[k];
            }
        }
        a = out;
    }
    Ok(Array1::from(a))
}

/// `lambda_hat^M = (sum_{j <= M} sigma_j^2)(sum_{j <= M} C_j) / n`.
pub fn lambda_hat<T: Real>(model: &OperatorModel<T>, n: usize, m: usize) -> Result<T> {
    if m == 0 || n == 0 {
        return Err(Error::Parameter(format!("need M >= 1 and n >= 1, got M = {m}, n = {n}")));
    }
    let s2: T = (1..=m).map(|j| model.sigma2(j)).sum();
    let c: T = (1..=m).map(|j| model.c(j)).sum();
    Ok(s2 * c / T::from_count(n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkagePlan<T> {
    pub lambda: T,
    pub m: usize,
}

impl<T: Real> ShrinkagePlan<T> {
    pub fn from_model(model: &OperatorModel<T>, n: usize, m: usize) -> Result<Self> {
        Ok(Self { lambda: lambda_hat(model, n, m)?, m })
    }
}

/// Keeps scaling coefficients, scales level-`j` details by `1/(1 + lambda 2^(2 s j))`.
pub fn shrink<T: Real>(tree: &CoefficientTree<T>, plan: &ShrinkagePlan<T>, spec: &WaveletSpec<T>) -> CoefficientTree<T> {
    let two = T::lit(2.0);
    let details = tree
        .details
        .iter()
        .enumerate()
        .map(|(l, d)| {
            let j = T::from_count(tree.j0 + l);
            let f = T::one() / (T::one() + plan.lambda * two.powf(two * spec.s * j));
            d.iter().map(|&v| v * f).collect()
        })
        .collect();
    CoefficientTree { j0: tree.j0, approx: tree.approx.clone(), details }
}

/// dwt, shrink, idwt for every curve.
pub fn wavelet_smooth<T: Real>(
    sample: &FunctionalSample<T>,
    spec: &WaveletSpec<T>,
    plan: &ShrinkagePlan<T>,
) -> Result<FunctionalSample<T>> {
    spec.validate(sample.p())?;
    let mut out = Array2::zeros(sample.curves.raw_dim());
    for (i, row) in sample.curves.outer_iter().enumerate() {
        let t = shrink(&dwt(row, spec)?, plan, spec);
        out.row_mut(i).assign(&idwt(&t, spec)?);
    }
    FunctionalSample::new(sample.grid.clone(), out)
}

#[derive(Debug, Clone)]
pub struct WaveletFit<T> {
    pub estimate: OperatorEstimate<T>,
    pub eigen: EmpiricalEigenSystem<T>,
    /// Mean of the smoothed curves.
    pub trend: Array1<T>,
    /// Estimated operator applied to the last raw curve.
    pub prediction: Array1<T>,
}

/// Smooths every curve, removes the smoothed-sample mean, and fits the
/// projection estimator in the empirical eigenbasis of the centered data.
pub fn wavelet_smooth_then_estimate<T: Real>(
    sample: &FunctionalSample<T>,
    spec: &WaveletSpec<T>,
    plan: &ShrinkagePlan<T>,
    k_n: usize,
) -> Result<WaveletFit<T>> {
    if sample.n() < 2 {
        return Err(Error::Parameter(format!("need n >= 2 curves, got {}", sample.n())));
    }
    let smooth = wavelet_smooth(sample, spec, plan)?;
    let trend = smooth.curves.mean_axis(Axis(0)).expect("n >= 2");
    let centered = FunctionalSample::new(sample.grid.clone(), &smooth.curves - &trend.view().insert_axis(Axis(0)))?;
    let cov = empirical_covariance(&centered)?;
    let eigen = eigen_decompose(cov.view(), sample.grid.weights.view(), k_n, None)?;
    for j in 0..k_n {
        if !(eigen.eigenvalues[j] > T::zero()) {
            return Err(Error::DegenerateComponent { component: j + 1 });
        }
    }
    let y = CoefficientSeries::new(eigen.project(centered.curves.view(), k_n)?, "wavelet", 0)?;
    let mut estimate = estimators::bosq(&y, k_n)?;
    estimate.basis_tag = BasisTag::Empirical;
    let prediction = predict_curve(&estimate, &eigen, sample.curves.row(sample.n() - 1))?;
    Ok(WaveletFit { estimate, eigen, trend, prediction })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::empirical_bosq;
    use crate::quadrature::Grid;
    use crate::rng::{standard_normal, stream};
    use crate::simulator::{assemble_curves, simulate_diagonal};

    fn spec(p: usize) -> WaveletSpec<f64> {
        WaveletSpec::for_length(p, 2.4).unwrap()
    }

    fn random(p: usize, seed: u64) -> Array1<f64> {
        let mut rng = stream(seed, 0, 0);
        Array1::from_shape_fn(p, |_| standard_normal(&mut rng))
    }

    #[test]
    fn filter_is_orthonormal_with_vanishing_moments() {
        let h = DB4;
        assert!((h.iter().sum::<f64>() - 2f64.sqrt()).abs() < 1e-14);
        for shift in 0..4 {
            let s: f64 = (0..8 - 2 * shift).map(|k| h[k] * h[k + 2 * shift]).sum();
            let want = if shift == 0 { 1.0 } else { 0.0 };
            assert!((s - want).abs() < 1e-14, "shift {shift}: {s}");
        }
        let (_, g) = filters::<f64>(WaveletFamily::Daubechies4);
        for m in 0..4 {
            let mom: f64 = g.iter().enumerate().map(|(k, v)| (k as f64).powi(m) * v).sum();
            assert!(mom.abs() < 1e-9, "moment {m}: {mom}");
        }
    }

    #[test]
    fn constant_has_no_details() {
        let s = spec(64);
        let t = dwt(Array1::from_elem(64, 3.0).view(), &s).unwrap();
        assert!(t.details.iter().flatten().all(|v: &f64| v.abs() < 1e-12));
        assert_eq!(t.approx.len(), 8);
        assert_eq!(t.details.iter().map(Vec::len).collect::<Vec<_>>(), vec![8, 16, 32]);
    }

    #[test]
    fn round_trip_and_parseval() {
        for family in [WaveletFamily::Haar, WaveletFamily::Daubechies4] {
            let s = WaveletSpec { family, ..spec(256) };
            let x = random(256, 1);
            let t = dwt(x.view(), &s).unwrap();
            let back = idwt(&t, &s).unwrap();
            assert!((&back - &x).iter().all(|v| v.abs() < 1e-10));
            assert!((t.energy() - x.mapv(|v| v * v).sum()).abs() < 1e-10);
        }
    }

    #[test]
    fn level_bounds() {
        let bad = WaveletSpec { j0: 5, j_max: 5, ..spec(32) };
        assert!(dwt(random(32, 2).view(), &bad).is_err());
        assert!(dwt(random(48, 2).view(), &spec(64)).is_err());
        assert!(WaveletSpec::<f64>::for_length(100, 2.4).is_err());
    }

    #[test]
    fn lambda_values() {
        let m = OperatorModel::<f64>::default();
        assert!((lambda_hat(&m, 750, 50).unwrap() - 2.045_671_199_012_752e-3).abs() < 1e-15);
        assert!((lambda_hat(&m, 10, 1).unwrap() - m.sigma2(1) * m.c(1) / 10.0).abs() < 1e-16);
        assert!(lambda_hat(&m, 1_000_000_000, 50).unwrap() < 2e-9);
        assert!(lambda_hat(&m, 10, 0).is_err());
    }

    #[test]
    fn shrink_rules() {
        let s = spec(64);
        let t = dwt(random(64, 3).view(), &s).unwrap();
        let same = shrink(&t, &ShrinkagePlan { lambda: 0.0, m: 1 }, &s);
        assert_eq!(same, t);
        let all = shrink(&t, &ShrinkagePlan { lambda: 1e300, m: 1 }, &s);
        assert_eq!(all.approx, t.approx);
        assert!(all.details.iter().flatten().all(|&v| v.abs() < 1e-200));
        let mut single = CoefficientTree { j0: 3, approx: vec![0.0; 8], details: vec![vec![0.0; 8], vec![0.0; 16], vec![0.0; 32]] };
        single.details[1][5] = 2.0;
        let lam = 1e-4;
        let out = shrink(&single, &ShrinkagePlan { lambda: lam, m: 1 }, &s);
        assert_eq!(out.details[1][5], 2.0 / (1.0 + lam * 2f64.powf(2.0 * 2.4 * 4.0)));
        assert!(out.energy() <= single.energy());
    }

    fn sample(n: usize, seed: u64) -> (OperatorModel<f64>, FunctionalSample<f64>) {
        let m = OperatorModel::default();
        let g = Grid::uniform(m.interval, 256).unwrap();
        let c = simulate_diagonal(&m, n, 30, seed).unwrap();
        let s = assemble_curves(&c, &m, &g).unwrap();
        (m, s)
    }

    #[test]
    fn smoothing_reduces_energy_and_centers() {
        let (m, s) = sample(200, 4);
        let sp = spec(256);
        let plan = ShrinkagePlan::from_model(&m, 200, 50).unwrap();
        let sm = wavelet_smooth(&s, &sp, &plan).unwrap();
        for i in 0..200 {
            assert!(s.grid.norm_sq(sm.curves.row(i)) <= s.grid.norm_sq(s.curves.row(i)) + 1e-6);
        }
        let fit = wavelet_smooth_then_estimate(&s, &sp, &plan, 3).unwrap();
        let centered = &sm.curves - &fit.trend.view().insert_axis(Axis(0));
        let mean = centered.mean_axis(Axis(0)).unwrap();
        assert!(mean.iter().all(|v| v.abs() < 1e-10));
        assert_eq!(fit.prediction.len(), 256);
    }

    #[test]
    fn zero_penalty_reduces_to_projection_estimator() {
        let (_, s) = sample(300, 5);
        let sp = spec(256);
        let fit = wavelet_smooth_then_estimate(&s, &sp, &ShrinkagePlan { lambda: 0.0, m: 50 }, 3).unwrap();
        let mean = s.curves.mean_axis(Axis(0)).unwrap();
        let centered = FunctionalSample::new(s.grid.clone(), &s.curves - &mean.view().insert_axis(Axis(0))).unwrap();
        let cov = empirical_covariance(&centered).unwrap();
        let eig = eigen_decompose(cov.view(), s.grid.weights.view(), 3, None).unwrap();
        let e = empirical_bosq(&centered, &eig, 3).unwrap();
        let err = (&e.matrix - &fit.estimate.matrix).iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        let p = predict_curve(&e, &eig, s.curves.row(299)).unwrap();
        assert!((&p - &fit.prediction).iter().all(|v| v.abs() < 1e-6));
    }
}

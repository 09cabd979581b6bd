//! Uniform grids with trapezoid weights.

use ndarray::{Array1, ArrayView1};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral_model::Interval;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    pub interval: Interval<T>,
    pub points: Array1<T>,
    pub weights: Array1<T>,
}

impl<T: Real> Grid<T> {
    /// `p` equispaced abscissae covering `[a, b]` including both endpoints.
    pub fn uniform(interval: Interval<T>, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::Parameter(format!("grid needs at least 2 points, got {p}")));
        }
        let h = interval.length() / T::from_count(p - 1);
        let mut points = Array1::from_shape_fn(p, |m| interval.a + h * T::from_count(m));
        points[p - 1] = interval.b;
        let mut weights = Array1::from_elem(p, h);
        weights[0] = h / T::lit(2.0);
        weights[p - 1] = h / T::lit(2.0);
        Ok(Self { interval, points, weights })
    }

    /// Grid whose spacing is the closest to `step` that tiles the interval.
    pub fn from_step(interval: Interval<T>, step: T) -> Result<Self> {
        if !(step > T::zero()) {
            return Err(Error::Parameter(format!("grid step must be positive, got {step}")));
        }
        let cells = (interval.length() / step).round().to_usize().unwrap_or(0).max(1);
        Self::uniform(interval, cells + 1)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Quadrature inner product of two sampled functions.
    pub fn inner(&self, f: ArrayView1<T>, g: ArrayView1<T>) -> T {
        let mut s = T::zero();
        for ((w, x), y) in self.weights.iter().zip(f.iter()).zip(g.iter()) {
            s += *w * *x * *y;
        }
        s
    }

    pub fn norm_sq(&self, f: ArrayView1<T>) -> T {
        self.inner(f, f)
    }

    pub fn norm(&self, f: ArrayView1<T>) -> T {
        self.norm_sq(f).sqrt()
    }

    /// `sum_m w_m (f_m - g_m)^2`.
    pub fn distance_sq(&self, f: ArrayView1<T>, g: ArrayView1<T>) -> T {
        let mut s = T::zero();
        for ((w, x), y) in self.weights.iter().zip(f.iter()).zip(g.iter()) {
            let d = *x - *y;
            s += *w * d * d;
        }
        s
    }
}

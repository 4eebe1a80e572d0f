//! One-dimensional interpolation helpers.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cubic Hermite basis on `[0, 1]`: `(h00, h10, h01, h11)`.
///
/// `p(θ) = h00·y0 + h10·h·d0 + h01·y1 + h11·h·d1` for an interval of length `h`.
#[inline]
pub fn hermite_basis<T: Scalar>(theta: T) -> [T; 4] {
    let two = T::of(2.0);
    let three = T::of(3.0);
    let t2 = theta * theta;
    let t3 = t2 * theta;
    [
        two * t3 - three * t2 + T::one(),
        t3 - two * t2 + theta,
        -two * t3 + three * t2,
        t3 - t2,
    ]
}

/// Derivative of [`hermite_basis`] with respect to `θ`.
#[inline]
pub fn hermite_basis_derivative<T: Scalar>(theta: T) -> [T; 4] {
    let t2 = theta * theta;
    let six = T::of(6.0);
    [
        six * t2 - six * theta,
        T::of(3.0) * t2 - T::of(4.0) * theta + T::one(),
        -six * t2 + six * theta,
        T::of(3.0) * t2 - T::of(2.0) * theta,
    ]
}

/// Monotone piecewise-cubic interpolant (Fritsch–Carlson slopes).
///
/// Outside the data range the end values are held constant.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Scalar> MonotoneCubic<T> {
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::config("interpolation table needs matching, non-empty columns"));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("interpolation abscissae must be strictly increasing"));
        }
        let n = xs.len();
        let mut slopes = vec![T::zero(); n];
        if n >= 2 {
            let secants: Vec<T> = (0..n - 1)
                .map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]))
                .collect();
            slopes[0] = secants[0];
            slopes[n - 1] = secants[n - 2];
            for i in 1..n - 1 {
                let (a, b) = (secants[i - 1], secants[i]);
                slopes[i] = if a * b <= T::zero() {
                    T::zero()
                } else {
                    // weighted harmonic mean keeps each cubic piece monotone
                    let h0 = xs[i] - xs[i - 1];
                    let h1 = xs[i + 1] - xs[i];
                    let w1 = T::of(2.0) * h1 + h0;
                    let w2 = h1 + T::of(2.0) * h0;
                    (w1 + w2) / (w1 / a + w2 / b)
                };
            }
            for (i, s) in secants.iter().enumerate() {
                if *s == T::zero() {
                    slopes[i] = T::zero();
                    slopes[i + 1] = T::zero();
                }
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    fn locate(&self, x: T) -> Option<usize> {
        let n = self.xs.len();
        if n < 2 || x <= self.xs[0] || x >= self.xs[n - 1] {
            return None;
        }
        Some(self.xs.partition_point(|&xi| xi <= x) - 1)
    }

    pub fn eval(&self, x: T) -> T {
        match self.locate(x) {
            None if x <= self.xs[0] => self.ys[0],
            None => self.ys[self.ys.len() - 1],
            Some(i) => {
                let h = self.xs[i + 1] - self.xs[i];
                let [a, b, c, d] = hermite_basis((x - self.xs[i]) / h);
                a * self.ys[i] + b * h * self.slopes[i] + c * self.ys[i + 1] + d * h * self.slopes[i + 1]
            }
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match self.locate(x) {
            None => T::zero(),
            Some(i) => {
                let h = self.xs[i + 1] - self.xs[i];
                let [a, b, c, d] = hermite_basis_derivative((x - self.xs[i]) / h);
                (a * self.ys[i] + c * self.ys[i + 1]) / h + b * self.slopes[i] + d * self.slopes[i + 1]
            }
        }
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }
}

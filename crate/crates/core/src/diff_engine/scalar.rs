use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// Arithmetic shared by plain `f64` values and recorded tape variables.
///
/// Residual and jet code is written once against this trait; instantiating
/// it with `f64` evaluates numbers directly, instantiating it with
/// [`Var`](super::Var) records every operation for a reverse sweep.
pub trait Scalar:
    Copy
    + Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn value(self) -> f64;

    /// A constant living in the same context as `self`.
    fn constant_like(self, c: f64) -> Self;

    fn tanh(self) -> Self;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn powf(self, p: f64) -> Self;

    /// Absolute value; derivative at zero is taken as 0.
    fn abs(self) -> Self;

    /// `max(self, 0)`; derivative at zero is taken as 0.
    fn relu(self) -> Self;

    fn zero_like(self) -> Self {
        self.constant_like(0.0)
    }

    /// `c - self`.
    fn rsub(self, c: f64) -> Self {
        -self + c
    }
}

impl Scalar for f64 {
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn constant_like(self, c: f64) -> Self {
        c
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn powf(self, p: f64) -> Self {
        f64::powf(self, p)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
    #[inline]
    fn relu(self) -> Self {
        if self > 0.0 {
            self
        } else {
            0.0
        }
    }
}

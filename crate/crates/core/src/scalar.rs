//! Scalar abstraction so sampled functions can hold either `f64` or `Complex64`.

use num_complex::Complex64;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Field scalar for sampled functions: `f64` or `Complex64`.
pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    const ZERO: Self;
    const ONE: Self;

    /// Embed a real number.
    fn from_real(x: f64) -> Self;

    /// Multiply by a real factor.
    fn scale(self, s: f64) -> Self;

    /// Modulus (absolute value).
    fn modulus(self) -> f64;
}

impl Scalar for f64 {
    const ZERO: Self = 0.0;
    const ONE: Self = 1.0;

    fn from_real(x: f64) -> Self {
        x
    }

    fn scale(self, s: f64) -> Self {
        self * s
    }

    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    const ZERO: Self = Complex64::new(0.0, 0.0);
    const ONE: Self = Complex64::new(1.0, 0.0);

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn scale(self, s: f64) -> Self {
        Complex64::new(self.re * s, self.im * s)
    }

    fn modulus(self) -> f64 {
        self.norm()
    }
}

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

pub use num_complex::Complex64 as C64;

/// Real or complex field element stored at grid nodes.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + Debug
    + PartialEq
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + 'static
{
    const IS_COMPLEX: bool;
    fn from_real(x: f64) -> Self;
    fn abs(self) -> f64;
    fn abs2(self) -> f64;
    fn conj(self) -> Self;
    fn scale(self, a: f64) -> Self;
    fn re(self) -> f64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    const IS_COMPLEX: bool = false;
    fn from_real(x: f64) -> Self {
        x
    }
    fn abs(self) -> f64 {
        f64::abs(self)
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn conj(self) -> Self {
        self
    }
    fn scale(self, a: f64) -> Self {
        self * a
    }
    fn re(self) -> f64 {
        self
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for C64 {
    const IS_COMPLEX: bool = true;
    fn from_real(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn abs(self) -> f64 {
        self.norm()
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn scale(self, a: f64) -> Self {
        self * a
    }
    fn re(self) -> f64 {
        self.re
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

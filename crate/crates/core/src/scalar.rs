//! Scalar abstraction shared by the f64 and forward-mode dual code paths.

use std::cell::Cell;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

thread_local! {
    static NONSMOOTH: Cell<bool> = const { Cell::new(false) };
}

/// Clears the thread-local non-smooth flag.
pub fn reset_nonsmooth_flag() {
    NONSMOOTH.with(|c| c.set(false));
}

/// Returns true if a branch was taken at a boundary with live partials since the last reset.
pub fn nonsmooth_flag() -> bool {
    NONSMOOTH.with(|c| c.get())
}

pub(crate) fn raise_nonsmooth() {
    NONSMOOTH.with(|c| c.set(true));
}

pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn cst(v: f64) -> Self;
    fn re(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn asin(self) -> Self;
    fn abs(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    /// True when any partial derivative is nonzero.
    fn has_partials(&self) -> bool;

    fn zero() -> Self {
        Self::cst(0.0)
    }
    fn one() -> Self {
        Self::cst(1.0)
    }
    fn powi(self, n: i32) -> Self {
        let mut out = Self::one();
        let base = if n < 0 { Self::one() / self } else { self };
        for _ in 0..n.unsigned_abs() {
            out *= base;
        }
        out
    }
    fn recip(self) -> Self {
        Self::one() / self
    }

    /// Records a control-flow decision `self < boundary`. If the value sits on the
    /// boundary while carrying partials, the non-smooth flag is raised.
    fn branch_lt(&self, boundary: f64) -> bool {
        let v = self.re();
        if self.has_partials() && (v - boundary).abs() <= 1e-12 * boundary.abs().max(1.0) {
            raise_nonsmooth();
        }
        v < boundary
    }
}

impl Scalar for f64 {
    #[inline]
    fn cst(v: f64) -> Self {
        v
    }
    #[inline]
    fn re(&self) -> f64 {
        *self
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
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn asin(self) -> Self {
        f64::asin(self)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
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
    fn has_partials(&self) -> bool {
        false
    }
    #[inline]
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

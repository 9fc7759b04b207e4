//! The numeric field abstraction shared by expression evaluation and the
//! pointwise linear solver.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

/// A real scalar that supports the elementary functions of the expression
/// language. Implemented for plain `f64` and for [`crate::jets::Jet`].
///
/// Domain checks (division by zero, `ln` of a non-positive number, ...) are
/// the caller's job and are made against [`Scalar::value`].
pub trait Scalar:
    Clone
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn constant(c: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sqrt(&self) -> Self;
    fn abs(&self) -> Self;
    fn powi(&self, n: i32) -> Self;

    /// True only when the scalar is zero together with all derivative data
    /// it carries, so that multiplying by it can be skipped.
    fn is_exact_zero(&self) -> bool;

    fn zero() -> Self {
        Self::constant(0.0)
    }

    fn scale(&self, c: f64) -> Self {
        self.clone() * Self::constant(c)
    }
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }
    fn scale(&self, c: f64) -> Self {
        self * c
    }
    fn is_exact_zero(&self) -> bool {
        *self == 0.0
    }
}

//! Floating-point scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};

/// Real scalar type the estimators are generic over.
///
/// Implemented for `f32` and `f64`. Distribution functions (normal CDF and
/// quantile) are evaluated in `f64` and converted back.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 is representable in every Scalar")
    }

    /// Widens to `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar values convert to f64")
    }

    /// Converts a count into this scalar type.
    fn from_count(n: usize) -> Self {
        Self::of(n as f64)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid evaluated without overflow in either tail.
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

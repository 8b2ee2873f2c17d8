//! Floating point abstraction shared by every module.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar the library is generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal, panicking only for non-representable input.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative tolerance of the "on the boundary" predicate.
    fn boundary_tol() -> Self {
        Self::lit(1e-8).max(Self::epsilon() * Self::lit(1e3))
    }

    /// Relative tolerance targeted by the scalar root finders.
    fn root_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(8.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `x + y` with the convention that `∞` absorbs everything.
pub(crate) fn sentinel_add<T: Scalar>(x: T, y: T) -> T {
    if x.is_infinite() || y.is_infinite() {
        T::infinity()
    } else {
        x + y
    }
}

/// `1/x` with `1/0 = ∞` and `1/∞ = 0`.
pub(crate) fn sentinel_recip<T: Scalar>(x: T) -> T {
    if x == T::zero() {
        T::infinity()
    } else if x.is_infinite() {
        T::zero()
    } else {
        x.recip()
    }
}

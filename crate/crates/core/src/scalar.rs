//! Floating-point scalar abstraction.
//!
//! All numeric code in this crate is generic over [`Scalar`], which combines
//! `nalgebra`'s `RealField` (dense linear algebra, transcendentals) with the
//! `num-traits` arithmetic and conversion traits. Concrete aliases for the
//! common instantiations live at the crate root.

use nalgebra::RealField;
use num_traits::{FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar type the library is generic over: `f32` or `f64`.
pub trait Scalar:
    RealField
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Copy
    + Default
    + std::iter::Sum
    + for<'a> std::iter::Sum<&'a Self>
    + serde::Serialize
    + serde::de::DeserializeOwned
{
    /// `ln(1 + x)`, accurate for small `x`.
    fn ln_1p(self) -> Self;
    /// `exp(x) - 1`, accurate for small `x`.
    fn exp_m1(self) -> Self;
    /// Machine epsilon of the concrete type.
    fn machine_eps() -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn ln_1p(self) -> Self {
        f32::ln_1p(self)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        f32::exp_m1(self)
    }
    #[inline]
    fn machine_eps() -> Self {
        f32::EPSILON
    }
}

impl Scalar for f64 {
    #[inline]
    fn ln_1p(self) -> Self {
        f64::ln_1p(self)
    }
    #[inline]
    fn exp_m1(self) -> Self {
        f64::exp_m1(self)
    }
    #[inline]
    fn machine_eps() -> Self {
        f64::EPSILON
    }
}

/// Shorthand for converting an `f64` literal into the working scalar type.
#[inline]
pub fn cast<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 value representable in scalar type")
}

//! Scalar abstraction shared by every numerical module.

use std::fmt;
use std::str::FromStr;

use nalgebra::RealField;
use num_traits::ToPrimitive;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar the library is generic over (`f32` or `f64`).
///
/// `Display` is required to print the shortest string that parses back to
/// the same value, which both primitive float types guarantee.
pub trait Real:
    RealField
    + Copy
    + ToPrimitive
    + fmt::Display
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into this scalar type.
    fn of(x: f64) -> Self {
        <Self as num_traits::FromPrimitive>::from_f64(x).expect("f64 constant representable")
    }

    fn of_usize(n: usize) -> Self {
        Self::of(n as f64)
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("scalar converts to f64")
    }

    fn magnitude(self) -> Self {
        <Self as nalgebra::ComplexField>::abs(self)
    }

    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

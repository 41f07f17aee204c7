//! The floating-point abstraction every kernel in the crate is written against.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// A real scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts an unsigned count into this scalar type.
    #[inline]
    fn of_u64(x: u64) -> Self {
        Self::from_u64(x).expect("count representable")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        Self::from_usize(x).expect("count representable")
    }

    /// Natural log of the smallest value whose exponential is still nonzero,
    /// padded below by a few nats. Log-masses under this contribute exactly
    /// nothing once exponentiated.
    #[inline]
    fn log_underflow() -> Self {
        Self::min_positive_value().ln() + Self::epsilon().ln() - Self::lit(2.0)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

//! Scalar abstraction for the numerical core.
//!
//! Everything in the kernel / linear algebra / inference layers is generic
//! over [`Real`], which is satisfied by `f32` and `f64`. The simulation and
//! data-generation layers are `f64`-only; the crate root exports `f64`
//! aliases for the common types.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable by the numerical core.
///
/// A blanket impl covers every type with the listed bounds, in particular
/// `f32` and `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics if the value is not representable (never happens for the
    /// finite constants used by this crate).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant not representable in scalar type")
    }

    /// Converts to `f64`, possibly losing precision (never failing for
    /// `f32`/`f64`).
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar not representable as f64")
    }

    /// Converts a `usize` (e.g. a sample size) into this scalar type.
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize not representable in scalar type")
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
}

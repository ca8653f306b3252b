//! Scalar abstraction for the numeric core.
//!
//! Everything numerical (encoding, slot attention, losses, gradients,
//! metrics) is generic over [`Real`] so the same code runs in `f32` or
//! `f64`. Training and checkpoints default to `f64`; gradient checks
//! require it.

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the numeric core.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + ScalarOperand
    + std::iter::Sum
    + std::fmt::Debug
    + std::fmt::Display
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` literal into this scalar type.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    /// Widen to `f64` (for reporting and serialization).
    fn to64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

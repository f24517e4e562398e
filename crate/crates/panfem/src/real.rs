//! Scalar abstraction for the tensor/constitutive layers.
//!
//! The low-level math (tensor algebra, kinematics, stored-energy functions,
//! discrete gradients) is generic over [`Real`] so it can be instantiated at
//! `f32` or `f64`. The finite-element stack and all file formats are `f64`;
//! the generic types default their scalar parameter accordingly.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, Neg, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar usable throughout the math core.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Neg<Output = Self>
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant into `Self`, rounding if necessary.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 constant")
    }

    /// Lossy view of the value as `f64` (exact for `f64`, widened for `f32`).
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

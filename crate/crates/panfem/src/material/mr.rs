//! Compressible Mooney-Rivlin model
//! `W = a(I1−3) + b(I2−3) + c/2 (J−1)² − d ln J`.

use super::{Material, MaterialResponse};
use crate::error::Result;
use crate::kinematics::InvariantTriple;
use crate::real::Real;
use crate::error::Error;

/// Mooney-Rivlin material constants (Pa). The stress-free reference state
/// requires `d = 2(a + 2b)`; [`MrParams::is_stress_normalized`] reports
/// whether that holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrParams<T = f64> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub d: T,
}

impl<T: Real> MrParams<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Self { a, b, c, d }
    }

    /// Reference constants for the compressible benchmark material.
    pub fn compressible_reference() -> Self {
        Self::new(T::of(831.25), T::of(166.25), T::of(10000.0), T::of(2327.5))
    }

    /// Reference constants for the nearly incompressible benchmark material.
    pub fn nearly_incompressible_reference() -> Self {
        Self::new(T::of(126.0), T::of(252.0), T::of(81512.0), T::of(1260.0))
    }

    /// Whether `d = 2(a + 2b)` holds, i.e. the undeformed state carries zero
    /// stress. Violations are allowed (exploratory parameter sets) but
    /// should be surfaced to the user.
    pub fn is_stress_normalized(&self) -> bool {
        let target = T::of(2.0) * (self.a + T::of(2.0) * self.b);
        (self.d - target).abs() <= T::of(1e-12) * target.abs().max(T::one())
    }
}

/// Mooney-Rivlin material ready for evaluation.
#[derive(Debug, Clone, Copy)]
pub struct MrModel<T = f64> {
    params: MrParams<T>,
}

impl<T: Real> MrModel<T> {
    pub fn new(params: MrParams<T>) -> Self {
        Self { params }
    }

    pub fn params(&self) -> &MrParams<T> {
        &self.params
    }
}

impl<T: Real> Material<T> for MrModel<T> {
    fn response(&self, inv: &InvariantTriple<T>) -> Result<MaterialResponse<T>> {
        let MrParams { a, b, c, d } = self.params;
        let j = inv.j;
        if j <= T::zero() {
            return Err(Error::NonPositiveJacobian { det: j.as_f64(), element: None });
        }
        let three = T::of(3.0);
        let one = T::one();
        let jm1 = j - one;
        let w = a * (inv.i1 - three) + b * (inv.i2 - three)
            + c * T::of(0.5) * jm1 * jm1
            - d * j.ln();
        let dw = [a, b, c * jm1 - d / j];
        let mut d2w = [[T::zero(); 3]; 3];
        d2w[2][2] = c + d / (j * j);
        Ok(MaterialResponse { w, dw, d2w })
    }
}

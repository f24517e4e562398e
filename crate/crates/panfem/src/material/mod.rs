//! Invariant-based hyperelastic constitutive models: a common interface for
//! energy and its first/second derivatives with respect to `(I1, I2, J)`,
//! plus second Piola-Kirchhoff stress and consistent material tangents.

mod mr;
mod pann;

pub use mr::{MrModel, MrParams};
pub use pann::{growth_derivatives, nn_eval, sigmoid, softplus, NnResponse, PannModel, PannParams};

use crate::error::Result;
use crate::kinematics::{invariants, InvariantTriple};
use crate::real::Real;
use crate::tensor::{cof_det, cross, wedge_operator_matrix, Mat6, SymVoigt6, Tensor3, VoigtRole};

/// Strain-energy density and its derivatives with respect to the invariant
/// triple `(I1, I2, J)`.
#[derive(Debug, Clone, Copy)]
pub struct MaterialResponse<T = f64> {
    /// Energy density (Pa).
    pub w: T,
    /// First partials `(∂W/∂I1, ∂W/∂I2, ∂W/∂J)`.
    pub dw: [T; 3],
    /// Symmetric matrix of second partials.
    pub d2w: [[T; 3]; 3],
}

/// A hyperelastic material defined through the isotropic invariants.
///
/// Implementations must accept any triple with `J > 0`, including
/// combinations that do not stem from a single deformation state; the
/// discrete-gradient integrator evaluates mixed argument patterns.
pub trait Material<T: Real = f64>: Send + Sync {
    fn response(&self, inv: &InvariantTriple<T>) -> Result<MaterialResponse<T>>;
}

impl<T: Real, M: Material<T> + ?Sized> Material<T> for &M {
    fn response(&self, inv: &InvariantTriple<T>) -> Result<MaterialResponse<T>> {
        (**self).response(inv)
    }
}

/// Per-point algebra shared by stress and tangent evaluation: the invariant
/// derivative tensors of a fixed `C` in Voigt form.
///
/// With `a1 = voigt(2I)`, `a2 = voigt(2 I∧C)`, `a3 = voigt(J⁻¹ G)`, the
/// stress of any invariant model is `S = Σₖ (∂W/∂invₖ) aₖ` and the invariant
/// increments are `d invₖ = aₖ · voigt(½ dC)`.
#[derive(Debug, Clone)]
pub struct StressBasis<T: Real = f64> {
    pub inv: InvariantTriple<T>,
    pub c: Tensor3<T>,
    pub g: Tensor3<T>,
    pub i_wedge_c: Tensor3<T>,
    pub a: [SymVoigt6<T>; 3],
}

impl<T: Real> StressBasis<T> {
    pub fn new(c: &Tensor3<T>) -> Result<Self> {
        let inv = invariants(c)?;
        let (g, _) = cof_det(*c);
        let i_wedge_c = cross(Tensor3::identity(), *c);
        let two = T::of(2.0);
        let a1 = (Tensor3::identity() * two).to_voigt_unchecked(VoigtRole::Stress);
        let a2 = (i_wedge_c * two).to_voigt_unchecked(VoigtRole::Stress);
        let a3 = (g * inv.j.recip()).to_voigt_unchecked(VoigtRole::Stress);
        Ok(Self { inv, c: *c, g, i_wedge_c, a: [a1, a2, a3] })
    }

    /// Second Piola-Kirchhoff stress for the given first partials:
    /// `S = 2(∂₁W I + ∂₂W (I∧C) + ½ ∂₃W J⁻¹ G)`.
    pub fn stress(&self, dw: [T; 3]) -> Tensor3<T> {
        let two = T::of(2.0);
        Tensor3::identity() * (two * dw[0])
            + self.i_wedge_c * (two * dw[1])
            + self.g * (dw[2] / self.inv.j)
    }

    /// Consistent material tangent as the 6×6 Voigt matrix mapping
    /// `voigt(½ dC, strain)` to `voigt(dS, stress)`.
    ///
    /// Combines the second partials with generator dyads plus the derivative
    /// of the generators themselves: `d(I∧C)` through the wedge operator and
    /// `d(J⁻¹G) = 2J⁻¹ (C ∧ ½dC) − J⁻¹ (a₃·e) G/J`.
    pub fn tangent(&self, dw: [T; 3], d2w: [[T; 3]; 3]) -> Mat6<T> {
        let mut cc = Mat6::zero();
        for k in 0..3 {
            for l in 0..3 {
                if d2w[k][l] != T::zero() {
                    cc.add_outer(d2w[k][l], &self.a[k].v, &self.a[l].v);
                }
            }
        }
        if dw[1] != T::zero() {
            let di = wedge_operator_matrix(Tensor3::identity())
                .expect("identity is symmetric");
            cc.add_scaled(T::of(4.0) * dw[1], &di);
        }
        if dw[2] != T::zero() {
            let dc = wedge_operator_matrix(self.c.sym()).expect("C symmetrized");
            let jinv = self.inv.j.recip();
            cc.add_scaled(T::of(2.0) * dw[2] * jinv, &dc);
            cc.add_outer(-dw[2] * jinv, &self.a[2].v, &self.a[2].v);
        }
        cc
    }
}

/// Second Piola-Kirchhoff stress `S(C) = 2 ∂W/∂C` of a model at a symmetric
/// positive definite `C`.
pub fn pk2<T: Real, M: Material<T> + ?Sized>(model: &M, c: &Tensor3<T>) -> Result<Tensor3<T>> {
    let basis = StressBasis::new(c)?;
    let resp = model.response(&basis.inv)?;
    Ok(basis.stress(resp.dw))
}

/// 6×6 Voigt material tangent `2 ∂S/∂C` of a model at `C` (maps
/// `voigt(½ dC, strain)` to `voigt(dS, stress)`); majorly symmetric.
pub fn material_tangent<T: Real, M: Material<T> + ?Sized>(
    model: &M,
    c: &Tensor3<T>,
) -> Result<Mat6<T>> {
    let basis = StressBasis::new(c)?;
    let resp = model.response(&basis.inv)?;
    Ok(basis.tangent(resp.dw, resp.d2w))
}

//! Dynamic element contributions of the one-step time integrators.
//!
//! Both integrators share the inertia discretization
//! `(2/Δt²) M Δu − (2/Δt) M vₙ` (equivalent to the trapezoidal velocity
//! update `vₙ₊₁ = 2Δu/Δt − vₙ`) and differ in the stress evaluated against
//! the midpoint strain-displacement operator: the energy-momentum scheme uses
//! the algorithmic stress built from discrete invariant gradients, the
//! midpoint scheme the ordinary stress at the midpoint metric.

use super::{
    add_btcb, add_btsv, add_geometric, b_operator, def_grad, element_mass, gauss_2x2x2,
    qp_geometry, stress_voigt, ElementMatrices, HEX_DOF,
};
use crate::dynamics::{greenspan_dg_full, IntegratorKind};
use crate::error::{Error, Result};
use crate::kinematics::{algo_kinematics, invariants, strain_measures};
use crate::material::{Material, StressBasis};
use crate::tensor::{cross, wedge_operator_matrix, Mat6, Tensor3, VoigtRole};

/// Residual and consistent tangent of one element for the step from
/// `(uₙ, vₙ)` to the trial state `uₙ₊₁`; external loads are handled by the
/// driver. The tangent is taken with respect to `uₙ₊₁`.
#[allow(clippy::too_many_arguments)]
pub fn element_dynamic<M: Material + ?Sized>(
    model: &M,
    integrator: IntegratorKind,
    coords: &[[f64; 3]; 8],
    u_n: &[f64; HEX_DOF],
    u_n1: &[f64; HEX_DOF],
    v_n: &[f64; HEX_DOF],
    dt: f64,
    rho0: f64,
) -> Result<ElementMatrices> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::DegenerateTimeStep {
            detail: format!("time step must be positive and finite, got {dt}"),
        });
    }
    let m = element_mass(coords, rho0)?;
    let mut em = ElementMatrices::zero();
    let c1 = 2.0 / (dt * dt);
    let c2 = 2.0 / dt;
    for p in 0..HEX_DOF {
        for q in 0..HEX_DOF {
            if m[p][q] != 0.0 {
                em.r[p] += m[p][q] * (c1 * (u_n1[q] - u_n[q]) - c2 * v_n[q]);
                em.k[p][q] += c1 * m[p][q];
            }
        }
    }
    for qp in gauss_2x2x2() {
        let geo = qp_geometry(coords, &qp)?;
        let f_n = def_grad(u_n, &geo.grad_n);
        let f_n1 = def_grad(u_n1, &geo.grad_n);
        let f_half = (f_n + f_n1) * 0.5;
        let b_half = b_operator(&f_half, &geo.grad_n);
        match integrator {
            IntegratorKind::Ems => {
                let (c_n, _, _) = strain_measures(&f_n)?;
                let (c_n1, _, _) = strain_measures(&f_n1)?;
                let inv_n = invariants(&c_n)?;
                let inv_n1 = invariants(&c_n1)?;
                let (dg, ddg) = greenspan_dg_full(model, &inv_n, &inv_n1)?;
                let ak = algo_kinematics(&c_n, &c_n1)?;
                let iwc_a = cross(Tensor3::identity(), ak.c_algo);
                let ja_inv = 1.0 / ak.j_algo;
                let s_algo = Tensor3::identity() * (2.0 * dg.di1)
                    + iwc_a * (2.0 * dg.di2)
                    + ak.g_algo * (dg.dj * ja_inv);
                add_btsv(&mut em.r, &b_half, &stress_voigt(&s_algo), geo.dv);

                // Algorithmic generators (left factors) and the end-point
                // invariant derivative vectors a_l(Cₙ₊₁) (right factors).
                let ahat = [
                    (Tensor3::identity() * 2.0)
                        .to_voigt_unchecked(VoigtRole::Stress)
                        .v,
                    (iwc_a * 2.0).to_voigt_unchecked(VoigtRole::Stress).v,
                    (ak.g_algo * ja_inv).to_voigt_unchecked(VoigtRole::Stress).v,
                ];
                let basis_n1 = StressBasis::new(&c_n1)?;
                let b_n1 = b_operator(&f_n1, &geo.grad_n);

                let mut cc = Mat6::zero();
                for k in 0..3 {
                    for l in 0..3 {
                        if ddg[k][l] != 0.0 {
                            cc.add_outer(ddg[k][l], &ahat[k], &basis_n1.a[l].v);
                        }
                    }
                }
                if dg.di2 != 0.0 {
                    let di = wedge_operator_matrix(Tensor3::identity()).expect("identity");
                    cc.add_scaled(2.0 * dg.di2, &di);
                }
                if dg.dj != 0.0 {
                    // d(G_a/J_a): cofactor average varies through both the
                    // algorithmic metric and the end-point cofactor, the
                    // scaling through dJ_a = ½ a₃(Cₙ₊₁)·(Bₙ₊₁ du).
                    let d_ca = wedge_operator_matrix(ak.c_algo.sym()).expect("symmetric");
                    let d_cn1 = wedge_operator_matrix(c_n1.sym()).expect("symmetric");
                    cc.add_scaled(dg.dj * ja_inv * 2.0 / 3.0, &d_ca);
                    cc.add_scaled(dg.dj * ja_inv / 3.0, &d_cn1);
                    let g_a_v = ak.g_algo.to_voigt_unchecked(VoigtRole::Stress).v;
                    cc.add_outer(-0.5 * dg.dj * ja_inv * ja_inv, &g_a_v, &basis_n1.a[2].v);
                }
                add_btcb(&mut em.k, &b_half, &cc, &b_n1, geo.dv);
                // The strain-displacement operator itself varies at half
                // rate, dF_half = ½ dFₙ₊₁.
                add_geometric(&mut em.k, &geo.grad_n, &s_algo, 0.5 * geo.dv);
            }
            IntegratorKind::Midpoint => {
                let (c_half, _, _) = strain_measures(&f_half)?;
                let basis = StressBasis::new(&c_half)?;
                let resp = model.response(&basis.inv)?;
                let s_mid = basis.stress(resp.dw);
                add_btsv(&mut em.r, &b_half, &stress_voigt(&s_mid), geo.dv);
                let cc = basis.tangent(resp.dw, resp.d2w);
                add_btcb(&mut em.k, &b_half, &cc, &b_half, 0.5 * geo.dv);
                add_geometric(&mut em.k, &geo.grad_n, &s_mid, 0.5 * geo.dv);
            }
        }
    }
    Ok(em)
}

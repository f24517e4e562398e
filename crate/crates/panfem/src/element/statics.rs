//! Static internal-force residuals and consistent tangents for the
//! displacement element and the two mixed elements with element-constant
//! extra fields condensed out.

use super::{
    add_btcb, add_btsv, add_geometric, add_outer24, b_operator, def_grad, gauss_2x2x2,
    qp_geometry, stress_voigt, ElementMatrices, Formulation, MixedInternal, QpGeometry, HEX_DOF,
};
use crate::error::Result;
use crate::kinematics::{strain_measures, InvariantTriple};
use crate::material::{Material, StressBasis};
use crate::tensor::Tensor3;

/// Internal residual `r = ∂Π_int/∂u`, consistent tangent `k = ∂r/∂u`, and the
/// condensed element-constant fields (mixed formulations only).
///
/// The residual does not include external loads; drivers subtract those
/// separately.
pub fn element_static<M: Material + ?Sized>(
    model: &M,
    formulation: Formulation,
    coords: &[[f64; 3]; 8],
    u: &[f64; HEX_DOF],
) -> Result<(ElementMatrices, Option<MixedInternal>)> {
    match formulation {
        Formulation::H1 => h1_static(model, coords, u).map(|em| (em, None)),
        Formulation::IiijH1H0 => iiij_static(model, coords, u).map(|(em, x)| (em, Some(x))),
        Formulation::GjH1H0 => gj_static(model, coords, u).map(|(em, x)| (em, Some(x))),
    }
}

/// Per-quadrature-point state shared by all formulations.
struct QpState {
    geo: QpGeometry,
    basis: StressBasis,
    b: [[f64; HEX_DOF]; 6],
}

/// Evaluates geometry, kinematics, and the B-operator at every quadrature
/// point; rejects states with non-positive `det F`. Also returns the element
/// reference volume.
fn qp_states(coords: &[[f64; 3]; 8], u: &[f64; HEX_DOF]) -> Result<(Vec<QpState>, f64)> {
    let mut states = Vec::with_capacity(8);
    let mut ve = 0.0;
    for qp in gauss_2x2x2() {
        let geo = qp_geometry(coords, &qp)?;
        let f = def_grad(u, &geo.grad_n);
        let (c, _, _) = strain_measures(&f)?;
        let basis = StressBasis::new(&c)?;
        let b = b_operator(&f, &geo.grad_n);
        ve += geo.dv;
        states.push(QpState { geo, basis, b });
    }
    Ok((states, ve))
}

fn h1_static<M: Material + ?Sized>(
    model: &M,
    coords: &[[f64; 3]; 8],
    u: &[f64; HEX_DOF],
) -> Result<ElementMatrices> {
    let (states, _) = qp_states(coords, u)?;
    let mut em = ElementMatrices::zero();
    for st in &states {
        let resp = model.response(&st.basis.inv)?;
        let s = st.basis.stress(resp.dw);
        add_btsv(&mut em.r, &st.b, &stress_voigt(&s), st.geo.dv);
        let cc = st.basis.tangent(resp.dw, resp.d2w);
        add_btcb(&mut em.k, &st.b, &cc, &st.b, st.geo.dv);
        add_geometric(&mut em.k, &st.geo.grad_n, &s, st.geo.dv);
    }
    Ok(em)
}

/// 7-field element: independent invariant fields and multipliers, constant
/// per element. Condensation recovers the fields as volume averages of the
/// pointwise invariants and the multipliers as energy partials at those
/// averages; the extra tangent block is a rank-3 update through the discrete
/// invariant gradients `gₗ = ∫ Bᵀ aₗ dV`.
fn iiij_static<M: Material + ?Sized>(
    model: &M,
    coords: &[[f64; 3]; 8],
    u: &[f64; HEX_DOF],
) -> Result<(ElementMatrices, MixedInternal)> {
    let (states, ve) = qp_states(coords, u)?;
    let (mut i1e, mut i2e, mut je) = (0.0, 0.0, 0.0);
    for st in &states {
        i1e += st.basis.inv.i1 * st.geo.dv;
        i2e += st.basis.inv.i2 * st.geo.dv;
        je += st.basis.inv.j * st.geo.dv;
    }
    i1e /= ve;
    i2e /= ve;
    je /= ve;
    let resp = model.response(&InvariantTriple::new(i1e, i2e, je))?;
    let lambda = resp.dw;

    let mut em = ElementMatrices::zero();
    let mut g = [[0.0; HEX_DOF]; 3];
    for st in &states {
        let s = st.basis.stress(lambda);
        add_btsv(&mut em.r, &st.b, &stress_voigt(&s), st.geo.dv);
        // Multipliers are frozen at the quadrature level; their variation
        // enters through the element-average coupling block below.
        let cc = st.basis.tangent(lambda, [[0.0; 3]; 3]);
        add_btcb(&mut em.k, &st.b, &cc, &st.b, st.geo.dv);
        add_geometric(&mut em.k, &st.geo.grad_n, &s, st.geo.dv);
        for l in 0..3 {
            add_btsv(&mut g[l], &st.b, &st.basis.a[l].v, st.geo.dv);
        }
    }
    for k in 0..3 {
        for l in 0..3 {
            if resp.d2w[k][l] != 0.0 {
                add_outer24(&mut em.k, &g[k], &g[l], resp.d2w[k][l] / ve);
            }
        }
    }
    let internal = MixedInternal::Iiij {
        i1: i1e,
        i2: i2e,
        j: je,
        lambda,
    };
    Ok((em, internal))
}

/// 5-field element: independent cofactor and volume fields with tensor and
/// scalar multipliers, constant per element. The energy keeps the pointwise
/// first invariant but reads the second invariant from `tr Ḡ` and the volume
/// ratio from `J̄`; isotropy collapses the tensor multiplier to a multiple of
/// the identity.
fn gj_static<M: Material + ?Sized>(
    model: &M,
    coords: &[[f64; 3]; 8],
    u: &[f64; HEX_DOF],
) -> Result<(ElementMatrices, MixedInternal)> {
    let (states, ve) = qp_states(coords, u)?;
    let mut ge = Tensor3::zero();
    let mut je = 0.0;
    for st in &states {
        ge = ge + st.basis.g * st.geo.dv;
        je += st.basis.inv.j * st.geo.dv;
    }
    ge = ge * (1.0 / ve);
    je /= ve;
    let i2e = ge.trace();

    let mut lam_g = 0.0;
    let mut lam_j = 0.0;
    // Volume averages of (∂₂₂W, ∂₂₃W, ∂₃₃W).
    let mut avg = [0.0f64; 3];
    let mut resps = Vec::with_capacity(states.len());
    for st in &states {
        let resp = model.response(&InvariantTriple::new(st.basis.inv.i1, i2e, je))?;
        lam_g += resp.dw[1] * st.geo.dv;
        lam_j += resp.dw[2] * st.geo.dv;
        avg[0] += resp.d2w[1][1] * st.geo.dv;
        avg[1] += resp.d2w[1][2] * st.geo.dv;
        avg[2] += resp.d2w[2][2] * st.geo.dv;
        resps.push(resp);
    }
    lam_g /= ve;
    lam_j /= ve;
    for a in &mut avg {
        *a /= ve;
    }

    let mut em = ElementMatrices::zero();
    let mut g2 = [0.0; HEX_DOF];
    let mut g3 = [0.0; HEX_DOF];
    // Cross couplings of the local first invariant with the element fields:
    // w1l = ∫ ∂₁ₗW Bᵀ a₁ dV.
    let mut w12 = [0.0; HEX_DOF];
    let mut w13 = [0.0; HEX_DOF];
    for (st, resp) in states.iter().zip(&resps) {
        let dwq = [resp.dw[0], lam_g, lam_j];
        let s = st.basis.stress(dwq);
        add_btsv(&mut em.r, &st.b, &stress_voigt(&s), st.geo.dv);
        let mut d2loc = [[0.0; 3]; 3];
        d2loc[0][0] = resp.d2w[0][0];
        let cc = st.basis.tangent(dwq, d2loc);
        add_btcb(&mut em.k, &st.b, &cc, &st.b, st.geo.dv);
        add_geometric(&mut em.k, &st.geo.grad_n, &s, st.geo.dv);
        add_btsv(&mut g2, &st.b, &st.basis.a[1].v, st.geo.dv);
        add_btsv(&mut g3, &st.b, &st.basis.a[2].v, st.geo.dv);
        add_btsv(&mut w12, &st.b, &st.basis.a[0].v, resp.d2w[0][1] * st.geo.dv);
        add_btsv(&mut w13, &st.b, &st.basis.a[0].v, resp.d2w[0][2] * st.geo.dv);
    }
    add_outer24(&mut em.k, &w12, &g2, 1.0 / ve);
    add_outer24(&mut em.k, &g2, &w12, 1.0 / ve);
    add_outer24(&mut em.k, &w13, &g3, 1.0 / ve);
    add_outer24(&mut em.k, &g3, &w13, 1.0 / ve);
    add_outer24(&mut em.k, &g2, &g2, avg[0] / ve);
    add_outer24(&mut em.k, &g2, &g3, avg[1] / ve);
    add_outer24(&mut em.k, &g3, &g2, avg[1] / ve);
    add_outer24(&mut em.k, &g3, &g3, avg[2] / ve);
    let internal = MixedInternal::Gj {
        g: ge,
        j: je,
        lambda_g: Tensor3::identity() * lam_g,
        lambda_j: lam_j,
    };
    Ok((em, internal))
}

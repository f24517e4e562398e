//! Conservation audits (kinetic/internal energy, angular momentum, external
//! work) and finite-difference verification harnesses.

use rayon::prelude::*;

use crate::calibration::{gen_loadcase, loss_gradient, sobolev_loss, LoadCase};
use crate::dynamics::IntegratorKind;
use crate::element::{
    element_dynamic, element_mass, element_static, gauss_2x2x2, gauss_3x3x3, qp_geometry,
    Formulation, QuadraturePoint, HEX_DOF,
};
use crate::error::Result;
use crate::kinematics::{invariants, strain_measures};
use crate::material::{Material, MrModel, MrParams, PannModel, PannParams};
use crate::scene::Mesh;

/// Balance record of one completed time step.
#[derive(Debug, Clone)]
pub struct StepAudit {
    /// End-of-step time (s).
    pub t: f64,
    /// Kinetic energy `½ vᵀM v` (J).
    pub kinetic: f64,
    /// Internal (strain) energy (J).
    pub pi_int: f64,
    /// Total energy, stored as the exact sum `kinetic + pi_int`.
    pub total: f64,
    /// Consistent-mass angular momentum about the origin (kg·m²/s).
    pub j_ang: [f64; 3],
    /// External work done over the step (J).
    pub dw_ext: f64,
    /// `ΔT + ΔΠ_int − ΔW_ext` over the step (J).
    pub energy_residual: f64,
    /// `ΔJ_ang − Δt·M_ext` over the step (kg·m²/s).
    pub momentum_residual: [f64; 3],
}

impl StepAudit {
    /// Audit of an initial state: no step has been taken, so all increments
    /// vanish by definition.
    pub fn initial(t: f64, kinetic: f64, pi_int: f64, j_ang: [f64; 3]) -> Self {
        Self {
            t,
            kinetic,
            pi_int,
            total: kinetic + pi_int,
            j_ang,
            dw_ext: 0.0,
            energy_residual: 0.0,
            momentum_residual: [0.0; 3],
        }
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn element_energy<M: Material + ?Sized>(
    model: &M,
    coords: &[[f64; 3]; 8],
    ue: &[f64; HEX_DOF],
    rule: &[QuadraturePoint],
) -> Result<f64> {
    let mut pi = 0.0;
    for qp in rule {
        let geo = qp_geometry(coords, qp)?;
        let f = crate::element::def_grad(ue, &geo.grad_n);
        let (c, _, _) = strain_measures(&f)?;
        let inv = invariants(&c)?;
        pi += model.response(&inv)?.w * geo.dv;
    }
    Ok(pi)
}

fn audit_with_rule<M: Material + ?Sized>(
    mesh: &Mesh,
    model: &M,
    rho0: f64,
    u: &[f64],
    v: &[f64],
    rule: &[QuadraturePoint],
) -> Result<(f64, f64, [f64; 3])> {
    let per_element = (0..mesh.hexes.len())
        .into_par_iter()
        .map(|e| -> Result<(f64, f64, [f64; 3])> {
            let coords = mesh.element_coords(e);
            let ue = mesh.gather(e, u);
            let ve = mesh.gather(e, v);
            let pi = element_energy(model, &coords, &ue, rule).map_err(|err| err.with_element(e))?;
            let m = element_mass(&coords, rho0).map_err(|err| err.with_element(e))?;
            let mut t2 = 0.0;
            let mut j = [0.0; 3];
            for a in 0..8 {
                let phi = [
                    coords[a][0] + ue[3 * a],
                    coords[a][1] + ue[3 * a + 1],
                    coords[a][2] + ue[3 * a + 2],
                ];
                for b in 0..8 {
                    // Scalar node-pair mass; all three directions share it.
                    let mab = m[3 * a][3 * b];
                    if mab == 0.0 {
                        continue;
                    }
                    let vb = [ve[3 * b], ve[3 * b + 1], ve[3 * b + 2]];
                    let va = [ve[3 * a], ve[3 * a + 1], ve[3 * a + 2]];
                    t2 += mab * (va[0] * vb[0] + va[1] * vb[1] + va[2] * vb[2]);
                    let c = cross(phi, [mab * vb[0], mab * vb[1], mab * vb[2]]);
                    for i in 0..3 {
                        j[i] += c[i];
                    }
                }
            }
            Ok((0.5 * t2, pi, j))
        })
        .collect::<Result<Vec<_>>>()?;
    // Sequential reduction in element order keeps the result independent of
    // the thread count.
    let mut kinetic = 0.0;
    let mut pi_int = 0.0;
    let mut j_ang = [0.0; 3];
    for (t, pi, j) in per_element {
        kinetic += t;
        pi_int += pi;
        for i in 0..3 {
            j_ang[i] += j[i];
        }
    }
    Ok((kinetic, pi_int, j_ang))
}

/// Kinetic energy, internal energy, and consistent-mass angular momentum of
/// a nodal state, using the same quadrature as the residual.
pub fn audit_quantities<M: Material + ?Sized>(
    mesh: &Mesh,
    model: &M,
    rho0: f64,
    u: &[f64],
    v: &[f64],
) -> Result<(f64, f64, [f64; 3])> {
    audit_with_rule(mesh, model, rho0, u, v, &gauss_2x2x2())
}

/// Internal energy evaluated with a 3×3×3 rule; oracle for the production
/// quadrature.
pub fn internal_energy_refined<M: Material + ?Sized>(
    mesh: &Mesh,
    model: &M,
    u: &[f64],
) -> Result<f64> {
    let v = vec![0.0; u.len()];
    let (_, pi, _) = audit_with_rule(mesh, model, 0.0, u, &v, &gauss_3x3x3())?;
    Ok(pi)
}

/// Consistent-mass linear momentum `Σ M v` (kg·m/s).
pub fn linear_momentum(mesh: &Mesh, rho0: f64, v: &[f64]) -> Result<[f64; 3]> {
    let mut p = [0.0; 3];
    for e in 0..mesh.hexes.len() {
        let coords = mesh.element_coords(e);
        let ve = mesh.gather(e, v);
        let m = element_mass(&coords, rho0).map_err(|err| err.with_element(e))?;
        for a in 0..8 {
            for b in 0..8 {
                let mab = m[3 * a][3 * b];
                for i in 0..3 {
                    p[i] += mab * ve[3 * b + i];
                }
            }
        }
    }
    Ok(p)
}

/// Derivative families the verification harness can exercise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdTarget {
    /// Material first and second invariant derivatives.
    Material,
    /// Static element tangents of all three formulations.
    ElementStatic,
    /// Dynamic element tangents of both integrators.
    ElementDynamic,
    /// Calibration loss gradient.
    LossGradient,
}

impl FdTarget {
    pub fn name(self) -> &'static str {
        match self {
            FdTarget::Material => "material",
            FdTarget::ElementStatic => "element_static",
            FdTarget::ElementDynamic => "element_dynamic",
            FdTarget::LossGradient => "loss_gradient",
        }
    }
}

/// Outcome of one finite-difference comparison.
#[derive(Debug, Clone)]
pub struct FdReport {
    pub target: String,
    /// Largest entry deviation, relative to the dominant derivative scale.
    pub max_rel_err: f64,
    /// Flat index of the worst entry.
    pub worst_index: usize,
}

/// Central-difference step for an abscissa of size `x`.
fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

/// Max deviation between analytic and differenced entries, normalized by the
/// dominant scale of the analytic set (floored at 1 to keep zero-dominated
/// comparisons absolute).
fn compare_sets(analytic: &[f64], differenced: &[f64]) -> (f64, usize) {
    let scale = analytic
        .iter()
        .fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let mut worst = (0.0, 0);
    for (i, (&a, &d)) in analytic.iter().zip(differenced).enumerate() {
        let err = (a - d).abs() / scale;
        if err > worst.0 {
            worst = (err, i);
        }
    }
    worst
}

fn merge(report: &mut (f64, usize), candidate: (f64, usize), offset: usize) {
    if candidate.0 > report.0 {
        *report = (candidate.0, candidate.1 + offset);
    }
}

/// Deterministic mildly deformed single-hex fixture shared by the element
/// harnesses.
fn fd_fixture() -> ([[f64; 3]; 8], [f64; HEX_DOF], [f64; HEX_DOF], [f64; HEX_DOF]) {
    let mut coords = crate::element::HEX_CORNERS.map(|c| [0.5 * c[0], 0.5 * c[1], 0.5 * c[2]]);
    for (a, x) in coords.iter_mut().enumerate() {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += 0.04 * ((3 * a + i) as f64 * 1.7).sin();
        }
    }
    let mut u_n = [0.0; HEX_DOF];
    let mut u_n1 = [0.0; HEX_DOF];
    let mut v_n = [0.0; HEX_DOF];
    for p in 0..HEX_DOF {
        u_n[p] = 0.05 * (p as f64 * 0.9).sin();
        u_n1[p] = u_n[p] + 0.03 * (p as f64 * 1.3).cos();
        v_n[p] = 0.2 * (p as f64 * 0.4).sin();
    }
    (coords, u_n, u_n1, v_n)
}

fn fd_material(models: &[&dyn Material]) -> Result<(f64, usize)> {
    // Invariant triples of mildly deformed SPD states.
    let states = [
        [3.05, 3.12, 1.03],
        [3.4, 3.3, 0.95],
        [2.9, 2.95, 1.1],
        [3.8, 3.5, 1.2],
    ];
    let mut worst = (0.0, 0);
    let mut offset = 0;
    for model in models {
        for base in states {
            let mut analytic = Vec::new();
            let mut differenced = Vec::new();
            let resp = model.response(&crate::kinematics::InvariantTriple::new(
                base[0], base[1], base[2],
            ))?;
            for k in 0..3 {
                let h = fd_step(base[k]);
                let mut hi = base;
                let mut lo = base;
                hi[k] += h;
                lo[k] -= h;
                let rh = model.response(&crate::kinematics::InvariantTriple::new(
                    hi[0], hi[1], hi[2],
                ))?;
                let rl = model.response(&crate::kinematics::InvariantTriple::new(
                    lo[0], lo[1], lo[2],
                ))?;
                analytic.push(resp.dw[k]);
                differenced.push((rh.w - rl.w) / (2.0 * h));
                for l in 0..3 {
                    analytic.push(resp.d2w[l][k]);
                    differenced.push((rh.dw[l] - rl.dw[l]) / (2.0 * h));
                }
            }
            merge(&mut worst, compare_sets(&analytic, &differenced), offset);
            offset += analytic.len();
        }
    }
    Ok(worst)
}

fn fd_element_static(models: &[&dyn Material]) -> Result<(f64, usize)> {
    let (coords, _, u, _) = fd_fixture();
    let mut worst = (0.0, 0);
    let mut offset = 0;
    for model in models {
        for formulation in [Formulation::H1, Formulation::GjH1H0, Formulation::IiijH1H0] {
            let (em, _) = element_static(*model, formulation, &coords, &u)?;
            let mut analytic = Vec::with_capacity(HEX_DOF * HEX_DOF);
            let mut differenced = Vec::with_capacity(HEX_DOF * HEX_DOF);
            for q in 0..HEX_DOF {
                let h = fd_step(u[q]);
                let mut hi = u;
                let mut lo = u;
                hi[q] += h;
                lo[q] -= h;
                let (rh, _) = element_static(*model, formulation, &coords, &hi)?;
                let (rl, _) = element_static(*model, formulation, &coords, &lo)?;
                for p in 0..HEX_DOF {
                    analytic.push(em.k[p][q]);
                    differenced.push((rh.r[p] - rl.r[p]) / (2.0 * h));
                }
            }
            merge(&mut worst, compare_sets(&analytic, &differenced), offset);
            offset += analytic.len();
        }
    }
    Ok(worst)
}

fn fd_element_dynamic(models: &[&dyn Material]) -> Result<(f64, usize)> {
    let (coords, u_n, u_n1, v_n) = fd_fixture();
    let dt = 0.05;
    let rho0 = 100.0;
    let mut worst = (0.0, 0);
    let mut offset = 0;
    for model in models {
        for integrator in [IntegratorKind::Ems, IntegratorKind::Midpoint] {
            let em = element_dynamic(*model, integrator, &coords, &u_n, &u_n1, &v_n, dt, rho0)?;
            let mut analytic = Vec::with_capacity(HEX_DOF * HEX_DOF);
            let mut differenced = Vec::with_capacity(HEX_DOF * HEX_DOF);
            for q in 0..HEX_DOF {
                let h = fd_step(u_n1[q]);
                let mut hi = u_n1;
                let mut lo = u_n1;
                hi[q] += h;
                lo[q] -= h;
                let rh = element_dynamic(*model, integrator, &coords, &u_n, &hi, &v_n, dt, rho0)?;
                let rl = element_dynamic(*model, integrator, &coords, &u_n, &lo, &v_n, dt, rho0)?;
                for p in 0..HEX_DOF {
                    analytic.push(em.k[p][q]);
                    differenced.push((rh.r[p] - rl.r[p]) / (2.0 * h));
                }
            }
            merge(&mut worst, compare_sets(&analytic, &differenced), offset);
            offset += analytic.len();
        }
    }
    Ok(worst)
}

fn fd_loss_gradient() -> Result<(f64, usize)> {
    let gt = MrModel::new(MrParams::compressible_reference());
    let data = gen_loadcase(&gt, LoadCase::Uniaxial, 8)?;
    let params = PannParams::new(
        vec![[1.0, 0.5, 0.3, 0.2], [0.2, 0.1, 0.4, 0.3]],
        vec![0.1, -0.2],
        vec![50.0, 80.0],
    )?;
    let grad = loss_gradient(&params, &data)?;
    let n = params.width();
    let mut analytic = Vec::new();
    let mut differenced = Vec::new();
    let mut probe = |an: f64, mutate: &dyn Fn(&mut PannParams, f64)| -> Result<()> {
        let h = 1e-5;
        let mut hi = params.clone();
        let mut lo = params.clone();
        mutate(&mut hi, h);
        mutate(&mut lo, -h);
        analytic.push(an);
        differenced.push((sobolev_loss(&hi, &data)? - sobolev_loss(&lo, &data)?) / (2.0 * h));
        Ok(())
    };
    for i in 0..n {
        for j in 0..4 {
            probe(grad.w1[i][j], &|p, h| p.w1[i][j] += h)?;
        }
        probe(grad.b[i], &|p, h| p.b[i] += h)?;
        probe(grad.w2[i], &|p, h| p.w2[i] += h)?;
    }
    Ok(compare_sets(&analytic, &differenced))
}

/// Runs the finite-difference comparison for one derivative family over
/// fixed deterministic states and both reference materials.
pub fn fd_check(target: FdTarget) -> Result<FdReport> {
    let mr = MrModel::new(MrParams::compressible_reference());
    let pann = PannModel::build(PannParams::new(
        vec![[1.0, 0.5, 0.3, 0.2], [0.2, 0.1, 0.4, 0.3]],
        vec![0.1, -0.2],
        vec![50.0, 80.0],
    )?)?;
    let models: [&dyn Material; 2] = [&mr, &pann];
    let (max_rel_err, worst_index) = match target {
        FdTarget::Material => fd_material(&models)?,
        FdTarget::ElementStatic => fd_element_static(&models)?,
        FdTarget::ElementDynamic => fd_element_dynamic(&models)?,
        FdTarget::LossGradient => fd_loss_gradient()?,
    };
    Ok(FdReport {
        target: target.name().to_string(),
        max_rel_err,
        worst_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{box_mesh, free_box_scene};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn mr() -> MrModel {
        MrModel::new(MrParams::compressible_reference())
    }

    #[test]
    fn rest_state_audits_to_zero() {
        let mesh = box_mesh([2, 2, 2], [1.0; 3]).unwrap();
        let u = vec![0.0; mesh.n_dofs()];
        let v = vec![0.0; mesh.n_dofs()];
        let (t, pi, j) = audit_quantities(&mesh, &mr(), 100.0, &u, &v).unwrap();
        assert_eq!(t, 0.0);
        assert_abs_diff_eq!(pi, 0.0, epsilon = 1e-10);
        assert_eq!(j, [0.0; 3]);
    }

    #[test]
    fn rigid_translation_carries_half_rho_v_squared() {
        let mesh = box_mesh([2, 2, 2], [1.0; 3]).unwrap();
        let rho0 = 137.0;
        let vel = [0.3, -0.2, 0.7];
        let u = vec![0.0; mesh.n_dofs()];
        let mut v = vec![0.0; mesh.n_dofs()];
        for a in 0..mesh.n_nodes() {
            for i in 0..3 {
                v[3 * a + i] = vel[i];
            }
        }
        let (t, _, _) = audit_quantities(&mesh, &mr(), rho0, &u, &v).unwrap();
        let speed2 = vel.iter().map(|x| x * x).sum::<f64>();
        assert_relative_eq!(t, 0.5 * rho0 * 1.0 * speed2, max_relative = 1e-12);
        // Linear momentum of a rigid translation is ρ0 V v.
        let p = linear_momentum(&mesh, rho0, &v).unwrap();
        for i in 0..3 {
            assert_relative_eq!(p[i], rho0 * vel[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn rigid_rotation_angular_momentum_matches_inertia_oracle() {
        // Spin about the z-axis through the box center: v = ω × (x − c).
        let mesh = box_mesh([3, 3, 3], [1.0; 3]).unwrap();
        let rho0 = 50.0;
        let omega = 0.8;
        let u = vec![0.0; mesh.n_dofs()];
        let mut v = vec![0.0; mesh.n_dofs()];
        for (a, x) in mesh.nodes.iter().enumerate() {
            v[3 * a] = -omega * (x[1] - 0.5);
            v[3 * a + 1] = omega * (x[0] - 0.5);
        }
        let (_, _, j) = audit_quantities(&mesh, &mr(), rho0, &u, &v).unwrap();
        // About the origin, J_z = I_zz^center ω + (c × p)_z with p = 0 only
        // when the reference point is the center; the velocity field has no
        // net linear momentum (it is a pure spin), so the parallel-axis
        // shift vanishes and J_z = ρ0 V (a² + b²)/12 ω for the unit cube.
        let izz = rho0 * (1.0 + 1.0) / 12.0;
        // Consistent-mass nodal angular momentum of an interpolated spin
        // carries a small quadrature-consistent offset per element; compare
        // against the directly assembled nodal oracle instead of the
        // continuum value.
        let mut oracle = [0.0; 3];
        for e in 0..mesh.hexes.len() {
            let coords = mesh.element_coords(e);
            let ve = mesh.gather(e, &v);
            let m = element_mass(&coords, rho0).unwrap();
            for a in 0..8 {
                for b in 0..8 {
                    let mab = m[3 * a][3 * b];
                    let c = cross(
                        coords[a],
                        [mab * ve[3 * b], mab * ve[3 * b + 1], mab * ve[3 * b + 2]],
                    );
                    for i in 0..3 {
                        oracle[i] += c[i];
                    }
                }
            }
        }
        for i in 0..3 {
            assert_abs_diff_eq!(j[i], oracle[i], epsilon = 1e-12);
        }
        // The continuum value is approached by the mesh; at 3³ elements the
        // nodal interpolation of the spin is exact (linear velocity field),
        // so the match is tight.
        assert_relative_eq!(j[2], izz * omega, max_relative = 1e-10);
        assert_abs_diff_eq!(j[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(j[1], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn internal_energy_matches_refined_quadrature() {
        let scene = free_box_scene([2, 2, 1], [1.0, 0.8, 0.6], 100.0).unwrap();
        let mesh = &scene.mesh;
        let model = mr();
        let mut u = vec![0.0; mesh.n_dofs()];
        for (a, x) in mesh.nodes.iter().enumerate() {
            // Smooth non-affine deformation.
            u[3 * a] = 0.08 * (x[1] * 2.0).sin() + 0.05 * x[0] * x[0];
            u[3 * a + 1] = -0.06 * x[0] * x[2];
            u[3 * a + 2] = 0.07 * (x[0] + x[1]).cos() - 0.07;
        }
        let v = vec![0.0; mesh.n_dofs()];
        let (_, pi, _) = audit_quantities(mesh, &model, 0.0, &u, &v).unwrap();
        let refined = internal_energy_refined(mesh, &model, &u).unwrap();
        assert!(pi != 0.0);
        assert_relative_eq!(pi, refined, max_relative = 1e-3);
    }

    #[test]
    fn fd_targets_pass_their_thresholds() {
        for (target, bound) in [
            (FdTarget::Material, 1e-5),
            (FdTarget::ElementStatic, 1e-5),
            (FdTarget::ElementDynamic, 1e-5),
            (FdTarget::LossGradient, 1e-5),
        ] {
            let report = fd_check(target).unwrap();
            assert!(
                report.max_rel_err <= bound,
                "{}: {:.3e} at {}",
                report.target,
                report.max_rel_err,
                report.worst_index
            );
            assert_eq!(report.target, target.name());
        }
    }

    #[test]
    fn harness_detects_a_one_percent_tangent_mutation() {
        // Reproduce the element-static comparison but corrupt one analytic
        // entry by 1%; the harness must flag it above 1e-3.
        let (coords, _, u, _) = fd_fixture();
        let model = mr();
        let (mut em, _) = element_static(&model, Formulation::H1, &coords, &u).unwrap();
        em.k[5][7] *= 1.01;
        let mut analytic = Vec::new();
        let mut differenced = Vec::new();
        for q in 0..HEX_DOF {
            let h = fd_step(u[q]);
            let mut hi = u;
            let mut lo = u;
            hi[q] += h;
            lo[q] -= h;
            let (rh, _) = element_static(&model, Formulation::H1, &coords, &hi).unwrap();
            let (rl, _) = element_static(&model, Formulation::H1, &coords, &lo).unwrap();
            for p in 0..HEX_DOF {
                analytic.push(em.k[p][q]);
                differenced.push((rh.r[p] - rl.r[p]) / (2.0 * h));
            }
        }
        let (err, worst) = compare_sets(&analytic, &differenced);
        // The corrupted entry sits at column-major flat index q·24 + p.
        assert!(err > 1e-3, "mutation missed: {err:.3e}");
        assert_eq!(worst, 7 * HEX_DOF + 5);
    }
}

//! Time discretization built on partitioned Greenspan discrete gradients: the
//! algorithmic PK2 stress whose directionality property yields exact
//! semi-discrete energy balance, the classical midpoint stress for
//! comparison, and the one-step update with condensed velocities.

use crate::diagnostics::{audit_quantities, StepAudit};
use crate::element::element_dynamic;
use crate::error::{Error, Result};
use crate::kinematics::{algo_kinematics, invariants, InvariantTriple};
use crate::material::Material;
use crate::scene::{AmplitudeFn, Mesh, Scene};
use crate::solver::{assemble, external_force_at, external_force_components, newton, DofMap, NewtonConfig};
use crate::tensor::{cross, Tensor3};

/// Partitioned discrete derivatives of the stored energy with respect to the
/// invariant triple, satisfying
/// `dI1·ΔI1 + dI2·ΔI2 + dJ·ΔJ = W(inv_{n+1}) − W(inv_n)` exactly.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteGradients {
    pub di1: f64,
    pub di2: f64,
    pub dj: f64,
}

/// Nodal state of a transient simulation at one time level.
#[derive(Debug, Clone)]
pub struct DynamicState {
    /// Time (s).
    pub t: f64,
    /// Nodal displacements (m), length `3 × node count`.
    pub u: Vec<f64>,
    /// Nodal velocities (m/s), same length as `u`.
    pub v: Vec<f64>,
    /// Cumulative external work (J) fed in through midpoint loads.
    pub w_ext_cum: f64,
}

impl DynamicState {
    /// Rest state at `t = 0` for `n_nodes` nodes.
    pub fn rest(n_nodes: usize) -> Self {
        Self {
            t: 0.0,
            u: vec![0.0; 3 * n_nodes],
            v: vec![0.0; 3 * n_nodes],
            w_ext_cum: 0.0,
        }
    }
}

/// The two one-step schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorKind {
    /// Energy-momentum scheme from the partitioned discrete gradients.
    Ems,
    /// Classical implicit midpoint rule.
    Midpoint,
}

/// Relative threshold below which an invariant increment counts as degenerate
/// and its component falls back to the midpoint partial derivative. The very
/// first Newton iteration of a step (Δu = 0, all increments zero) always
/// takes the fallback branch.
const DEGENERATE_INCREMENT: f64 = 1e-10;

fn is_degenerate(delta: f64, a: f64, b: f64) -> bool {
    delta.abs() < DEGENERATE_INCREMENT * a.abs().max(b.abs()).max(1.0)
}

/// Greenspan discrete gradients together with their derivatives with respect
/// to the end-point invariants (rows: dI1, dI2, dJ; columns: ∂/∂I1_{n+1},
/// ∂/∂I2_{n+1}, ∂/∂J_{n+1}), as needed by the consistent tangent. The
/// fallback branch is differentiated consistently with the same threshold.
pub(crate) fn greenspan_dg_full<M: Material + ?Sized>(
    model: &M,
    inv_n: &InvariantTriple,
    inv_n1: &InvariantTriple,
) -> Result<(DiscreteGradients, [[f64; 3]; 3])> {
    let (x1, x2, x3) = (inv_n.i1, inv_n.i2, inv_n.j);
    let (y1, y2, y3) = (inv_n1.i1, inv_n1.i2, inv_n1.j);
    if x3 <= 0.0 || y3 <= 0.0 {
        return Err(Error::NonPositiveJacobian {
            det: x3.min(y3),
            element: None,
        });
    }
    let eval = |i1: f64, i2: f64, j: f64| model.response(&InvariantTriple::new(i1, i2, j));
    // Corner energies shared by the three quotients, labeled by which of the
    // three arguments sit at the (n+1) level.
    let e000 = eval(x1, x2, x3)?;
    let e100 = eval(y1, x2, x3)?;
    let e110 = eval(y1, y2, x3)?;
    let e111 = eval(y1, y2, y3)?;
    let e011 = eval(x1, y2, y3)?;
    let e001 = eval(x1, x2, y3)?;
    let mid = eval(0.5 * (x1 + y1), 0.5 * (x2 + y2), 0.5 * (x3 + y3))?;

    let (d1, d2, d3) = (y1 - x1, y2 - x2, y3 - x3);
    let mut dg = DiscreteGradients {
        di1: 0.0,
        di2: 0.0,
        dj: 0.0,
    };
    let mut der = [[0.0; 3]; 3];

    if is_degenerate(d1, x1, y1) {
        dg.di1 = mid.dw[0];
        for l in 0..3 {
            der[0][l] = 0.5 * mid.d2w[0][l];
        }
    } else {
        dg.di1 = 0.5 * (e100.w - e000.w + e111.w - e011.w) / d1;
        der[0][0] = (0.5 * (e100.dw[0] + e111.dw[0]) - dg.di1) / d1;
        der[0][1] = 0.5 * (e111.dw[1] - e011.dw[1]) / d1;
        der[0][2] = 0.5 * (e111.dw[2] - e011.dw[2]) / d1;
    }
    if is_degenerate(d2, x2, y2) {
        dg.di2 = mid.dw[1];
        for l in 0..3 {
            der[1][l] = 0.5 * mid.d2w[1][l];
        }
    } else {
        dg.di2 = 0.5 * (e110.w - e100.w + e011.w - e001.w) / d2;
        der[1][0] = 0.5 * (e110.dw[0] - e100.dw[0]) / d2;
        der[1][1] = (0.5 * (e110.dw[1] + e011.dw[1]) - dg.di2) / d2;
        der[1][2] = 0.5 * (e011.dw[2] - e001.dw[2]) / d2;
    }
    if is_degenerate(d3, x3, y3) {
        dg.dj = mid.dw[2];
        for l in 0..3 {
            der[2][l] = 0.5 * mid.d2w[2][l];
        }
    } else {
        dg.dj = 0.5 * (e111.w - e110.w + e001.w - e000.w) / d3;
        der[2][0] = 0.5 * (e111.dw[0] - e110.dw[0]) / d3;
        der[2][1] = 0.5 * (e111.dw[1] - e110.dw[1]) / d3;
        der[2][2] = (0.5 * (e111.dw[2] + e001.dw[2]) - dg.dj) / d3;
    }
    Ok((dg, der))
}

/// Partitioned Greenspan discrete gradients of the stored energy between two
/// invariant states. Each component is a two-path average of energy
/// differences over its own increment; increments below the degeneracy
/// threshold fall back to the midpoint partial derivative component-wise.
pub fn greenspan_dg<M: Material + ?Sized>(
    model: &M,
    inv_n: &InvariantTriple,
    inv_n1: &InvariantTriple,
) -> Result<DiscreteGradients> {
    Ok(greenspan_dg_full(model, inv_n, inv_n1)?.0)
}

/// Algorithmic PK2 stress between two metric states:
/// `S_algo = 2(dI1·I + dI2·(I∧C_a) + ½ dJ·J_a⁻¹ G_a)` with the algorithmic
/// kinematics, so that `S_algo : ½ΔC = W(inv_{n+1}) − W(inv_n)` exactly.
pub fn algo_stress<M: Material + ?Sized>(
    model: &M,
    c_n: &Tensor3,
    c_n1: &Tensor3,
) -> Result<Tensor3> {
    let inv_n = invariants(c_n)?;
    let inv_n1 = invariants(c_n1)?;
    let dg = greenspan_dg(model, &inv_n, &inv_n1)?;
    let ak = algo_kinematics(c_n, c_n1)?;
    let iwc = cross(Tensor3::identity(), ak.c_algo);
    Ok(Tensor3::identity() * (2.0 * dg.di1)
        + iwc * (2.0 * dg.di2)
        + ak.g_algo * (dg.dj / ak.j_algo))
}

/// Midpoint PK2 stress: the ordinary stress evaluated on the metric of the
/// midpoint deformation gradient, `pk2(model, F_½ᵀ F_½)`.
pub fn midpoint_stress<M: Material + ?Sized>(model: &M, f_half: &Tensor3) -> Result<Tensor3> {
    let (c, _, _) = crate::kinematics::strain_measures(f_half)?;
    crate::material::pk2(model, &c)
}

/// Everything a time step needs besides the evolving state: discretized
/// scene, material, scheme, and Newton controls.
pub struct TransientContext<'a, M: Material + ?Sized> {
    pub mesh: &'a Mesh,
    pub rho0: f64,
    pub model: &'a M,
    pub integrator: IntegratorKind,
    pub dof: &'a DofMap,
    pub components: &'a [(AmplitudeFn, Vec<f64>)],
    pub newton: NewtonConfig,
}

impl<M: Material + ?Sized> TransientContext<'_, M> {
    /// Solves the one-step equations for a step of size `dt_solve` from
    /// `state`, starting Newton from `guess` (or from the velocity
    /// predictor `u_n + Δt·v_n`, which cancels the inertia residual
    /// exactly). Returns the free-dof solution vector.
    fn solve_step(
        &self,
        state: &DynamicState,
        dt_solve: f64,
        guess: Option<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let f_ext = external_force_at(
            self.components,
            state.t + 0.5 * dt_solve,
            self.dof.n_dofs,
        );
        let x0 = guess.unwrap_or_else(|| {
            let mut predictor = state.u.clone();
            for (p, &vn) in predictor.iter_mut().zip(&state.v) {
                *p += dt_solve * vn;
            }
            self.dof.restrict(&predictor)
        });
        let (x, _) = newton(
            |x_free| {
                let u_n1 = self.dof.full_vector(x_free, 1.0);
                let sys = assemble(self.mesh, self.dof, &u_n1, |e, coords, ue| {
                    let un = self.mesh.gather(e, &state.u);
                    let vn = self.mesh.gather(e, &state.v);
                    element_dynamic(
                        self.model,
                        self.integrator,
                        coords,
                        &un,
                        ue,
                        &vn,
                        dt_solve,
                        self.rho0,
                    )
                    .map(|em| (em, None))
                })?;
                let mut r = sys.residual_free;
                for g in 0..self.dof.n_dofs {
                    if let Some(f) = self.dof.free[g] {
                        r[f] -= f_ext[g];
                    }
                }
                Ok((r, sys.jacobian))
            },
            x0,
            &self.newton,
        )?;
        Ok(x)
    }

    /// Advances one step of size `dt` from `state`, given the audit
    /// quantities `(T, Π_int, J_ang)` of `state`, and returns the new state
    /// with its balance audit.
    ///
    /// Loads are evaluated at the midpoint time; prescribed dofs are held at
    /// their nominal values with zero velocity. The velocity update
    /// `v_{n+1} = (2/Δt)Δu − v_n` makes the midpoint velocity equal `Δu/Δt`
    /// exactly, which is what transfers the element-level directionality
    /// identity into the global energy balance.
    pub fn step(
        &self,
        state: &DynamicState,
        prev: (f64, f64, [f64; 3]),
        dt: f64,
    ) -> Result<(DynamicState, StepAudit)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::DegenerateTimeStep {
                detail: format!("time step must be positive and finite, got {dt}"),
            });
        }
        let t_half = state.t + 0.5 * dt;
        let f_ext = external_force_at(self.components, t_half, self.dof.n_dofs);

        // An inverted configuration reached from a converged admissible
        // state is a solver overshoot, not a data error; treat it like any
        // other divergence.
        let diverged = |e: &Error| {
            matches!(
                e,
                Error::NewtonDiverged { .. } | Error::NonPositiveJacobian { .. }
            )
        };
        let x = match self.solve_step(state, dt, None) {
            Ok(x) => x,
            Err(e) if diverged(&e) => {
                // Large rotations per step can put the full-step solution
                // outside Newton's reach from any extrapolated guess. Walk
                // the guess toward it by solving the same step equations at
                // growing step fractions; the final solve is still the
                // unmodified full step.
                let mut guess = None;
                for frac in [0.125, 0.25, 0.5, 1.0] {
                    match self.solve_step(state, frac * dt, guess) {
                        Ok(x) => guess = Some(x),
                        Err(e) if diverged(&e) => {
                            let residual = match &e {
                                Error::NewtonDiverged { residual, .. } => *residual,
                                _ => f64::INFINITY,
                            };
                            return Err(Error::NewtonDiverged {
                                max_iter: self.newton.max_iter,
                                residual,
                                step: None,
                            });
                        }
                        Err(e) => return Err(e),
                    }
                }
                guess.expect("ladder is non-empty")
            }
            Err(e) => return Err(e),
        };

        let u_n1 = self.dof.full_vector(&x, 1.0);
        let mut v_n1 = vec![0.0; self.dof.n_dofs];
        let mut dw_ext = 0.0;
        let mut m_ext = [0.0; 3];
        for g in 0..self.dof.n_dofs {
            let du = u_n1[g] - state.u[g];
            if self.dof.free[g].is_some() {
                v_n1[g] = 2.0 * du / dt - state.v[g];
            }
            dw_ext += f_ext[g] * du;
        }
        for (a, xa) in self.mesh.nodes.iter().enumerate() {
            let phi_half = [
                xa[0] + 0.5 * (state.u[3 * a] + u_n1[3 * a]),
                xa[1] + 0.5 * (state.u[3 * a + 1] + u_n1[3 * a + 1]),
                xa[2] + 0.5 * (state.u[3 * a + 2] + u_n1[3 * a + 2]),
            ];
            let fa = [f_ext[3 * a], f_ext[3 * a + 1], f_ext[3 * a + 2]];
            m_ext[0] += phi_half[1] * fa[2] - phi_half[2] * fa[1];
            m_ext[1] += phi_half[2] * fa[0] - phi_half[0] * fa[2];
            m_ext[2] += phi_half[0] * fa[1] - phi_half[1] * fa[0];
        }

        let (kinetic, pi_int, j_ang) =
            audit_quantities(self.mesh, self.model, self.rho0, &u_n1, &v_n1)?;
        let audit = StepAudit {
            t: state.t + dt,
            kinetic,
            pi_int,
            total: kinetic + pi_int,
            j_ang,
            dw_ext,
            energy_residual: (kinetic + pi_int) - (prev.0 + prev.1) - dw_ext,
            momentum_residual: [
                j_ang[0] - prev.2[0] - dt * m_ext[0],
                j_ang[1] - prev.2[1] - dt * m_ext[1],
                j_ang[2] - prev.2[2] - dt * m_ext[2],
            ],
        };
        let next = DynamicState {
            t: state.t + dt,
            u: u_n1,
            v: v_n1,
            w_ext_cum: state.w_ext_cum + dw_ext,
        };
        Ok((next, audit))
    }
}

/// A completed (or aborted) transient simulation.
pub struct TransientRun {
    /// Balance audits, one row per completed step plus the initial state.
    pub audits: Vec<StepAudit>,
    /// States, aligned with `audits`.
    pub states: Vec<DynamicState>,
    /// Set when Newton failed mid-run (the blow-up path); audits cover the
    /// completed steps only.
    pub aborted: Option<Error>,
}

/// Runs constant-step time integration from rest (or `initial`) to `t_end`.
/// `t_end` must be an integer multiple of `dt`.
pub fn transient_driver<M: Material + ?Sized>(
    scene: &Scene,
    model: &M,
    integrator: IntegratorKind,
    dt: f64,
    t_end: f64,
    newton: &NewtonConfig,
    initial: Option<DynamicState>,
) -> Result<TransientRun> {
    if !(dt > 0.0 && dt.is_finite() && t_end > 0.0) {
        return Err(Error::DegenerateTimeStep {
            detail: format!("need positive dt and t_end, got dt {dt}, t_end {t_end}"),
        });
    }
    let n_steps = (t_end / dt).round();
    if n_steps < 1.0 || (n_steps * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(Error::ConfigInvalid {
            detail: format!("t_end {t_end} is not an integer multiple of dt {dt}"),
        });
    }
    scene.validate()?;
    let dof = DofMap::new(scene.mesh.n_nodes(), &scene.dirichlet)?;
    let components = external_force_components(scene)?;
    let ctx = TransientContext {
        mesh: &scene.mesh,
        rho0: scene.rho0,
        model,
        integrator,
        dof: &dof,
        components: &components,
        newton: *newton,
    };
    let mut state = initial.unwrap_or_else(|| DynamicState::rest(scene.mesh.n_nodes()));
    let (t0, pi0, j0) = audit_quantities(&scene.mesh, model, scene.rho0, &state.u, &state.v)?;
    let mut audits = vec![StepAudit::initial(state.t, t0, pi0, j0)];
    let mut states = vec![state.clone()];
    let mut prev = (t0, pi0, j0);
    let mut aborted = None;
    for s in 1..=(n_steps as usize) {
        match ctx.step(&state, prev, dt) {
            Ok((next, audit)) => {
                prev = (audit.kinetic, audit.pi_int, audit.j_ang);
                audits.push(audit);
                states.push(next.clone());
                state = next;
            }
            Err(err @ Error::NewtonDiverged { .. }) => {
                aborted = Some(err.with_step(s));
                break;
            }
            Err(err) => return Err(err.with_step(s)),
        }
    }
    Ok(TransientRun {
        audits,
        states,
        aborted,
    })
}

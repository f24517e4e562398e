//! Global sparse assembly, Newton iteration with a direct unsymmetric LU
//! solve, and the static load-stepping driver.

use faer::prelude::SpSolver;
use faer::sparse::SparseColMat;
use rayon::prelude::*;

use crate::element::{
    element_mass, element_static, gauss_2x2x2, qp_geometry, surface_load, ElementMatrices,
    Formulation, MixedInternal, HEX_DOF,
};
use crate::error::{Error, Result};
use crate::material::Material;
use crate::scene::{Mesh, Scene};

/// Ensures linear-algebra kernels run single-threaded; parallelism lives at
/// the element loop, and run-to-run determinism is required. Called by every
/// solver entry point; cheap and idempotent.
pub fn pin_linear_algebra_threads() {
    faer::set_global_parallelism(faer::Parallelism::None);
}

/// Node-dof numbering with the Dirichlet mask and prescribed values.
#[derive(Debug, Clone)]
pub struct DofMap {
    /// Total dof count (3 per node).
    pub n_dofs: usize,
    /// Free index per global dof; `None` for prescribed dofs.
    pub free: Vec<Option<usize>>,
    pub n_free: usize,
    /// Prescribed value per global dof at unit boundary amplitude (zero on
    /// free dofs).
    pub prescribed: Vec<f64>,
}

impl DofMap {
    pub fn new(n_nodes: usize, dirichlet: &[(usize, usize, f64)]) -> Result<Self> {
        let n_dofs = 3 * n_nodes;
        let mut is_fixed = vec![false; n_dofs];
        let mut prescribed = vec![0.0; n_dofs];
        for &(node, dir, value) in dirichlet {
            if node >= n_nodes || dir >= 3 {
                return Err(Error::ConfigInvalid {
                    detail: format!("constraint ({node}, {dir}) out of range"),
                });
            }
            let g = 3 * node + dir;
            if is_fixed[g] && prescribed[g] != value {
                return Err(Error::ConfigInvalid {
                    detail: format!(
                        "conflicting values {} and {value} prescribed on node {node} dof {dir}",
                        prescribed[g]
                    ),
                });
            }
            is_fixed[g] = true;
            prescribed[g] = value;
        }
        let mut free = vec![None; n_dofs];
        let mut n_free = 0;
        for g in 0..n_dofs {
            if !is_fixed[g] {
                free[g] = Some(n_free);
                n_free += 1;
            }
        }
        Ok(Self {
            n_dofs,
            free,
            n_free,
            prescribed,
        })
    }

    /// Full dof vector from free unknowns, with prescribed entries set to
    /// `bc_scale` times their nominal values.
    pub fn full_vector(&self, x_free: &[f64], bc_scale: f64) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs];
        for g in 0..self.n_dofs {
            match self.free[g] {
                Some(f) => full[g] = x_free[f],
                None => full[g] = bc_scale * self.prescribed[g],
            }
        }
        full
    }

    /// Restriction of a full dof vector to the free dofs.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_free];
        for g in 0..self.n_dofs {
            if let Some(f) = self.free[g] {
                out[f] = full[g];
            }
        }
        out
    }
}

/// Assembled residual and tangent of one global state.
pub struct GlobalSystem {
    /// Internal force vector on all dofs (N); reactions live on the
    /// prescribed entries.
    pub residual_full: Vec<f64>,
    /// Residual restricted to the free dofs.
    pub residual_free: Vec<f64>,
    /// Tangent on the free dofs.
    pub jacobian: SparseColMat<usize, f64>,
    /// Condensed element fields, where the formulation provides them.
    pub internals: Vec<Option<MixedInternal>>,
}

/// Evaluates all elements in parallel and scatter-adds them in fixed element
/// order (bit-deterministic for any thread count). The evaluator receives
/// the element index, its reference coordinates, and its gathered
/// displacement vector.
pub fn assemble<F>(mesh: &Mesh, dof: &DofMap, u_full: &[f64], eval: F) -> Result<GlobalSystem>
where
    F: Fn(usize, &[[f64; 3]; 8], &[f64; HEX_DOF]) -> Result<(ElementMatrices, Option<MixedInternal>)>
        + Sync,
{
    let per_element = mesh
        .hexes
        .par_iter()
        .enumerate()
        .map(|(e, _)| {
            let coords = mesh.element_coords(e);
            let ue = mesh.gather(e, u_full);
            eval(e, &coords, &ue).map_err(|err| err.with_element(e))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut residual_full = vec![0.0; dof.n_dofs];
    let mut internals = Vec::with_capacity(per_element.len());
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for (e, (em, internal)) in per_element.into_iter().enumerate() {
        let hex = &mesh.hexes[e];
        let mut gdof = [0usize; HEX_DOF];
        for (p, g) in gdof.iter_mut().enumerate() {
            *g = 3 * hex[p / 3] + p % 3;
        }
        for p in 0..HEX_DOF {
            residual_full[gdof[p]] += em.r[p];
        }
        for p in 0..HEX_DOF {
            if let Some(fp) = dof.free[gdof[p]] {
                for q in 0..HEX_DOF {
                    if let Some(fq) = dof.free[gdof[q]] {
                        let v = em.k[p][q];
                        if v != 0.0 {
                            triplets.push((fp, fq, v));
                        }
                    }
                }
            }
        }
        internals.push(internal);
    }
    if residual_full.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix {
            detail: "assembled residual contains non-finite entries".to_string(),
        });
    }
    let jacobian = SparseColMat::try_new_from_triplets(dof.n_free, dof.n_free, &triplets)
        .map_err(|e| Error::ConfigInvalid {
            detail: format!("sparse assembly failed: {e:?}"),
        })?;
    let residual_free = dof.restrict(&residual_full);
    Ok(GlobalSystem {
        residual_full,
        residual_free,
        jacobian,
        internals,
    })
}

/// Reference external force vectors, one per load, each at unit amplitude,
/// plus the body-force vector as a final constant component.
pub fn external_force_components(scene: &Scene) -> Result<Vec<(crate::scene::AmplitudeFn, Vec<f64>)>> {
    let mesh = &scene.mesh;
    let mut components = Vec::new();
    for load in &scene.neumann {
        let mut f = vec![0.0; mesh.n_dofs()];
        for &(e, face) in &load.faces {
            let coords = mesh.face_coords(e, face);
            let nodal = surface_load(&coords, load.traction, 1.0).map_err(|err| err.with_element(e))?;
            for (slot, &node) in mesh.face_nodes(e, face).iter().enumerate() {
                for i in 0..3 {
                    f[3 * node + i] += nodal[3 * slot + i];
                }
            }
        }
        components.push((load.amplitude, f));
    }
    if scene.body_force.iter().any(|&b| b != 0.0) {
        let mut f = vec![0.0; mesh.n_dofs()];
        for e in 0..mesh.hexes.len() {
            let coords = mesh.element_coords(e);
            for qp in gauss_2x2x2() {
                let geo = qp_geometry(&coords, &qp).map_err(|err| err.with_element(e))?;
                for (a, &node) in mesh.hexes[e].iter().enumerate() {
                    for i in 0..3 {
                        f[3 * node + i] += geo.n[a] * scene.body_force[i] * geo.dv;
                    }
                }
            }
        }
        components.push((crate::scene::AmplitudeFn::Constant(1.0), f));
    }
    Ok(components)
}

/// External force at time `t`: the amplitude-weighted sum of the reference
/// components.
pub fn external_force_at(components: &[(crate::scene::AmplitudeFn, Vec<f64>)], t: f64, n_dofs: usize) -> Vec<f64> {
    let mut f = vec![0.0; n_dofs];
    for (amplitude, reference) in components {
        let a = amplitude.eval(t);
        if a != 0.0 {
            for (fi, &ri) in f.iter_mut().zip(reference) {
                *fi += a * ri;
            }
        }
    }
    f
}

/// Sum of all reference components at unit amplitude (static loading, where
/// the driver applies its own ramp).
pub fn external_force_reference(components: &[(crate::scene::AmplitudeFn, Vec<f64>)], n_dofs: usize) -> Vec<f64> {
    let mut f = vec![0.0; n_dofs];
    for (_, reference) in components {
        for (fi, &ri) in f.iter_mut().zip(reference) {
            *fi += ri;
        }
    }
    f
}

/// Newton-iteration controls. The convergence threshold is
/// `max(tol_rel · ‖r₀‖, abs_floor)` in the Euclidean norm.
#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    pub tol_rel: f64,
    pub abs_floor: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol_rel: 1e-8,
            abs_floor: 1e-10,
            max_iter: 20,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_rel > 0.0 && self.abs_floor > 0.0) || self.max_iter == 0 {
            return Err(Error::ConfigInvalid {
                detail: format!(
                    "Newton controls must be positive: tol_rel {}, abs_floor {}, max_iter {}",
                    self.tol_rel, self.abs_floor, self.max_iter
                ),
            });
        }
        Ok(())
    }
}

/// Convergence record of one Newton solve.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    /// Linear solves performed.
    pub iterations: usize,
    /// Residual norms, starting with the initial guess.
    pub residual_history: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton iteration on `r(x) = 0` with a sparse LU linear solve. The system
/// function returns the residual and the Jacobian at an iterate.
pub fn newton<F>(mut system: F, x0: Vec<f64>, cfg: &NewtonConfig) -> Result<(Vec<f64>, NewtonReport)>
where
    F: FnMut(&[f64]) -> Result<(Vec<f64>, SparseColMat<usize, f64>)>,
{
    cfg.validate()?;
    pin_linear_algebra_threads();
    let mut x = x0;
    let (mut r, mut jac) = system(&x)?;
    let mut history = vec![norm2(&r)];
    let threshold = (cfg.tol_rel * history[0]).max(cfg.abs_floor);
    for iteration in 0..=cfg.max_iter {
        let rnorm = *history.last().expect("non-empty");
        if !rnorm.is_finite() {
            return Err(Error::NewtonDiverged {
                max_iter: cfg.max_iter,
                residual: rnorm,
                step: None,
            });
        }
        if rnorm <= threshold {
            return Ok((
                x,
                NewtonReport {
                    iterations: iteration,
                    residual_history: history,
                },
            ));
        }
        if iteration == cfg.max_iter {
            break;
        }
        let lu = jac.sp_lu().map_err(|e| Error::SingularMatrix {
            detail: format!("sparse LU factorization failed: {e:?}"),
        })?;
        let rhs = faer::col::Col::<f64>::from_fn(r.len(), |i| -r[i]);
        let dx = lu.solve(rhs);
        // Damped update: the Newton direction of an exact tangent descends
        // ‖r‖, so halve the step until the residual actually drops (and
        // until the configuration is admissible — an inverted state is not
        // evaluable). Near the solution the full step always passes, keeping
        // the quadratic tail.
        let mut alpha = 1.0;
        if std::env::var_os("PANFEM_NEWTON_TRACE").is_some() {
            let dx_max = (0..r.len()).map(|i| dx.read(i).abs()).fold(0.0, f64::max);
            eprintln!("trace iter {iteration}: |r| {rnorm:.3e} |dx|_inf {dx_max:.3e}");
        }
        let mut best: Option<(f64, Vec<f64>, Vec<f64>, SparseColMat<usize, f64>)> = None;
        loop {
            let trial: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, &xi)| xi + alpha * dx.read(i))
                .collect();
            match system(&trial) {
                Ok((rt, jt)) => {
                    let nt = norm2(&rt);
                    let sufficient = nt <= (1.0 - 1e-4 * alpha) * rnorm;
                    if sufficient || best.as_ref().is_some_and(|b| b.0 <= nt) {
                        let (nb, xb, rb, jb) = if sufficient {
                            (nt, trial, rt, jt)
                        } else {
                            best.take().expect("checked")
                        };
                        x = xb;
                        r = rb;
                        jac = jb;
                        history.push(nb);
                        break;
                    }
                    best = Some((nt, trial, rt, jt));
                }
                // An inverted trial is simply too far; shorten like any
                // other rejected step.
                Err(Error::NonPositiveJacobian { .. }) => {}
                Err(e) => return Err(e),
            }
            if alpha <= 1.0 / 4096.0 {
                // No admissible trial at all: give the floor step to the
                // divergence check instead of erroring out of the solve.
                match best.take() {
                    Some((nb, xb, rb, jb)) => {
                        x = xb;
                        r = rb;
                        jac = jb;
                        history.push(nb);
                        break;
                    }
                    None => {
                        return Err(Error::NewtonDiverged {
                            max_iter: cfg.max_iter,
                            residual: rnorm,
                            step: None,
                        })
                    }
                }
            }
            alpha *= 0.5;
        }
    }
    Err(Error::NewtonDiverged {
        max_iter: cfg.max_iter,
        residual: *history.last().expect("non-empty"),
        step: None,
    })
}

/// Linear ramp of the load (and prescribed-boundary) amplitude over
/// `n_steps` equal increments from 0 to 1.
#[derive(Debug, Clone, Copy)]
pub struct LoadSchedule {
    pub n_steps: usize,
}

impl Default for LoadSchedule {
    fn default() -> Self {
        Self { n_steps: 10 }
    }
}

/// Converged state of one load step.
#[derive(Debug, Clone)]
pub struct StaticStep {
    pub load_factor: f64,
    /// Full displacement vector (prescribed dofs included).
    pub u_full: Vec<f64>,
    pub iterations: usize,
    pub residual_history: Vec<f64>,
}

/// Static solution by incremental loading: for step `s`, amplitude
/// `s/n_steps` scales both the external loads and the prescribed boundary
/// values. Newton starts from a secant extrapolation of the two previous
/// converged states (plain warm start for the first step or when the
/// extrapolated state fails), and a still-failing step is retried once
/// through an intermediate half step.
pub fn static_driver<M: Material + ?Sized>(
    scene: &Scene,
    model: &M,
    formulation: Formulation,
    schedule: &LoadSchedule,
    cfg: &NewtonConfig,
) -> Result<Vec<StaticStep>> {
    if schedule.n_steps == 0 {
        return Err(Error::ConfigInvalid {
            detail: "load schedule needs at least one step".to_string(),
        });
    }
    scene.validate()?;
    let dof = DofMap::new(scene.mesh.n_nodes(), &scene.dirichlet)?;
    let components = external_force_components(scene)?;
    let f_ref = external_force_reference(&components, dof.n_dofs);

    let solve_at = |factor: f64, x0: Vec<f64>| -> Result<(Vec<f64>, NewtonReport)> {
        newton(
            |x_free| {
                let u_full = dof.full_vector(x_free, factor);
                let sys = assemble(&scene.mesh, &dof, &u_full, |_, coords, ue| {
                    element_static(model, formulation, coords, ue)
                })?;
                let mut r = sys.residual_free;
                for g in 0..dof.n_dofs {
                    if let Some(f) = dof.free[g] {
                        r[f] -= factor * f_ref[g];
                    }
                }
                Ok((r, sys.jacobian))
            },
            x0,
            cfg,
        )
    };

    let mut steps = Vec::with_capacity(schedule.n_steps);
    let mut x = vec![0.0; dof.n_free];
    let mut x_prev: Option<Vec<f64>> = None;
    for s in 1..=schedule.n_steps {
        let factor = s as f64 / schedule.n_steps as f64;
        // Secant predictor: extrapolating the last two converged states one
        // increment forward usually lands inside the Newton basin even for
        // stiff (nearly incompressible) responses, where a plain warm start
        // leaves the full load increment to the corrector.
        let predicted = x_prev
            .as_ref()
            .map(|xp| {
                x.iter()
                    .zip(xp)
                    .map(|(a, b)| 2.0 * a - b)
                    .collect::<Vec<f64>>()
            })
            .and_then(|x0| solve_at(factor, x0).ok());
        let solved = match predicted {
            Some(ok) => ok,
            None => match solve_at(factor, x.clone()) {
                Ok(ok) => ok,
                Err(Error::NewtonDiverged { .. }) => {
                    // One bisection: converge an intermediate amplitude first,
                    // then retry the target from there.
                    let prev = (s - 1) as f64 / schedule.n_steps as f64;
                    let mid = 0.5 * (prev + factor);
                    let (x_mid, _) = solve_at(mid, x.clone()).map_err(|e| e.with_step(s))?;
                    solve_at(factor, x_mid).map_err(|e| e.with_step(s))?
                }
                Err(e) => return Err(e.with_step(s)),
            },
        };
        x_prev = Some(std::mem::replace(&mut x, solved.0));
        steps.push(StaticStep {
            load_factor: factor,
            u_full: dof.full_vector(&x, factor),
            iterations: solved.1.iterations,
            residual_history: solved.1.residual_history,
        });
    }
    Ok(steps)
}

/// Displacement of a named probe node.
pub fn probe_displacement(scene: &Scene, u_full: &[f64], name: &str) -> Option<[f64; 3]> {
    let &node = scene.probes.get(name)?;
    Some([u_full[3 * node], u_full[3 * node + 1], u_full[3 * node + 2]])
}

/// Consistent global mass matrix restricted to the free dofs, plus its full
/// triplet form for momentum audits.
pub fn assemble_mass(mesh: &Mesh, dof: &DofMap, rho0: f64) -> Result<SparseColMat<usize, f64>> {
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for e in 0..mesh.hexes.len() {
        let coords = mesh.element_coords(e);
        let m = element_mass(&coords, rho0).map_err(|err| err.with_element(e))?;
        let hex = &mesh.hexes[e];
        for p in 0..HEX_DOF {
            let gp = 3 * hex[p / 3] + p % 3;
            if let Some(fp) = dof.free[gp] {
                for q in 0..HEX_DOF {
                    let gq = 3 * hex[q / 3] + q % 3;
                    if let Some(fq) = dof.free[gq] {
                        if m[p][q] != 0.0 {
                            triplets.push((fp, fq, m[p][q]));
                        }
                    }
                }
            }
        }
    }
    SparseColMat::try_new_from_triplets(dof.n_free, dof.n_free, &triplets).map_err(|e| {
        Error::ConfigInvalid {
            detail: format!("mass assembly failed: {e:?}"),
        }
    })
}

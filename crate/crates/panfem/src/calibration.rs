//! Synthetic strain-stress data generation from a ground-truth constitutive
//! model and full-batch ADAM calibration of the neural model.
//!
//! Data generation reproduces classical material tests: uniaxial and
//! equibiaxial stress states (lateral stretches solved so the lateral stress
//! vanishes), kinematic simple shear, and a mixed shear-tension path used as
//! an extrapolation test set.
//!
//! Training minimizes a mean-squared stress error with a closed-form gradient
//! through the model (including the recomputed stress-normalization term) and
//! projects `w1`, `w2` back onto the non-negative cone after every step. The
//! optimizer internally works in an affinely preconditioned parameter space —
//! inputs centered and scaled by calibration-set statistics, output scaled by
//! the stress RMS — but all parameters entering or leaving this module are in
//! plain model space.

use crate::error::{Error, Result};
use crate::kinematics::{generators, invariants, InvariantQuad};
use crate::material::{material_tangent, pk2, sigmoid, Material, PannModel, PannParams};
use crate::tensor::Tensor3;
use rayon::prelude::*;
use std::str::FromStr;

/// One observation: a right-Cauchy-Green tensor and the second
/// Piola-Kirchhoff stress (Pa) measured at it.
#[derive(Debug, Clone, Copy)]
pub struct StrainStressSample {
    pub c: Tensor3,
    pub s: Tensor3,
}

/// Whether a dataset is meant for calibration or held-out testing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetLabel {
    Calibration,
    Test,
}

/// An ordered, non-empty collection of strain-stress samples.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<StrainStressSample>,
    pub label: DatasetLabel,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Appends the samples of `other`, keeping `self`'s label.
    pub fn merge(mut self, other: Dataset) -> Dataset {
        self.samples.extend(other.samples);
        self
    }
}

/// The four supported loading programs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadCase {
    /// `F = diag(F11, λ, λ)` with `λ` solved so `S22 = S33 = 0`,
    /// `F11 ∈ [0.75, 1.75]`.
    Uniaxial,
    /// `F = diag(s, s, λ)` with `λ` solved so `S33 = 0`, `s ∈ [0.75, 1.755]`.
    Equibiaxial,
    /// `F = I + γ e1⊗e2`, `γ ∈ [-0.25, 0.75]`; purely kinematic.
    SimpleShear,
    /// Shear combined with axial tension, lateral stretches solved so
    /// `S22 = S33 = 0`, `γ ∈ [0, 0.75]`; used as the test set.
    Mixed,
}

impl FromStr for LoadCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniaxial" => Ok(LoadCase::Uniaxial),
            "equibiaxial" => Ok(LoadCase::Equibiaxial),
            "simple_shear" | "simple-shear" => Ok(LoadCase::SimpleShear),
            "mixed" => Ok(LoadCase::Mixed),
            other => Err(Error::ConfigInvalid {
                detail: format!(
                    "unknown load case `{other}` (expected uniaxial, equibiaxial, simple_shear, or mixed)"
                ),
            }),
        }
    }
}

impl std::fmt::Display for LoadCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LoadCase::Uniaxial => "uniaxial",
            LoadCase::Equibiaxial => "equibiaxial",
            LoadCase::SimpleShear => "simple_shear",
            LoadCase::Mixed => "mixed",
        };
        f.write_str(name)
    }
}

/// ADAM hyperparameters for full-batch training.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Seed for the weight initialization.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 5000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 42,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        let unit = |x: f64| x > 0.0 && x < 1.0;
        if !unit(self.learning_rate) || !unit(self.beta1) || !unit(self.beta2) || !unit(self.eps) {
            return Err(Error::ConfigInvalid {
                detail: "learning_rate, beta1, beta2, and eps must lie in (0, 1)".into(),
            });
        }
        Ok(())
    }
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(move |i| a + step * i as f64)
}

/// Generates `n_points` samples of one loading program from a ground-truth
/// model. Lateral-stretch solves use Newton with a bisection safeguard and
/// continuation (each point starts from the previous solution).
pub fn gen_loadcase<M: Material + ?Sized>(
    gt: &M,
    case: LoadCase,
    n_points: usize,
) -> Result<Dataset> {
    if n_points < 2 {
        return Err(Error::ConfigInvalid {
            detail: format!("load case needs at least 2 points, got {n_points}"),
        });
    }
    let samples = match case {
        LoadCase::Uniaxial => uniaxial_samples(gt, n_points)?,
        LoadCase::Equibiaxial => equibiaxial_samples(gt, n_points)?,
        LoadCase::SimpleShear => shear_samples(gt, n_points)?,
        LoadCase::Mixed => mixed_samples(gt, n_points)?,
    };
    let label = if case == LoadCase::Mixed {
        DatasetLabel::Test
    } else {
        DatasetLabel::Calibration
    };
    Ok(Dataset { samples, label })
}

/// The standard calibration set: uniaxial + equibiaxial + simple shear with
/// `points_per_case` samples each.
pub fn calibration_set<M: Material + ?Sized>(gt: &M, points_per_case: usize) -> Result<Dataset> {
    let d = gen_loadcase(gt, LoadCase::Uniaxial, points_per_case)?;
    let d = d.merge(gen_loadcase(gt, LoadCase::Equibiaxial, points_per_case)?);
    Ok(d.merge(gen_loadcase(gt, LoadCase::SimpleShear, points_per_case)?))
}

/// Convergence target for the lateral stress: `|S_lat| ≤ 1e-10 ‖S‖ + 1e-12`.
fn lateral_tol(s: &Tensor3) -> f64 {
    1e-10 * s.norm() + 1e-12
}

fn uniaxial_samples<M: Material + ?Sized>(gt: &M, n: usize) -> Result<Vec<StrainStressSample>> {
    let mut out = Vec::with_capacity(n);
    let mut lat = 1.0;
    for f11 in linspace(0.75, 1.75, n) {
        let c_of = |l: f64| Tensor3::diag(f11 * f11, l * l, l * l);
        // ½ dC/dλ in strain-Voigt components.
        let dc_of = |l: f64| [0.0, l, l, 0.0, 0.0, 0.0];
        lat = solve_lateral_scalar(gt, "uniaxial", f11, lat, c_of, dc_of, 1)?;
        let c = c_of(lat);
        let s = pk2(gt, &c)?;
        let tol = lateral_tol(&s);
        if s.0[1][1].abs() > tol || s.0[2][2].abs() > tol {
            return Err(Error::RootFindFailure {
                path: "uniaxial".into(),
                parameter: f11,
                reason: format!(
                    "converged stretch leaves lateral stress {:.3e}/{:.3e} above tolerance {tol:.3e}",
                    s.0[1][1], s.0[2][2]
                ),
            });
        }
        out.push(StrainStressSample { c, s });
    }
    Ok(out)
}

fn equibiaxial_samples<M: Material + ?Sized>(gt: &M, n: usize) -> Result<Vec<StrainStressSample>> {
    let mut out = Vec::with_capacity(n);
    let mut lat = 1.0;
    for f11 in linspace(0.75, 1.755, n) {
        let c_of = |l: f64| Tensor3::diag(f11 * f11, f11 * f11, l * l);
        let dc_of = |l: f64| [0.0, 0.0, l, 0.0, 0.0, 0.0];
        lat = solve_lateral_scalar(gt, "equibiaxial", f11, lat, c_of, dc_of, 2)?;
        let c = c_of(lat);
        let s = pk2(gt, &c)?;
        out.push(StrainStressSample { c, s });
    }
    Ok(out)
}

fn shear_samples<M: Material + ?Sized>(gt: &M, n: usize) -> Result<Vec<StrainStressSample>> {
    let mut out = Vec::with_capacity(n);
    for g in linspace(-0.25, 0.75, n) {
        let mut f = Tensor3::identity();
        f.0[0][1] = g;
        let c = f.transpose() * f;
        let s = pk2(gt, &c)?;
        out.push(StrainStressSample { c, s });
    }
    Ok(out)
}

fn mixed_samples<M: Material + ?Sized>(gt: &M, n: usize) -> Result<Vec<StrainStressSample>> {
    let mut out = Vec::with_capacity(n);
    let (mut l2, mut l3) = (1.0, 1.0);
    for g in linspace(0.0, 0.75, n) {
        (l2, l3) = solve_lateral_mixed(gt, g, (l2, l3))?;
        let c = mixed_c(g, l2, l3);
        let s = pk2(gt, &c)?;
        out.push(StrainStressSample { c, s });
    }
    Ok(out)
}

/// `C = FᵀF` for `F = (1+γ) e1⊗e1 + γ e1⊗e2 + λ2 e2⊗e2 + λ3 e3⊗e3`.
fn mixed_c(g: f64, l2: f64, l3: f64) -> Tensor3 {
    let a = 1.0 + g;
    Tensor3([
        [a * a, a * g, 0.0],
        [a * g, g * g + l2 * l2, 0.0],
        [0.0, 0.0, l3 * l3],
    ])
}

/// Scalar Newton with a bisection safeguard on one lateral stretch. `res` is
/// the diagonal index (1 for `S22`, 2 for `S33`) that must vanish.
fn solve_lateral_scalar<M, CF, DF>(
    gt: &M,
    path: &str,
    parameter: f64,
    guess: f64,
    c_of: CF,
    dhalf_c: DF,
    res: usize,
) -> Result<f64>
where
    M: Material + ?Sized,
    CF: Fn(f64) -> Tensor3,
    DF: Fn(f64) -> [f64; 6],
{
    let mut lam = guess;
    let mut below: Option<f64> = None; // stretch with negative residual
    let mut above: Option<f64> = None;
    let mut residual = f64::NAN;
    for _ in 0..100 {
        let c = c_of(lam);
        let s = pk2(gt, &c)?;
        residual = s.0[res][res];
        if residual.abs() <= lateral_tol(&s) {
            return Ok(lam);
        }
        if residual < 0.0 {
            below = Some(lam);
        } else {
            above = Some(lam);
        }
        let slope = material_tangent(gt, &c)?.matvec(&dhalf_c(lam))[res];
        let mut next = lam - residual / slope;
        // Fall back to bisection whenever Newton proposes a non-physical or
        // out-of-bracket stretch.
        let inside_bracket = match (below, above) {
            (Some(a), Some(b)) => next > a.min(b) && next < a.max(b),
            _ => true,
        };
        if !next.is_finite() || next <= 0.05 * lam || !inside_bracket {
            next = match (below, above) {
                (Some(a), Some(b)) => 0.5 * (a + b),
                // No bracket yet: step geometrically against the residual sign
                // (lateral stress grows with lateral stretch).
                _ => {
                    if residual > 0.0 {
                        lam * 0.8
                    } else {
                        lam * 1.25
                    }
                }
            };
        }
        lam = next;
    }
    Err(Error::RootFindFailure {
        path: path.into(),
        parameter,
        reason: format!("no convergence in 100 iterations (last residual {residual:.3e})"),
    })
}

/// Two-unknown Newton for the mixed path: `(λ2, λ3)` such that
/// `S22 = S33 = 0`.
fn solve_lateral_mixed<M: Material + ?Sized>(
    gt: &M,
    gamma: f64,
    guess: (f64, f64),
) -> Result<(f64, f64)> {
    let (mut l2, mut l3) = guess;
    let mut residual = f64::NAN;
    for _ in 0..100 {
        let c = mixed_c(gamma, l2, l3);
        let s = pk2(gt, &c)?;
        let (r2, r3) = (s.0[1][1], s.0[2][2]);
        let tol = lateral_tol(&s);
        if r2.abs() <= tol && r3.abs() <= tol {
            return Ok((l2, l3));
        }
        residual = r2.hypot(r3);
        let cc = material_tangent(gt, &c)?;
        let d2 = cc.matvec(&[0.0, l2, 0.0, 0.0, 0.0, 0.0]);
        let d3 = cc.matvec(&[0.0, 0.0, l3, 0.0, 0.0, 0.0]);
        let det = d2[1] * d3[2] - d3[1] * d2[2];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::RootFindFailure {
                path: "mixed".into(),
                parameter: gamma,
                reason: "singular 2x2 Jacobian in the lateral solve".into(),
            });
        }
        let s2 = -(d3[2] * r2 - d3[1] * r3) / det;
        let s3 = -(-d2[2] * r2 + d2[1] * r3) / det;
        // Keep the stretches in a physical range; full Newton steps are fine
        // along the continuation path, this only guards stray proposals.
        l2 = (l2 + s2).clamp(0.25 * l2, 4.0 * l2);
        l3 = (l3 + s3).clamp(0.25 * l3, 4.0 * l3);
    }
    Err(Error::RootFindFailure {
        path: "mixed".into(),
        parameter: gamma,
        reason: format!("no convergence in 100 iterations (last residual {residual:.3e})"),
    })
}

/// Mean squared stress error `(1/(9 Pa²)) (1/m) Σ ‖Sᵢ − Ŝ(Cᵢ)‖²_F` of the
/// fully normalized model built from `p` (the normalization is recomputed on
/// every call so its dependence on the parameters is part of the loss).
pub fn sobolev_loss(p: &PannParams, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::ConfigInvalid {
            detail: "loss evaluation needs a non-empty dataset".into(),
        });
    }
    let model = PannModel::build(p.clone())?;
    let mut sum = 0.0;
    for sample in &data.samples {
        let diff = pk2(&model, &sample.c)? - sample.s;
        sum += diff.ddot(diff);
    }
    Ok(sum / (9.0 * data.len() as f64))
}

/// The loss together with its gradient with respect to every parameter entry.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub w1: Vec<[f64; 4]>,
    pub b: Vec<f64>,
    pub w2: Vec<f64>,
}

impl LossGrad {
    fn zeros(n: usize) -> Self {
        Self {
            loss: 0.0,
            w1: vec![[0.0; 4]; n],
            b: vec![0.0; n],
            w2: vec![0.0; n],
        }
    }

    fn accumulate(&mut self, other: &LossGrad) {
        self.loss += other.loss;
        for (a, o) in self.w1.iter_mut().zip(&other.w1) {
            for j in 0..4 {
                a[j] += o[j];
            }
        }
        for (a, o) in self.b.iter_mut().zip(&other.b) {
            *a += o;
        }
        for (a, o) in self.w2.iter_mut().zip(&other.w2) {
            *a += o;
        }
    }
}

/// Per-sample quantities that do not change between epochs.
#[derive(Debug, Clone)]
struct PreparedSample {
    /// `(I1, I2, J, J*)` of the sample's `C`.
    quad: [f64; 4],
    /// `I ∧ C`.
    iwc: Tensor3,
    /// `J⁻¹ cof C`.
    a3: Tensor3,
    /// Volume-growth stress contribution, independent of the parameters.
    growth_dj: f64,
    s_data: Tensor3,
}

fn prepare(data: &Dataset) -> Result<Vec<PreparedSample>> {
    data.samples
        .iter()
        .map(|sample| {
            let inv = invariants(&sample.c)?;
            let gens = generators(&sample.c)?;
            let (_, dj, _) = crate::material::growth_derivatives(inv.j);
            Ok(PreparedSample {
                quad: InvariantQuad::from(inv).as_array(),
                iwc: gens.gi2,
                a3: gens.gj * 2.0,
                growth_dj: dj,
                s_data: sample.s,
            })
        })
        .collect()
}

/// Reference-state activations shared by the normalization term.
struct ReferenceActivations {
    quad0: [f64; 4],
    kappa0: [f64; 4],
    sig0: Vec<f64>,
    /// `κ0 · w1_a` per unit.
    kw0: Vec<f64>,
    n_frak: f64,
}

impl ReferenceActivations {
    fn new(p: &PannParams) -> Self {
        let quad0 = InvariantQuad::from(crate::kinematics::InvariantTriple::reference()).as_array();
        let kappa0 = [2.0, 4.0, 1.0, -1.0];
        let n = p.width();
        let mut sig0 = Vec::with_capacity(n);
        let mut kw0 = Vec::with_capacity(n);
        let mut n_frak = 0.0;
        for a in 0..n {
            let h: f64 = (0..4).map(|j| p.w1[a][j] * quad0[j]).sum::<f64>() + p.b[a];
            let sg = sigmoid(h);
            let kd: f64 = (0..4).map(|j| kappa0[j] * p.w1[a][j]).sum();
            sig0.push(sg);
            kw0.push(kd);
            n_frak += p.w2[a] * sg * kd;
        }
        Self {
            quad0,
            kappa0,
            sig0,
            kw0,
            n_frak,
        }
    }
}

/// One sample's loss contribution and parameter gradient, plus the weight
/// `c3` that couples the sample to the global normalization term.
fn sample_grad(
    p: &PannParams,
    rf: &ReferenceActivations,
    sample: &PreparedSample,
    inv_9m: f64,
) -> (LossGrad, f64) {
    let n = p.width();
    let mut g = LossGrad::zeros(n);

    let mut sig = vec![0.0; n];
    let mut d = [0.0; 4];
    for a in 0..n {
        let h: f64 = (0..4).map(|j| p.w1[a][j] * sample.quad[j]).sum::<f64>() + p.b[a];
        sig[a] = sigmoid(h);
        for j in 0..4 {
            d[j] += p.w2[a] * sig[a] * p.w1[a][j];
        }
    }
    let dw3 = d[2] - d[3] - rf.n_frak + sample.growth_dj;
    let s_hat =
        Tensor3::identity() * (2.0 * d[0]) + sample.iwc * (2.0 * d[1]) + sample.a3 * dw3;
    let diff = s_hat - sample.s_data;
    g.loss = diff.ddot(diff);

    let t = diff * (2.0 * inv_9m);
    let c1 = 2.0 * t.trace();
    let c2 = 2.0 * t.ddot(sample.iwc);
    let c3 = t.ddot(sample.a3);
    let kappa = [c1, c2, c3, -c3];
    for a in 0..n {
        let kw: f64 = (0..4).map(|j| kappa[j] * p.w1[a][j]).sum();
        let sigp = sig[a] * (1.0 - sig[a]);
        g.w2[a] = sig[a] * kw;
        g.b[a] = p.w2[a] * sigp * kw;
        for l in 0..4 {
            g.w1[a][l] = p.w2[a] * (sigp * sample.quad[l] * kw + sig[a] * kappa[l]);
        }
    }
    (g, c3)
}

/// Closed-form loss gradient over the whole dataset. Matches central finite
/// differences of [`sobolev_loss`] but is exact and fast enough to drive
/// thousands of full-batch epochs.
pub fn loss_gradient(p: &PannParams, data: &Dataset) -> Result<LossGrad> {
    if data.is_empty() {
        return Err(Error::ConfigInvalid {
            detail: "gradient evaluation needs a non-empty dataset".into(),
        });
    }
    p.check_nonnegative()?;
    let prepared = prepare(data)?;
    Ok(loss_gradient_prepared(p, &prepared))
}

fn loss_gradient_prepared(p: &PannParams, prepared: &[PreparedSample]) -> LossGrad {
    let n = p.width();
    let m = prepared.len();
    let inv_9m = 1.0 / (9.0 * m as f64);
    let rf = ReferenceActivations::new(p);

    // Parallel over fixed-size chunks, then a sequential reduction in chunk
    // order so the floating-point result is independent of thread count.
    let partials: Vec<(LossGrad, f64)> = prepared
        .par_chunks(32)
        .map(|chunk| {
            let mut acc = LossGrad::zeros(n);
            let mut c3_sum = 0.0;
            for sample in chunk {
                let (g, c3) = sample_grad(p, &rf, sample, inv_9m);
                acc.accumulate(&g);
                c3_sum += c3;
            }
            (acc, c3_sum)
        })
        .collect();

    let mut total = LossGrad::zeros(n);
    let mut c3_sum = 0.0;
    for (g, c3) in &partials {
        total.accumulate(g);
        c3_sum += c3;
    }
    total.loss *= inv_9m;

    // Every sample's stress carries `−n_frak · a3`; fold the normalization
    // term's own parameter dependence in through the accumulated weight.
    let lam0 = -c3_sum;
    for a in 0..n {
        let sigp0 = rf.sig0[a] * (1.0 - rf.sig0[a]);
        total.w2[a] += lam0 * rf.sig0[a] * rf.kw0[a];
        total.b[a] += lam0 * p.w2[a] * sigp0 * rf.kw0[a];
        for l in 0..4 {
            total.w1[a][l] +=
                lam0 * p.w2[a] * (sigp0 * rf.quad0[l] * rf.kw0[a] + rf.sig0[a] * rf.kappa0[l]);
        }
    }
    total
}

/// Affine input/output conditioning derived from calibration statistics. The
/// optimizer's coordinates `(ŵ1, b̂, ŵ2)` map to model parameters via
/// `w1 = ŵ1 / sd`, `b = b̂ − ŵ1 · (mu / sd)`, `w2 = s_out ŵ2`, which is a
/// positive diagonal scaling plus a shift of the unconstrained bias, so the
/// non-negativity cone is preserved in both directions.
#[derive(Debug, Clone, Copy)]
struct Conditioning {
    mu: [f64; 4],
    sd: [f64; 4],
    s_out: f64,
}

impl Conditioning {
    fn from_dataset(data: &Dataset) -> Result<Self> {
        let m = data.len() as f64;
        let mut quads = Vec::with_capacity(data.len());
        for sample in &data.samples {
            quads.push(InvariantQuad::from(invariants(&sample.c)?).as_array());
        }
        let mut mu = [0.0; 4];
        for q in &quads {
            for j in 0..4 {
                mu[j] += q[j];
            }
        }
        for item in &mut mu {
            *item /= m;
        }
        // Only the polynomial invariants get rescaled; the volumetric columns
        // stay raw so the J-sensitive terms keep their native scale.
        let mut sd = [1.0; 4];
        for j in 0..2 {
            let var: f64 = quads.iter().map(|q| (q[j] - mu[j]).powi(2)).sum::<f64>() / m;
            let s = var.sqrt();
            if s.is_finite() && s > 1e-12 {
                sd[j] = s;
            }
        }
        let ms: f64 = data.samples.iter().map(|s| s.s.ddot(s.s)).sum::<f64>() / (9.0 * m);
        let s_out = if ms.is_finite() && ms > 1e-24 {
            ms.sqrt()
        } else {
            1.0
        };
        Ok(Self { mu, sd, s_out })
    }

    fn fold(&self, hat: &PannParams) -> Result<PannParams> {
        let n = hat.width();
        let mut w1 = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut w2 = Vec::with_capacity(n);
        for a in 0..n {
            let mut row = [0.0; 4];
            let mut shift = 0.0;
            for j in 0..4 {
                row[j] = hat.w1[a][j] / self.sd[j];
                shift += hat.w1[a][j] * self.mu[j] / self.sd[j];
            }
            w1.push(row);
            b.push(hat.b[a] - shift);
            w2.push(self.s_out * hat.w2[a]);
        }
        PannParams::new(w1, b, w2)
    }

    /// Chain rule of [`Self::fold`]: model-space gradient to optimizer space.
    fn chain_to_hat(&self, g: &LossGrad) -> LossGrad {
        let n = g.b.len();
        let mut out = LossGrad::zeros(n);
        out.loss = g.loss;
        for a in 0..n {
            for j in 0..4 {
                out.w1[a][j] = (g.w1[a][j] - g.b[a] * self.mu[j]) / self.sd[j];
            }
            out.b[a] = g.b[a];
            out.w2[a] = self.s_out * g.w2[a];
        }
        out
    }
}

struct AdamState {
    m: LossGrad,
    v: LossGrad,
}

fn adam_step(
    hat: &mut PannParams,
    state: &mut AdamState,
    g: &LossGrad,
    cfg: &TrainConfig,
    t: usize,
) {
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    let update = |theta: &mut f64, m: &mut f64, v: &mut f64, grad: f64| {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * grad;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * grad * grad;
        *theta -= cfg.learning_rate * (*m / bc1) / ((*v / bc2).sqrt() + cfg.eps);
    };
    for a in 0..hat.width() {
        for j in 0..4 {
            update(
                &mut hat.w1[a][j],
                &mut state.m.w1[a][j],
                &mut state.v.w1[a][j],
                g.w1[a][j],
            );
        }
        update(&mut hat.b[a], &mut state.m.b[a], &mut state.v.b[a], g.b[a]);
        update(
            &mut hat.w2[a],
            &mut state.m.w2[a],
            &mut state.v.w2[a],
            g.w2[a],
        );
    }
    // Projection onto the admissible cone; the bias stays unconstrained.
    for row in &mut hat.w1 {
        for x in row {
            *x = x.max(0.0);
        }
    }
    for x in &mut hat.w2 {
        *x = x.max(0.0);
    }
}

/// Initial optimizer-space parameters for a given width and seed.
fn initial_hat(width: usize, seed: u64) -> PannParams {
    PannParams::random_init(width, seed)
}

/// Trains a `width`-unit model on `data` by `cfg.epochs` full-batch ADAM
/// steps, clamping `w1` and `w2` to the non-negative cone after every step.
/// The initialization is drawn from `cfg.seed`; with `epochs = 0` the
/// initialization is returned unchanged.
pub fn train_adam(width: usize, data: &Dataset, cfg: &TrainConfig) -> Result<PannParams> {
    cfg.validate()?;
    if width == 0 {
        return Err(Error::ConfigInvalid {
            detail: "model width must be at least 1".into(),
        });
    }
    if data.is_empty() {
        return Err(Error::ConfigInvalid {
            detail: "training needs a non-empty dataset".into(),
        });
    }
    let cond = Conditioning::from_dataset(data)?;
    let prepared = prepare(data)?;
    let mut hat = initial_hat(width, cfg.seed);
    let mut state = AdamState {
        m: LossGrad::zeros(width),
        v: LossGrad::zeros(width),
    };
    for t in 1..=cfg.epochs {
        let params = cond.fold(&hat)?;
        let g = loss_gradient_prepared(&params, &prepared);
        if !g.loss.is_finite() {
            return Err(Error::DivergedLoss { epoch: t });
        }
        let gh = cond.chain_to_hat(&g);
        adam_step(&mut hat, &mut state, &gh, cfg, t);
    }
    cond.fold(&hat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::{MrModel, MrParams};
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn mr() -> MrModel {
        MrModel::new(MrParams::compressible_reference())
    }

    fn assert_close(a: &Tensor3, b: &Tensor3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a.0[i][j], b.0[i][j], epsilon = tol);
            }
        }
    }

    #[test]
    fn uniaxial_at_unit_stretch_gives_identity_and_zero_stress() {
        // n = 5 puts F11 = 1 exactly on the grid.
        let d = gen_loadcase(&mr(), LoadCase::Uniaxial, 5).unwrap();
        assert_eq!(d.len(), 5);
        assert_eq!(d.label, DatasetLabel::Calibration);
        let sample = &d.samples[1];
        assert_close(&sample.c, &Tensor3::identity(), 1e-10);
        assert_close(&sample.s, &Tensor3::zero(), 1e-8);
    }

    #[test]
    fn uniaxial_solves_lateral_stress_to_zero_along_the_path() {
        let d = gen_loadcase(&mr(), LoadCase::Uniaxial, 100).unwrap();
        for sample in &d.samples {
            let tol = lateral_tol(&sample.s);
            assert!(sample.s.0[1][1].abs() <= tol);
            assert!(sample.s.0[2][2].abs() <= tol);
            // Diagonal stretch: C stays diagonal with equal lateral entries.
            assert_eq!(sample.c.0[0][1], 0.0);
            assert_eq!(sample.c.0[1][1], sample.c.0[2][2]);
        }
        assert_relative_eq!(d.samples[0].c.0[0][0], 0.75 * 0.75, max_relative = 1e-15);
        assert_relative_eq!(d.samples[99].c.0[0][0], 1.75 * 1.75, max_relative = 1e-15);
    }

    #[test]
    fn uniaxial_lateral_stretch_matches_bisection_oracle() {
        let model = mr();
        let d = gen_loadcase(&model, LoadCase::Uniaxial, 5).unwrap();
        let lat_newton = d.samples[4].c.0[1][1].sqrt();

        // Bracketing bisection oracle on S22(λ) at F11 = 1.75.
        let f11: f64 = 1.75;
        let s22 = |l: f64| {
            pk2(&model, &Tensor3::diag(f11 * f11, l * l, l * l)).unwrap().0[1][1]
        };
        let (mut lo, mut hi) = (0.4, 1.2);
        assert!(s22(lo) < 0.0 && s22(hi) > 0.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if s22(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lat_bisect = 0.5 * (lo + hi);
        assert_abs_diff_eq!(lat_newton, lat_bisect, epsilon = 1e-9);
        assert!(lat_newton < 1.0, "tension must contract the cross-section");
    }

    #[test]
    fn equibiaxial_solves_s33_and_spans_the_printed_range() {
        let d = gen_loadcase(&mr(), LoadCase::Equibiaxial, 50).unwrap();
        for sample in &d.samples {
            assert!(sample.s.0[2][2].abs() <= lateral_tol(&sample.s));
            assert_relative_eq!(sample.c.0[0][0], sample.c.0[1][1], max_relative = 1e-15);
        }
        assert_relative_eq!(d.samples[49].c.0[0][0], 1.755 * 1.755, max_relative = 1e-15);
    }

    #[test]
    fn simple_shear_has_closed_form_c() {
        let d = gen_loadcase(&mr(), LoadCase::SimpleShear, 101).unwrap();
        for (i, g) in linspace(-0.25, 0.75, 101).enumerate() {
            let expect = Tensor3([[1.0, g, 0.0], [g, 1.0 + g * g, 0.0], [0.0, 0.0, 1.0]]);
            assert_close(&d.samples[i].c, &expect, 1e-15);
        }
    }

    #[test]
    fn mixed_path_is_a_test_set_with_stress_free_lateral_faces() {
        let d = gen_loadcase(&mr(), LoadCase::Mixed, 40).unwrap();
        assert_eq!(d.label, DatasetLabel::Test);
        for sample in &d.samples {
            let tol = lateral_tol(&sample.s);
            assert!(sample.s.0[1][1].abs() <= tol);
            assert!(sample.s.0[2][2].abs() <= tol);
        }
        // The final point carries both tension and shear.
        let last = &d.samples[39];
        assert_relative_eq!(last.c.0[0][0], 1.75 * 1.75, max_relative = 1e-15);
        assert!(last.s.0[0][0].abs() > 1.0);
        assert!(last.s.0[0][1].abs() > 1.0);
    }

    #[test]
    fn calibration_set_concatenates_three_cases() {
        let d = calibration_set(&mr(), 10).unwrap();
        assert_eq!(d.len(), 30);
        assert_eq!(d.label, DatasetLabel::Calibration);
    }

    #[test]
    fn root_solve_failure_is_reported_per_path() {
        /// Constant unit tension in every direction: S22 never crosses zero.
        struct AlwaysTense;
        impl Material for AlwaysTense {
            fn response(
                &self,
                inv: &crate::kinematics::InvariantTriple,
            ) -> Result<crate::material::MaterialResponse> {
                // W = I1 grows in every stretch, so the lateral stress is a
                // positive constant in Voigt form.
                let _ = inv;
                Ok(crate::material::MaterialResponse {
                    w: inv.i1,
                    dw: [1.0, 0.0, 0.0],
                    d2w: [[0.0; 3]; 3],
                })
            }
        }
        let err = gen_loadcase(&AlwaysTense, LoadCase::Uniaxial, 3).unwrap_err();
        match err {
            Error::RootFindFailure { path, .. } => assert_eq!(path, "uniaxial"),
            other => panic!("expected RootFindFailure, got {other}"),
        }
    }

    #[test]
    fn loss_vanishes_on_data_from_the_same_model() {
        let p = PannParams::random_init(4, 3);
        let model = PannModel::build(p.clone()).unwrap();
        let d = gen_loadcase(&model, LoadCase::SimpleShear, 20).unwrap();
        let loss = sobolev_loss(&p, &d).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn single_sample_isotropic_offset_has_hand_computed_loss() {
        let p = PannParams::random_init(4, 3);
        let model = PannModel::build(p.clone()).unwrap();
        let c = Tensor3::diag(1.2, 0.9, 1.05);
        let delta = 3.0;
        let s = pk2(&model, &c).unwrap() + Tensor3::identity() * delta;
        let d = Dataset {
            samples: vec![StrainStressSample { c, s }],
            label: DatasetLabel::Calibration,
        };
        // ‖δ I‖²_F / 9 = 3 δ² / 9.
        let expect = delta * delta / 3.0;
        assert_relative_eq!(sobolev_loss(&p, &d).unwrap(), expect, max_relative = 1e-12);
    }

    /// Central finite differences of the loss over every parameter entry.
    fn fd_gradient(p: &PannParams, d: &Dataset) -> LossGrad {
        let n = p.width();
        let mut g = LossGrad::zeros(n);
        g.loss = sobolev_loss(p, d).unwrap();
        let diff = |perturb: &dyn Fn(&mut PannParams, f64), scale: f64| {
            let h = 1e-5 * scale.abs().max(1.0);
            let mut plus = p.clone();
            perturb(&mut plus, h);
            let mut minus = p.clone();
            perturb(&mut minus, -h);
            (sobolev_loss(&plus, d).unwrap() - sobolev_loss(&minus, d).unwrap()) / (2.0 * h)
        };
        for a in 0..n {
            for j in 0..4 {
                g.w1[a][j] = diff(&|q: &mut PannParams, h: f64| q.w1[a][j] += h, p.w1[a][j]);
            }
            g.b[a] = diff(&|q: &mut PannParams, h: f64| q.b[a] += h, p.b[a]);
            g.w2[a] = diff(&|q: &mut PannParams, h: f64| q.w2[a] += h, p.w2[a]);
        }
        g
    }

    fn max_rel_err(got: &LossGrad, want: &LossGrad) -> f64 {
        let floor = want
            .w1
            .iter()
            .flatten()
            .chain(want.b.iter())
            .chain(want.w2.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
            * 1e-7;
        let mut worst = 0.0f64;
        let mut check = |a: f64, b: f64| {
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(floor));
        };
        for a in 0..want.b.len() {
            for j in 0..4 {
                check(got.w1[a][j], want.w1[a][j]);
            }
            check(got.b[a], want.b[a]);
            check(got.w2[a], want.w2[a]);
        }
        worst
    }

    #[test]
    fn loss_gradient_matches_finite_differences() {
        let d = calibration_set(&mr(), 8).unwrap();
        let p = PannParams::random_init(3, 7);
        let got = loss_gradient(&p, &d).unwrap();
        let want = fd_gradient(&p, &d);
        assert_relative_eq!(got.loss, want.loss, max_relative = 1e-12);
        assert!(
            max_rel_err(&got, &want) <= 1e-5,
            "max relative error {:.3e}",
            max_rel_err(&got, &want)
        );
    }

    #[test]
    fn conditioned_gradient_matches_finite_differences_through_the_fold() {
        let d = calibration_set(&mr(), 8).unwrap();
        let cond = Conditioning::from_dataset(&d).unwrap();
        let hat = PannParams::random_init(3, 11);
        let got = cond.chain_to_hat(&loss_gradient(&cond.fold(&hat).unwrap(), &d).unwrap());

        let loss_of = |h: &PannParams| sobolev_loss(&cond.fold(h).unwrap(), &d).unwrap();
        let mut want = LossGrad::zeros(3);
        let diff = |perturb: &dyn Fn(&mut PannParams, f64), scale: f64| {
            let h = 1e-5 * scale.abs().max(1.0);
            let mut plus = hat.clone();
            perturb(&mut plus, h);
            let mut minus = hat.clone();
            perturb(&mut minus, -h);
            (loss_of(&plus) - loss_of(&minus)) / (2.0 * h)
        };
        for a in 0..3 {
            for j in 0..4 {
                want.w1[a][j] = diff(&|q: &mut PannParams, h: f64| q.w1[a][j] += h, hat.w1[a][j]);
            }
            want.b[a] = diff(&|q: &mut PannParams, h: f64| q.b[a] += h, hat.b[a]);
            want.w2[a] = diff(&|q: &mut PannParams, h: f64| q.w2[a] += h, hat.w2[a]);
        }
        assert!(
            max_rel_err(&got, &want) <= 1e-5,
            "max relative error {:.3e}",
            max_rel_err(&got, &want)
        );
    }

    #[test]
    fn conditioning_fold_preserves_the_admissible_cone() {
        let d = calibration_set(&mr(), 8).unwrap();
        let cond = Conditioning::from_dataset(&d).unwrap();
        assert!(cond.s_out > 0.0);
        for j in 0..4 {
            assert!(cond.sd[j] > 0.0);
        }
        // The volumetric columns stay raw.
        assert_eq!(cond.sd[2], 1.0);
        assert_eq!(cond.sd[3], 1.0);
        let hat = PannParams::random_init(5, 1);
        let folded = cond.fold(&hat).unwrap();
        assert!(folded.w1.iter().flatten().all(|&x| x >= 0.0));
        assert!(folded.w2.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn zero_epochs_returns_the_initialization_unchanged() {
        let d = calibration_set(&mr(), 8).unwrap();
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let p = train_adam(4, &d, &cfg).unwrap();
        let cond = Conditioning::from_dataset(&d).unwrap();
        let expect = cond.fold(&initial_hat(4, cfg.seed)).unwrap();
        for a in 0..4 {
            for j in 0..4 {
                assert_eq!(p.w1[a][j], expect.w1[a][j]);
            }
            assert_eq!(p.b[a], expect.b[a]);
            assert_eq!(p.w2[a], expect.w2[a]);
        }
        // Changing optimizer hyperparameters cannot move a 0-epoch result.
        let cfg2 = TrainConfig {
            epochs: 0,
            learning_rate: 0.5,
            ..TrainConfig::default()
        };
        let p2 = train_adam(4, &d, &cfg2).unwrap();
        assert_eq!(p.b, p2.b);
    }

    #[test]
    fn training_reduces_loss_and_preserves_nonnegativity() {
        let d = calibration_set(&mr(), 12).unwrap();
        let short = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        let long = TrainConfig {
            epochs: 400,
            ..TrainConfig::default()
        };
        let p_short = train_adam(4, &d, &short).unwrap();
        let p_long = train_adam(4, &d, &long).unwrap();
        let l_short = sobolev_loss(&p_short, &d).unwrap();
        let l_long = sobolev_loss(&p_long, &d).unwrap();
        assert!(
            l_long < l_short,
            "expected loss to drop: {l_long:.6e} vs {l_short:.6e}"
        );
        assert!(p_long.w1.iter().flatten().all(|&x| x >= 0.0));
        assert!(p_long.w2.iter().all(|&x| x >= 0.0));
        // The trained model is still exactly stress-normalized.
        let model = PannModel::build(p_long).unwrap();
        let s0 = pk2(&model, &Tensor3::identity()).unwrap();
        assert!(s0.norm() <= 1e-10 * model.n_frak().abs().max(1.0));
    }

    #[test]
    fn training_is_deterministic_for_a_fixed_seed() {
        let d = calibration_set(&mr(), 10).unwrap();
        let cfg = TrainConfig {
            epochs: 25,
            ..TrainConfig::default()
        };
        let p1 = train_adam(3, &d, &cfg).unwrap();
        let p2 = train_adam(3, &d, &cfg).unwrap();
        assert_eq!(p1.w1, p2.w1);
        assert_eq!(p1.b, p2.b);
        assert_eq!(p1.w2, p2.w2);
    }

    #[test]
    fn rejects_invalid_configs_and_empty_data() {
        let d = calibration_set(&mr(), 4).unwrap();
        let bad = TrainConfig {
            learning_rate: 1.5,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_adam(2, &d, &bad),
            Err(Error::ConfigInvalid { .. })
        ));
        let empty = Dataset {
            samples: vec![],
            label: DatasetLabel::Calibration,
        };
        assert!(matches!(
            train_adam(2, &empty, &TrainConfig::default()),
            Err(Error::ConfigInvalid { .. })
        ));
        assert!(matches!(
            gen_loadcase(&mr(), LoadCase::Uniaxial, 1),
            Err(Error::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn load_case_names_round_trip() {
        for case in [
            LoadCase::Uniaxial,
            LoadCase::Equibiaxial,
            LoadCase::SimpleShear,
            LoadCase::Mixed,
        ] {
            assert_eq!(case.to_string().parse::<LoadCase>().unwrap(), case);
        }
        assert!("triaxial".parse::<LoadCase>().is_err());
    }
}

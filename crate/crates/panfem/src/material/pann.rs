//! Physics-augmented neural constitutive model: a single-hidden-layer
//! input-convex network over `(I1, I2, J, J*)` with `J* = −J`, plus
//! energy/stress normalization terms and a volumetric growth term that
//! together enforce a stress-free, energy-free reference state and coercive
//! volumetric response by construction.

use super::{Material, MaterialResponse};
use crate::error::{Error, Result};
use crate::kinematics::{InvariantQuad, InvariantTriple};
use crate::real::Real;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

/// Numerically safe softplus `log(1 + eˣ)`.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::of(30.0) {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Numerically safe logistic sigmoid (the softplus derivative).
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Trainable parameters of the hidden layer. Non-negativity of `w1` and
/// `w2` makes the network convex and non-decreasing in each input; the bias
/// is unconstrained.
#[derive(Debug, Clone, PartialEq)]
pub struct PannParams<T = f64> {
    pub w1: Vec<[T; 4]>,
    pub b: Vec<T>,
    pub w2: Vec<T>,
}

impl<T: Real> PannParams<T> {
    /// Validates array lengths and the non-negativity constraints.
    pub fn new(w1: Vec<[T; 4]>, b: Vec<T>, w2: Vec<T>) -> Result<Self> {
        let n = w1.len();
        if b.len() != n || w2.len() != n || n == 0 {
            return Err(Error::ConfigInvalid {
                detail: format!(
                    "inconsistent layer sizes: w1 has {} rows, b {}, w2 {}",
                    n,
                    b.len(),
                    w2.len()
                ),
            });
        }
        let p = Self { w1, b, w2 };
        p.check_nonnegative()?;
        Ok(p)
    }

    pub fn width(&self) -> usize {
        self.w1.len()
    }

    pub fn check_nonnegative(&self) -> Result<()> {
        for (a, row) in self.w1.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v < T::zero() {
                    return Err(Error::NegativeWeight {
                        value: v.as_f64(),
                        location: format!("w1[{a}][{j}]"),
                    });
                }
            }
        }
        for (a, &v) in self.w2.iter().enumerate() {
            if v < T::zero() {
                return Err(Error::NegativeWeight {
                    value: v.as_f64(),
                    location: format!("w2[{a}]"),
                });
            }
        }
        Ok(())
    }

    /// Standard initialization: `w1, w2 ~ |N(0, 1/√fan_in)|`, `b ~ N(0, 0.1)`.
    pub fn random_init(n: usize, seed: u64) -> Self
    where
        T: Real,
    {
        let mut rng = StdRng::seed_from_u64(seed);
        let w1_dist = Normal::new(0.0, 1.0 / (4.0f64).sqrt()).unwrap();
        let w2_dist = Normal::new(0.0, 1.0 / (n as f64).sqrt()).unwrap();
        let b_dist = Normal::new(0.0, 0.1).unwrap();
        let mut w1 = Vec::with_capacity(n);
        for _ in 0..n {
            let mut row = [T::zero(); 4];
            for v in row.iter_mut() {
                *v = T::of(w1_dist.sample(&mut rng).abs());
            }
            w1.push(row);
        }
        let b = (0..n).map(|_| T::of(b_dist.sample(&mut rng))).collect();
        let w2 = (0..n).map(|_| T::of(w2_dist.sample(&mut rng).abs())).collect();
        Self { w1, b, w2 }
    }
}

/// Value and derivatives of the raw network over the four inputs.
#[derive(Debug, Clone)]
pub struct NnResponse<T = f64> {
    pub w: T,
    pub dw: [T; 4],
    pub d2w: [[T; 4]; 4],
}

/// Evaluates `W = Σₐ w2ₐ SP(w1ₐ·x + bₐ)` with first and second derivatives
/// with respect to the four inputs.
pub fn nn_eval<T: Real>(p: &PannParams<T>, q: &InvariantQuad<T>) -> NnResponse<T> {
    let x = q.as_array();
    let mut w = T::zero();
    let mut dw = [T::zero(); 4];
    let mut d2w = [[T::zero(); 4]; 4];
    for a in 0..p.width() {
        let mut h = p.b[a];
        for i in 0..4 {
            h += p.w1[a][i] * x[i];
        }
        let sig = sigmoid(h);
        let sigp = sig * (T::one() - sig);
        w += p.w2[a] * softplus(h);
        for i in 0..4 {
            dw[i] += p.w2[a] * sig * p.w1[a][i];
            for j in 0..4 {
                d2w[i][j] += p.w2[a] * sigp * p.w1[a][i] * p.w1[a][j];
            }
        }
    }
    NnResponse { w, dw, d2w }
}

/// Fully normalized neural material: raw network minus the stress
/// normalization `n_frak·(J−1)`, plus the energy offset and the volumetric
/// growth term `(J + J⁻¹ − 2)²`.
#[derive(Debug, Clone)]
pub struct PannModel<T = f64> {
    params: PannParams<T>,
    n_frak: T,
    w_energy: T,
}

impl<T: Real> PannModel<T> {
    /// Computes the normalization constants at the undeformed state and
    /// returns the ready model. Fails if the non-negativity constraints are
    /// violated.
    pub fn build(params: PannParams<T>) -> Result<Self> {
        params.check_nonnegative()?;
        let q0 = InvariantQuad::from(InvariantTriple::reference());
        let nn0 = nn_eval(&params, &q0);
        let n_frak = T::of(2.0)
            * (nn0.dw[0] + T::of(2.0) * nn0.dw[1]
                + T::of(0.5) * nn0.dw[2]
                - T::of(0.5) * nn0.dw[3]);
        let w_energy = -nn0.w;
        Ok(Self { params, n_frak, w_energy })
    }

    pub fn params(&self) -> &PannParams<T> {
        &self.params
    }

    pub fn n_frak(&self) -> T {
        self.n_frak
    }

    pub fn w_energy(&self) -> T {
        self.w_energy
    }
}

/// Derivatives of the growth term `(J + J⁻¹ − 2)²` with respect to `J`.
pub fn growth_derivatives<T: Real>(j: T) -> (T, T, T) {
    let one = T::one();
    let two = T::of(2.0);
    let jinv = j.recip();
    let g = j + jinv - two;
    let gp = one - jinv * jinv;
    let value = g * g;
    let first = two * g * gp;
    let second = two * gp * gp + two * g * (two * jinv * jinv * jinv);
    (value, first, second)
}

impl<T: Real> Material<T> for PannModel<T> {
    fn response(&self, inv: &InvariantTriple<T>) -> Result<MaterialResponse<T>> {
        let j = inv.j;
        if j <= T::zero() {
            return Err(Error::NonPositiveJacobian { det: j.as_f64(), element: None });
        }
        let q = InvariantQuad::from(*inv);
        let nn = nn_eval(&self.params, &q);
        // Collapse the J* = −J input into the J slot (chain rule).
        let dj = nn.dw[2] - nn.dw[3];
        let d2_jj = nn.d2w[2][2] - T::of(2.0) * nn.d2w[2][3] + nn.d2w[3][3];
        let d2_1j = nn.d2w[0][2] - nn.d2w[0][3];
        let d2_2j = nn.d2w[1][2] - nn.d2w[1][3];
        let (g_val, g1, g2) = growth_derivatives(j);
        let w = nn.w - self.n_frak * (j - T::one()) + self.w_energy + g_val;
        let dw = [nn.dw[0], nn.dw[1], dj - self.n_frak + g1];
        let d2w = [
            [nn.d2w[0][0], nn.d2w[0][1], d2_1j],
            [nn.d2w[1][0], nn.d2w[1][1], d2_2j],
            [d2_1j, d2_2j, d2_jj + g2],
        ];
        Ok(MaterialResponse { w, dw, d2w })
    }
}

//! Strain measures, isotropic invariants, tensor generators, and the
//! algorithmic (two-time-level) kinematic quantities used by the
//! energy-momentum integrator.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{cof_det, cross, Tensor3};

/// The isotropic invariant triple of a right Cauchy-Green tensor:
/// `i1 = tr C`, `i2 = tr cof C`, `j = sqrt(det C) = det F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantTriple<T = f64> {
    pub i1: T,
    pub i2: T,
    pub j: T,
}

impl<T: Real> InvariantTriple<T> {
    pub fn new(i1: T, i2: T, j: T) -> Self {
        Self { i1, i2, j }
    }

    /// Invariants of the undeformed state `C = I`.
    pub fn reference() -> Self {
        Self { i1: T::of(3.0), i2: T::of(3.0), j: T::one() }
    }
}

/// The four-input extension `(I1, I2, J, J*)` with `J* = -J`, used by the
/// neural constitutive model to keep the energy convex and non-decreasing
/// in all inputs while allowing stress contributions of either sign in `J`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantQuad<T = f64> {
    pub i1: T,
    pub i2: T,
    pub j: T,
    pub jstar: T,
}

impl<T: Real> From<InvariantTriple<T>> for InvariantQuad<T> {
    fn from(inv: InvariantTriple<T>) -> Self {
        Self { i1: inv.i1, i2: inv.i2, j: inv.j, jstar: -inv.j }
    }
}

impl<T: Real> InvariantQuad<T> {
    pub fn as_array(&self) -> [T; 4] {
        [self.i1, self.i2, self.j, self.jstar]
    }
}

/// Derivatives of the invariants with respect to `C`: `gi1 = I`,
/// `gi2 = I ∧ C`, `gj = ½ J⁻¹ G`.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorSet<T: Real = f64> {
    pub gi1: Tensor3<T>,
    pub gi2: Tensor3<T>,
    pub gj: Tensor3<T>,
}

/// Midpoint-type algorithmic kinematics connecting two time levels.
#[derive(Debug, Clone, Copy)]
pub struct AlgoKinematics<T: Real = f64> {
    pub c_algo: Tensor3<T>,
    pub g_algo: Tensor3<T>,
    pub j_algo: T,
}

/// Computes `C = FᵀF`, `G = cof C`, and `J = det F` from a deformation
/// gradient with positive determinant.
pub fn strain_measures<T: Real>(f: &Tensor3<T>) -> Result<(Tensor3<T>, Tensor3<T>, T)> {
    let (_, det_f) = cof_det(*f);
    if det_f <= T::zero() {
        return Err(Error::NonPositiveJacobian { det: det_f.as_f64(), element: None });
    }
    let c = f.transpose() * *f;
    let (g, _) = cof_det(c);
    Ok((c, g, det_f))
}

/// Extracts `(tr C, tr cof C, sqrt(det C))` from a symmetric positive
/// definite `C`.
pub fn invariants<T: Real>(c: &Tensor3<T>) -> Result<InvariantTriple<T>> {
    let (g, det_c) = cof_det(*c);
    if det_c <= T::zero() {
        return Err(Error::NonPositiveJacobian { det: det_c.as_f64(), element: None });
    }
    Ok(InvariantTriple { i1: c.trace(), i2: g.trace(), j: det_c.sqrt() })
}

/// Invariant derivatives with respect to `C` (Fréchet derivatives of
/// `invariants`), with `dJ = gj : dC`.
pub fn generators<T: Real>(c: &Tensor3<T>) -> Result<GeneratorSet<T>> {
    let (g, det_c) = cof_det(*c);
    if det_c <= T::zero() {
        return Err(Error::NonPositiveJacobian { det: det_c.as_f64(), element: None });
    }
    let j = det_c.sqrt();
    let gi2 = cross(Tensor3::identity(), *c);
    let gj = g * (T::of(0.5) / j);
    Ok(GeneratorSet { gi1: Tensor3::identity(), gi2, gj })
}

/// Builds the algorithmic strain set between two time levels:
/// `C_a = ½(C_n + C_n1)`, `G_a = ⅓(C_a ∧ C_a + ½(G_n + G_n1))`,
/// `J_a = ½(J_n + J_n1)`.
///
/// These satisfy the exact increment identities
/// `G_a : ΔC = Δ(det C)`, `(I ∧ C_a) : ΔC = Δ(tr G)`, and
/// `½ J_a⁻¹ G_a : ΔC = ΔJ`, which make the algorithmic stress exactly
/// energy-consistent.
pub fn algo_kinematics<T: Real>(c_n: &Tensor3<T>, c_n1: &Tensor3<T>) -> Result<AlgoKinematics<T>> {
    let (g_n, det_n) = cof_det(*c_n);
    let (g_n1, det_n1) = cof_det(*c_n1);
    if det_n <= T::zero() {
        return Err(Error::NonPositiveJacobian { det: det_n.as_f64(), element: None });
    }
    if det_n1 <= T::zero() {
        return Err(Error::NonPositiveJacobian { det: det_n1.as_f64(), element: None });
    }
    let half = T::of(0.5);
    let c_algo = (*c_n + *c_n1) * half;
    let g_mid = (g_n + g_n1) * half;
    let g_algo = (cross(c_algo, c_algo) + g_mid) * T::of(1.0 / 3.0);
    let j_algo = (det_n.sqrt() + det_n1.sqrt()) * half;
    Ok(AlgoKinematics { c_algo, g_algo, j_algo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::test_oracles::{det_laplace, random_rotation, random_spd, sym_eigenvalues};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn strain_measures_identity() {
        let (c, g, j) = strain_measures(&Tensor3::<f64>::identity()).unwrap();
        assert_abs_diff_eq!(c.0[0][0], 1.0);
        assert_abs_diff_eq!(g.0[1][1], 1.0);
        assert_abs_diff_eq!(j, 1.0);
        assert_abs_diff_eq!((c - Tensor3::identity()).norm(), 0.0);
        assert_abs_diff_eq!((g - Tensor3::identity()).norm(), 0.0);
    }

    #[test]
    fn strain_measures_uniaxial_stretch() {
        let f = Tensor3::diag(2.0, 1.0, 1.0);
        let (c, g, j) = strain_measures(&f).unwrap();
        assert_abs_diff_eq!((c - Tensor3::diag(4.0, 1.0, 1.0)).norm(), 0.0);
        assert_abs_diff_eq!((g - Tensor3::diag(1.0, 4.0, 4.0)).norm(), 0.0);
        assert_abs_diff_eq!(j, 2.0);
    }

    #[test]
    fn strain_measures_rejects_inverted() {
        let f = Tensor3::diag(-1.0, 1.0, 1.0);
        assert!(matches!(
            strain_measures(&f),
            Err(Error::NonPositiveJacobian { .. })
        ));
    }

    #[test]
    fn strain_measures_matches_det_oracle_and_eigen_products() {
        let mut rng = StdRng::seed_from_u64(401);
        for _ in 0..50 {
            let mut f = crate::tensor::test_oracles::random_tensor(&mut rng);
            let (_, det) = cof_det(f);
            if det <= 0.1 {
                f = f + Tensor3::identity() * 2.0;
            }
            let (_, det) = cof_det(f);
            if det <= 0.0 {
                continue;
            }
            let (c, g, j) = strain_measures(&f).unwrap();
            assert_relative_eq!(j, det_laplace(f), max_relative = 1e-12);
            // Eigenvalues of G are the pairwise products of eigenvalues of C.
            let mut ev_c = sym_eigenvalues(c);
            let ev_g = sym_eigenvalues(g);
            ev_c.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut prod = [ev_c[0] * ev_c[1], ev_c[0] * ev_c[2], ev_c[1] * ev_c[2]];
            prod.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (p, e) in prod.iter().zip(ev_g.iter()) {
                assert_relative_eq!(p, e, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn invariants_reference_and_diagonal() {
        let inv = invariants(&Tensor3::<f64>::identity()).unwrap();
        assert_abs_diff_eq!(inv.i1, 3.0);
        assert_abs_diff_eq!(inv.i2, 3.0);
        assert_abs_diff_eq!(inv.j, 1.0);
        let inv = invariants(&Tensor3::diag(4.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!(inv.i1, 6.0);
        assert_abs_diff_eq!(inv.i2, 9.0);
        assert_abs_diff_eq!(inv.j, 2.0);
    }

    #[test]
    fn invariants_match_eigenvalue_oracle() {
        let mut rng = StdRng::seed_from_u64(402);
        for _ in 0..50 {
            let c = random_spd(&mut rng, 2.0);
            let ev = sym_eigenvalues(c);
            let inv = invariants(&c).unwrap();
            assert_relative_eq!(inv.i1, ev[0] + ev[1] + ev[2], max_relative = 1e-10);
            assert_relative_eq!(
                inv.i2,
                ev[0] * ev[1] + ev[0] * ev[2] + ev[1] * ev[2],
                max_relative = 1e-9
            );
            assert_relative_eq!(inv.j, (ev[0] * ev[1] * ev[2]).sqrt(), max_relative = 1e-10);
        }
    }

    #[test]
    fn invariants_are_isotropic() {
        let mut rng = StdRng::seed_from_u64(403);
        for _ in 0..20 {
            let c = random_spd(&mut rng, 2.0);
            let q = random_rotation(&mut rng);
            let rotated = q.transpose() * c * q;
            let a = invariants(&c).unwrap();
            let b = invariants(&rotated).unwrap();
            assert_relative_eq!(a.i1, b.i1, max_relative = 1e-12);
            assert_relative_eq!(a.i2, b.i2, max_relative = 1e-11);
            assert_relative_eq!(a.j, b.j, max_relative = 1e-12);
        }
    }

    #[test]
    fn generators_reference_and_diagonal() {
        let g = generators(&Tensor3::<f64>::identity()).unwrap();
        assert_abs_diff_eq!((g.gi1 - Tensor3::identity()).norm(), 0.0);
        assert_abs_diff_eq!((g.gi2 - Tensor3::identity() * 2.0).norm(), 0.0);
        assert_abs_diff_eq!((g.gj - Tensor3::identity() * 0.5).norm(), 0.0);
        let g = generators(&Tensor3::diag(4.0, 1.0, 1.0)).unwrap();
        assert_abs_diff_eq!((g.gj - Tensor3::diag(0.25, 1.0, 1.0)).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn generators_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(404);
        for _ in 0..100 {
            let c = random_spd(&mut rng, 2.0);
            let d = {
                let t = crate::tensor::test_oracles::random_tensor(&mut rng);
                t.sym()
            };
            let g = generators(&c).unwrap();
            let h = 1e-5;
            let plus = invariants(&(c + d * h)).unwrap();
            let minus = invariants(&(c - d * h)).unwrap();
            let fd = [
                (plus.i1 - minus.i1) / (2.0 * h),
                (plus.i2 - minus.i2) / (2.0 * h),
                (plus.j - minus.j) / (2.0 * h),
            ];
            let an = [g.gi1.ddot(d), g.gi2.ddot(d), g.gj.ddot(d)];
            for (f, a) in fd.iter().zip(an.iter()) {
                let scale = 1.0f64.max(a.abs());
                assert!(
                    (f - a).abs() <= 1e-6 * scale,
                    "generator FD mismatch: fd={f}, analytic={a}"
                );
            }
        }
    }

    #[test]
    fn algo_kinematics_collapses_at_equal_endpoints() {
        let mut rng = StdRng::seed_from_u64(405);
        let c = random_spd(&mut rng, 2.0);
        let a = algo_kinematics(&c, &c).unwrap();
        let (g, det) = cof_det(c);
        assert_abs_diff_eq!((a.c_algo - c).norm(), 0.0, epsilon = 1e-14);
        assert_relative_eq!((a.g_algo - g).norm(), 0.0, epsilon = 1e-12 * g.norm());
        assert_relative_eq!(a.j_algo, det.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn algo_kinematics_hand_example() {
        let c_n = Tensor3::identity();
        let c_n1 = Tensor3::diag(4.0, 1.0, 1.0);
        let a = algo_kinematics(&c_n, &c_n1).unwrap();
        assert_abs_diff_eq!((a.c_algo - Tensor3::diag(2.5, 1.0, 1.0)).norm(), 0.0);
        assert_abs_diff_eq!((a.g_algo - Tensor3::diag(1.0, 2.5, 2.5)).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(a.j_algo, 1.5);
        // G_a : ΔC equals Δ(det C) = 4 − 1 = 3.
        let dc = c_n1 - c_n;
        assert_abs_diff_eq!(a.g_algo.ddot(dc), 3.0, epsilon = 1e-14);
    }

    #[test]
    fn algo_kinematics_increment_identities() {
        let mut rng = StdRng::seed_from_u64(406);
        for _ in 0..100 {
            let c_n = random_spd(&mut rng, 2.0);
            let c_n1 = random_spd(&mut rng, 2.0);
            let a = algo_kinematics(&c_n, &c_n1).unwrap();
            let dc = c_n1 - c_n;
            let det_n = det_laplace(c_n);
            let det_n1 = det_laplace(c_n1);
            let scale = 1.0f64.max(det_n.abs()).max(det_n1.abs());
            // G_a : ΔC = Δ(det C)
            assert!(
                (a.g_algo.ddot(dc) - (det_n1 - det_n)).abs() <= 1e-12 * scale,
                "cofactor increment identity violated"
            );
            // 2 J_a ΔJ = Δ(det C), i.e. ½ J_a⁻¹ G_a : ΔC = ΔJ
            let dj = det_n1.sqrt() - det_n.sqrt();
            assert!(
                (0.5 / a.j_algo * a.g_algo.ddot(dc) - dj).abs() <= 1e-12 * scale,
                "volume increment identity violated"
            );
            // (I ∧ C_a) : ΔC = Δ(tr G)
            let gi2 = cross(Tensor3::identity(), a.c_algo);
            let (g_n, _) = cof_det(c_n);
            let (g_n1, _) = cof_det(c_n1);
            let scale2 = 1.0f64.max(g_n.trace().abs()).max(g_n1.trace().abs());
            assert!(
                (gi2.ddot(dc) - (g_n1.trace() - g_n.trace())).abs() <= 1e-12 * scale2,
                "second-invariant increment identity violated"
            );
        }
    }

    #[test]
    fn works_in_single_precision() {
        let f = Tensor3::<f32>::diag(2.0, 1.0, 1.0);
        let (_, _, j) = strain_measures(&f).unwrap();
        assert!((j - 2.0).abs() < 1e-6);
    }
}

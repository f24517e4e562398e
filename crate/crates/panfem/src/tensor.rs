//! Dense 3×3 tensor algebra: the tensor cross product, cofactor and
//! determinant built from it, and Voigt-notation bridges.
//!
//! The tensor cross product of two second-order tensors,
//! `(A ∧ B)_{iα} = ε_{ijk} ε_{αβγ} A_{jβ} B_{kγ}`,
//! turns cofactor and determinant manipulations into bilinear algebra:
//! `cof A = ½ A∧A` and `det A = (1/6)(A∧A):A`. Every downstream module
//! (invariant derivatives, mixed-element tangents, algorithmic stresses)
//! leans on these identities.

use crate::error::{Error, Result};
use crate::real::Real;

/// Row-major 3×3 second-order tensor. Units are carried by context.
#[derive(Clone, Copy, PartialEq)]
pub struct Tensor3<T = f64>(pub [[T; 3]; 3]);

/// Role tag for a Voigt 6-vector: stress-like vectors keep shear entries
/// as-is, strain-like vectors carry the factor-2 shear convention so that
/// `stress · strain = S : E`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VoigtRole {
    Stress,
    Strain,
}

/// Symmetric tensor packed in Voigt order (11, 22, 33, 12, 23, 13).
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SymVoigt6<T = f64> {
    pub v: [T; 6],
    pub role: VoigtRole,
}

/// Dense 6×6 matrix used for material tangents in Voigt notation.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Mat6<T = f64>(pub [[T; 6]; 6]);

/// Index pairs backing the Voigt ordering.
pub const VOIGT_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2)];

impl<T: Real> Tensor3<T> {
    pub fn zero() -> Self {
        Tensor3([[T::zero(); 3]; 3])
    }

    pub fn identity() -> Self {
        let mut a = Self::zero();
        for i in 0..3 {
            a.0[i][i] = T::one();
        }
        a
    }

    pub fn diag(d0: T, d1: T, d2: T) -> Self {
        let mut a = Self::zero();
        a.0[0][0] = d0;
        a.0[1][1] = d1;
        a.0[2][2] = d2;
        a
    }

    pub fn from_fn(mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut a = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                a.0[i][j] = f(i, j);
            }
        }
        a
    }

    pub fn transpose(self) -> Self {
        Self::from_fn(|i, j| self.0[j][i])
    }

    pub fn trace(self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    /// Double contraction `A : B = A_{ij} B_{ij}`.
    pub fn ddot(self, other: Self) -> T {
        let mut s = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                s += self.0[i][j] * other.0[i][j];
            }
        }
        s
    }

    /// Frobenius norm.
    pub fn norm(self) -> T {
        self.ddot(self).sqrt()
    }

    /// Largest absolute deviation from symmetry.
    pub fn asymmetry(self) -> T {
        let mut d = T::zero();
        for i in 0..3 {
            for j in (i + 1)..3 {
                d = d.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        d
    }

    /// Symmetric part ½(A + Aᵀ).
    pub fn sym(self) -> Self {
        let half = T::of(0.5);
        Self::from_fn(|i, j| half * (self.0[i][j] + self.0[j][i]))
    }

    pub fn is_finite(self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }

    /// Packs a symmetric tensor into Voigt form, rejecting inputs whose
    /// asymmetry exceeds `1e-12 · ‖A‖`.
    pub fn to_voigt(self, role: VoigtRole) -> Result<SymVoigt6<T>> {
        let tol = T::of(1e-12);
        let scale = self.norm().max(T::one());
        let deviation = self.asymmetry();
        if deviation > tol * scale {
            return Err(Error::AsymmetricInput {
                deviation: deviation.as_f64(),
                tol: 1e-12,
            });
        }
        Ok(self.to_voigt_unchecked(role))
    }

    /// Voigt packing for tensors symmetric by construction; reads the upper
    /// triangle without a symmetry check.
    pub fn to_voigt_unchecked(self, role: VoigtRole) -> SymVoigt6<T> {
        let shear = match role {
            VoigtRole::Stress => T::one(),
            VoigtRole::Strain => T::of(2.0),
        };
        let mut v = [T::zero(); 6];
        for (k, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            v[k] = if k < 3 {
                self.0[i][j]
            } else {
                shear * self.0[i][j]
            };
        }
        SymVoigt6 { v, role }
    }
}

impl<T: Real> std::ops::Add for Tensor3<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] + rhs.0[i][j])
    }
}

impl<T: Real> std::ops::Sub for Tensor3<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| self.0[i][j] - rhs.0[i][j])
    }
}

impl<T: Real> std::ops::Neg for Tensor3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::from_fn(|i, j| -self.0[i][j])
    }
}

/// Scalar scaling `A * s`.
impl<T: Real> std::ops::Mul<T> for Tensor3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::from_fn(|i, j| self.0[i][j] * s)
    }
}

/// Matrix product `A · B`.
impl<T: Real> std::ops::Mul for Tensor3<T> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        Self::from_fn(|i, j| {
            self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j] + self.0[i][2] * rhs.0[2][j]
        })
    }
}

impl<T: Real> std::fmt::Debug for Tensor3<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Tensor3[")?;
        for row in &self.0 {
            writeln!(f, "  {:?}", row)?;
        }
        write!(f, "]")
    }
}

/// Tensor cross product `(A ∧ B)_{iα} = ε_{ijk} ε_{αβγ} A_{jβ} B_{kγ}`.
///
/// Implemented as the closed-form componentwise expansion of the double
/// permutation sum (the ε-sum itself lives in the test oracle). Symmetric in
/// its arguments and bilinear.
pub fn cross<T: Real>(a: Tensor3<T>, b: Tensor3<T>) -> Tensor3<T> {
    let mut out = Tensor3::zero();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        for al in 0..3 {
            let (be, ga) = ((al + 1) % 3, (al + 2) % 3);
            // Grouped so the expression is invariant under swapping `a` and `b`,
            // keeping A∧B = B∧A exact in floating point.
            out.0[i][al] = (a.0[j][be] * b.0[k][ga] + a.0[k][ga] * b.0[j][be])
                - (a.0[j][ga] * b.0[k][be] + a.0[k][be] * b.0[j][ga]);
        }
    }
    out
}

/// Cofactor and determinant from the tensor cross product:
/// `cof A = ½ A∧A`, `det A = (1/6)(A∧A) : A`.
///
/// Both are defined for singular `A` as well.
pub fn cof_det<T: Real>(a: Tensor3<T>) -> (Tensor3<T>, T) {
    let axa = cross(a, a);
    let cof = axa * T::of(0.5);
    let det = axa.ddot(a) / T::of(6.0);
    (cof, det)
}

impl<T: Real> SymVoigt6<T> {
    /// Unpacks back to a symmetric tensor, undoing the role convention.
    pub fn to_tensor(self) -> Tensor3<T> {
        let shear = match self.role {
            VoigtRole::Stress => T::one(),
            VoigtRole::Strain => T::of(0.5),
        };
        let mut a = Tensor3::zero();
        for (k, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
            let x = if k < 3 { self.v[k] } else { shear * self.v[k] };
            a.0[i][j] = x;
            a.0[j][i] = x;
        }
        a
    }

    /// Componentwise dot product. Equals the tensor contraction `S : E`
    /// when one operand is stress-role and the other strain-role.
    pub fn dot(self, other: SymVoigt6<T>) -> T {
        let mut s = T::zero();
        for k in 0..6 {
            s += self.v[k] * other.v[k];
        }
        s
    }
}

impl<T: Real> Mat6<T> {
    pub fn zero() -> Self {
        Mat6([[T::zero(); 6]; 6])
    }

    pub fn matvec(&self, x: &[T; 6]) -> [T; 6] {
        let mut y = [T::zero(); 6];
        for i in 0..6 {
            for j in 0..6 {
                y[i] += self.0[i][j] * x[j];
            }
        }
        y
    }

    /// Accumulates `s · a bᵀ`.
    pub fn add_outer(&mut self, s: T, a: &[T; 6], b: &[T; 6]) {
        for i in 0..6 {
            for j in 0..6 {
                self.0[i][j] += s * a[i] * b[j];
            }
        }
    }

    /// Accumulates `s · M`.
    pub fn add_scaled(&mut self, s: T, m: &Mat6<T>) {
        for i in 0..6 {
            for j in 0..6 {
                self.0[i][j] += s * m.0[i][j];
            }
        }
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        let mut s = T::zero();
        for row in &self.0 {
            for &x in row {
                s += x * x;
            }
        }
        s.sqrt()
    }

    /// Largest absolute deviation from symmetry.
    pub fn asymmetry(&self) -> T {
        let mut d = T::zero();
        for i in 0..6 {
            for j in (i + 1)..6 {
                d = d.max((self.0[i][j] - self.0[j][i]).abs());
            }
        }
        d
    }
}

/// Builds the 6×6 operator matrix `D(A)` of the tensor cross product, with
/// `voigt(A∧B, stress) = D(A) · voigt(B, strain)` for all symmetric `B`.
///
/// This is the matrix through which ∧-products enter assembled tangents.
pub fn wedge_operator_matrix<T: Real>(a: Tensor3<T>) -> Result<Mat6<T>> {
    let tol = T::of(1e-12);
    if a.asymmetry() > tol * a.norm().max(T::one()) {
        return Err(Error::AsymmetricInput {
            deviation: a.asymmetry().as_f64(),
            tol: 1e-12,
        });
    }
    let half = T::of(0.5);
    let mut m = Mat6::zero();
    for (col, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        // Basis tensor with unit *strain-role* Voigt coordinate `col`.
        let mut basis = Tensor3::zero();
        if col < 3 {
            basis.0[i][j] = T::one();
        } else {
            basis.0[i][j] = half;
            basis.0[j][i] = half;
        }
        let image = cross(a, basis).to_voigt_unchecked(VoigtRole::Stress);
        for row in 0..6 {
            m.0[row][col] = image.v[row];
        }
    }
    Ok(m)
}


#[cfg(test)]
mod tests {
    use super::test_oracles::*;
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_tensor_eq(a: Tensor3, b: Tensor3, tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(a.0[i][j], b.0[i][j], epsilon = tol, max_relative = tol);
            }
        }
    }

    #[test]
    fn cross_of_identities_is_twice_identity() {
        let two_i = Tensor3::<f64>::identity() * 2.0;
        assert_eq!(cross(Tensor3::identity(), Tensor3::identity()), two_i);
    }

    #[test]
    fn cross_diagonal_against_permutation_sum() {
        let a = Tensor3::diag(1.0, 2.0, 3.0);
        let got = cross(a, Tensor3::identity());
        // Frozen from the ε-sum oracle; also equals tr(A)·I − Aᵀ.
        assert_eq!(got, Tensor3::diag(5.0, 4.0, 3.0));
        assert_tensor_eq(got, cross_eps_sum(a, Tensor3::identity()), 1e-15);
    }

    #[test]
    fn half_self_cross_is_cofactor_for_diagonal() {
        let a = Tensor3::diag(2.0, 3.0, 4.0);
        assert_eq!(cross(a, a), Tensor3::diag(12.0, 8.0, 6.0) * 2.0);
    }

    #[test]
    fn cross_matches_eps_sum_and_is_symmetric_bilinear() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = random_tensor(&mut rng);
            let b = random_tensor(&mut rng);
            assert_tensor_eq(cross(a, b), cross_eps_sum(a, b), 1e-13);
            assert_tensor_eq(cross(a, b), cross(b, a), 0.0);
        }
        // bilinearity spot check
        let a = random_tensor(&mut rng);
        let b = random_tensor(&mut rng);
        let c = random_tensor(&mut rng);
        assert_tensor_eq(cross(a + b, c), cross(a, c) + cross(b, c), 1e-14);
    }

    #[test]
    fn cyclic_exchange_of_cross_contraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = random_tensor(&mut rng);
            let b = random_tensor(&mut rng);
            let c = random_tensor(&mut rng);
            let lhs = cross(a, b).ddot(c);
            let rhs = cross(b, c).ddot(a);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-13, max_relative = 1e-13);
        }
    }

    #[test]
    fn cof_det_trivial_cases() {
        let (cof, det) = cof_det(Tensor3::<f64>::identity());
        assert_eq!(cof, Tensor3::identity());
        assert_eq!(det, 1.0);
        let (cof, det) = cof_det(Tensor3::diag(4.0, 1.0, 1.0));
        assert_eq!(cof, Tensor3::diag(1.0, 4.0, 4.0));
        assert_eq!(det, 4.0);
    }

    #[test]
    fn cof_det_against_laplace_and_minors() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let a = random_tensor(&mut rng);
            let (cof, det) = cof_det(a);
            assert_relative_eq!(det, det_laplace(a), epsilon = 1e-14, max_relative = 1e-13);
            assert_tensor_eq(cof, cof_minors(a), 1e-13);
        }
    }

    #[test]
    fn cofactor_equals_det_times_inverse_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut tested = 0;
        while tested < 200 {
            let a = random_tensor(&mut rng) + Tensor3::identity() * 2.0;
            let (cof, det) = cof_det(a);
            if det.abs() < 1e-3 {
                continue;
            }
            // reconstruct A·cof(A)ᵀ = det(A)·I (adjugate identity)
            let prod = a * cof.transpose();
            assert_tensor_eq(prod, Tensor3::identity() * det, 1e-12);
            tested += 1;
        }
    }

    #[test]
    fn voigt_round_trip_and_contraction_equivalence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let s = random_tensor(&mut rng).sym();
            let e = random_tensor(&mut rng).sym();
            let sv = s.to_voigt(VoigtRole::Stress).unwrap();
            let ev = e.to_voigt(VoigtRole::Strain).unwrap();
            assert_tensor_eq(sv.to_tensor(), s, 1e-15);
            assert_tensor_eq(ev.to_tensor(), e, 1e-15);
            // 9-term contraction oracle
            let mut direct = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    direct += s.0[i][j] * e.0[i][j];
                }
            }
            assert_relative_eq!(sv.dot(ev), direct, epsilon = 1e-14, max_relative = 1e-13);
        }
    }

    #[test]
    fn voigt_conventions_on_unit_entries() {
        let sv = Tensor3::<f64>::identity().to_voigt(VoigtRole::Stress).unwrap();
        assert_eq!(sv.v, [1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        let mut a = Tensor3::zero();
        a.0[0][1] = 1.0;
        a.0[1][0] = 1.0;
        let ev = a.to_voigt(VoigtRole::Strain).unwrap();
        assert_eq!(ev.v, [0.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn voigt_rejects_asymmetric_input() {
        let mut a = Tensor3::<f64>::identity();
        a.0[0][1] = 1e-6;
        match a.to_voigt(VoigtRole::Stress) {
            Err(Error::AsymmetricInput { .. }) => {}
            other => panic!("expected AsymmetricInput, got {other:?}"),
        }
    }

    #[test]
    fn wedge_operator_matches_cross_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let a = random_tensor(&mut rng).sym();
            let b = random_tensor(&mut rng).sym();
            let m = wedge_operator_matrix(a).unwrap();
            let via_matrix = m.matvec(&b.to_voigt(VoigtRole::Strain).unwrap().v);
            let direct = cross(a, b).to_voigt(VoigtRole::Stress).unwrap();
            for k in 0..6 {
                assert_relative_eq!(via_matrix[k], direct.v[k], epsilon = 1e-13, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn wedge_operator_of_identity_reproduces_trace_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = wedge_operator_matrix(Tensor3::<f64>::identity()).unwrap();
        let two_i = (Tensor3::<f64>::identity() * 2.0).to_voigt(VoigtRole::Stress).unwrap();
        assert_eq!(m.matvec(&Tensor3::identity().to_voigt(VoigtRole::Strain).unwrap().v), two_i.v);
        for _ in 0..50 {
            let b = random_tensor(&mut rng).sym();
            let got = m.matvec(&b.to_voigt(VoigtRole::Strain).unwrap().v);
            let expect = (Tensor3::identity() * b.trace() - b)
                .to_voigt(VoigtRole::Stress)
                .unwrap();
            for k in 0..6 {
                assert_relative_eq!(got[k], expect.v[k], epsilon = 1e-13, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn wedge_operator_is_linear_in_its_argument() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a1 = random_tensor(&mut rng).sym();
        let a2 = random_tensor(&mut rng).sym();
        let sum = wedge_operator_matrix(a1 + a2).unwrap();
        let m1 = wedge_operator_matrix(a1).unwrap();
        let m2 = wedge_operator_matrix(a2).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_relative_eq!(sum.0[i][j], m1.0[i][j] + m2.0[i][j], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let a = Tensor3::<f32>::diag(1.0, 2.0, 3.0);
        let got = cross(a, Tensor3::identity());
        assert_eq!(got, Tensor3::diag(5.0f32, 4.0, 3.0));
        let (cof, det) = cof_det(a);
        assert_eq!(det, 6.0f32);
        assert_eq!(cof, Tensor3::diag(6.0f32, 3.0, 2.0));
    }
}

//! Trilinear hexahedral elements: shape functions, Gauss quadrature,
//! B-operators, consistent mass, surface dead loads, and static/dynamic
//! residuals and tangents for the displacement-based and mixed formulations.

mod statics;
mod transient;

pub use statics::element_static;
pub use transient::element_dynamic;

use crate::error::{Error, Result};
use crate::tensor::{cof_det, Mat6, Tensor3, VoigtRole, VOIGT_PAIRS};

/// Degrees of freedom of one hexahedral element (8 nodes × 3 directions).
pub const HEX_DOF: usize = 24;

/// The available element formulations: pure displacement, and the two mixed
/// elements with constant (per-element) extra fields condensed out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    /// Displacement-based trilinear element.
    H1,
    /// 5-field mixed element with independent cofactor and volume fields.
    GjH1H0,
    /// 7-field mixed element with independent invariant fields.
    IiijH1H0,
}

/// One element of the mesh: global node indices and the formulation used to
/// evaluate it.
#[derive(Debug, Clone, Copy)]
pub struct HexElement {
    pub node_ids: [usize; 8],
    pub formulation: Formulation,
}

/// A volume quadrature point in the reference cube `[-1, 1]³`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraturePoint {
    pub xi: [f64; 3],
    pub weight: f64,
}

/// Condensed element-constant fields recovered from the displacement state.
#[derive(Debug, Clone, Copy)]
pub enum MixedInternal {
    /// Invariant fields and their multipliers for the 7-field element.
    Iiij {
        i1: f64,
        i2: f64,
        j: f64,
        lambda: [f64; 3],
    },
    /// Cofactor/volume fields and their multipliers for the 5-field element.
    Gj {
        g: Tensor3,
        j: f64,
        lambda_g: Tensor3,
        lambda_j: f64,
    },
}

/// Element residual (N) and tangent (N/m).
#[derive(Debug, Clone)]
pub struct ElementMatrices {
    pub r: [f64; HEX_DOF],
    pub k: [[f64; HEX_DOF]; HEX_DOF],
}

impl ElementMatrices {
    pub fn zero() -> Self {
        Self {
            r: [0.0; HEX_DOF],
            k: [[0.0; HEX_DOF]; HEX_DOF],
        }
    }

    /// `max |k − kᵀ| / max |k|`; 0 for exactly symmetric tangents.
    pub fn tangent_asymmetry(&self) -> f64 {
        let mut dev = 0.0f64;
        let mut scale = 0.0f64;
        for i in 0..HEX_DOF {
            for j in 0..HEX_DOF {
                dev = dev.max((self.k[i][j] - self.k[j][i]).abs());
                scale = scale.max(self.k[i][j].abs());
            }
        }
        if scale > 0.0 {
            dev / scale
        } else {
            0.0
        }
    }
}

/// Reference-cube corner coordinates in the standard hexahedron ordering
/// (bottom face counter-clockwise, then top face).
pub const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// 2×2×2 Gauss rule on the reference cube; weights sum to 8.
pub fn gauss_2x2x2() -> [QuadraturePoint; 8] {
    let g = 1.0 / 3.0f64.sqrt();
    let mut pts = [QuadraturePoint {
        xi: [0.0; 3],
        weight: 1.0,
    }; 8];
    for (i, p) in pts.iter_mut().enumerate() {
        p.xi = [
            g * HEX_CORNERS[i][0],
            g * HEX_CORNERS[i][1],
            g * HEX_CORNERS[i][2],
        ];
    }
    pts
}

/// 3×3×3 Gauss rule on the reference cube, used as a refined-quadrature
/// oracle for energy audits.
pub fn gauss_3x3x3() -> Vec<QuadraturePoint> {
    let x = (3.0f64 / 5.0).sqrt();
    let nodes = [(-x, 5.0 / 9.0), (0.0, 8.0 / 9.0), (x, 5.0 / 9.0)];
    let mut pts = Vec::with_capacity(27);
    for &(a, wa) in &nodes {
        for &(b, wb) in &nodes {
            for &(c, wc) in &nodes {
                pts.push(QuadraturePoint {
                    xi: [a, b, c],
                    weight: wa * wb * wc,
                });
            }
        }
    }
    pts
}

/// 2×2 Gauss rule on the reference square, `(ξ, η, weight)`.
pub fn gauss_2x2() -> [([f64; 2], f64); 4] {
    let g = 1.0 / 3.0f64.sqrt();
    [
        ([-g, -g], 1.0),
        ([g, -g], 1.0),
        ([g, g], 1.0),
        ([-g, g], 1.0),
    ]
}

/// Trilinear shape functions and their reference-coordinate derivatives:
/// `N_a(ξ) = ⅛ Π (1 + ξᵢ ξᵢᵃ)`.
pub fn hex_shape(xi: [f64; 3]) -> ([f64; 8], [[f64; 3]; 8]) {
    let mut n = [0.0; 8];
    let mut dn = [[0.0; 3]; 8];
    for a in 0..8 {
        let c = HEX_CORNERS[a];
        let f = [
            0.5 * (1.0 + xi[0] * c[0]),
            0.5 * (1.0 + xi[1] * c[1]),
            0.5 * (1.0 + xi[2] * c[2]),
        ];
        n[a] = f[0] * f[1] * f[2];
        dn[a][0] = 0.5 * c[0] * f[1] * f[2];
        dn[a][1] = f[0] * 0.5 * c[1] * f[2];
        dn[a][2] = f[0] * f[1] * 0.5 * c[2];
    }
    (n, dn)
}

/// Shape values, material shape gradients, and the volume measure at one
/// quadrature point of an element.
#[derive(Debug, Clone, Copy)]
pub(crate) struct QpGeometry {
    pub n: [f64; 8],
    /// `∇_X N_a` (1/m).
    pub grad_n: [[f64; 3]; 8],
    /// `det(∂X/∂ξ) · weight` (m³).
    pub dv: f64,
}

pub(crate) fn qp_geometry(coords: &[[f64; 3]; 8], qp: &QuadraturePoint) -> Result<QpGeometry> {
    let (n, dn) = hex_shape(qp.xi);
    let mut jac = Tensor3::zero();
    for a in 0..8 {
        for i in 0..3 {
            for j in 0..3 {
                jac.0[i][j] += coords[a][i] * dn[a][j];
            }
        }
    }
    let (cof, det) = cof_det(jac);
    if det <= 0.0 {
        return Err(Error::NonPositiveJacobian { det, element: None });
    }
    // ∇_X N = J⁻ᵀ ∇_ξ N with J⁻ᵀ = cof(J) / det(J).
    let mut grad_n = [[0.0; 3]; 8];
    for a in 0..8 {
        for i in 0..3 {
            grad_n[a][i] =
                (cof.0[i][0] * dn[a][0] + cof.0[i][1] * dn[a][1] + cof.0[i][2] * dn[a][2]) / det;
        }
    }
    Ok(QpGeometry {
        n,
        grad_n,
        dv: det * qp.weight,
    })
}

/// Deformation gradient `F = I + Σ_a u_a ⊗ ∇N_a` from the element
/// displacement vector.
pub(crate) fn def_grad(u: &[f64; HEX_DOF], grad_n: &[[f64; 3]; 8]) -> Tensor3 {
    let mut f = Tensor3::identity();
    for a in 0..8 {
        for i in 0..3 {
            for k in 0..3 {
                f.0[i][k] += u[3 * a + i] * grad_n[a][k];
            }
        }
    }
    f
}

/// Strain-displacement operator: `B δu = voigt(½ δC, strain)` with
/// `½ δC = sym(Fᵀ δF)`.
pub(crate) fn b_operator(f: &Tensor3, grad_n: &[[f64; 3]; 8]) -> [[f64; HEX_DOF]; 6] {
    let mut b = [[0.0; HEX_DOF]; 6];
    for (row, &(i, j)) in VOIGT_PAIRS.iter().enumerate() {
        for a in 0..8 {
            for k in 0..3 {
                let val = if i == j {
                    f.0[k][i] * grad_n[a][i]
                } else {
                    // Strain-role shear rows carry the doubled entry.
                    f.0[k][i] * grad_n[a][j] + f.0[k][j] * grad_n[a][i]
                };
                b[row][3 * a + k] = val;
            }
        }
    }
    b
}

/// `r += scale · Bᵀ s` for a stress-role Voigt vector `s`.
pub(crate) fn add_btsv(r: &mut [f64; HEX_DOF], b: &[[f64; HEX_DOF]; 6], s: &[f64; 6], scale: f64) {
    for row in 0..6 {
        let c = scale * s[row];
        for p in 0..HEX_DOF {
            r[p] += c * b[row][p];
        }
    }
}

/// `k += scale · b_leftᵀ · cc · b_right`.
pub(crate) fn add_btcb(
    k: &mut [[f64; HEX_DOF]; HEX_DOF],
    b_left: &[[f64; HEX_DOF]; 6],
    cc: &Mat6,
    b_right: &[[f64; HEX_DOF]; 6],
    scale: f64,
) {
    let mut tmp = [[0.0; HEX_DOF]; 6];
    for row in 0..6 {
        for col in 0..6 {
            let c = cc.0[row][col];
            if c != 0.0 {
                for p in 0..HEX_DOF {
                    tmp[row][p] += c * b_right[col][p];
                }
            }
        }
    }
    for p in 0..HEX_DOF {
        for row in 0..6 {
            let c = scale * b_left[row][p];
            if c != 0.0 {
                for q in 0..HEX_DOF {
                    k[p][q] += c * tmp[row][q];
                }
            }
        }
    }
}

/// Geometric stiffness `k[(a,i),(b,i)] += scale · ∇N_a · S · ∇N_b`.
pub(crate) fn add_geometric(
    k: &mut [[f64; HEX_DOF]; HEX_DOF],
    grad_n: &[[f64; 3]; 8],
    s: &Tensor3,
    scale: f64,
) {
    for a in 0..8 {
        for b in 0..8 {
            let mut gsg = 0.0;
            for p in 0..3 {
                for q in 0..3 {
                    gsg += grad_n[a][p] * s.0[p][q] * grad_n[b][q];
                }
            }
            let c = scale * gsg;
            for i in 0..3 {
                k[3 * a + i][3 * b + i] += c;
            }
        }
    }
}

/// `k += scale · u vᵀ`.
pub(crate) fn add_outer24(
    k: &mut [[f64; HEX_DOF]; HEX_DOF],
    u: &[f64; HEX_DOF],
    v: &[f64; HEX_DOF],
    scale: f64,
) {
    for p in 0..HEX_DOF {
        let c = scale * u[p];
        if c != 0.0 {
            for q in 0..HEX_DOF {
                k[p][q] += c * v[q];
            }
        }
    }
}

pub(crate) fn stress_voigt(s: &Tensor3) -> [f64; 6] {
    s.to_voigt_unchecked(VoigtRole::Stress).v
}

/// Consistent mass matrix `M_ab = ∫ ρ0 N_a N_b dV ⊗ I₃`; symmetric positive
/// semi-definite with row sums per direction totalling `ρ0 Vₑ`.
pub fn element_mass(coords: &[[f64; 3]; 8], rho0: f64) -> Result<[[f64; HEX_DOF]; HEX_DOF]> {
    if rho0 < 0.0 {
        return Err(Error::ConfigInvalid {
            detail: format!("mass density must be non-negative, got {rho0}"),
        });
    }
    let mut m = [[0.0; HEX_DOF]; HEX_DOF];
    if rho0 == 0.0 {
        return Ok(m);
    }
    for qp in gauss_2x2x2() {
        let geo = qp_geometry(coords, &qp)?;
        for a in 0..8 {
            for b in 0..8 {
                let c = rho0 * geo.n[a] * geo.n[b] * geo.dv;
                for i in 0..3 {
                    m[3 * a + i][3 * b + i] += c;
                }
            }
        }
    }
    Ok(m)
}

/// Consistent nodal forces of a dead surface traction on a bilinear quad
/// face: `f_a = ∫ N_a · amplitude · traction dA` with the 2×2 Gauss rule on
/// the reference face. The load refers to the reference area and does not
/// follow the deformation.
pub fn surface_load(
    face_coords: &[[f64; 3]; 4],
    traction: [f64; 3],
    amplitude: f64,
) -> Result<[f64; 12]> {
    const CORNERS: [[f64; 2]; 4] = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
    let mut f = [0.0; 12];
    let mut area = 0.0;
    for (xi, w) in gauss_2x2() {
        let mut n = [0.0; 4];
        let mut t1 = [0.0; 3];
        let mut t2 = [0.0; 3];
        for a in 0..4 {
            let c = CORNERS[a];
            n[a] = 0.25 * (1.0 + xi[0] * c[0]) * (1.0 + xi[1] * c[1]);
            let dn_dxi = 0.25 * c[0] * (1.0 + xi[1] * c[1]);
            let dn_deta = 0.25 * (1.0 + xi[0] * c[0]) * c[1];
            for i in 0..3 {
                t1[i] += face_coords[a][i] * dn_dxi;
                t2[i] += face_coords[a][i] * dn_deta;
            }
        }
        let normal = [
            t1[1] * t2[2] - t1[2] * t2[1],
            t1[2] * t2[0] - t1[0] * t2[2],
            t1[0] * t2[1] - t1[1] * t2[0],
        ];
        let da = (normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]).sqrt();
        area += da * w;
        for a in 0..4 {
            for i in 0..3 {
                f[3 * a + i] += n[a] * amplitude * traction[i] * da * w;
            }
        }
    }
    if area <= 1e-14 {
        return Err(Error::DegenerateFace { jacobian: area });
    }
    Ok(f)
}

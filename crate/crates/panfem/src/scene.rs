//! Benchmark scenes: structured hexahedral meshes for a box, the tapered
//! cantilever panel, and the L-shaped body, together with boundary
//! conditions, dead surface loads, and time-dependent load amplitudes.

use std::collections::BTreeMap;

use crate::element::{gauss_2x2x2, qp_geometry, HEX_DOF};
use crate::error::{Error, Result};
use crate::tensor::Tensor3;

/// Node tuples of the six local faces of a hexahedron, ordered
/// counter-clockwise when seen from outside: `−ξ, +ξ, −η, +η, −ζ, +ζ`.
pub const LOCAL_FACES: [[usize; 4]; 6] = [
    [0, 4, 7, 3],
    [1, 2, 6, 5],
    [0, 1, 5, 4],
    [3, 7, 6, 2],
    [0, 3, 2, 1],
    [4, 5, 6, 7],
];

/// A structured hexahedral mesh with named face and node sets.
#[derive(Debug, Clone)]
pub struct Mesh {
    /// Reference node positions (m).
    pub nodes: Vec<[f64; 3]>,
    /// Element connectivity in the reference corner ordering.
    pub hexes: Vec<[usize; 8]>,
    /// Named lists of `(element, local face)` pairs.
    pub face_sets: BTreeMap<String, Vec<(usize, usize)>>,
    /// Named node lists.
    pub node_sets: BTreeMap<String, Vec<usize>>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_dofs(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn element_coords(&self, e: usize) -> [[f64; 3]; 8] {
        let hex = &self.hexes[e];
        let mut coords = [[0.0; 3]; 8];
        for a in 0..8 {
            coords[a] = self.nodes[hex[a]];
        }
        coords
    }

    pub fn face_coords(&self, e: usize, face: usize) -> [[f64; 3]; 4] {
        let hex = &self.hexes[e];
        let mut coords = [[0.0; 3]; 4];
        for (slot, &local) in LOCAL_FACES[face].iter().enumerate() {
            coords[slot] = self.nodes[hex[local]];
        }
        coords
    }

    /// Global node ids of a local face.
    pub fn face_nodes(&self, e: usize, face: usize) -> [usize; 4] {
        let hex = &self.hexes[e];
        LOCAL_FACES[face].map(|local| hex[local])
    }

    /// Gathers the element displacement vector from a full dof vector.
    pub fn gather(&self, e: usize, full: &[f64]) -> [f64; HEX_DOF] {
        let hex = &self.hexes[e];
        let mut ue = [0.0; HEX_DOF];
        for a in 0..8 {
            for i in 0..3 {
                ue[3 * a + i] = full[3 * hex[a] + i];
            }
        }
        ue
    }

    /// Total reference volume by quadrature.
    pub fn volume(&self) -> Result<f64> {
        let mut v = 0.0;
        for e in 0..self.hexes.len() {
            let coords = self.element_coords(e);
            for qp in gauss_2x2x2() {
                v += qp_geometry(&coords, &qp).map_err(|err| err.with_element(e))?.dv;
            }
        }
        Ok(v)
    }

    /// Checks connectivity ranges and positive Jacobians at every quadrature
    /// point of every element.
    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        for (e, hex) in self.hexes.iter().enumerate() {
            for &id in hex {
                if id >= n {
                    return Err(Error::ConfigInvalid {
                        detail: format!("element {e} references node {id} of {n}"),
                    });
                }
            }
            let coords = self.element_coords(e);
            for qp in gauss_2x2x2() {
                qp_geometry(&coords, &qp).map_err(|err| err.with_element(e))?;
            }
        }
        for (name, faces) in &self.face_sets {
            for &(e, f) in faces {
                if e >= self.hexes.len() || f >= 6 {
                    return Err(Error::ConfigInvalid {
                        detail: format!("face set {name} entry ({e}, {f}) out of range"),
                    });
                }
            }
        }
        for (name, nodes) in &self.node_sets {
            if nodes.iter().any(|&id| id >= n) {
                return Err(Error::ConfigInvalid {
                    detail: format!("node set {name} references a node out of range"),
                });
            }
        }
        Ok(())
    }

    /// Index of the node closest to `p` (lowest index on ties).
    pub fn nearest_node(&self, p: [f64; 3]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, x) in self.nodes.iter().enumerate() {
            let d = (0..3).map(|k| (x[k] - p[k]).powi(2)).sum::<f64>();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// Time dependence of a load.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AmplitudeFn {
    /// Fixed multiplier.
    Constant(f64),
    /// Linear ramp from 0 at t = 0 to 1 at `t_end`, constant afterwards.
    Ramp { t_end: f64 },
    /// Hat pulse: `t` up to 2.5 s, `5 − t` up to 5 s, zero afterwards.
    LshapeHat,
}

impl AmplitudeFn {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            AmplitudeFn::Constant(c) => *c,
            AmplitudeFn::Ramp { t_end } => {
                if *t_end <= 0.0 {
                    1.0
                } else {
                    (t / t_end).clamp(0.0, 1.0)
                }
            }
            AmplitudeFn::LshapeHat => {
                if t <= 2.5 {
                    t
                } else if t <= 5.0 {
                    5.0 - t
                } else {
                    0.0
                }
            }
        }
    }
}

/// A dead surface traction applied to a set of element faces.
#[derive(Debug, Clone)]
pub struct NeumannLoad {
    pub faces: Vec<(usize, usize)>,
    /// Traction per reference area (Pa) at unit amplitude.
    pub traction: [f64; 3],
    pub amplitude: AmplitudeFn,
}

/// A complete boundary-value problem: mesh, constraints, loads, density, and
/// named probe nodes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: Mesh,
    /// Prescribed displacement components as `(node, direction, value)`.
    pub dirichlet: Vec<(usize, usize, f64)>,
    pub neumann: Vec<NeumannLoad>,
    /// Dead body force per reference volume (N/m³).
    pub body_force: [f64; 3],
    /// Reference mass density (kg/m³).
    pub rho0: f64,
    pub probes: BTreeMap<String, usize>,
}

impl Scene {
    /// Validates the mesh, constraint/load indices, density, and that no
    /// loaded face is fully clamped (the two boundary parts must not
    /// overlap).
    pub fn validate(&self) -> Result<()> {
        self.mesh.validate()?;
        if self.rho0 < 0.0 {
            return Err(Error::ConfigInvalid {
                detail: format!("density must be non-negative, got {}", self.rho0),
            });
        }
        let n = self.mesh.n_nodes();
        let mut clamped = vec![[false; 3]; n];
        for &(node, dir, _) in &self.dirichlet {
            if node >= n || dir >= 3 {
                return Err(Error::ConfigInvalid {
                    detail: format!("constraint ({node}, {dir}) out of range"),
                });
            }
            clamped[node][dir] = true;
        }
        for (l, load) in self.neumann.iter().enumerate() {
            for &(e, f) in &load.faces {
                if e >= self.mesh.hexes.len() || f >= 6 {
                    return Err(Error::ConfigInvalid {
                        detail: format!("load {l} face ({e}, {f}) out of range"),
                    });
                }
                let fully_clamped = self
                    .mesh
                    .face_nodes(e, f)
                    .iter()
                    .all(|&id| clamped[id].iter().all(|&c| c));
                if fully_clamped {
                    return Err(Error::ConfigInvalid {
                        detail: format!(
                            "load {l} face ({e}, {f}) lies entirely on the clamped boundary"
                        ),
                    });
                }
            }
        }
        for (name, &node) in &self.probes {
            if node >= n {
                return Err(Error::ConfigInvalid {
                    detail: format!("probe {name} references node {node} of {n}"),
                });
            }
        }
        Ok(())
    }
}

fn require_positive(value: usize, what: &str) -> Result<()> {
    if value == 0 {
        return Err(Error::ConfigInvalid {
            detail: format!("{what} must be at least 1"),
        });
    }
    Ok(())
}

/// Regular box mesh with `n = [nx, ny, nz]` cells over `size = [Lx, Ly, Lz]`.
/// Face sets: `xmin/xmax/ymin/ymax/zmin/zmax`; node set `boundary`.
pub fn box_mesh(n: [usize; 3], size: [f64; 3]) -> Result<Mesh> {
    for (k, &c) in n.iter().enumerate() {
        require_positive(c, &format!("box cell count n[{k}]"))?;
    }
    if size.iter().any(|&l| l <= 0.0) {
        return Err(Error::ConfigInvalid {
            detail: format!("box size must be positive, got {size:?}"),
        });
    }
    let [nx, ny, nz] = n;
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push([
                    size[0] * i as f64 / nx as f64,
                    size[1] * j as f64 / ny as f64,
                    size[2] * k as f64 / nz as f64,
                ]);
            }
        }
    }
    let mut hexes = Vec::with_capacity(nx * ny * nz);
    let mut face_sets: BTreeMap<String, Vec<(usize, usize)>> = BTreeMap::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let e = hexes.len();
                hexes.push([
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
                if i == 0 {
                    face_sets.entry("xmin".into()).or_default().push((e, 0));
                }
                if i == nx - 1 {
                    face_sets.entry("xmax".into()).or_default().push((e, 1));
                }
                if j == 0 {
                    face_sets.entry("ymin".into()).or_default().push((e, 2));
                }
                if j == ny - 1 {
                    face_sets.entry("ymax".into()).or_default().push((e, 3));
                }
                if k == 0 {
                    face_sets.entry("zmin".into()).or_default().push((e, 4));
                }
                if k == nz - 1 {
                    face_sets.entry("zmax".into()).or_default().push((e, 5));
                }
            }
        }
    }
    let mut boundary = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                if i == 0 || i == nx || j == 0 || j == ny || k == 0 || k == nz {
                    boundary.push(id(i, j, k));
                }
            }
        }
    }
    let mut node_sets = BTreeMap::new();
    node_sets.insert("boundary".to_string(), boundary);
    let mesh = Mesh {
        nodes,
        hexes,
        face_sets,
        node_sets,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Tapered cantilever panel: 2D profile with corners (0,0), (48,44),
/// (48,60), (0,44) in the (x,z)-plane, extruded along y over the given
/// thickness. The left edge (x = 0) is the clamped face, the right edge
/// (x = 48) the loaded face; probe node "A" sits at (48, 0, 60).
///
/// Refinement `r` gives `2r × r × 2r` cells in `x × y × z`.
pub fn cook_mesh(refine: usize, thickness: f64) -> Result<Mesh> {
    require_positive(refine, "cantilever refinement")?;
    if thickness <= 0.0 {
        return Err(Error::ConfigInvalid {
            detail: format!("thickness must be positive, got {thickness}"),
        });
    }
    let nx = 2 * refine;
    let ny = refine;
    let nz = 2 * refine;
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let xi = i as f64 / nx as f64;
                let eta = k as f64 / nz as f64;
                nodes.push([
                    48.0 * xi,
                    thickness * j as f64 / ny as f64,
                    44.0 * xi + eta * (44.0 - 28.0 * xi),
                ]);
            }
        }
    }
    let mut hexes = Vec::with_capacity(nx * ny * nz);
    let mut left = Vec::new();
    let mut right = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let e = hexes.len();
                hexes.push([
                    id(i, j, k),
                    id(i + 1, j, k),
                    id(i + 1, j + 1, k),
                    id(i, j + 1, k),
                    id(i, j, k + 1),
                    id(i + 1, j, k + 1),
                    id(i + 1, j + 1, k + 1),
                    id(i, j + 1, k + 1),
                ]);
                if i == 0 {
                    left.push((e, 0));
                }
                if i == nx - 1 {
                    right.push((e, 1));
                }
            }
        }
    }
    let mut clamp = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            clamp.push(id(0, j, k));
        }
    }
    let mut face_sets = BTreeMap::new();
    face_sets.insert("left".to_string(), left);
    face_sets.insert("right".to_string(), right);
    let mut node_sets = BTreeMap::new();
    node_sets.insert("clamp".to_string(), clamp);
    node_sets.insert("probe_a".to_string(), vec![id(nx, 0, nz)]);
    let mesh = Mesh {
        nodes,
        hexes,
        face_sets,
        node_sets,
    };
    mesh.validate()?;
    Ok(mesh)
}

/// L-shaped body: profile `[0,7]×[0,3] ∪ [0,3]×[3,6]` in the (x,y)-plane,
/// extruded along z over thickness 3 in `layers` cells. The two end faces
/// (x = 7 and y = 6) carry the opposing load pair. Refinement `r` gives
/// in-plane cells of edge `1/r`.
pub fn lshape_mesh(refine: usize, layers: usize) -> Result<Mesh> {
    require_positive(refine, "L-shape refinement")?;
    require_positive(layers, "L-shape layer count")?;
    let r = refine;
    let (ni, nj, nk) = (7 * r, 6 * r, layers);
    let in_profile_node = |i: usize, j: usize| j <= 3 * r || i <= 3 * r;
    let in_profile_cell = |i: usize, j: usize| j < 3 * r || i < 3 * r;

    let mut node_id = vec![usize::MAX; (ni + 1) * (nj + 1) * (nk + 1)];
    let grid = |i: usize, j: usize, k: usize| (k * (nj + 1) + j) * (ni + 1) + i;
    let mut nodes = Vec::new();
    for k in 0..=nk {
        for j in 0..=nj {
            for i in 0..=ni {
                if in_profile_node(i, j) {
                    node_id[grid(i, j, k)] = nodes.len();
                    nodes.push([
                        i as f64 / r as f64,
                        j as f64 / r as f64,
                        3.0 * k as f64 / nk as f64,
                    ]);
                }
            }
        }
    }
    let mut hexes = Vec::new();
    let mut end1 = Vec::new();
    let mut end2 = Vec::new();
    for k in 0..nk {
        for j in 0..nj {
            for i in 0..ni {
                if !in_profile_cell(i, j) {
                    continue;
                }
                let e = hexes.len();
                hexes.push([
                    node_id[grid(i, j, k)],
                    node_id[grid(i + 1, j, k)],
                    node_id[grid(i + 1, j + 1, k)],
                    node_id[grid(i, j + 1, k)],
                    node_id[grid(i, j, k + 1)],
                    node_id[grid(i + 1, j, k + 1)],
                    node_id[grid(i + 1, j + 1, k + 1)],
                    node_id[grid(i, j + 1, k + 1)],
                ]);
                if i == ni - 1 {
                    end1.push((e, 1));
                }
                if j == nj - 1 {
                    end2.push((e, 3));
                }
            }
        }
    }
    let mut face_sets = BTreeMap::new();
    face_sets.insert("end1".to_string(), end1);
    face_sets.insert("end2".to_string(), end2);
    let mesh = Mesh {
        nodes,
        hexes,
        face_sets,
        node_sets: BTreeMap::new(),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Clamped tapered panel with a uniform dead traction of magnitude
/// `traction` (Pa) in `+e₃` on the loaded face and probe "A" at its top
/// corner.
pub fn cook_scene(refine: usize, thickness: f64, traction: f64, rho0: f64) -> Result<Scene> {
    let mesh = cook_mesh(refine, thickness)?;
    let mut dirichlet = Vec::new();
    for &node in &mesh.node_sets["clamp"] {
        for dir in 0..3 {
            dirichlet.push((node, dir, 0.0));
        }
    }
    let neumann = vec![NeumannLoad {
        faces: mesh.face_sets["right"].clone(),
        traction: [0.0, 0.0, traction],
        amplitude: AmplitudeFn::Constant(1.0),
    }];
    let mut probes = BTreeMap::new();
    probes.insert("A".to_string(), mesh.node_sets["probe_a"][0]);
    let scene = Scene {
        mesh,
        dirichlet,
        neumann,
        body_force: [0.0; 3],
        rho0,
        probes,
    };
    scene.validate()?;
    Ok(scene)
}

/// Traction vector of the first L-shape load pair (N/m²).
pub const LSHAPE_TRACTION: [f64; 3] = [256.0 / 9.0, 512.0 / 9.0, 768.0 / 9.0];

/// Unconstrained L-shaped body with the opposing hat-pulse load pair on its
/// two end faces; free flight after the pulse ends.
pub fn lshape_scene(refine: usize, layers: usize, rho0: f64) -> Result<Scene> {
    let mesh = lshape_mesh(refine, layers)?;
    let neg = [-LSHAPE_TRACTION[0], -LSHAPE_TRACTION[1], -LSHAPE_TRACTION[2]];
    let neumann = vec![
        NeumannLoad {
            faces: mesh.face_sets["end1"].clone(),
            traction: LSHAPE_TRACTION,
            amplitude: AmplitudeFn::LshapeHat,
        },
        NeumannLoad {
            faces: mesh.face_sets["end2"].clone(),
            traction: neg,
            amplitude: AmplitudeFn::LshapeHat,
        },
    ];
    let mut probes = BTreeMap::new();
    probes.insert("tip".to_string(), mesh.nearest_node([7.0, 0.0, 0.0]));
    let scene = Scene {
        mesh,
        dirichlet: Vec::new(),
        neumann,
        body_force: [0.0; 3],
        rho0,
        probes,
    };
    scene.validate()?;
    Ok(scene)
}

/// Unit-box patch scene: the affine displacement `u = (F₀ − I)X` is
/// prescribed on every boundary node; interior nodes are free.
pub fn box_patch_scene(n: usize, f0: &Tensor3, size: f64) -> Result<Scene> {
    let mesh = box_mesh([n, n, n], [size, size, size])?;
    let mut dirichlet = Vec::new();
    for &node in &mesh.node_sets["boundary"] {
        let x = mesh.nodes[node];
        for dir in 0..3 {
            let mut value = 0.0;
            for j in 0..3 {
                value += (f0.0[dir][j] - ((dir == j) as usize as f64)) * x[j];
            }
            dirichlet.push((node, dir, value));
        }
    }
    let scene = Scene {
        mesh,
        dirichlet,
        neumann: Vec::new(),
        body_force: [0.0; 3],
        rho0: 0.0,
        probes: BTreeMap::new(),
    };
    scene.validate()?;
    Ok(scene)
}

/// Fully unconstrained box (free-vibration and conservation tests).
pub fn free_box_scene(n: [usize; 3], size: [f64; 3], rho0: f64) -> Result<Scene> {
    let mesh = box_mesh(n, size)?;
    let scene = Scene {
        mesh,
        dirichlet: Vec::new(),
        neumann: Vec::new(),
        body_force: [0.0; 3],
        rho0,
        probes: BTreeMap::new(),
    };
    scene.validate()?;
    Ok(scene)
}

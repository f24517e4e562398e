//! Structure-preserving nonlinear finite elements for hyperelastic solids:
//! invariant-based constitutive models (Mooney-Rivlin and a physics-augmented
//! neural network), locking-free mixed hexahedral elements, and an
//! energy-momentum time integrator built on partitioned discrete gradients.

// Index loops mirror the tensor-component notation throughout the numerics;
// iterator rewrites would obscure which slot is being contracted.
#![allow(clippy::needless_range_loop)]

pub mod calibration;
pub mod diagnostics;
pub mod dynamics;
pub mod element;
pub mod error;
pub mod kinematics;
pub mod material;
pub mod real;
pub mod tensor;

pub use calibration::{
    calibration_set, gen_loadcase, loss_gradient, sobolev_loss, train_adam, Dataset, DatasetLabel,
    LoadCase, LossGrad, StrainStressSample, TrainConfig,
};
pub use diagnostics::{
    audit_quantities, fd_check, internal_energy_refined, linear_momentum, FdReport, FdTarget,
    StepAudit,
};
pub use dynamics::{
    algo_stress, greenspan_dg, midpoint_stress, DiscreteGradients, DynamicState, IntegratorKind,
};
pub use element::{
    element_dynamic, element_mass, element_static, surface_load, ElementMatrices, Formulation,
    HexElement, MixedInternal, HEX_DOF,
};
pub mod scene;
pub use scene::{
    box_mesh, box_patch_scene, cook_mesh, cook_scene, free_box_scene, lshape_mesh, lshape_scene,
    AmplitudeFn, Mesh, NeumannLoad, Scene, LOCAL_FACES, LSHAPE_TRACTION,
};
pub mod solver;
pub use solver::{
    assemble, assemble_mass, external_force_at, external_force_components,
    external_force_reference, newton, pin_linear_algebra_threads, probe_displacement,
    static_driver, DofMap, GlobalSystem, LoadSchedule, NewtonConfig, NewtonReport, StaticStep,
};
pub use error::{Error, Result};
pub use kinematics::{
    algo_kinematics, generators, invariants, strain_measures, AlgoKinematics, GeneratorSet,
    InvariantQuad, InvariantTriple,
};
pub use material::{
    material_tangent, nn_eval, pk2, Material, MaterialResponse, MrModel, MrParams, PannModel,
    PannParams,
};
pub use real::Real;
pub use tensor::{cof_det, cross, wedge_operator_matrix, Mat6, SymVoigt6, Tensor3, VoigtRole};

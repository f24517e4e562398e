//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A deformation state reached `det F <= 0` (element inversion).
    #[error("non-positive Jacobian determinant {det:.6e}{}", ctx(.element))]
    NonPositiveJacobian {
        det: f64,
        /// Element index when the failure happened inside an element loop.
        element: Option<usize>,
    },

    /// A matrix that must be symmetric for Voigt packing was not.
    #[error("matrix is not symmetric to relative tolerance {tol:.1e} (max deviation {deviation:.6e})")]
    AsymmetricInput { deviation: f64, tol: f64 },

    /// A network weight that must be non-negative was negative.
    #[error("negative weight {value:.6e} at {location}; polyconvexity requires w1, w2 >= 0")]
    NegativeWeight { value: f64, location: String },

    /// The lateral-stretch root solve for a loading path failed to bracket
    /// or converge.
    #[error("lateral stretch solve failed for {path} at parameter {parameter:.6}: {reason}")]
    RootFindFailure {
        path: String,
        parameter: f64,
        reason: String,
    },

    /// The calibration loss became non-finite.
    #[error("calibration loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    /// Newton's method exhausted its iteration budget.
    #[error("Newton solve did not converge within {max_iter} iterations (last residual {residual:.6e}{})", ctx(.step))]
    NewtonDiverged {
        max_iter: usize,
        residual: f64,
        /// Load step or time step index when driven by a driver.
        step: Option<usize>,
    },

    /// The linearized system could not be factorized.
    #[error("singular tangent matrix: {detail}")]
    SingularMatrix { detail: String },

    /// A boundary face with non-positive surface Jacobian.
    #[error("degenerate surface face (Jacobian {jacobian:.6e})")]
    DegenerateFace { jacobian: f64 },

    /// A non-positive time step or end time.
    #[error("degenerate time step: {detail}")]
    DegenerateTimeStep { detail: String },

    /// An invalid run or scene configuration.
    #[error("invalid configuration: {detail}")]
    ConfigInvalid { detail: String },

    /// A weights file with an unsupported schema or malformed arrays.
    #[error("weights file schema mismatch: {detail}")]
    SchemaMismatch { detail: String },

    /// Stored normalization audit values disagree with the recomputed ones.
    #[error("weights file normalization mismatch: stored {stored:.17e}, recomputed {recomputed:.17e} for {field}")]
    NormalizationMismatch {
        field: String,
        stored: f64,
        recomputed: f64,
    },

    /// Underlying I/O failure.
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn ctx(idx: &Option<usize>) -> String {
    match idx {
        Some(i) => format!(" (at index {i})"),
        None => String::new(),
    }
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Attaches an element index to errors raised inside element loops.
    pub fn with_element(self, element: usize) -> Self {
        match self {
            Error::NonPositiveJacobian { det, .. } => Error::NonPositiveJacobian {
                det,
                element: Some(element),
            },
            other => other,
        }
    }

    /// Attaches a step index to Newton failures raised inside drivers.
    pub fn with_step(self, index: usize) -> Self {
        match self {
            Error::NewtonDiverged {
                max_iter, residual, ..
            } => Error::NewtonDiverged {
                max_iter,
                residual,
                step: Some(index),
            },
            other => other,
        }
    }
}

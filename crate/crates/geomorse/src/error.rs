//! Error taxonomy shared by every module of the crate.
//!
//! Errors fall into three classes which the command line layer maps to
//! process exit codes: violated preconditions on the input data
//! ([`ErrorClass::Precondition`]), numerical failures detected while a
//! computation runs ([`ErrorClass::Numerical`]) and malformed input
//! ([`ErrorClass::Input`]).

use thiserror::Error;

/// Coarse classification of an [`Error`], used for exit-code mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input data violates a documented precondition.
    Precondition,
    /// A numerical guard tripped during the computation.
    Numerical,
    /// The input itself could not be interpreted.
    Input,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("signature mismatch: metric at {point:?} has signature ({n_plus},{n_minus}), expected {expected}")]
    SignatureMismatch {
        point: Vec<f64>,
        n_plus: usize,
        n_minus: usize,
        expected: String,
    },

    #[error("point {point:?} leaves the chart domain: {detail}")]
    DomainError { point: Vec<f64>, detail: String },

    #[error("vector {vector:?} is not normal to the submanifold at the given point (residual {residual:.3e})")]
    NotNormal { vector: Vec<f64>, residual: f64 },

    #[error("vector {vector:?} is not tangent to the submanifold at the given point (residual {residual:.3e})")]
    NotTangent { vector: Vec<f64>, residual: f64 },

    #[error("metric restricted to the submanifold tangent space is degenerate (|det| = {det:.3e})")]
    DegenerateTangentMetric { det: f64 },

    #[error("geodesic energy drifted by {drift:.3e} (limit {limit:.3e}); raise the step count")]
    EnergyDriftError { drift: f64, limit: f64 },

    #[error("causal character changes along the curve: {detail}")]
    InconsistentCharacter { detail: String },

    #[error("frame seed vectors are linearly dependent (min singular value {sigma_min:.3e})")]
    DependentSeed { sigma_min: f64 },

    #[error("initial velocity lies in the submanifold tangent space; every point of the geodesic is focal")]
    DegenerateInitialCondition,

    #[error("field is not orthogonal where required (residual {residual:.3e})")]
    NotOrthogonal { residual: f64 },

    #[error("focal point accumulation suspected: {count} candidates inside a window of length {window:.3e}")]
    AccumulationSuspected { count: usize, window: f64 },

    #[error("boundary value problem endpoints are conjugate (condition number {cond:.3e})")]
    ConjugateEndpoints { cond: f64 },

    #[error("fields are sampled on different grids: {detail}")]
    GridMismatch { detail: String },

    #[error("field endpoint value is not tangent to the boundary submanifold (residual {residual:.3e})")]
    BoundaryNotTangent { residual: f64 },

    #[error("no certified partition with at most {max_intervals} intervals: {detail}")]
    PartitionFailure {
        max_intervals: usize,
        detail: String,
    },

    #[error("boundary submanifold tangent space is not spanned by endpoint values of the Jacobi solution space (residual {residual:.3e})")]
    SpanDeficiency { residual: f64 },

    #[error("index computation is not supported for {character} geodesics in a Lorentzian manifold")]
    UnsupportedCausalCharacter { character: String },

    #[error("focal points present on the interval: minimality comparison requires a focal-free geodesic")]
    FocalPresent,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    /// Stable machine-readable code for reports and scripting.
    pub fn code(&self) -> &'static str {
        match self {
            Error::SignatureMismatch { .. } => "SIGNATURE_MISMATCH",
            Error::DomainError { .. } => "DOMAIN_ERROR",
            Error::NotNormal { .. } => "NOT_NORMAL",
            Error::NotTangent { .. } => "NOT_TANGENT",
            Error::DegenerateTangentMetric { .. } => "DEGENERATE_TANGENT_METRIC",
            Error::EnergyDriftError { .. } => "ENERGY_DRIFT",
            Error::InconsistentCharacter { .. } => "INCONSISTENT_CHARACTER",
            Error::DependentSeed { .. } => "DEPENDENT_SEED",
            Error::DegenerateInitialCondition => "DEGENERATE_INITIAL_CONDITION",
            Error::NotOrthogonal { .. } => "NOT_ORTHOGONAL",
            Error::AccumulationSuspected { .. } => "ACCUMULATION_SUSPECTED",
            Error::ConjugateEndpoints { .. } => "CONJUGATE_ENDPOINTS",
            Error::GridMismatch { .. } => "GRID_MISMATCH",
            Error::BoundaryNotTangent { .. } => "BOUNDARY_NOT_TANGENT",
            Error::PartitionFailure { .. } => "PARTITION_FAILURE",
            Error::SpanDeficiency { .. } => "SPAN_DEFICIENCY",
            Error::UnsupportedCausalCharacter { .. } => "UNSUPPORTED_CAUSAL_CHARACTER",
            Error::FocalPresent => "FOCAL_PRESENT",
            Error::InvalidInput(_) => "INVALID_INPUT",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SignatureMismatch { .. }
            | Error::NotNormal { .. }
            | Error::NotTangent { .. }
            | Error::DegenerateTangentMetric { .. }
            | Error::DegenerateInitialCondition
            | Error::NotOrthogonal { .. }
            | Error::DependentSeed { .. }
            | Error::BoundaryNotTangent { .. }
            | Error::SpanDeficiency { .. }
            | Error::UnsupportedCausalCharacter { .. }
            | Error::FocalPresent => ErrorClass::Precondition,

            Error::DomainError { .. }
            | Error::EnergyDriftError { .. }
            | Error::InconsistentCharacter { .. }
            | Error::AccumulationSuspected { .. }
            | Error::ConjugateEndpoints { .. }
            | Error::GridMismatch { .. }
            | Error::PartitionFailure { .. } => ErrorClass::Numerical,

            Error::InvalidInput(_) => ErrorClass::Input,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

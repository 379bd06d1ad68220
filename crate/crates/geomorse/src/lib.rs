//! Focal points, Morse indices and boundary index forms of geodesics in
//! semi-Riemannian manifolds.
//!
//! The crate computes, for a geodesic `gamma: [a, b] -> M` leaving a
//! submanifold `P` orthogonally:
//!
//! * the variational index form `I(V, W)` on piecewise-smooth fields with
//!   endpoints constrained to `P` (and optionally to a second submanifold
//!   `Q` at `b`),
//! * focal points of `P` along `gamma`, their multiplicities and the
//!   associated Morse index, obtained from a finite-dimensional reduction
//!   of the form to spaces of piecewise Jacobi fields,
//! * the endpoint boundary form that splits the two-endpoint index into a
//!   fixed-endpoint part and a boundary part,
//! * an independent dense finite-element discretization used as an oracle
//!   to cross-check every index computed by the reduction.
//!
//! Geometry is chart-based: a manifold is a coordinate box with a metric
//! of Riemannian or Lorentzian signature, and geodesics, parallel frames
//! and Jacobi fields are integrated numerically with a fixed-step
//! fourth-order Runge-Kutta scheme.

pub mod error;
pub mod geodesic;
pub mod geometry;
pub mod indexform;
pub mod inertia;
pub mod jacobi;
pub(crate) mod numeric;
pub mod oracle;

pub use error::{Error, ErrorClass, Result};
pub use geodesic::{
    full_frame_seed, integrate_geodesic, orthonormal_complement_seed, parallel_frame,
    CausalCharacter, Geodesic, ParallelFrame,
};
pub use geometry::{Manifold, Signature, Submanifold};
pub use indexform::{
    boundary_form, default_index_grid, detect_focal_points, discrete_index_form, index_form_value,
    index_form_two_endpoint_value, index_function, kernel_nullity, morse_index, normal_partition,
    two_endpoint_index, BoundaryForm, DiscreteForm, KernelNullity, MorseIndex, NormalPartition,
    PiecewiseField, TwoEndpointIndex, INERTIA_TOL_DEFAULT,
};
pub use inertia::{symmetric_inertia, FormInertia};
pub use jacobi::{
    conjugate_points, focal_points, full_jacobi_basis, jacobi_bvp, jacobi_propagate,
    orthogonal_jacobi_basis, FocalPoint, JacobiArc, JacobiBasis, RANK_TOL_DEFAULT,
};
pub use oracle::{
    dense_discretization, dense_index_oracle, minimality_check, stabilized_dense_index,
    DenseDiscretization, MinimalityReport,
};

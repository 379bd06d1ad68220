//! The index form of the geodesic variational problem and its
//! finite-dimensional reductions: quadrature evaluation on piecewise
//! fields, certified partitions, the discrete jump-term form, endpoint
//! contributions, and index counts.

pub mod boundary;
pub mod field;
pub mod partition;
pub mod reduction;

pub use boundary::{boundary_form, two_endpoint_index, BoundaryForm, TwoEndpointIndex};
pub use field::{index_form_two_endpoint_value, index_form_value, CoefFn, PiecewiseField};
pub use partition::{normal_partition, NormalPartition};
pub use reduction::{
    default_index_grid, detect_focal_points, discrete_index_form, index_function, inertia,
    kernel_nullity, morse_index, DiscreteForm, KernelNullity, MorseIndex, INERTIA_TOL_DEFAULT,
};

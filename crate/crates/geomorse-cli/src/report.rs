//! JSON report emitted on stdout.
//!
//! Field order is fixed by the struct declarations and floats are printed
//! in shortest round-trip form, so a given config and crate version always
//! produces byte-identical output.

use geomorse::{BoundaryForm, FocalPoint, FormInertia};
use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InertiaTriple {
    pub n_plus: usize,
    pub n_zero: usize,
    pub n_minus: usize,
}

impl From<&FormInertia> for InertiaTriple {
    fn from(f: &FormInertia) -> Self {
        InertiaTriple {
            n_plus: f.n_plus,
            n_zero: f.n_zero,
            n_minus: f.n_minus,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FocalEntry {
    pub t: f64,
    pub multiplicity: usize,
}

impl From<&FocalPoint> for FocalEntry {
    fn from(f: &FocalPoint) -> Self {
        FocalEntry {
            t: f.t,
            multiplicity: f.multiplicity,
        }
    }
}

/// Variational index against the interior focal count.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct IndexBlock {
    pub index: usize,
    pub focal_sum: usize,
    pub matches: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CurveSample {
    pub t: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoEndpointBlock {
    pub total: usize,
    pub fixed_part: usize,
    pub boundary_part: usize,
    pub endpoint_form: Vec<Vec<f64>>,
    pub endpoint_inertia: InertiaTriple,
}

impl TwoEndpointBlock {
    pub fn new(fixed: usize, boundary: &BoundaryForm) -> Self {
        let rows = boundary.matrix.nrows();
        let endpoint_form = (0..rows)
            .map(|i| boundary.matrix.row(i).iter().copied().collect())
            .collect();
        TwoEndpointBlock {
            total: fixed + boundary.inertia.n_minus,
            fixed_part: fixed,
            boundary_part: boundary.inertia.n_minus,
            endpoint_form,
            endpoint_inertia: (&boundary.inertia).into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MinimalityBlock {
    pub trials: usize,
    pub min_gap: f64,
    pub passed: bool,
}

/// Comparison of the reduction result against the dense quadratic form
/// discretization.
#[derive(Debug, Clone, Serialize)]
pub struct OracleBlock {
    pub reference_index: usize,
    pub mesh: usize,
    pub stabilized: bool,
    pub dense: InertiaTriple,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub minimality: Option<MinimalityBlock>,
    pub matches: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub command: &'static str,
    pub causal_character: &'static str,
    pub energy_drift: f64,
    pub focal_points: Vec<FocalEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morse_index: Option<IndexBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index_curve: Option<Vec<CurveSample>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_endpoint: Option<TwoEndpointBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
    pub matches: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    class: &'a str,
    message: String,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    version: &'static str,
    error: ErrorBody<'a>,
}

/// Error reports replace the regular report on stdout; no partial result
/// is emitted.
pub fn error_json(err: &CliError) -> String {
    let body = ErrorReport {
        version: VERSION,
        error: ErrorBody {
            code: err.code(),
            class: err.class_name(),
            message: err.to_string(),
        },
    };
    serde_json::to_string_pretty(&body).expect("error serialization cannot fail")
}

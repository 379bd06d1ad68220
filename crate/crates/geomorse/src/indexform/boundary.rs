//! Endpoint contribution for geodesics meeting a target submanifold: a
//! symmetric form on the Jacobi fields whose endpoint values are tangent to
//! the target, and the split of the two-endpoint index it induces.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geodesic::Geodesic;
use crate::geometry::Submanifold;
use crate::inertia::{symmetric_inertia, FormInertia};
use crate::jacobi::{full_jacobi_basis, JacobiBasis, RANK_TOL_DEFAULT};
use crate::numeric::{kernel_basis, least_squares, span_projector};

use super::reduction::{morse_index, INERTIA_TOL_DEFAULT};

const CONTACT_TOL: f64 = 1e-8;
const SPAN_TOL: f64 = 1e-6;
const SYMMETRY_TOL: f64 = 1e-8;

/// The endpoint form on adapted Jacobi fields with target-tangent end
/// values: second fundamental form of the target plus the derivative
/// pairing at the endpoint.
#[derive(Clone, Debug)]
pub struct BoundaryForm {
    pub matrix: DMatrix<f64>,
    pub inertia: FormInertia,
    /// Columns: coefficient vectors in the full adapted basis spanning the
    /// admissible Jacobi fields.
    pub coefficients: DMatrix<f64>,
}

fn endpoint_states(basis: &JacobiBasis, geo: &Geodesic) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = geo.steps();
    (
        basis.values_at_node(n).clone(),
        basis.derivs_at_node(n).clone(),
    )
}

/// Assemble the endpoint form for initial data on `p` and target `q`.
///
/// The admissible space is found inside the full adapted basis by solving
/// for combinations whose endpoint value is tangent to the target; vanishing
/// endpoint values are admissible as well and land in the kernel.
pub fn boundary_form(
    geo: &Geodesic,
    p: (&Submanifold, &[f64]),
    q: (&Submanifold, &[f64]),
    tol: f64,
) -> Result<BoundaryForm> {
    super::reduction::causal_support_check(geo)?;
    let (sub_q, uq) = q;
    let m = geo.dim();
    let end = geo.position(geo.steps());
    let fq = sub_q.point_at(uq);
    let contact: f64 = (0..m)
        .map(|i| (end[i] - fq[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = end.norm().max(1.0);
    if contact > CONTACT_TOL * scale {
        return Err(Error::InvalidInput(format!(
            "target contact point is {contact:.3e} away from the geodesic endpoint"
        )));
    }
    let basis = full_jacobi_basis(geo, p.0, p.1)?;
    let (j_b, k_b) = endpoint_states(&basis, geo);
    if sub_q.dim() == 0 {
        return Ok(BoundaryForm {
            matrix: DMatrix::zeros(0, 0),
            inertia: symmetric_inertia(&DMatrix::zeros(0, 0), tol),
            coefficients: DMatrix::zeros(m, 0),
        });
    }
    let q_basis = sub_q.tangent_basis(uq);
    // Span test against the numerically significant endpoint directions:
    // singular directions below the focal rank cutoff count as vanished.
    let j_svd = j_b.clone().svd(true, false);
    let u = j_svd.u.as_ref().expect("left singular vectors requested");
    let sigma_max = j_svd.singular_values.max();
    let mut span = DMatrix::zeros(m, m);
    for i in 0..j_svd.singular_values.len() {
        if j_svd.singular_values[i] > RANK_TOL_DEFAULT * sigma_max {
            let ui = u.column(i).clone_owned();
            span += &ui * ui.transpose();
        }
    }
    for a in 0..q_basis.ncols() {
        let col = q_basis.column(a).clone_owned();
        let residual = (&col - &span * &col).norm();
        if residual > SPAN_TOL * col.norm().max(1.0) {
            return Err(Error::SpanDeficiency { residual });
        }
    }
    let projector = span_projector(&q_basis);
    let conditions = (DMatrix::identity(m, m) - projector) * &j_b;
    let coeff_vectors = kernel_basis(&conditions);
    if coeff_vectors.len() < sub_q.dim() {
        return Err(Error::SpanDeficiency {
            residual: (sub_q.dim() - coeff_vectors.len()) as f64,
        });
    }
    let dim = coeff_vectors.len();
    let mut coefficients = DMatrix::zeros(m, dim);
    for (i, c) in coeff_vectors.iter().enumerate() {
        coefficients.set_column(i, c);
    }
    let values = &j_b * &coefficients;
    let derivs = &k_b * &coefficients;
    let g_b = geo.metric_at_node(geo.steps());
    let shape = sub_q.form_matrix(geo.manifold(), uq, geo.velocity(geo.steps()))?;
    // Tangent coordinates of each endpoint value; vanishing values get
    // (numerically) zero coordinates.
    let mut tangent_coords = DMatrix::zeros(sub_q.dim(), dim);
    for i in 0..dim {
        let v = values.column(i).clone_owned();
        let (alpha, _) = least_squares(&q_basis, &v)?;
        tangent_coords.set_column(i, &alpha);
    }
    let shape_part = tangent_coords.transpose() * shape * &tangent_coords;
    let deriv_part = derivs.transpose() * g_b * &values;
    let mut matrix = shape_part + deriv_part;
    let scale = matrix.amax().max(1.0);
    let asym = (&matrix - matrix.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InconsistentCharacter {
            detail: format!("endpoint form asymmetric by {asym:.3e}"),
        });
    }
    matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(BoundaryForm {
        inertia: symmetric_inertia(&matrix, tol),
        matrix,
        coefficients,
    })
}

/// Index decomposition for the two-endpoint problem: the fixed-endpoint
/// index plus the negative directions of the endpoint form.
#[derive(Clone, Copy, Debug)]
pub struct TwoEndpointIndex {
    pub total: usize,
    pub fixed_part: usize,
    pub boundary_part: usize,
}

pub fn two_endpoint_index(
    geo: &Geodesic,
    p: (&Submanifold, &[f64]),
    q: (&Submanifold, &[f64]),
) -> Result<TwoEndpointIndex> {
    let fixed = morse_index(geo, p.0, p.1)?;
    let boundary = boundary_form(geo, p, q, INERTIA_TOL_DEFAULT)?;
    Ok(TwoEndpointIndex {
        total: fixed.index + boundary.inertia.n_minus,
        fixed_part: fixed.index,
        boundary_part: boundary.inertia.n_minus,
    })
}

//! Brute-force verification of index counts by a dense finite-element
//! discretization of the variational form, built without the Jacobi or
//! partition machinery: continuous piecewise-linear coefficient fields in
//! the parallel frame, assembled per element.

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::geodesic::{orthonormal_complement_seed, parallel_frame, Geodesic, ParallelFrame};
use crate::geometry::Submanifold;
use crate::indexform::reduction::causal_support_check;
use crate::indexform::detect_focal_points;
use crate::inertia::{symmetric_inertia, FormInertia};
use crate::jacobi::orthogonal_jacobi_basis;
use crate::numeric::least_squares;

pub const MESH_MIN: usize = 32;
pub const MESH_MAX: usize = 512;
const SYMMETRY_TOL: f64 = 1e-10;
/// Allowed undershoot of the minimality gap before a trial counts as failed.
pub const MINIMALITY_SLACK: f64 = 1e-7;

const GAUSS3: [(f64, f64); 3] = [
    (-0.7745966692414834, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.7745966692414834, 5.0 / 9.0),
];

/// Dense Gram matrix of the index form on hat functions tensored with the
/// velocity-orthogonal parallel frame, with endpoint nodes constrained to
/// the admissible tangent spaces.
#[derive(Clone, Debug)]
pub struct DenseDiscretization {
    mesh: usize,
    matrix: DMatrix<f64>,
}

impl DenseDiscretization {
    pub fn mesh(&self) -> usize {
        self.mesh
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dof(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inertia(&self, tol: f64) -> FormInertia {
        symmetric_inertia(&self.matrix, tol)
    }
}

/// Frame coordinates of each tangent basis vector of `sub` at a geodesic
/// endpoint; fails when the tangent space leaves the orthogonal complement
/// of the velocity.
fn tangent_frame_coords(
    frame_at: &DMatrix<f64>,
    sub: &Submanifold,
    u: &[f64],
) -> Result<DMatrix<f64>> {
    let k = sub.dim();
    let mut coords = DMatrix::zeros(frame_at.ncols(), k);
    if k == 0 {
        return Ok(coords);
    }
    let basis = sub.tangent_basis(u);
    for a in 0..k {
        let col = basis.column(a).clone_owned();
        let (c, residual) = least_squares(frame_at, &col)?;
        if residual > 1e-6 * col.norm().max(1.0) {
            return Err(Error::NotOrthogonal { residual });
        }
        coords.set_column(a, &c);
    }
    Ok(coords)
}

fn check_contact(geo: &Geodesic, sub: &Submanifold, u: &[f64], node: usize) -> Result<()> {
    let x = geo.position(node);
    let f = sub.point_at(u);
    let dist: f64 = (0..x.len())
        .map(|i| (x[i] - f[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    if dist > 1e-8 * x.norm().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "submanifold contact point is {dist:.3e} away from the geodesic"
        )));
    }
    Ok(())
}

/// Per-element data shared by the matrix assembly and by direct evaluation
/// of the form on coefficient paths.
struct ElementData {
    h: f64,
    gram: DMatrix<f64>,
    /// Curvature pairing `C(t) = E^T R(v, E .)v-paired-with-g E` at the
    /// three Gauss points of each element.
    curvature: Vec<[DMatrix<f64>; 3]>,
}

fn element_data(geo: &Geodesic, frame: &ParallelFrame, mesh: usize) -> Result<ElementData> {
    let (a, b) = geo.interval();
    let h = (b - a) / mesh as f64;
    let e0 = frame.at_node(0);
    let g0 = geo.metric_at_node(0);
    let gram = e0.transpose() * g0 * e0;
    let mut curvature = Vec::with_capacity(mesh);
    for e in 0..mesh {
        let mid = a + h * (e as f64 + 0.5);
        let mut mats = Vec::with_capacity(3);
        for (x, _) in GAUSS3 {
            let t = mid + 0.5 * h * x;
            let frame_t = frame.at_time(t);
            let g = geo.metric_at_time(t)?;
            let tidal = geo.tidal_at(t);
            mats.push(frame_t.transpose() * tidal.transpose() * g * &frame_t);
        }
        let arr: [DMatrix<f64>; 3] = mats.try_into().expect("three Gauss points");
        curvature.push(arr);
    }
    Ok(ElementData { h, gram, curvature })
}

/// Hat-product curvature integrals over element `e`:
/// `(int phi_e^2 C, int phi_e phi_{e+1} C, int phi_{e+1}^2 C)`.
fn element_curvature_blocks(
    data: &ElementData,
    e: usize,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = data.gram.nrows();
    let mut ll = DMatrix::zeros(n, n);
    let mut lr = DMatrix::zeros(n, n);
    let mut rr = DMatrix::zeros(n, n);
    for (q, (x, w)) in GAUSS3.iter().enumerate() {
        let lam = 0.5 * (x + 1.0);
        let scale = w * 0.5 * data.h;
        let c = &data.curvature[e][q];
        ll += c * (scale * (1.0 - lam) * (1.0 - lam));
        lr += c * (scale * (1.0 - lam) * lam);
        rr += c * (scale * lam * lam);
    }
    (ll, lr, rr)
}

/// Assemble the dense form for initial submanifold `p` and optional target
/// `q` on a uniform mesh with `mesh` elements.
pub fn dense_discretization(
    geo: &Geodesic,
    p: (&Submanifold, &[f64]),
    q: Option<(&Submanifold, &[f64])>,
    mesh: usize,
) -> Result<DenseDiscretization> {
    if mesh < MESH_MIN {
        return Err(Error::InvalidInput(format!(
            "mesh must have at least {MESH_MIN} elements, got {mesh}"
        )));
    }
    causal_support_check(geo)?;
    let seed = orthonormal_complement_seed(geo)?;
    let frame = parallel_frame(geo, &seed)?;
    let width = frame.count();
    let data = element_data(geo, &frame, mesh)?;
    let (sub_p, up) = p;
    check_contact(geo, sub_p, up, 0)?;
    let p_dirs = tangent_frame_coords(frame.at_node(0), sub_p, up)?;
    let s_p = if sub_p.dim() > 0 {
        sub_p.form_matrix(geo.manifold(), up, geo.velocity(0))?
    } else {
        DMatrix::zeros(0, 0)
    };
    let (q_dirs, s_q) = match q {
        Some((sub_q, uq)) => {
            check_contact(geo, sub_q, uq, geo.steps())?;
            let dirs = tangent_frame_coords(frame.at_node(geo.steps()), sub_q, uq)?;
            let s = if sub_q.dim() > 0 {
                sub_q.form_matrix(geo.manifold(), uq, geo.velocity(geo.steps()))?
            } else {
                DMatrix::zeros(0, 0)
            };
            (dirs, s)
        }
        None => (DMatrix::zeros(width, 0), DMatrix::zeros(0, 0)),
    };

    // Node coefficient spaces: tangent directions at the ends, the full
    // frame at interior nodes.
    let identity = DMatrix::identity(width, width);
    let node_dirs = |k: usize| -> &DMatrix<f64> {
        if k == 0 {
            &p_dirs
        } else if k == mesh {
            &q_dirs
        } else {
            &identity
        }
    };
    let mut offsets = Vec::with_capacity(mesh + 1);
    let mut total = 0;
    for k in 0..=mesh {
        offsets.push(total);
        total += node_dirs(k).ncols();
    }
    let mut matrix = DMatrix::zeros(total, total);
    let add_block = |mat: &mut DMatrix<f64>, k: usize, l: usize, block: &DMatrix<f64>| {
        let dk = node_dirs(k);
        let dl = node_dirs(l);
        if dk.ncols() == 0 || dl.ncols() == 0 {
            return;
        }
        let projected = dk.transpose() * block * dl;
        for r in 0..projected.nrows() {
            for c in 0..projected.ncols() {
                mat[(offsets[k] + r, offsets[l] + c)] += projected[(r, c)];
                if k != l {
                    mat[(offsets[l] + c, offsets[k] + r)] += projected[(r, c)];
                }
            }
        }
    };
    let stiff = &data.gram / data.h;
    for e in 0..mesh {
        let (ll, lr, rr) = element_curvature_blocks(&data, e);
        add_block(&mut matrix, e, e, &(&stiff + ll));
        add_block(&mut matrix, e, e + 1, &(lr - &stiff));
        add_block(&mut matrix, e + 1, e + 1, &(&stiff + rr));
    }
    // Boundary terms live directly in tangent coordinates.
    for i in 0..s_p.nrows() {
        for j in 0..s_p.ncols() {
            matrix[(i, j)] -= s_p[(i, j)];
        }
    }
    let qo = offsets[mesh];
    for i in 0..s_q.nrows() {
        for j in 0..s_q.ncols() {
            matrix[(qo + i, qo + j)] += s_q[(i, j)];
        }
    }
    let scale = matrix.amax().max(1.0);
    let asym = (&matrix - matrix.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InconsistentCharacter {
            detail: format!("dense form asymmetric by {asym:.3e}"),
        });
    }
    let matrix = (&matrix + matrix.transpose()) * 0.5;
    Ok(DenseDiscretization { mesh, matrix })
}

/// Inertia of the dense form; `n_minus` bounds the true index from below
/// and reaches it once the mesh resolves every negative direction.
pub fn dense_index_oracle(
    geo: &Geodesic,
    p: (&Submanifold, &[f64]),
    q: Option<(&Submanifold, &[f64])>,
    mesh: usize,
) -> Result<FormInertia> {
    Ok(dense_discretization(geo, p, q, mesh)?.inertia(crate::indexform::INERTIA_TOL_DEFAULT))
}

/// Double the mesh from the minimum until `n_minus` repeats across two
/// consecutive levels (or the cap is reached); returns the stabilized
/// inertia and the mesh that produced it.
pub fn stabilized_dense_index(
    geo: &Geodesic,
    p: (&Submanifold, &[f64]),
    q: Option<(&Submanifold, &[f64])>,
) -> Result<(FormInertia, usize)> {
    let mut mesh = MESH_MIN;
    let mut previous = dense_index_oracle(geo, p, q, mesh)?;
    while mesh < MESH_MAX {
        mesh *= 2;
        let current = dense_index_oracle(geo, p, q, mesh)?;
        if current.n_minus == previous.n_minus {
            return Ok((current, mesh));
        }
        previous = current;
    }
    Ok((previous, mesh))
}

/// Value of the form on a piecewise-linear coefficient path given by its
/// node coordinates in the frame (`width x (mesh+1)`), including the
/// initial shape term for `alpha` = tangent coordinates at the start.
fn piecewise_linear_value(
    data: &ElementData,
    coords: &DMatrix<f64>,
    s_p: &DMatrix<f64>,
    alpha: &DVector<f64>,
) -> f64 {
    let mesh = coords.ncols() - 1;
    let mut value = 0.0;
    for e in 0..mesh {
        let left = coords.column(e).clone_owned();
        let right = coords.column(e + 1).clone_owned();
        let diff = &right - &left;
        value += (diff.transpose() * &data.gram * &diff)[(0, 0)] / data.h;
        for (q, (x, w)) in GAUSS3.iter().enumerate() {
            let lam = 0.5 * (x + 1.0);
            let at = &left * (1.0 - lam) + &right * lam;
            let c = &data.curvature[e][q];
            value += w * 0.5 * data.h * (at.transpose() * c * &at)[(0, 0)];
        }
    }
    if s_p.nrows() > 0 {
        value -= (alpha.transpose() * s_p * alpha)[(0, 0)];
    }
    value
}

/// Outcome of random minimality trials against adapted Jacobi fields.
#[derive(Clone, Copy, Debug)]
pub struct MinimalityReport {
    pub trials: usize,
    pub min_gap: f64,
    pub passed: bool,
}

/// On a focal-free geodesic, compare random admissible piecewise-linear
/// fields against the adapted Jacobi field sharing their endpoint value;
/// Jacobi fields must minimize the form, so every gap stays above
/// `-MINIMALITY_SLACK`.
pub fn minimality_check(
    geo: &Geodesic,
    sub: &Submanifold,
    u0: &[f64],
    trials: usize,
    seed: u64,
) -> Result<MinimalityReport> {
    causal_support_check(geo)?;
    let focal = detect_focal_points(geo, sub, u0)?;
    if !focal.is_empty() {
        return Err(Error::FocalPresent);
    }
    let mesh = MESH_MIN;
    let frame_seed = orthonormal_complement_seed(geo)?;
    let frame = parallel_frame(geo, &frame_seed)?;
    let width = frame.count();
    let data = element_data(geo, &frame, mesh)?;
    let basis = orthogonal_jacobi_basis(geo, sub, u0)?;
    let n = geo.steps();
    let end_values = basis.values_at_node(n).clone();
    let end_derivs = basis.derivs_at_node(n).clone();
    let g_b = geo.metric_at_node(n);
    let e_b = frame.at_node(n);
    let p_dirs = tangent_frame_coords(frame.at_node(0), sub, u0)?;
    let s_p = if sub.dim() > 0 {
        sub.form_matrix(geo.manifold(), u0, geo.velocity(0))?
    } else {
        DMatrix::zeros(0, 0)
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let mut min_gap = f64::INFINITY;
    for _ in 0..trials {
        let gamma = DVector::from_fn(basis.field_count(), |_, _| rng.random_range(-1.0..1.0));
        let j_b = &end_values * &gamma;
        let jacobi_value = ((&end_derivs * &gamma).transpose() * g_b * &j_b)[(0, 0)];
        let (c_end, _) = least_squares(e_b, &j_b)?;
        let alpha = DVector::from_fn(sub.dim(), |_, _| rng.random_range(-1.0..1.0));
        let mut coords = DMatrix::zeros(width, mesh + 1);
        coords.set_column(0, &(&p_dirs * &alpha));
        for k in 1..mesh {
            for r in 0..width {
                coords[(r, k)] = rng.random_range(-1.0..1.0);
            }
        }
        coords.set_column(mesh, &c_end);
        let trial_value = piecewise_linear_value(&data, &coords, &s_p, &alpha);
        min_gap = min_gap.min(trial_value - jacobi_value);
    }
    if trials == 0 {
        min_gap = 0.0;
    }
    Ok(MinimalityReport {
        trials,
        min_gap,
        passed: min_gap >= -MINIMALITY_SLACK,
    })
}

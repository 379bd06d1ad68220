//! Jacobi fields along a geodesic: bases adapted to an initial submanifold,
//! fundamental-solution propagation, focal and conjugate point location, and
//! two-point boundary-value problems.
//!
//! A Jacobi field is represented by its value `J` and covariant derivative
//! `J'` in chart coordinates, propagated as the first-order system
//! `dJ/dt = J' - C(t) J`, `dJ'/dt = T(t) J - C(t) J'` where `C` is the
//! connection drag and `T` the tidal operator cached on the geodesic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geodesic::{
    full_frame_seed, integrate_geodesic, parallel_frame, CausalCharacter, Geodesic, ParallelFrame,
};
use crate::geometry::Submanifold;
use crate::numeric::{kernel_basis, least_squares, sign_fixed};

/// Default relative singular-value cutoff for rank decisions on the focal
/// matrix.
pub const RANK_TOL_DEFAULT: f64 = 1e-8;
/// Bisection width target for focal refinement, relative to the interval.
const BISECT_REL: f64 = 1e-9;
/// A dip in the normalized determinant counts as a candidate only below this
/// fraction of the peak magnitude.
const DIP_REL: f64 = 1e-6;
/// Condition-number limit on the boundary map of two-point problems.
pub(crate) const COND_LIMIT: f64 = 1e12;
/// Contact tolerance between the geodesic start and the submanifold.
const CONTACT_TOL: f64 = 1e-8;
/// Candidates closer than this fraction of the interval are merged.
const MERGE_REL: f64 = 1e-8;
/// More candidates than `10 m` inside a window of `(b-a)/100` aborts the scan.
const CLUSTER_WINDOW_FRACTION: f64 = 0.01;

fn jacobi_rhs(
    geo: &Geodesic,
    t: f64,
    j: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let c = geo.connection_drag_at(t);
    let tidal = geo.tidal_at(t);
    (k - &c * j, &tidal * j - &c * k)
}

fn rk4_step(
    geo: &Geodesic,
    t: f64,
    j: &DMatrix<f64>,
    k: &DMatrix<f64>,
    h: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let (j1, k1) = jacobi_rhs(geo, t, j, k);
    let (j2, k2) = jacobi_rhs(
        geo,
        t + 0.5 * h,
        &(j + &j1 * (0.5 * h)),
        &(k + &k1 * (0.5 * h)),
    );
    let (j3, k3) = jacobi_rhs(
        geo,
        t + 0.5 * h,
        &(j + &j2 * (0.5 * h)),
        &(k + &k2 * (0.5 * h)),
    );
    let (j4, k4) = jacobi_rhs(geo, t + h, &(j + &j3 * h), &(k + &k3 * h));
    (
        j + (&j1 + &(&j2 + &j3) * 2.0 + &j4) * (h / 6.0),
        k + (&k1 + &(&k2 + &k3) * 2.0 + &k4) * (h / 6.0),
    )
}

/// Integrate the Jacobi system from `t_from` to `t_to` (forward in time),
/// splitting the span into substeps no longer than the geodesic grid step.
fn propagate_span(
    geo: &Geodesic,
    t_from: f64,
    t_to: f64,
    j: &DMatrix<f64>,
    k: &DMatrix<f64>,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let span = t_to - t_from;
    if span.abs() < 1e-15 * geo.step_size().max(1.0) {
        return (j.clone(), k.clone());
    }
    let n = (span.abs() / geo.step_size()).ceil().max(1.0) as usize;
    let h = span / n as f64;
    let mut cur = (j.clone(), k.clone());
    let mut t = t_from;
    for _ in 0..n {
        cur = rk4_step(geo, t, &cur.0, &cur.1, h);
        t += h;
    }
    cur
}

/// A set of Jacobi fields sampled on the geodesic grid, stored as per-node
/// value and derivative matrices whose columns are the individual fields.
pub struct JacobiBasis {
    t0: f64,
    t1: f64,
    steps: usize,
    js: Vec<DMatrix<f64>>,
    ks: Vec<DMatrix<f64>>,
    orthogonal: bool,
}

impl std::fmt::Debug for JacobiBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JacobiBasis")
            .field("t0", &self.t0)
            .field("t1", &self.t1)
            .field("steps", &self.steps)
            .field("fields", &self.field_count())
            .field("orthogonal", &self.orthogonal)
            .finish()
    }
}

impl JacobiBasis {
    fn from_initial_states(geo: &Geodesic, j0: DMatrix<f64>, k0: DMatrix<f64>, orthogonal: bool) -> Self {
        let steps = geo.steps();
        let h = geo.step_size();
        let (a, b) = geo.interval();
        let mut js = Vec::with_capacity(steps + 1);
        let mut ks = Vec::with_capacity(steps + 1);
        js.push(j0);
        ks.push(k0);
        for k in 0..steps {
            let t = a + h * k as f64;
            let (jn, kn) = rk4_step(geo, t, &js[k], &ks[k], h);
            js.push(jn);
            ks.push(kn);
        }
        JacobiBasis {
            t0: a,
            t1: b,
            steps,
            js,
            ks,
            orthogonal,
        }
    }

    pub fn field_count(&self) -> usize {
        self.js[0].ncols()
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    pub fn node_count(&self) -> usize {
        self.steps + 1
    }

    /// Field values at grid node `k`, one column per field.
    pub fn values_at_node(&self, k: usize) -> &DMatrix<f64> {
        &self.js[k]
    }

    /// Covariant derivatives at grid node `k`, one column per field.
    pub fn derivs_at_node(&self, k: usize) -> &DMatrix<f64> {
        &self.ks[k]
    }

    pub fn value(&self, k: usize, field: usize) -> DVector<f64> {
        self.js[k].column(field).into_owned()
    }

    pub fn deriv(&self, k: usize, field: usize) -> DVector<f64> {
        self.ks[k].column(field).into_owned()
    }

    /// Values and derivatives of all fields at an arbitrary parameter,
    /// re-integrated from the nearest grid node below `t`.
    pub fn states_at(&self, geo: &Geodesic, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let h = (self.t1 - self.t0) / self.steps as f64;
        let span = self.t1 - self.t0;
        let pos = (t - self.t0) / h;
        let nearest = pos.round();
        if (t - (self.t0 + nearest * h)).abs() < 1e-12 * span {
            let k = (nearest as usize).min(self.steps);
            return (self.js[k].clone(), self.ks[k].clone());
        }
        let k = (pos.floor().max(0.0) as usize).min(self.steps - 1);
        let t_node = self.t0 + h * k as f64;
        rk4_step(geo, t_node, &self.js[k], &self.ks[k], t - t_node)
    }

    /// Value and derivative of the linear combination with coefficients `c`.
    pub fn combination_at(&self, geo: &Geodesic, t: f64, c: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let (j, k) = self.states_at(geo, t);
        (&j * c, &k * c)
    }
}

/// Orthonormalize `dirs` with respect to the (possibly indefinite) metric
/// `g0` via the spectral decomposition of their Gram matrix. Vectors are
/// normalized to `|g(w,w)| = 1` and sign-fixed. Fails if the restricted
/// metric is degenerate.
fn gram_orthonormalize(g0: &DMatrix<f64>, dirs: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    if dirs.is_empty() {
        return Ok(Vec::new());
    }
    let m = dirs[0].len();
    let n = dirs.len();
    let mut basis = DMatrix::zeros(m, n);
    for (i, d) in dirs.iter().enumerate() {
        basis.set_column(i, d);
    }
    let gram = basis.transpose() * g0 * &basis;
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let lam_max = eig.eigenvalues.amax().max(1e-300);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out = Vec::with_capacity(n);
    for &i in &order {
        let lam = eig.eigenvalues[i];
        if lam.abs() > 1e-10 * lam_max {
            let w = &basis * eig.eigenvectors.column(i) / lam.abs().sqrt();
            out.push(sign_fixed(w));
        }
    }
    if out.len() != n {
        return Err(Error::DegenerateTangentMetric {
            det: gram.determinant(),
        });
    }
    Ok(out)
}

/// Reorder a spanning set of a lightlike-degenerate subspace so the velocity
/// direction sits last, with the remaining directions orthonormalized.
fn arrange_velocity_last(
    g0: &DMatrix<f64>,
    v0: &DVector<f64>,
    dirs: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let m = v0.len();
    let mut basis = DMatrix::zeros(m, dirs.len());
    for (i, d) in dirs.iter().enumerate() {
        basis.set_column(i, d);
    }
    let (coef, residual) = least_squares(&basis, v0)?;
    if residual > 1e-8 * v0.norm() {
        return Err(Error::InconsistentCharacter {
            detail: "lightlike velocity does not lie in the transversal span".into(),
        });
    }
    let drop = coef.iamax();
    let rest: Vec<DVector<f64>> = dirs
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != drop)
        .map(|(_, d)| d.clone())
        .collect();
    let mut out = gram_orthonormalize(g0, &rest)?;
    out.push(v0.clone());
    Ok(out)
}

struct BasisSetup {
    j0: DMatrix<f64>,
    k0: DMatrix<f64>,
}

/// Shared precondition handling and initial-state assembly for the adapted
/// bases. `u0` is the chart parameter of the contact point on `sub`.
fn basis_initial_states(
    geo: &Geodesic,
    sub: &Submanifold,
    u0: &[f64],
    orthogonal: bool,
) -> Result<BasisSetup> {
    let m = geo.dim();
    if sub.ambient_dim() != m {
        return Err(Error::InvalidInput(format!(
            "submanifold lives in dimension {}, geodesic in {}",
            sub.ambient_dim(),
            m
        )));
    }
    if u0.len() != sub.dim() {
        return Err(Error::InvalidInput(format!(
            "contact parameter has {} entries, submanifold dimension is {}",
            u0.len(),
            sub.dim()
        )));
    }
    let p0 = geo.position(0);
    let contact = DVector::from_column_slice(&sub.point_at(u0));
    let scale = p0.norm().max(1.0);
    if (p0 - &contact).norm() > CONTACT_TOL * scale {
        return Err(Error::InvalidInput(
            "submanifold contact point does not coincide with the geodesic start".into(),
        ));
    }
    let v0 = geo.velocity(0).clone();
    let g0 = geo.metric_at_node(0).clone();
    let k_dim = sub.dim();
    let tangent = sub.tangent_basis(u0);

    let g_scale = g0.norm().max(1.0);
    for a in 0..k_dim {
        let col = tangent.column(a);
        let pairing = (v0.transpose() * &g0 * col)[(0, 0)];
        if pairing.abs() > 1e-8 * v0.norm().max(1.0) * col.norm().max(1.0) * g_scale {
            return Err(Error::NotOrthogonal {
                residual: pairing.abs(),
            });
        }
    }
    if k_dim > 0 {
        let (_, residual) = least_squares(&tangent.clone_owned(), &v0)?;
        if residual < 1e-8 * v0.norm() {
            return Err(Error::DegenerateInitialCondition);
        }
    }

    let mut j_cols: Vec<DVector<f64>> = Vec::new();
    let mut k_cols: Vec<DVector<f64>> = Vec::new();
    for a in 0..k_dim {
        let e = tangent.column(a).into_owned();
        let w = sub.weingarten_apply(geo.manifold(), u0, &v0, &e)?;
        j_cols.push(e);
        k_cols.push(-w);
    }

    // Rows whose kernel carries the transversal derivative directions.
    let extra = if orthogonal { 1 } else { 0 };
    let mut rows = DMatrix::zeros(k_dim + extra, m);
    for a in 0..k_dim {
        rows.set_row(a, &(&g0 * tangent.column(a)).transpose());
    }
    if orthogonal {
        rows.set_row(k_dim, &(&g0 * &v0).transpose());
    }
    let dirs = kernel_basis(&rows);
    let expected = if orthogonal { m - 1 - k_dim } else { m - k_dim };
    if dirs.len() != expected {
        return Err(Error::DegenerateTangentMetric {
            det: (rows.clone() * rows.transpose()).determinant(),
        });
    }
    let transversal = if orthogonal {
        if geo.causal_character() == CausalCharacter::Lightlike {
            arrange_velocity_last(&g0, &v0, &dirs)?
        } else {
            gram_orthonormalize(&g0, &dirs)?
        }
    } else {
        dirs
    };
    for d in transversal {
        j_cols.push(DVector::zeros(m));
        k_cols.push(d);
    }

    let n = j_cols.len();
    let mut j0 = DMatrix::zeros(m, n);
    let mut k0 = DMatrix::zeros(m, n);
    for (i, (jc, kc)) in j_cols.iter().zip(k_cols.iter()).enumerate() {
        j0.set_column(i, jc);
        k0.set_column(i, kc);
    }
    Ok(BasisSetup { j0, k0 })
}

/// Basis of the `m - 1` Jacobi fields that start on the submanifold, satisfy
/// the shape-operator derivative condition, and stay orthogonal to the
/// velocity: tangent-valued fields plus fields vanishing at the start whose
/// derivatives span the orthogonal transversal directions. For lightlike
/// geodesics the last field has initial derivative equal to the velocity.
pub fn orthogonal_jacobi_basis(
    geo: &Geodesic,
    sub: &Submanifold,
    u0: &[f64],
) -> Result<JacobiBasis> {
    let setup = basis_initial_states(geo, sub, u0, true)?;
    Ok(JacobiBasis::from_initial_states(geo, setup.j0, setup.k0, true))
}

/// Full `m`-dimensional basis of Jacobi fields adapted to the submanifold:
/// as the orthogonal basis, but the vanishing fields' derivatives span the
/// whole normal space of the submanifold, with no orthogonality restriction
/// along the geodesic. This is the basis used for focal detection.
pub fn full_jacobi_basis(geo: &Geodesic, sub: &Submanifold, u0: &[f64]) -> Result<JacobiBasis> {
    let setup = basis_initial_states(geo, sub, u0, false)?;
    Ok(JacobiBasis::from_initial_states(geo, setup.j0, setup.k0, false))
}

/// Transition matrix of the Jacobi system from `t_from` to `t_to`: maps
/// stacked `(J, J')` at `t_from` to stacked `(J, J')` at `t_to`.
pub fn jacobi_propagate(geo: &Geodesic, t_from: f64, t_to: f64) -> Result<DMatrix<f64>> {
    let (a, b) = geo.interval();
    let slack = 1e-9 * (b - a);
    if t_from < a - slack || t_to > b + slack || t_to < t_from {
        return Err(Error::InvalidInput(format!(
            "propagation span [{t_from}, {t_to}] must lie inside [{a}, {b}]"
        )));
    }
    let m = geo.dim();
    let mut j0 = DMatrix::zeros(m, 2 * m);
    let mut k0 = DMatrix::zeros(m, 2 * m);
    for i in 0..m {
        j0[(i, i)] = 1.0;
        k0[(i, m + i)] = 1.0;
    }
    let (j1, k1) = propagate_span(geo, t_from, t_to, &j0, &k0);
    let mut phi = DMatrix::zeros(2 * m, 2 * m);
    phi.view_mut((0, 0), (m, 2 * m)).copy_from(&j1);
    phi.view_mut((m, 0), (m, 2 * m)).copy_from(&k1);
    Ok(phi)
}

/// Focal point of the initial submanifold along a geodesic: parameter value
/// and dimension of the space of adapted Jacobi fields vanishing there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalPoint {
    pub t: f64,
    pub multiplicity: usize,
}

fn focal_matrix(
    geo: &Geodesic,
    basis: &JacobiBasis,
    frame: &ParallelFrame,
    t: f64,
) -> Result<DMatrix<f64>> {
    let (j, _) = basis.states_at(geo, t);
    let g = geo.metric_at_time(t)?;
    let e = frame.at_time(t);
    Ok(j.transpose() * g * e)
}

fn normalized_det(
    geo: &Geodesic,
    basis: &JacobiBasis,
    frame: &ParallelFrame,
    t: f64,
    a: f64,
    vanishing: i32,
) -> Result<f64> {
    let det = focal_matrix(geo, basis, frame, t)?.determinant();
    Ok(det / (t - a).powi(vanishing))
}

fn sigma_min(geo: &Geodesic, basis: &JacobiBasis, frame: &ParallelFrame, t: f64) -> Result<f64> {
    let sv = focal_matrix(geo, basis, frame, t)?.svd(false, false).singular_values;
    Ok(sv.min())
}

/// Rank deficiency of the pairing matrix, measured against the larger of
/// its own top singular value and `sigma_ref`. The reference scale matters
/// when every basis field vanishes at once: the pairing matrix then shrinks
/// uniformly and stays well conditioned, so a purely relative test would
/// report full rank at its own zero.
fn rank_deficiency_at(
    geo: &Geodesic,
    basis: &JacobiBasis,
    frame: &ParallelFrame,
    t: f64,
    tol_rank: f64,
    sigma_ref: f64,
) -> Result<usize> {
    Ok(crate::numeric::rank_deficiency_with_floor(
        &focal_matrix(geo, basis, frame, t)?,
        tol_rank,
        sigma_ref,
    ))
}

enum Candidate {
    /// Sign change between nodes `k` and `k+1`.
    Bracket(usize),
    /// Local minimum of the magnitude at node `k` without a sign change.
    Dip(usize),
}

/// All parameters in `]a, b]` where the pairing matrix `g(J_i, E_j)` between
/// basis fields and frame vectors drops rank, with multiplicities from its
/// singular values. The determinant is normalized by `(t-a)^v` (`v` = number
/// of fields vanishing at the start) to remove the forced root at `a`.
///
/// Candidates come from sign changes of the normalized determinant, refined
/// by bisection, and from local dips of its magnitude below `1e-6` of the
/// peak, refined by minimizing the smallest singular value; dips catch
/// even-multiplicity zeros that never change sign.
pub fn focal_points(
    geo: &Geodesic,
    basis: &JacobiBasis,
    frame: &ParallelFrame,
    tol_rank: f64,
) -> Result<Vec<FocalPoint>> {
    let n_fields = basis.field_count();
    if frame.count() != n_fields {
        return Err(Error::InvalidInput(format!(
            "frame has {} vectors but the basis has {} fields",
            frame.count(),
            n_fields
        )));
    }
    let (a, b) = geo.interval();
    let span = b - a;
    let n = geo.steps();
    let m = geo.dim();

    let init_scale = basis.values_at_node(0).norm().max(1.0);
    let vanishing = (0..n_fields)
        .filter(|i| basis.values_at_node(0).column(*i).norm() < 1e-12 * init_scale)
        .count() as i32;

    let mut r = vec![f64::NAN; n + 1];
    for k in 1..=n {
        let t = a + span * k as f64 / n as f64;
        r[k] = normalized_det(geo, basis, frame, t, a, vanishing)?;
    }
    let max_r = r[1..].iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if max_r == 0.0 {
        return Err(Error::InconsistentCharacter {
            detail: "focal determinant vanishes identically; the basis and frame do not pair \
                     nondegenerately for this causal character"
                .into(),
        });
    }

    // Largest singular value of the pairing matrix seen along the arc,
    // used as the scale floor for multiplicity decisions.
    let mut sigma_ref = 0.0_f64;
    for k in 1..=32 {
        let t = a + span * k as f64 / 32.0;
        let sv = focal_matrix(geo, basis, frame, t)?.svd(false, false).singular_values;
        sigma_ref = sigma_ref.max(sv.max());
    }

    let mut candidates = Vec::new();
    for k in 1..n {
        if r[k] == 0.0 || r[k] * r[k + 1] < 0.0 {
            candidates.push(Candidate::Bracket(k));
        }
    }
    for k in 2..n {
        let here = r[k].abs();
        if here < DIP_REL * max_r
            && here <= r[k - 1].abs()
            && here <= r[k + 1].abs()
            && r[k - 1] * r[k + 1] > 0.0
        {
            candidates.push(Candidate::Dip(k));
        }
    }

    let node_time = |k: usize| a + span * k as f64 / n as f64;
    let mut positions: Vec<f64> = candidates
        .iter()
        .map(|c| match c {
            Candidate::Bracket(k) | Candidate::Dip(k) => node_time(*k),
        })
        .collect();
    positions.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let window = span * CLUSTER_WINDOW_FRACTION;
    for (i, t_i) in positions.iter().enumerate() {
        let count = positions[i..].iter().take_while(|t| **t - t_i <= window).count();
        if count > 10 * m {
            return Err(Error::AccumulationSuspected { count, window });
        }
    }

    let mut found: Vec<FocalPoint> = Vec::new();
    for cand in candidates {
        match cand {
            Candidate::Bracket(k) => {
                let (mut lo, mut hi) = (node_time(k), node_time(k + 1));
                let mut f_lo = r[k];
                if f_lo == 0.0 {
                    found.push(FocalPoint {
                        t: lo,
                        multiplicity: rank_deficiency_at(geo, basis, frame, lo, tol_rank, sigma_ref)?.max(1),
                    });
                    continue;
                }
                while hi - lo > BISECT_REL * span {
                    let mid = 0.5 * (lo + hi);
                    let f_mid = normalized_det(geo, basis, frame, mid, a, vanishing)?;
                    if f_mid == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if f_lo * f_mid < 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                        f_lo = f_mid;
                    }
                }
                let t_star = 0.5 * (lo + hi);
                let mult = rank_deficiency_at(geo, basis, frame, t_star, tol_rank, sigma_ref)?.max(1);
                found.push(FocalPoint {
                    t: t_star,
                    multiplicity: mult,
                });
            }
            Candidate::Dip(k) => {
                let (mut lo, mut hi) = (node_time(k - 1), node_time(k + 1));
                let tol_t = 1e-12 * span;
                for _ in 0..200 {
                    if hi - lo < tol_t {
                        break;
                    }
                    let m1 = lo + (hi - lo) / 3.0;
                    let m2 = hi - (hi - lo) / 3.0;
                    if sigma_min(geo, basis, frame, m1)? < sigma_min(geo, basis, frame, m2)? {
                        hi = m2;
                    } else {
                        lo = m1;
                    }
                }
                let t_star = 0.5 * (lo + hi);
                let mult = rank_deficiency_at(geo, basis, frame, t_star, tol_rank, sigma_ref)?;
                if mult > 0 {
                    found.push(FocalPoint {
                        t: t_star,
                        multiplicity: mult,
                    });
                }
            }
        }
    }

    if r[n].abs() < DIP_REL * max_r {
        let mult = rank_deficiency_at(geo, basis, frame, b, tol_rank, sigma_ref)?;
        if mult > 0 {
            found.push(FocalPoint {
                t: b,
                multiplicity: mult,
            });
        }
    }

    found.sort_by(|x, y| x.t.partial_cmp(&y.t).unwrap());
    let mut merged: Vec<FocalPoint> = Vec::new();
    for fp in found {
        match merged.last_mut() {
            Some(last) if fp.t - last.t <= MERGE_REL * span => {
                if fp.multiplicity > last.multiplicity {
                    *last = fp;
                }
            }
            _ => merged.push(fp),
        }
    }
    Ok(merged)
}

/// Conjugate points of `γ(t_from)` along the rest of the geodesic: focal
/// points of the single-point submanifold `{γ(t_from)}`, detected with the
/// full Jacobi basis vanishing there and a full parallel frame.
pub fn conjugate_points(geo: &Geodesic, t_from: f64, tol_rank: f64) -> Result<Vec<FocalPoint>> {
    let (a, b) = geo.interval();
    let span = b - a;
    if t_from < a - 1e-12 * span || t_from >= b {
        return Err(Error::InvalidInput(format!(
            "conjugate scan must start inside [{a}, {b}), got {t_from}"
        )));
    }
    let holder;
    let base: &Geodesic = if (t_from - a).abs() <= 1e-12 * span {
        geo
    } else {
        let frac = (b - t_from) / span;
        let steps = ((geo.steps() as f64) * frac).ceil() as usize;
        holder = integrate_geodesic(
            geo.manifold().clone(),
            geo.position_at(t_from).as_slice(),
            geo.velocity_at(t_from).as_slice(),
            (t_from, b),
            steps,
        )?;
        &holder
    };
    let point = Submanifold::point(base.position(0).as_slice().to_vec());
    let basis = full_jacobi_basis(base, &point, &[])?;
    let frame = parallel_frame(base, &full_frame_seed(base)?)?;
    focal_points(base, &basis, &frame, tol_rank)
}

/// A single Jacobi field on a subinterval, sampled at the covered grid nodes
/// plus the exact endpoints.
pub struct JacobiArc {
    s: f64,
    u: f64,
    ts: Vec<f64>,
    js: Vec<DVector<f64>>,
    ks: Vec<DVector<f64>>,
}

impl std::fmt::Debug for JacobiArc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JacobiArc")
            .field("s", &self.s)
            .field("u", &self.u)
            .field("samples", &self.ts.len())
            .finish()
    }
}

impl JacobiArc {
    pub fn interval(&self) -> (f64, f64) {
        (self.s, self.u)
    }

    pub fn start_value(&self) -> &DVector<f64> {
        &self.js[0]
    }

    pub fn end_value(&self) -> &DVector<f64> {
        self.js.last().unwrap()
    }

    pub fn start_deriv(&self) -> &DVector<f64> {
        &self.ks[0]
    }

    pub fn end_deriv(&self) -> &DVector<f64> {
        self.ks.last().unwrap()
    }

    /// Value and derivative at `t ∈ [s, u]`, re-integrated from the nearest
    /// stored sample at or below `t`.
    pub fn state_at(&self, geo: &Geodesic, t: f64) -> (DVector<f64>, DVector<f64>) {
        let idx = match self
            .ts
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(i) => return (self.js[i].clone(), self.ks[i].clone()),
            Err(0) => 0,
            Err(i) => i - 1,
        };
        let m = self.js[idx].len();
        let j = DMatrix::from_column_slice(m, 1, self.js[idx].as_slice());
        let k = DMatrix::from_column_slice(m, 1, self.ks[idx].as_slice());
        let (j1, k1) = propagate_span(geo, self.ts[idx], t, &j, &k);
        (j1.column(0).into_owned(), k1.column(0).into_owned())
    }

    pub fn value_at(&self, geo: &Geodesic, t: f64) -> DVector<f64> {
        self.state_at(geo, t).0
    }

    pub fn deriv_at(&self, geo: &Geodesic, t: f64) -> DVector<f64> {
        self.state_at(geo, t).1
    }
}

/// Solve the two-point problem `J(s) = v_s`, `J(u) = v_u` for a Jacobi field
/// on `[s, u]`, where both boundary values must be orthogonal to the
/// velocity. The field is obtained from the transition-matrix blocks; a
/// near-singular value-response block means the endpoints are conjugate.
pub fn jacobi_bvp(
    geo: &Geodesic,
    s: f64,
    u: f64,
    v_s: &DVector<f64>,
    v_u: &DVector<f64>,
) -> Result<JacobiArc> {
    let m = geo.dim();
    if v_s.len() != m || v_u.len() != m {
        return Err(Error::InvalidInput(
            "boundary values must match the manifold dimension".into(),
        ));
    }
    if u <= s {
        return Err(Error::InvalidInput(format!(
            "two-point problem needs s < u, got [{s}, {u}]"
        )));
    }
    for (t, v) in [(s, v_s), (u, v_u)] {
        let vel = geo.velocity_at(t);
        let pairing = geo.inner_at(t, v, &vel)?;
        let scale = (v.norm() * vel.norm()).max(1.0);
        if pairing.abs() > 1e-6 * scale {
            return Err(Error::NotOrthogonal {
                residual: pairing.abs(),
            });
        }
    }

    let phi = jacobi_propagate(geo, s, u)?;
    let phi_jj = phi.view((0, 0), (m, m)).clone_owned();
    let phi_jk = phi.view((0, m), (m, m)).clone_owned();
    let svd = phi_jk.clone().svd(true, true);
    let sv = &svd.singular_values;
    let cond = if sv.min() > 0.0 {
        sv.max() / sv.min()
    } else {
        f64::INFINITY
    };
    if !cond.is_finite() || cond > COND_LIMIT {
        return Err(Error::ConjugateEndpoints { cond });
    }
    let rhs = v_u - &phi_jj * v_s;
    let k_s = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;

    let (a, b) = geo.interval();
    let h = geo.step_size();
    let eps = 1e-12 * (b - a);
    let mut ts = vec![s];
    let mut idx = ((s - a) / h).floor() as isize + 1;
    loop {
        let t = a + h * idx as f64;
        if t >= u - eps {
            break;
        }
        if t > s + eps {
            ts.push(t);
        }
        idx += 1;
    }
    ts.push(u);

    let mut js = Vec::with_capacity(ts.len());
    let mut ks = Vec::with_capacity(ts.len());
    let mut j_cur = DMatrix::from_column_slice(m, 1, v_s.as_slice());
    let mut k_cur = DMatrix::from_column_slice(m, 1, k_s.as_slice());
    js.push(j_cur.column(0).into_owned());
    ks.push(k_cur.column(0).into_owned());
    for w in 1..ts.len() {
        let (jn, kn) = propagate_span(geo, ts[w - 1], ts[w], &j_cur, &k_cur);
        js.push(jn.column(0).into_owned());
        ks.push(kn.column(0).into_owned());
        j_cur = jn;
        k_cur = kn;
    }
    Ok(JacobiArc { s, u, ts, js, ks })
}

//! Finite-dimensional reduction of the index form to piecewise-Jacobi
//! fields: the form is determined by its derivative jumps at interior
//! partition points, which yields a small symmetric matrix whose inertia
//! carries the variational index.

use nalgebra::{DMatrix, DVector, Dyn, SVD};

use crate::error::{Error, Result};
use crate::geodesic::{
    full_frame_seed, orthonormal_complement_seed, parallel_frame, CausalCharacter, Geodesic,
    ParallelFrame,
};
use crate::geometry::{Signature, Submanifold};
use crate::inertia::{symmetric_inertia, FormInertia};
use crate::jacobi::{
    focal_points, full_jacobi_basis, jacobi_propagate, orthogonal_jacobi_basis, FocalPoint,
    COND_LIMIT, RANK_TOL_DEFAULT,
};

use super::partition::{normal_partition, NormalPartition};

/// Default relative threshold separating zero from nonzero eigenvalues.
pub const INERTIA_TOL_DEFAULT: f64 = 1e-8;
const SYMMETRY_TOL: f64 = 1e-10;

/// The index form restricted to broken Jacobi fields, as a symmetric matrix
/// on the values at interior partition points (one coordinate block per
/// point, spanning the orthogonal complement of the velocity there).
#[derive(Clone, Debug)]
pub struct DiscreteForm {
    matrix: DMatrix<f64>,
    times: Vec<f64>,
    block: usize,
    null_indices: Vec<usize>,
    t: f64,
}

impl DiscreteForm {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Interior partition points carrying coordinate blocks.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Coordinates per interior point.
    pub fn block_size(&self) -> usize {
        self.block
    }

    /// Coordinates along the velocity direction (lightlike geodesics only);
    /// these rows and columns vanish identically and the form descends to
    /// the quotient obtained by deleting them.
    pub fn null_indices(&self) -> &[usize] {
        &self.null_indices
    }

    pub fn evaluation_time(&self) -> f64 {
        self.t
    }

    /// The form with the tagged null coordinates removed.
    pub fn without_null_directions(&self) -> DMatrix<f64> {
        let keep: Vec<usize> =
            (0..self.dim()).filter(|i| !self.null_indices.contains(i)).collect();
        let mut out = DMatrix::zeros(keep.len(), keep.len());
        for (r, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate() {
                out[(r, c)] = self.matrix[(i, j)];
            }
        }
        out
    }
}

/// Signature counts of a discrete form.
pub fn inertia(form: &DiscreteForm, tol: f64) -> FormInertia {
    symmetric_inertia(&form.matrix, tol)
}

/// Boundary-value solver for one partition subinterval, built from the
/// Jacobi propagator blocks.
struct SubSolver {
    jj: DMatrix<f64>,
    kj: DMatrix<f64>,
    kk: DMatrix<f64>,
    jk_svd: SVD<f64, Dyn, Dyn>,
}

impl SubSolver {
    fn new(geo: &Geodesic, s: f64, u: f64) -> Result<Self> {
        let phi = jacobi_propagate(geo, s, u)?;
        let m = phi.nrows() / 2;
        let jk = phi.view((0, m), (m, m)).clone_owned();
        let svd = jk.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = smax / smin;
        if !cond.is_finite() || cond > COND_LIMIT {
            return Err(Error::ConjugateEndpoints { cond });
        }
        Ok(SubSolver {
            jj: phi.view((0, 0), (m, m)).clone_owned(),
            kj: phi.view((m, 0), (m, m)).clone_owned(),
            kk: phi.view((m, m), (m, m)).clone_owned(),
            jk_svd: svd,
        })
    }

    /// Derivatives at both ends of the Jacobi field with the given end
    /// values.
    fn derivs(&self, v_s: &DVector<f64>, v_u: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let rhs = v_u - &self.jj * v_s;
        let k_s = self
            .jk_svd
            .solve(&rhs, 0.0)
            .expect("conditioning checked at construction");
        let k_u = &self.kj * v_s + &self.kk * &k_s;
        (k_s, k_u)
    }
}

/// Solver for the first segment `[a, t_1]`: fields there come from the
/// adapted Jacobi space of the initial submanifold.
struct FirstSegment {
    k1: DMatrix<f64>,
    j_svd: SVD<f64, Dyn, Dyn>,
}

impl FirstSegment {
    fn new(geo: &Geodesic, sub: &Submanifold, u0: &[f64], t1: f64) -> Result<Self> {
        let basis = orthogonal_jacobi_basis(geo, sub, u0)?;
        let (j, k) = basis.states_at(geo, t1);
        let svd = j.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let cond = smax / smin;
        if !cond.is_finite() || cond > COND_LIMIT {
            return Err(Error::ConjugateEndpoints { cond });
        }
        Ok(FirstSegment { k1: k, j_svd: svd })
    }

    /// Derivative at `t_1` of the adapted field with value `v1` there.
    fn deriv_end(&self, v1: &DVector<f64>) -> DVector<f64> {
        let c = self
            .j_svd
            .solve(v1, 0.0)
            .expect("conditioning checked at construction");
        &self.k1 * c
    }
}

/// Shared state for assembling discrete forms at many evaluation times on
/// one partition.
pub(crate) struct Reducer<'g> {
    geo: &'g Geodesic,
    partition: NormalPartition,
    frame: ParallelFrame,
    first: FirstSegment,
    solvers: Vec<SubSolver>,
    lightlike: bool,
}

impl<'g> Reducer<'g> {
    pub(crate) fn new(
        geo: &'g Geodesic,
        sub: &Submanifold,
        u0: &[f64],
        partition: &NormalPartition,
    ) -> Result<Self> {
        if !partition.is_certified() {
            return Err(Error::InvalidInput(
                "discrete reduction requires a certified partition".into(),
            ));
        }
        let seed = orthonormal_complement_seed(geo)?;
        let frame = parallel_frame(geo, &seed)?;
        let pts = partition.points();
        let first = FirstSegment::new(geo, sub, u0, pts[1])?;
        // Interior subintervals [t_j, t_{j+1}], j >= 1; certification makes
        // each boundary map nonsingular.
        let mut solvers = Vec::with_capacity(pts.len().saturating_sub(2));
        for j in 1..pts.len() - 1 {
            solvers.push(SubSolver::new(geo, pts[j], pts[j + 1])?);
        }
        Ok(Reducer {
            geo,
            partition: partition.clone(),
            frame,
            first,
            solvers,
            lightlike: geo.causal_character() == CausalCharacter::Lightlike,
        })
    }

    pub(crate) fn form_at(&self, t: f64) -> Result<DiscreteForm> {
        let (a, b) = self.geo.interval();
        let span = b - a;
        if t <= a + 1e-12 * span || t > b + 1e-9 * span {
            return Err(Error::InvalidInput(format!(
                "evaluation time {t} outside ]{a}, {b}]"
            )));
        }
        let pts = self.partition.points();
        let interior = &pts[1..pts.len() - 1];
        let used = interior.partition_point(|&p| p < t - 1e-12 * span);
        let block = self.frame.count();
        let m = self.geo.dim();
        let d = used * block;
        let null_indices: Vec<usize> = if self.lightlike {
            (1..=used).map(|j| (j - 1) * block + (block - 1)).collect()
        } else {
            Vec::new()
        };
        if d == 0 {
            return Ok(DiscreteForm {
                matrix: DMatrix::zeros(0, 0),
                times: Vec::new(),
                block,
                null_indices,
                t,
            });
        }
        let frames: Vec<DMatrix<f64>> =
            (0..used).map(|j| self.frame.at_time(interior[j])).collect();
        let mut gram_rows: Vec<DMatrix<f64>> = Vec::with_capacity(used);
        for j in 0..used {
            let g = self.geo.metric_at_time(interior[j])?;
            gram_rows.push(frames[j].transpose() * g);
        }
        // Solver for the trailing partial segment [t_used, t]; reuse the
        // cached one when t hits the next partition point.
        let tail_reused = used < self.solvers.len() + 1
            && used >= 1
            && (pts[used + 1] - t).abs() <= 1e-12 * span;
        let tail_storage;
        let tail: &SubSolver = if tail_reused {
            &self.solvers[used - 1]
        } else {
            tail_storage = SubSolver::new(self.geo, interior[used - 1], t)?;
            &tail_storage
        };

        let zero = DVector::zeros(m);
        let mut matrix = DMatrix::zeros(d, d);
        let add = |mat: &mut DMatrix<f64>, col: usize, l: usize, delta: &DVector<f64>| {
            let weights = &gram_rows[l - 1] * delta;
            for q in 0..block {
                mat[((l - 1) * block + q, col)] += weights[q];
            }
        };
        for j in 1..=used {
            let right = if j < used { &self.solvers[j - 1] } else { tail };
            for p in 0..block {
                let v = frames[j - 1].column(p).clone_owned();
                let col = (j - 1) * block + p;
                let (left_start, left_end) = if j == 1 {
                    (None, self.first.deriv_end(&v))
                } else {
                    let (ks, ku) = self.solvers[j - 2].derivs(&zero, &v);
                    (Some(ks), ku)
                };
                let (right_start, right_end) = right.derivs(&v, &zero);
                add(&mut matrix, col, j, &(left_end - right_start));
                if let Some(ks) = left_start {
                    add(&mut matrix, col, j - 1, &(-ks));
                }
                if j < used {
                    add(&mut matrix, col, j + 1, &right_end);
                }
            }
        }
        let scale = matrix.amax().max(1.0);
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InconsistentCharacter {
                detail: format!(
                    "discrete form asymmetric by {asym:.3e} (scale {scale:.3e})"
                ),
            });
        }
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        Ok(DiscreteForm {
            matrix,
            times: interior[..used].to_vec(),
            block,
            null_indices,
            t,
        })
    }
}

/// Reject configurations outside the supported causal range.
pub(crate) fn causal_support_check(geo: &Geodesic) -> Result<()> {
    if geo.manifold().signature() == Signature::Lorentzian
        && geo.causal_character() == CausalCharacter::Spacelike
    {
        return Err(Error::UnsupportedCausalCharacter {
            character: "spacelike".into(),
        });
    }
    Ok(())
}

/// Focal points of the initial submanifold along the geodesic, detected
/// with the full adapted basis.
pub fn detect_focal_points(
    geo: &Geodesic,
    sub: &Submanifold,
    u0: &[f64],
) -> Result<Vec<FocalPoint>> {
    let basis = full_jacobi_basis(geo, sub, u0)?;
    let frame = parallel_frame(geo, &full_frame_seed(geo)?)?;
    focal_points(geo, &basis, &frame, RANK_TOL_DEFAULT)
}

/// Discrete index form at evaluation time `t` over a certified partition.
pub fn discrete_index_form(
    geo: &Geodesic,
    sub: &Submanifold,
    u0: &[f64],
    partition: &NormalPartition,
    t: f64,
) -> Result<DiscreteForm> {
    causal_support_check(geo)?;
    Reducer::new(geo, sub, u0, partition)?.form_at(t)
}

/// Evaluation grid for index curves: 200 uniform points plus probes
/// straddling each focal point.
pub fn default_index_grid(geo: &Geodesic, focal: &[FocalPoint]) -> Vec<f64> {
    let (a, b) = geo.interval();
    let span = b - a;
    let mut grid: Vec<f64> = (1..=200).map(|k| a + span * k as f64 / 200.0).collect();
    for f in focal {
        for t in [f.t - 1e-6, f.t + 1e-6] {
            if t > a + 1e-9 * span && t <= b {
                grid.push(t);
            }
        }
    }
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup_by(|x, y| (*x - *y).abs() < 1e-13 * span);
    grid
}

/// Index of the form restricted to `[a, t]` for each grid time, reported as
/// `(t, index)` pairs in ascending order.
pub fn index_function(
    geo: &Geodesic,
    sub: &Submanifold,
    u0: &[f64],
    grid: &[f64],
) -> Result<Vec<(f64, usize)>> {
    causal_support_check(geo)?;
    let focal = detect_focal_points(geo, sub, u0)?;
    let partition = normal_partition(geo, &focal)?;
    let reducer = Reducer::new(geo, sub, u0, &partition)?;
    let mut ts = grid.to_vec();
    ts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut out = Vec::with_capacity(ts.len());
    for t in ts {
        let form = reducer.form_at(t)?;
        out.push((t, symmetric_inertia(form.matrix(), INERTIA_TOL_DEFAULT).n_minus));
    }
    Ok(out)
}

/// Variational index together with the interior focal count it should equal.
#[derive(Clone, Debug)]
pub struct MorseIndex {
    pub index: usize,
    pub focal_sum: usize,
    pub matches: bool,
    pub focal: Vec<FocalPoint>,
}

/// Index of the form on the whole geodesic, checked against the sum of
/// interior focal multiplicities.
pub fn morse_index(geo: &Geodesic, sub: &Submanifold, u0: &[f64]) -> Result<MorseIndex> {
    causal_support_check(geo)?;
    let focal = detect_focal_points(geo, sub, u0)?;
    let partition = normal_partition(geo, &focal)?;
    let reducer = Reducer::new(geo, sub, u0, &partition)?;
    let (a, b) = geo.interval();
    let form = reducer.form_at(b)?;
    let index = symmetric_inertia(form.matrix(), INERTIA_TOL_DEFAULT).n_minus;
    let focal_sum = focal
        .iter()
        .filter(|f| f.t < b - 1e-9 * (b - a))
        .map(|f| f.multiplicity)
        .sum();
    Ok(MorseIndex {
        index,
        focal_sum,
        matches: index == focal_sum,
        focal,
    })
}

/// Nullity of the discrete form against its predicted value.
#[derive(Clone, Copy, Debug)]
pub struct KernelNullity {
    pub n_zero: usize,
    pub expected: usize,
    pub matches: bool,
}

/// Kernel dimension at the endpoint (or just inside it when `at_b` is
/// false). The prediction is the focal multiplicity at the evaluation time,
/// plus one artificial null direction per interior point for lightlike
/// geodesics.
pub fn kernel_nullity(
    geo: &Geodesic,
    sub: &Submanifold,
    u0: &[f64],
    partition: &NormalPartition,
    at_b: bool,
) -> Result<KernelNullity> {
    causal_support_check(geo)?;
    let focal = detect_focal_points(geo, sub, u0)?;
    let (a, b) = geo.interval();
    let span = b - a;
    let t = if at_b { b } else { b - 1e-6 * span };
    let reducer = Reducer::new(geo, sub, u0, partition)?;
    let form = reducer.form_at(t)?;
    let n_zero = symmetric_inertia(form.matrix(), INERTIA_TOL_DEFAULT).n_zero;
    let mu: usize = focal
        .iter()
        .filter(|f| (f.t - t).abs() <= 1e-7 * span)
        .map(|f| f.multiplicity)
        .sum();
    let expected = mu
        + if geo.causal_character() == CausalCharacter::Lightlike {
            form.times().len()
        } else {
            0
        };
    Ok(KernelNullity {
        n_zero,
        expected,
        matches: n_zero == expected,
    })
}

//! Small shared linear-algebra helpers on dynamically sized matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative singular-value cutoff for rank decisions in helper routines.
const RANK_TOL: f64 = 1e-10;

/// Orthonormal basis of the kernel of `rows`, with a deterministic sign:
/// the entry of largest magnitude in each basis vector is positive.
///
/// Uses the eigendecomposition of `rowsᵀ rows`, which, unlike the thin SVD,
/// exposes the full null space.
pub fn kernel_basis(rows: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let n = rows.ncols();
    if rows.nrows() == 0 {
        return (0..n)
            .map(|i| {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect();
    }
    let gram = rows.transpose() * rows;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let lam_max = eig.eigenvalues.amax().max(0.0);
    // Squaring through the Gram matrix puts true kernel directions at
    // eigenvalues of order machine epsilon times lam_max, so the cutoff is
    // applied to eigenvalues rather than their square roots.
    let tol = (1e-12 * lam_max).max(1e-300);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[i]
            .partial_cmp(&eig.eigenvalues[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order
        .into_iter()
        .filter(|&i| eig.eigenvalues[i] <= tol)
        .map(|i| sign_fixed(eig.eigenvectors.column(i).into_owned()))
        .collect()
}

/// Flip the sign so the entry of largest magnitude is positive.
pub fn sign_fixed(v: DVector<f64>) -> DVector<f64> {
    let idx = v.iamax();
    if v[idx] < 0.0 {
        -v
    } else {
        v
    }
}

/// Rank deficiency against `tol * max(sigma_max, floor)`. The floor guards
/// rank decisions on matrices that vanish as a whole: without it a matrix
/// of the form `eps * M` with `M` well conditioned looks full rank at any
/// relative tolerance.
pub fn rank_deficiency_with_floor(matrix: &DMatrix<f64>, tol: f64, floor: f64) -> usize {
    let svd = matrix.clone().svd(false, false);
    let sigma_max = svd.singular_values.max().max(floor);
    if sigma_max <= 0.0 {
        return matrix.nrows().min(matrix.ncols());
    }
    svd.singular_values
        .iter()
        .filter(|s| **s < tol * sigma_max)
        .count()
}

/// Least-squares solution of `a x = b` together with the residual norm.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(b, 1e-13)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let residual = (a * &x - b).norm();
    Ok((x, residual))
}

/// Euclidean projector onto the column span of `basis`.
pub fn span_projector(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let m = basis.nrows();
    if basis.ncols() == 0 {
        return DMatrix::zeros(m, m);
    }
    let qr = basis.clone().qr();
    let q = qr.q();
    let r = qr.r();
    // Columns of q beyond the numerical rank of r carry no span information.
    let mut rank = 0;
    let r_max = r.diagonal().amax();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)].abs() > RANK_TOL * r_max.max(1e-300) {
            rank = i + 1;
        }
    }
    let qk = q.columns(0, rank.min(q.ncols()));
    &qk * qk.transpose()
}

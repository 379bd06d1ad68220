//! Inertia of symmetric bilinear forms.
//!
//! The index computations in this crate reduce to counting the negative,
//! null and positive eigenvalues of a symmetric matrix. The count is
//! obtained without forming eigenvectors: the matrix is reduced to
//! symmetric tridiagonal form by Householder reflections and eigenvalues
//! on either side of a shift are counted through the signs of the pivots
//! of the shifted `LDL^T` factorization (Sturm sequence). Congruence
//! transformations preserve all three counts, so any well-conditioned
//! basis of the underlying space yields the same result.

use nalgebra::linalg::SymmetricTridiagonal;
use nalgebra::DMatrix;

/// Signature counts of a symmetric bilinear form.
///
/// `n_zero` counts eigenvalues of magnitude below `tol * max(|lambda|_max, 1)`;
/// the floor keeps the split well defined for forms that vanish identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FormInertia {
    pub n_plus: usize,
    pub n_zero: usize,
    pub n_minus: usize,
}

impl FormInertia {
    pub fn dim(&self) -> usize {
        self.n_plus + self.n_zero + self.n_minus
    }
}

/// Number of eigenvalues of the tridiagonal matrix `(diag, off)` that are
/// strictly smaller than `shift`.
fn sturm_count(diag: &[f64], off: &[f64], shift: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0_f64;
    for (i, &d) in diag.iter().enumerate() {
        let coupling = if i == 0 {
            0.0
        } else {
            let e = off[i - 1];
            e * e / q
        };
        q = d - shift - coupling;
        if q == 0.0 {
            // Nudge exact-zero pivots so the recurrence can continue; the
            // perturbation is far below every tolerance used by callers.
            q = f64::MIN_POSITIVE.sqrt();
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Reduce a symmetric matrix to tridiagonal form, returning the diagonal
/// and off-diagonal. The input is symmetrized first, which removes the
/// roundoff-level asymmetry left by assembly.
fn tridiagonalize(form: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = form.nrows();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let a = DMatrix::from_fn(n, n, |i, j| 0.5 * (form[(i, j)] + form[(j, i)]));
    let (diag, off) = SymmetricTridiagonal::new(a).unpack_tridiagonal();
    (diag.as_slice().to_vec(), off.as_slice().to_vec())
}

/// Inertia of a symmetric matrix with relative null threshold `tol`.
pub fn symmetric_inertia(form: &DMatrix<f64>, tol: f64) -> FormInertia {
    let n = form.nrows();
    assert_eq!(n, form.ncols(), "inertia requires a square matrix");
    if n == 0 {
        return FormInertia {
            n_plus: 0,
            n_zero: 0,
            n_minus: 0,
        };
    }
    let (diag, off) = tridiagonalize(form);
    // Gershgorin bound on |lambda|, floored at 1 so that forms at roundoff
    // scale classify as null rather than inheriting a meaningless sign.
    let mut bound = 0.0_f64;
    for i in 0..n {
        let mut r = diag[i].abs();
        if i > 0 {
            r += off[i - 1].abs();
        }
        if i + 1 < n {
            r += off[i].abs();
        }
        bound = bound.max(r);
    }
    let thr = tol * bound.max(1.0);
    let below = sturm_count(&diag, &off, -thr);
    let not_above = sturm_count(&diag, &off, thr);
    FormInertia {
        n_plus: n - not_above,
        n_zero: not_above - below,
        n_minus: below,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_matrix(values: &[f64]) -> DMatrix<f64> {
        let n = values.len();
        DMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { 0.0 })
    }

    #[test]
    fn diagonal_counts() {
        let inertia = symmetric_inertia(&diag_matrix(&[2.0, -1.0, 0.0, 3.0]), 1e-8);
        assert_eq!(
            inertia,
            FormInertia {
                n_plus: 2,
                n_zero: 1,
                n_minus: 1
            }
        );
    }

    #[test]
    fn zero_matrix_is_all_null() {
        let inertia = symmetric_inertia(&DMatrix::zeros(5, 5), 1e-8);
        assert_eq!(
            inertia,
            FormInertia {
                n_plus: 0,
                n_zero: 5,
                n_minus: 0
            }
        );
    }

    #[test]
    fn empty_matrix() {
        let inertia = symmetric_inertia(&DMatrix::zeros(0, 0), 1e-8);
        assert_eq!(inertia.dim(), 0);
    }

    #[test]
    fn congruence_preserves_counts() {
        // B = S^T A S with invertible S has the same inertia as A.
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[2.0, 0.3, -0.1, 0.3, -1.5, 0.2, -0.1, 0.2, 0.0],
        );
        let s = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 2.0, 0.0, 0.0, 1.0, -1.0, 3.0, 0.5, 1.0],
        );
        let b = s.transpose() * &a * &s;
        let ia = symmetric_inertia(&a, 1e-10);
        let ib = symmetric_inertia(&b, 1e-10);
        assert_eq!(ia.n_minus, ib.n_minus);
        assert_eq!(ia.n_plus, ib.n_plus);
        assert_eq!(ia.n_zero, ib.n_zero);
    }

    #[test]
    fn dense_matches_known_spectrum() {
        // Second-difference matrix: all eigenvalues positive.
        let n = 40;
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = 2.0;
            if i + 1 < n {
                a[(i, i + 1)] = -1.0;
                a[(i + 1, i)] = -1.0;
            }
        }
        let inertia = symmetric_inertia(&a, 1e-10);
        assert_eq!(inertia.n_plus, n);
        assert_eq!(inertia.n_minus, 0);
        assert_eq!(inertia.n_zero, 0);

        // Shift so exactly the eigenvalues below 1.0 turn negative:
        // lambda_k = 2 - 2 cos(k pi / (n+1)), shifted by -1.
        for i in 0..n {
            a[(i, i)] -= 1.0;
        }
        let shifted = symmetric_inertia(&a, 1e-10);
        let expected_neg = (1..=n)
            .filter(|k| 1.0 - 2.0 * (*k as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos() < 0.0)
            .count();
        assert_eq!(shifted.n_minus, expected_neg);
    }
}

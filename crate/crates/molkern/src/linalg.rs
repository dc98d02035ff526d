//! Dense Cholesky routines shared by the direct kernel solver and the
//! Gaussian process.
//!
//! nalgebra ships a Cholesky factorization, but it reports failure as a
//! bare `None`. Both call sites here need to know *which* pivot went
//! non-positive — the kernel solver turns it into a diagnostic naming the
//! offending product-graph vertex, and the GP uses it while escalating
//! jitter — so the classic in-place algorithm is spelled out instead.

use nalgebra::DMatrix;

/// In-place lower Cholesky factorization `A = L·Lᵀ` for a symmetric
/// positive-definite matrix.
///
/// On success the lower triangle of `a` holds `L` and the strict upper
/// triangle is zeroed. On failure returns the index of the first pivot
/// that was not strictly positive (or not finite); `a` is left in an
/// unspecified state.
pub fn cholesky_in_place(a: &mut DMatrix<f64>) -> Result<(), usize> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= a[(j, k)] * a[(j, k)];
        }
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(j);
        }
        let pivot = pivot.sqrt();
        a[(j, j)] = pivot;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= a[(i, k)] * a[(j, k)];
            }
            a[(i, j)] = v / pivot;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = 0.0;
        }
    }
    Ok(())
}

/// Solves `L·y = b` in place (forward substitution).
pub fn solve_lower(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    assert_eq!(b.len(), n);
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l[(i, k)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
}

/// Solves `Lᵀ·x = b` in place (backward substitution).
pub fn solve_lower_transpose(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = l.nrows();
    assert_eq!(b.len(), n);
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= l[(k, i)] * b[k];
        }
        b[i] = v / l[(i, i)];
    }
}

/// Solves `(L·Lᵀ)·x = b` in place given the factor from
/// [`cholesky_in_place`].
pub fn solve_llt(l: &DMatrix<f64>, b: &mut [f64]) {
    solve_lower(l, b);
    solve_lower_transpose(l, b);
}

/// Sum of the logs of the factor's diagonal, i.e. `½·log det(L·Lᵀ)`.
pub fn sum_log_diag(l: &DMatrix<f64>) -> f64 {
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum()
}

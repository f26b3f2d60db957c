//! Dense factorization helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Full singular system of a dense matrix.
///
/// `u` is `m x m`, `v` is `n x n`, both orthonormal; `singular_values` has
/// `min(m, n)` entries in non-increasing order and pairs with the leading
/// columns of `u` and `v`. Trailing columns complete the bases.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn full_svd(a: &DMatrix<f64>) -> Result<FullSvd> {
    let (m, n) = a.shape();
    let r = m.min(n);
    let svd = nalgebra::linalg::SVD::try_new_unordered(a.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::DegenerateInput("SVD did not converge".into()))?;
    let u_thin = svd.u.expect("requested U");
    let v_thin = svd.v_t.expect("requested V").transpose();
    let s = svd.singular_values;

    // Stable sort keeps the solver's order among ties.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));

    let mut u_sorted = DMatrix::zeros(m, r);
    let mut v_sorted = DMatrix::zeros(n, r);
    let mut values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u_thin.column(src));
        v_sorted.set_column(dst, &v_thin.column(src));
        values.push(s[src].max(0.0));
    }
    Ok(FullSvd {
        u: complete_basis(&u_sorted),
        singular_values: values,
        v: complete_basis(&v_sorted),
    })
}

/// Extend `n x r` orthonormal columns to an `n x n` orthonormal basis.
pub fn complete_basis(q1: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = q1.shape();
    if r == n {
        return q1.clone();
    }
    let mut stacked = DMatrix::zeros(n, r + n);
    stacked.view_mut((0, 0), (n, r)).copy_from(q1);
    stacked.view_mut((0, r), (n, n)).fill_with_identity();
    let q = stacked.qr().q();
    let mut out = DMatrix::zeros(n, n);
    out.view_mut((0, 0), (n, r)).copy_from(q1);
    out.view_mut((0, r), (n, n - r)).copy_from(&q.view((0, r), (n, n - r)));
    out
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
        let n = q.ncols();
        max_abs_diff(&(q.transpose() * q), &DMatrix::identity(n, n))
    }

    #[test]
    fn wide_matrix_gets_full_bases() {
        let a = DMatrix::from_fn(3, 7, |i, j| ((i * 7 + j) as f64).sin());
        let svd = full_svd(&a).unwrap();
        assert_eq!(svd.u.shape(), (3, 3));
        assert_eq!(svd.v.shape(), (7, 7));
        assert!(orthonormality_error(&svd.u) < 1e-12);
        assert!(orthonormality_error(&svd.v) < 1e-12);
        assert!(svd.singular_values.windows(2).all(|w| w[0] >= w[1]));
        let mut s = DMatrix::zeros(3, 7);
        for (i, &v) in svd.singular_values.iter().enumerate() {
            s[(i, i)] = v;
        }
        let rebuilt = &svd.u * s * svd.v.transpose();
        assert!(max_abs_diff(&rebuilt, &a) < 1e-12);
    }

    #[test]
    fn symmetric_eigenvalues_sorted() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let ev = symmetric_eigenvalues(&a);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }
}

//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// `(a + aᵀ)/2`.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// `D^{-1/2} A D^{-1/2}` with `D = diag(A)`; zero diagonal entries are left
/// unscaled.
pub fn equilibrate(a: &DMatrix<f64>) -> DMatrix<f64> {
    let d: alloc::vec::Vec<f64> = a.diagonal().iter().map(|&x| if x > 0.0 { 1.0 / x.sqrt() } else { 1.0 }).collect();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * d[i] * d[j])
}

/// Number of eigenvalues of the symmetric matrix `a` above `rel_tol·max|λ|`.
pub fn symmetric_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    let eig = SymmetricEigen::new(symmetrize(a)).eigenvalues;
    let scale = eig.amax();
    eig.iter().filter(|&&l| l.abs() > rel_tol * scale).count()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(a)).eigenvalues.min()
}

/// Solves the bordered system `[G Mᵀ; M 0] [X; Λ] = [B; C]` and returns `X`.
/// `m` has one row per constraint.
pub fn bordered_solve(g: &DMatrix<f64>, m: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, cell: usize) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let r = m.nrows();
    let mut k = DMatrix::zeros(n + r, n + r);
    k.view_mut((0, 0), (n, n)).copy_from(g);
    k.view_mut((n, 0), (r, n)).copy_from(m);
    k.view_mut((0, n), (n, r)).copy_from(&m.transpose());
    let mut rhs = DMatrix::zeros(n + r, b.ncols());
    rhs.view_mut((0, 0), (n, b.ncols())).copy_from(b);
    rhs.view_mut((n, 0), (r, b.ncols())).copy_from(c);
    let sol = k.lu().solve(&rhs).ok_or(Error::SingularLocal {
        cell,
        what: "bordered Hessian system",
    })?;
    Ok(sol.rows(0, n).into_owned())
}

/// Frobenius norm of `a − b` relative to that of `a` (absolute if `a = 0`).
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d = (a - b).norm();
    let s = a.norm();
    if s > 0.0 {
        d / s
    } else {
        d
    }
}

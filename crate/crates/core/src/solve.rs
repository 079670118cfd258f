//! Solution of the condensed face system.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::sparse::{conjugate_gradient, nested_dissection, Cholesky, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    /// Sparse Cholesky with a nested-dissection ordering.
    #[default]
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub method: SolveMethod,
    /// Relative residual target for CG.
    pub cg_tol: f64,
    pub max_iters: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            method: SolveMethod::Direct,
            cg_tol: 1e-12,
            max_iters: 100_000,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cg_tol > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!("cg_tol must be positive, got {}", self.cg_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Normwise backward error accepted from the direct solver.
pub const DIRECT_TOL: f64 = 1e-10;

/// Iterative refinement steps after the direct solve.
pub const MAX_REFINE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// `‖Ax − b‖ / ‖b‖` of the original system.
    pub relative_residual: f64,
    /// `‖Ax − b‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    pub backward_error: f64,
    /// CG iterations, or refinement steps for the direct solver.
    pub iterations: usize,
    /// Nonzeros of the Cholesky factor (0 for CG).
    pub factor_nnz: usize,
}

/// `‖Ax − b‖ / ‖b‖` (`‖Ax‖` when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = alloc::vec![0.0; a.n];
    a.mul_vec(x, &mut r);
    let num: f64 = r.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    let den: f64 = b.iter().map(|v| v * v).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

pub fn backward_error(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = alloc::vec![0.0; a.n];
    a.mul_vec(x, &mut r);
    let inf = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0f64, |m, t| m.max(t.abs()));
    let rn = inf(&mut r.iter().zip(b).map(|(u, v)| u - v));
    let an = (0..a.n).map(|i| a.row(i).1.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0f64, f64::max);
    let den = an * inf(&mut x.iter().copied()) + inf(&mut b.iter().copied());
    if den == 0.0 {
        0.0
    } else {
        rn / den
    }
}

/// Jacobi scaling `D^{-1/2}` of a matrix with positive diagonal.
fn jacobi_scaling(a: &CsrMatrix) -> Vec<f64> {
    a.diagonal().iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 1.0 }).collect()
}

/// Solves `A x = b`. Both methods work on the Jacobi-equilibrated system
/// `D^{-1/2} A D^{-1/2} y = D^{-1/2} b`, `x = D^{-1/2} y`; the reported
/// residual is the relative residual of that system.
pub fn solve(a: &CsrMatrix, b: &[f64], config: &SolveConfig) -> Result<(Vec<f64>, SolveStats)> {
    config.validate()?;
    if b.len() != a.n {
        return Err(Error::DimensionMismatch { expected: a.n, found: b.len() });
    }
    let d = jacobi_scaling(a);
    let mut scaled = a.clone();
    for i in 0..a.n {
        for p in a.row_ptr[i]..a.row_ptr[i + 1] {
            scaled.values[p] *= d[i] * d[a.col_idx[p]];
        }
    }
    let bs: Vec<f64> = b.iter().zip(&d).map(|(v, s)| v * s).collect();
    let (x, iterations, factor_nnz): (Vec<f64>, usize, usize) = match config.method {
        SolveMethod::Direct => {
            let chol = Cholesky::factor(&scaled, nested_dissection(&scaled))?;
            let y = chol.solve(&bs);
            let mut x: Vec<f64> = y.iter().zip(&d).map(|(v, s)| v * s).collect();
            // refinement against the unscaled matrix, residuals in extended precision
            let mut steps = 0;
            let mut last = f64::INFINITY;
            while steps < MAX_REFINE {
                let r: Vec<f64> = a.residual_compensated(&x, b).iter().zip(&d).map(|(v, s)| v * s).collect();
                let dx: Vec<f64> = chol.solve(&r).iter().zip(&d).map(|(v, s)| v * s).collect();
                let size = dx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let xmax = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if !(size < 0.5 * last) {
                    break;
                }
                for (xi, di) in x.iter_mut().zip(&dx) {
                    *xi += di;
                }
                steps += 1;
                last = size;
                if size <= f64::EPSILON * xmax {
                    break;
                }
            }
            (x, steps, chol.factor_nnz())
        }
        SolveMethod::ConjugateGradient => {
            let (y, out) = conjugate_gradient(&scaled, &bs, config.cg_tol, config.max_iters)?;
            (y.iter().zip(&d).map(|(v, s)| v * s).collect(), out.iterations, 0)
        }
    };
    let stats = SolveStats {
        relative_residual: relative_residual(a, &x, b),
        backward_error: backward_error(a, &x, b),
        iterations,
        factor_nnz,
    };
    if config.method == SolveMethod::Direct && !(stats.backward_error <= DIRECT_TOL) {
        return Err(Error::Residual {
            residual: stats.backward_error,
            tol: DIRECT_TOL,
        });
    }
    Ok((x, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn zero_rhs_gives_zero() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
        for method in [SolveMethod::Direct, SolveMethod::ConjugateGradient] {
            let (x, _) = solve(&a, &[0.0, 0.0], &SolveConfig { method, ..Default::default() }).unwrap();
            assert_eq!(x, alloc::vec![0.0, 0.0]);
        }
    }

    #[test]
    fn one_by_one() {
        let a = CsrMatrix::from_dense(&DMatrix::from_element(1, 1, 4.0));
        let (x, s) = solve(&a, &[2.0], &SolveConfig::default()).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-15);
        assert!(s.relative_residual < 1e-15 && s.backward_error < 1e-15);
    }

    #[test]
    fn empty_system() {
        let a = CsrMatrix::from_triplets(0, &[], &[], &[]).unwrap();
        assert!(solve(&a, &[], &SolveConfig::default()).unwrap().0.is_empty());
    }

    #[test]
    fn bad_config_and_indefinite_matrix() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 1.0]));
        let cfg = SolveConfig { cg_tol: 0.0, ..Default::default() };
        assert!(matches!(solve(&a, &[1.0, 0.0], &cfg), Err(Error::InvalidArgument(_))));
        assert!(matches!(solve(&a, &[1.0, 0.0], &SolveConfig::default()), Err(Error::NotPositiveDefinite { .. })));
        assert!(solve(&a, &[1.0], &SolveConfig::default()).is_err());
    }
}

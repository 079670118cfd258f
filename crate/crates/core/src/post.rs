//! Reconstructed fields and error norms.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::assembly::CondensedSystem;
use crate::error::Result;
use crate::exec::Executor;
use crate::localops::Scheme;
use crate::manufactured::ExactSolution;
use crate::mesh::Mesh;
use crate::polyspace::{cell_table, project_cell, trace_table, CellBasis};
use crate::quadrature::{cell_rule, face_rule};
#[allow(unused_imports)]
use num_traits::Float;

/// Per-cell `P^{k+2}` coefficients in the basis `CellBasis::for_cell(mesh, K, k+2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub degree: usize,
    pub coeffs: Vec<DVector<f64>>,
}

impl Field {
    pub fn basis(&self, mesh: &Mesh, cell: usize) -> CellBasis {
        CellBasis::for_cell(mesh, cell, self.degree)
    }

    pub fn eval(&self, mesh: &Mesh, cell: usize, p: crate::mesh::Point) -> f64 {
        self.basis(mesh, cell).eval(&self.coeffs[cell], p)
    }
}

/// `R_K(û_K)` on every cell, plus the stored boundary lifting `L_K` in the
/// boundary-penalty mode.
pub fn reconstruct_field(system: &CondensedSystem, full: &[DVector<f64>]) -> Field {
    Field {
        degree: system.dofs.scheme.recon_degree(),
        coeffs: system.cells.iter().zip(full).map(|(c, u)| &c.r * u + &c.lift).collect(),
    }
}

/// Sum with a fixed pairwise tree, independent of how terms were produced.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    /// Broken Hessian seminorm of `u − field`.
    pub h2_abs: f64,
    pub l2_abs: f64,
    /// Same norms of `u`.
    pub h2_exact: f64,
    pub l2_exact: f64,
}

impl ErrorNorms {
    pub fn h2_rel(&self) -> f64 {
        rel(self.h2_abs, self.h2_exact)
    }

    pub fn l2_rel(&self) -> f64 {
        rel(self.l2_abs, self.l2_exact)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        a
    }
}

/// Squared norms `[‖∇²e‖², ‖e‖², ‖∇²u‖², ‖u‖²]` on one cell, `e = u − field`.
fn cell_norms(mesh: &Mesh, cell: usize, field: &Field, u: &dyn ExactSolution, degree: usize) -> Result<[f64; 4]> {
    let rule = cell_rule(mesh, cell, degree)?;
    let t = cell_table(&field.basis(mesh, cell), &rule.points);
    let c = &field.coeffs[cell];
    let (v, hxx, hxy, hyy) = (&t.value * c, &t.hxx * c, &t.hxy * c, &t.hyy * c);
    let mut out = [0.0; 4];
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let h = u.hessian(p);
        let val = u.value(p);
        let (exx, exy, eyy) = (h[0] - hxx[q], h[1] - hxy[q], h[2] - hyy[q]);
        out[0] += w * (exx * exx + 2.0 * exy * exy + eyy * eyy);
        out[1] += w * (val - v[q]) * (val - v[q]);
        out[2] += w * (h[0] * h[0] + 2.0 * h[1] * h[1] + h[2] * h[2]);
        out[3] += w * val * val;
    }
    Ok(out)
}

/// Broken `H²` seminorm and `L²` errors of `field` against `u`, with cell
/// rules of degree `2(k+2) + rhs_extra_degree`.
pub fn error_norms<E: Executor>(mesh: &Mesh, scheme: Scheme, field: &Field, u: &dyn ExactSolution, exec: &E) -> Result<ErrorNorms> {
    let degree = scheme.cell_quad_degree() + scheme.rhs_extra_degree;
    let per: Vec<[f64; 4]> = exec
        .map(mesh.num_cells(), |c| cell_norms(mesh, c, field, u, degree))
        .into_iter()
        .collect::<Result<_>>()?;
    let sum = |i: usize| pairwise_sum(&per.iter().map(|v| v[i]).collect::<Vec<_>>()).sqrt();
    Ok(ErrorNorms {
        h2_abs: sum(0),
        l2_abs: sum(1),
        h2_exact: sum(2),
        l2_exact: sum(3),
    })
}

/// ♯-norm of `u − Π_K^{k+2} u` over the mesh:
/// `Σ_K ‖∇²e‖²_K + h_K³‖∂_nΔe‖²_∂K + h_K‖∂_nn e‖²_∂K + h_K‖∂_nt e‖²_∂K`.
pub fn sharp_norm_of_projection_error(mesh: &Mesh, scheme: Scheme, u: &dyn ExactSolution) -> Result<f64> {
    let extra = scheme.rhs_extra_degree;
    let mut per = Vec::with_capacity(mesh.num_cells());
    for cell in 0..mesh.num_cells() {
        let basis = CellBasis::for_cell(mesh, cell, scheme.recon_degree());
        let rule = cell_rule(mesh, cell, scheme.cell_quad_degree() + extra)?;
        let pi = project_cell(|p| u.value(p), &basis, &rule)?;
        let t = cell_table(&basis, &rule.points);
        let (hxx, hxy, hyy) = (&t.hxx * &pi, &t.hxy * &pi, &t.hyy * &pi);
        let mut s = 0.0;
        for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let h = u.hessian(p);
            let (a, b, c) = (h[0] - hxx[q], h[1] - hxy[q], h[2] - hyy[q]);
            s += w * (a * a + 2.0 * b * b + c * c);
        }
        let hk = mesh.cells[cell].diameter;
        for (local, &f) in mesh.cells[cell].faces.iter().enumerate() {
            let face = &mesh.faces[f];
            let n = mesh.outward_normal(cell, local);
            let tg = face.tangent;
            let fr = face_rule(face, scheme.face_quad_degree() + extra)?;
            let tr = trace_table(&basis, &fr.rule.points, n, tg);
            let (dnl, dnn, dnt) = (&tr.dn_lap * &pi, &tr.dnn * &pi, &tr.dnt * &pi);
            for (q, (&p, &w)) in fr.rule.points.iter().zip(&fr.rule.weights).enumerate() {
                let h = u.hessian(p);
                let gl = u.grad_laplacian(p);
                let hn = crate::mesh::Point::new(h[0] * n.x + h[1] * n.y, h[1] * n.x + h[2] * n.y);
                let e3 = gl.dot(n) - dnl[q];
                let enn = hn.dot(n) - dnn[q];
                let ent = hn.dot(tg) - dnt[q];
                s += w * (hk.powi(3) * e3 * e3 + hk * (enn * enn + ent * ent));
            }
        }
        per.push(s);
    }
    Ok(pairwise_sum(&per).sqrt())
}

/// Summary of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub h_max: f64,
    pub dofs: usize,
    pub err_h2_rel: f64,
    pub err_l2_rel: f64,
    pub assembly_s: f64,
    pub solve_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use crate::localops::{BcMode, Variant};
    use crate::manufactured::{Polynomial, SinSquared};
    use crate::mesh::build_rect_mesh;

    fn zero_field(mesh: &Mesh, degree: usize) -> Field {
        let n = crate::polyspace::poly_dim(degree);
        Field {
            degree,
            coeffs: (0..mesh.num_cells()).map(|_| DVector::zeros(n)).collect(),
        }
    }

    #[test]
    fn sin_squared_l2_norm() {
        let mesh = build_rect_mesh(4, 4).unwrap();
        let scheme = Scheme::new(Variant::A, 3, BcMode::Strong);
        let e = error_norms(&mesh, scheme, &zero_field(&mesh, 5), &SinSquared, &Sequential).unwrap();
        assert!((e.l2_abs * e.l2_abs - 9.0 / 64.0).abs() < 1e-12);
        assert_eq!(e.l2_rel(), 1.0);
    }

    #[test]
    fn x_squared_hessian_norm() {
        let mesh = build_rect_mesh(1, 1).unwrap();
        let u = Polynomial { terms: alloc::vec![(1.0, 2, 0)] };
        let e = error_norms(&mesh, Scheme::new(Variant::A, 0, BcMode::Strong), &zero_field(&mesh, 2), &u, &Sequential).unwrap();
        assert!((e.h2_abs * e.h2_abs - 4.0).abs() < 1e-13);
    }

    #[test]
    fn exact_field_has_zero_error() {
        let mesh = build_rect_mesh(2, 3).unwrap();
        let u = Polynomial::patch(3);
        let scheme = Scheme::new(Variant::B, 1, BcMode::Strong);
        let coeffs = (0..mesh.num_cells())
            .map(|c| {
                let b = CellBasis::for_cell(&mesh, c, 3);
                project_cell(|p| u.value(p), &b, &cell_rule(&mesh, c, 8).unwrap()).unwrap()
            })
            .collect();
        let field = Field { degree: 3, coeffs };
        let e = error_norms(&mesh, scheme, &field, &u, &Sequential).unwrap();
        assert!(e.h2_rel() < 1e-12 && e.l2_rel() < 1e-12);
        assert!(sharp_norm_of_projection_error(&mesh, scheme, &u).unwrap() < 1e-10);
    }

    #[test]
    fn sharp_norm_decays_like_h_to_the_k_plus_1() {
        let scheme = Scheme::new(Variant::A, 1, BcMode::Strong);
        let a = sharp_norm_of_projection_error(&build_rect_mesh(8, 8).unwrap(), scheme, &SinSquared).unwrap();
        let b = sharp_norm_of_projection_error(&build_rect_mesh(16, 16).unwrap(), scheme, &SinSquared).unwrap();
        let rate = (a / b).log2();
        assert!((rate - 2.0).abs() < 0.2, "{rate}");
    }

    #[test]
    fn pairwise_sum_matches_plain_sum_on_integers() {
        let v: Vec<f64> = (0..37).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 666.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}

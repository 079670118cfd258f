use nalgebra::{DMatrix, DVector};

use super::{CellContext, Variant};
use crate::error::Result;
use crate::linalg::bordered_solve;
use crate::manufactured::ExactSolution;
use crate::polyspace::{cell_table, hessian_gram, project_cell, project_face, CanonicalInterp};
use crate::quadrature::{cell_rule, face_rule};

/// `Î_K(u)`: `(Π_K u, J_F u or Π_F^{k+2} u, Π_F^k(n_K·∇u))` in the local
/// layout. Quadrature degrees are raised by `rhs_extra_degree`.
pub fn reduce(ctx: &CellContext, u: &dyn ExactSolution) -> Result<DVector<f64>> {
    let scheme = ctx.scheme();
    let lay = &ctx.layout;
    let extra = scheme.rhs_extra_degree;
    let mut v = DVector::zeros(lay.total);
    let rule = cell_rule(ctx.mesh, ctx.cell, scheme.cell_quad_degree() + extra)?;
    let cb = ctx.basis.with_degree(scheme.cell_degree());
    v.rows_mut(0, lay.cell_dim).copy_from(&project_cell(|p| u.value(p), &cb, &rule)?);
    for fc in &ctx.faces {
        let (Some(to), Some(no)) = (lay.trace_offset[fc.local], lay.normal_offset[fc.local]) else {
            continue;
        };
        let face = &ctx.mesh.faces[fc.face];
        let fr = face_rule(face, scheme.face_quad_degree() + extra)?;
        let trace = match scheme.variant {
            Variant::A | Variant::C => CanonicalInterp::new(face, scheme.k)?.interpolate(|p| u.value(p), &fr),
            Variant::B => project_face(|p| u.value(p), &fc.trace_basis, &fr)?,
        };
        v.rows_mut(to, lay.trace_dim).copy_from(&trace);
        let n = fc.normal;
        let gamma = project_face(|p| u.gradient(p).dot(n), &fc.normal_basis, &fr)?;
        v.rows_mut(no, lay.normal_dim).copy_from(&gamma);
    }
    Ok(v)
}

/// `E_K(u) ∈ P^{k+2}(K)`: `(∇²(E u − u), ∇²w)_K = 0` for all `w` and
/// `(E u − u, ξ)_K = 0` for `ξ ∈ P¹`.
pub fn elliptic_projection(ctx: &CellContext, u: &dyn ExactSolution) -> Result<DVector<f64>> {
    let extra = ctx.scheme().rhs_extra_degree;
    let rule = cell_rule(ctx.mesh, ctx.cell, ctx.scheme().cell_quad_degree() + extra)?;
    let t = cell_table(&ctx.basis, &rule.points);
    let g = hessian_gram(&t, &t, &rule.weights);
    let n = ctx.recon_dim();
    let mut b = DMatrix::zeros(n, 1);
    let mut c = DMatrix::zeros(3, 1);
    for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let h = u.hessian(p);
        let val = u.value(p);
        for i in 0..n {
            b[(i, 0)] += w * (h[0] * t.hxx[(q, i)] + 2.0 * h[1] * t.hxy[(q, i)] + h[2] * t.hyy[(q, i)]);
        }
        for l in 0..3 {
            c[(l, 0)] += w * val * t.value[(q, l)];
        }
    }
    let m = crate::polyspace::weighted_gram(&t.value.columns(0, 3).into_owned(), &rule.weights, &t.value);
    Ok(bordered_solve(&g, &m, &b, &c, ctx.cell)?.column(0).into_owned())
}

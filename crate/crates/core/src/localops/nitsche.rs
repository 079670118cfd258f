use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{CellContext, FaceContext};
use crate::assembly::BoundaryData;
use crate::error::Result;
use crate::linalg::bordered_solve;
use crate::polyspace::{trace_table, TraceTable};
use crate::quadrature::{face_rule, FaceQuadrature};
#[allow(unused_imports)]
use num_traits::Float;

struct DataFace<'a> {
    fc: &'a FaceContext,
    rule: FaceQuadrature,
    trace: TraceTable,
}

/// Faces without unknowns, with rules raised by the data margin.
fn data_faces<'a>(ctx: &'a CellContext) -> Result<Vec<DataFace<'a>>> {
    let scheme = ctx.scheme();
    let mut out = Vec::new();
    for fc in ctx.faces.iter().filter(|fc| !ctx.layout.is_active(fc.local)) {
        let rule = face_rule(&ctx.mesh.faces[fc.face], scheme.face_quad_degree() + scheme.rhs_extra_degree)?;
        let trace = trace_table(&ctx.basis, &rule.rule.points, fc.normal, fc.tangent);
        out.push(DataFace { fc, rule, trace });
    }
    Ok(out)
}

/// `Σ_b [g_D ∂_nΔφ_i − G·(∇²φ_i n)]` over the reconstruction basis.
fn coupling(ctx: &CellContext, faces: &[DataFace], data: &dyn BoundaryData) -> DVector<f64> {
    let mut c = DVector::zeros(ctx.recon_dim());
    for df in faces {
        for (q, (&p, &w)) in df.rule.rule.points.iter().zip(&df.rule.rule.weights).enumerate() {
            let gd = data.g_d(p);
            let g = data.g(p, df.fc.normal, df.fc.tangent);
            for i in 0..c.len() {
                c[i] += w * (gd * df.trace.dn_lap[(q, i)] - g.x * df.trace.grad_dn_x[(q, i)] - g.y * df.trace.grad_dn_y[(q, i)]);
            }
        }
    }
    c
}

/// `L_K(u)` in the reconstruction basis:
/// `(∇²L, ∇²w) = −(g_D, ∂_nΔw)_{∂K^b} + (G, ∇²w n)_{∂K^b}`, zero `P¹` moments.
/// Zero on cells without boundary-penalty faces.
pub fn lifting(ctx: &CellContext, data: &dyn BoundaryData) -> Result<DVector<f64>> {
    let n = ctx.recon_dim();
    if !ctx.layout.has_boundary_penalty() {
        return Ok(DVector::zeros(n));
    }
    let faces = data_faces(ctx)?;
    let rhs = -coupling(ctx, &faces, data);
    let g = crate::polyspace::hessian_gram(&ctx.table, &ctx.table, &ctx.rule.weights);
    let m = crate::polyspace::weighted_gram(&CellContext::cols(&ctx.table.value, 3), &ctx.rule.weights, &ctx.table.value);
    let x = bordered_solve(&g, &m, &DMatrix::from_column_slice(n, 1, rhs.as_slice()), &DMatrix::zeros(3, 1), ctx.cell)?;
    Ok(x.column(0).into_owned())
}

/// Penalty data terms `c3 h^{-3}(g_D, w_K) + c1 h^{-1}(G, ∇w_K)` on the cell rows.
fn penalty_data(ctx: &CellContext, faces: &[DataFace], data: &dyn BoundaryData) -> DVector<f64> {
    let scheme = ctx.scheme();
    let (_, c3, c1) = scheme.scaling.factors(scheme.k);
    let (h3, h1) = (c3 * ctx.h.powi(-3), c1 / ctx.h);
    let nc = ctx.cell_dim();
    let mut b = DVector::zeros(ctx.layout.total);
    for df in faces {
        for (q, (&p, &w)) in df.rule.rule.points.iter().zip(&df.rule.rule.weights).enumerate() {
            let gd = data.g_d(p);
            let g = data.g(p, df.fc.normal, df.fc.tangent);
            for j in 0..nc {
                b[j] += w * (h3 * gd * df.trace.value[(q, j)] + h1 * (g.x * df.trace.dx[(q, j)] + g.y * df.trace.dy[(q, j)]));
            }
        }
    }
    b
}

/// Boundary contribution to the local load in the boundary-penalty mode:
/// penalty data terms plus `(g_D, ∂_nΔ R ŵ) − (G, ∇²(R ŵ) n)` on `∂K^b`.
pub fn nitsche_load(ctx: &CellContext, r: &DMatrix<f64>, data: &dyn BoundaryData) -> Result<DVector<f64>> {
    if !ctx.layout.has_boundary_penalty() {
        return Ok(DVector::zeros(ctx.layout.total));
    }
    let faces = data_faces(ctx)?;
    Ok(penalty_data(ctx, &faces, data) + r.transpose() * coupling(ctx, &faces, data))
}

/// Same load written as `S^b(u, ŵ) − (∇²L_K(u), ∇²R ŵ)`.
pub fn nitsche_load_via_lifting(ctx: &CellContext, r: &DMatrix<f64>, data: &dyn BoundaryData) -> Result<DVector<f64>> {
    if !ctx.layout.has_boundary_penalty() {
        return Ok(DVector::zeros(ctx.layout.total));
    }
    let faces = data_faces(ctx)?;
    let l = lifting(ctx, data)?;
    let g = crate::polyspace::hessian_gram(&ctx.table, &ctx.table, &ctx.rule.weights);
    Ok(penalty_data(ctx, &faces, data) - r.transpose() * (g * l))
}

use core::ops::AddAssign;

use nalgebra::DMatrix;

use super::CellContext;
use crate::error::Result;
use crate::linalg::bordered_solve;
use crate::polyspace::{hessian_gram, weighted_gram};

/// Closure rows `(φ_i, ξ_l)_K` for `ξ ∈ P¹` and the matching right-hand side
/// `(v_K, ξ_l)_K`.
fn p1_closure(ctx: &CellContext) -> (DMatrix<f64>, DMatrix<f64>) {
    let w = &ctx.rule.weights;
    let xi = CellContext::cols(&ctx.table.value, 3);
    let m = weighted_gram(&xi, w, &ctx.table.value);
    let mut c = DMatrix::zeros(3, ctx.layout.total);
    let nc = ctx.cell_dim();
    c.view_mut((0, 0), (3, nc)).copy_from(&m.columns(0, nc));
    (m, c)
}

/// Adds the face-unknown columns shared by both forms:
/// `−(v_∂K, ∂_nΔw) + (∂_t v_∂K, ∂_nt w) + (γ_∂K, ∂_nn w)`.
fn add_face_columns(ctx: &CellContext, rhs: &mut DMatrix<f64>) {
    let lay = &ctx.layout;
    let nr = ctx.recon_dim();
    for fc in &ctx.faces {
        let (Some(to), Some(no)) = (lay.trace_offset[fc.local], lay.normal_offset[fc.local]) else {
            continue;
        };
        let w = &fc.rule.rule.weights;
        let psi = fc.trace_basis.value_table(&fc.rule.offsets);
        let dpsi = fc.trace_basis.tangential_table(&fc.rule.offsets);
        let chi = fc.normal_basis.value_table(&fc.rule.offsets);
        let t = -weighted_gram(&fc.trace.dn_lap, w, &psi) + weighted_gram(&fc.trace.dnt, w, &dpsi);
        rhs.view_mut((0, to), (nr, lay.trace_dim)).add_assign(&t);
        rhs.view_mut((0, no), (nr, lay.normal_dim)).add_assign(&weighted_gram(&fc.trace.dnn, w, &chi));
    }
}

/// `R_K` from the integrated-by-parts form
/// `(∇²R v̂, ∇²w) = (v_K, Δ²w) − (v_∂K, ∂_nΔw) + (γ, ∂_nn w) + (∂_t v_∂K, ∂_nt w)`,
/// face terms over faces carrying unknowns.
pub fn reconstruction(ctx: &CellContext) -> Result<DMatrix<f64>> {
    let nr = ctx.recon_dim();
    let nc = ctx.cell_dim();
    let w = &ctx.rule.weights;
    let mut rhs = DMatrix::zeros(nr, ctx.layout.total);
    let cell = weighted_gram(&ctx.table.bilap, w, &CellContext::cols(&ctx.table.value, nc));
    rhs.view_mut((0, 0), (nr, nc)).copy_from(&cell);
    add_face_columns(ctx, &mut rhs);
    solve(ctx, rhs)
}

/// `R_K` from the form
/// `(∇²v_K, ∇²w) + (v_K − v_∂K, ∂_nΔw) − (∂_n v_K − γ, ∂_nn w) − (∂_t(v_K − v_∂K), ∂_nt w)`;
/// on faces without unknowns the face components are zero.
pub fn reconstruction_direct(ctx: &CellContext) -> Result<DMatrix<f64>> {
    let nr = ctx.recon_dim();
    let nc = ctx.cell_dim();
    let w = &ctx.rule.weights;
    let mut rhs = DMatrix::zeros(nr, ctx.layout.total);
    let cells = |m: &DMatrix<f64>| CellContext::cols(m, nc);
    let t = &ctx.table;
    let sub = crate::polyspace::CellTable {
        value: cells(&t.value),
        hxx: cells(&t.hxx),
        hxy: cells(&t.hxy),
        hyy: cells(&t.hyy),
        bilap: cells(&t.bilap),
    };
    let mut cell = hessian_gram(t, &sub, w);
    for fc in &ctx.faces {
        let wq = &fc.rule.rule.weights;
        let tr = &fc.trace;
        cell += weighted_gram(&tr.dn_lap, wq, &cells(&tr.value));
        cell -= weighted_gram(&tr.dnn, wq, &cells(&tr.dn));
        cell -= weighted_gram(&tr.dnt, wq, &cells(&tr.dt));
    }
    rhs.view_mut((0, 0), (nr, nc)).copy_from(&cell);
    add_face_columns(ctx, &mut rhs);
    solve(ctx, rhs)
}

fn solve(ctx: &CellContext, rhs: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let g = hessian_gram(&ctx.table, &ctx.table, &ctx.rule.weights);
    let (m, c) = p1_closure(ctx);
    bordered_solve(&g, &m, &rhs, &c, ctx.cell)
}

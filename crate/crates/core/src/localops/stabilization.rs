use nalgebra::DMatrix;

use super::{CellContext, FaceContext, Variant};
use crate::error::Result;
use crate::mesh::Face;
use crate::polyspace::{spd_solve, weighted_gram, CanonicalInterp, FaceBasis};
use crate::quadrature::FaceQuadrature;
#[allow(unused_imports)]
use num_traits::Float;

fn face_mass(basis: &FaceBasis, rule: &FaceQuadrature) -> DMatrix<f64> {
    let t = basis.value_table(&rule.offsets);
    weighted_gram(&t, &rule.rule.weights, &t)
}

/// Coefficients of `Π_F^k` applied to the columns of `values` (a quadrature
/// table).
fn project_columns(fc: &FaceContext, values: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chi = fc.normal_basis.value_table(&fc.rule.offsets);
    let w = &fc.rule.rule.weights;
    spd_solve(weighted_gram(&chi, w, &chi), &weighted_gram(&chi, w, values), "face mass matrix")
}

/// `J_F^{k+1}` of the traces of the first `ncols` reconstruction basis
/// functions.
fn interp_columns(ctx: &CellContext, fc: &FaceContext, ncols: usize) -> Result<DMatrix<f64>> {
    let face: &Face = &ctx.mesh.faces[fc.face];
    let j = CanonicalInterp::new(face, ctx.scheme().k)?;
    let full = j.cell_basis_matrix(&ctx.basis, &fc.rule);
    Ok(full.columns(0, ncols).into_owned())
}

/// `S_∂K` on faces carrying unknowns. `r` is the reconstruction matrix
/// (only used by variant C).
pub fn stabilization(ctx: &CellContext, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scheme = ctx.scheme();
    let lay = &ctx.layout;
    let n = lay.total;
    let nc = lay.cell_dim;
    let (c4, c3, c1) = scheme.scaling.factors(scheme.k);
    let (h4, h3, h1) = (c4 * ctx.h.powi(-4), c3 * ctx.h.powi(-3), c1 / ctx.h);
    let mut s = DMatrix::zeros(n, n);

    if scheme.variant == Variant::C {
        // h^{-4} ‖Π^{k+1}_K (v_K − R v̂)‖²_K
        let w = &ctx.rule.weights;
        let phi_c = CellContext::cols(&ctx.table.value, nc);
        let mc = weighted_gram(&phi_c, w, &phi_c);
        let p = spd_solve(mc.clone(), &weighted_gram(&phi_c, w, &ctx.table.value), "cell mass matrix")?;
        let mut z = -(p * r);
        for i in 0..nc {
            z[(i, i)] += 1.0;
        }
        s += z.transpose() * mc * z * h4;
    }

    for fc in &ctx.faces {
        let (Some(to), Some(no)) = (lay.trace_offset[fc.local], lay.normal_offset[fc.local]) else {
            continue;
        };
        let w = &fc.rule.rule.weights;
        let nq = w.len();
        // trace mismatch
        match scheme.variant {
            Variant::A => {
                let mut d = DMatrix::zeros(lay.trace_dim, n);
                d.view_mut((0, 0), (lay.trace_dim, nc)).copy_from(&(-interp_columns(ctx, fc, nc)?));
                for i in 0..lay.trace_dim {
                    d[(i, to + i)] = 1.0;
                }
                s += d.transpose() * face_mass(&fc.trace_basis, &fc.rule) * d * h3;
            }
            Variant::B => {
                let mut v = DMatrix::zeros(nq, n);
                v.view_mut((0, 0), (nq, nc)).copy_from(&(-CellContext::cols(&fc.trace.value, nc)));
                v.view_mut((0, to), (nq, lay.trace_dim)).copy_from(&fc.trace_basis.value_table(&fc.rule.offsets));
                s += weighted_gram(&v, w, &v) * h3;
            }
            Variant::C => {
                let mut d = -(interp_columns(ctx, fc, ctx.recon_dim())? * r);
                for i in 0..lay.trace_dim {
                    d[(i, to + i)] += 1.0;
                }
                s += d.transpose() * face_mass(&fc.trace_basis, &fc.rule) * d * h3;
            }
        }
        // normal-derivative mismatch
        let e_cols = match scheme.variant {
            Variant::A | Variant::B => {
                let mut e = DMatrix::zeros(lay.normal_dim, n);
                e.view_mut((0, 0), (lay.normal_dim, nc)).copy_from(&project_columns(fc, &CellContext::cols(&fc.trace.dn, nc))?);
                e
            }
            Variant::C => project_columns(fc, &fc.trace.dn)? * r,
        };
        let mut e = -e_cols;
        for i in 0..lay.normal_dim {
            e[(i, no + i)] += 1.0;
        }
        s += e.transpose() * face_mass(&fc.normal_basis, &fc.rule) * e * h1;
    }
    Ok(crate::linalg::symmetrize(&s))
}

/// `S^b_∂K = h^{-3}(v_K, w_K)_{∂K^b} + h^{-1}(∇v_K, ∇w_K)_{∂K^b}` over faces
/// without unknowns, with the same multipliers as `S_∂K`.
pub fn boundary_penalty(ctx: &CellContext) -> DMatrix<f64> {
    let scheme = ctx.scheme();
    let lay = &ctx.layout;
    let nc = lay.cell_dim;
    let (_, c3, c1) = scheme.scaling.factors(scheme.k);
    let (h3, h1) = (c3 * ctx.h.powi(-3), c1 / ctx.h);
    let mut sb = DMatrix::zeros(lay.total, lay.total);
    for fc in ctx.faces.iter().filter(|fc| !lay.is_active(fc.local)) {
        let w = &fc.rule.rule.weights;
        let cols = |m: &DMatrix<f64>| CellContext::cols(m, nc);
        let (v, dx, dy) = (cols(&fc.trace.value), cols(&fc.trace.dx), cols(&fc.trace.dy));
        let b = weighted_gram(&v, w, &v) * h3 + (weighted_gram(&dx, w, &dx) + weighted_gram(&dy, w, &dy)) * h1;
        let mut blk = sb.view_mut((0, 0), (nc, nc));
        blk += b;
    }
    sb
}

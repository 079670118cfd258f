//! Cell-local HHO operators: DoF layout, reconstruction, stabilization,
//! local bilinear form, reduction, and the boundary-penalty (Nitsche) pieces.
//!
//! Local vectors are ordered `[cell | face traces | face normals]`, faces in
//! the cell's loop order. Normal components are expressed in the cell's own
//! orientation (`γ_∂K = ∂_{n_K}`); the global sign `σ_KF` is applied by the
//! assembler.

use alloc::vec::Vec;
use core::ops::AddAssign;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::symmetric_rank;
use crate::mesh::{Mesh, Point};
use crate::polyspace::{cell_table, trace_table, CellBasis, CellTable, FaceBasis, TraceTable};
use crate::quadrature::{cell_rule, face_rule, FaceQuadrature, QuadratureRule};
#[allow(unused_imports)]
use num_traits::Float;

mod nitsche;
mod reconstruction;
mod reduce;
mod stabilization;

pub use nitsche::{lifting, nitsche_load, nitsche_load_via_lifting};
pub use reconstruction::{reconstruction, reconstruction_direct};
pub use reduce::{elliptic_projection, reduce};
pub use stabilization::{boundary_penalty, stabilization};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Cell `P^{k+2}`, traces `P^{k+1}`, normals `P^k`.
    A,
    /// Cell `P^{k+2}`, traces `P^{k+2}`, normals `P^k`.
    B,
    /// Cell `P^{k+1}`, traces `P^{k+1}`, normals `P^k`.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BcMode {
    /// Boundary-face unknowns are prescribed from the data.
    Strong,
    /// Boundary faces carry no unknowns; data enters through a penalty.
    Nitsche,
}

/// Multipliers of the stabilization terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum StabScaling {
    Plain,
    /// Every term is multiplied by `(k+1)²`.
    #[default]
    K2All,
    /// Only the `h_K^{-1}` term is multiplied by `(k+1)²`.
    K2Hm1Only,
}

impl StabScaling {
    /// `(c4, c3, c1)` for the `h^{-4}`, `h^{-3}` and `h^{-1}` terms.
    pub fn factors(self, k: usize) -> (f64, f64, f64) {
        let q = ((k + 1) * (k + 1)) as f64;
        match self {
            StabScaling::Plain => (1.0, 1.0, 1.0),
            StabScaling::K2All => (q, q, q),
            StabScaling::K2Hm1Only => (1.0, 1.0, q),
        }
    }
}

/// Discretization parameters shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Scheme {
    pub variant: Variant,
    pub k: usize,
    pub bc: BcMode,
    pub scaling: StabScaling,
    /// Extra quadrature degree for non-polynomial data.
    pub rhs_extra_degree: usize,
}

impl Scheme {
    pub fn new(variant: Variant, k: usize, bc: BcMode) -> Self {
        Self {
            variant,
            k,
            bc,
            scaling: StabScaling::default(),
            rhs_extra_degree: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.bc == BcMode::Nitsche && self.variant == Variant::C {
            return Err(Error::InvalidArgument("variant C is not available with Nitsche boundary conditions".into()));
        }
        Ok(())
    }

    pub fn cell_degree(&self) -> usize {
        match self.variant {
            Variant::A | Variant::B => self.k + 2,
            Variant::C => self.k + 1,
        }
    }

    pub fn trace_degree(&self) -> usize {
        match self.variant {
            Variant::A | Variant::C => self.k + 1,
            Variant::B => self.k + 2,
        }
    }

    pub fn normal_degree(&self) -> usize {
        self.k
    }

    pub fn recon_degree(&self) -> usize {
        self.k + 2
    }

    pub fn trace_dim(&self) -> usize {
        self.trace_degree() + 1
    }

    pub fn normal_dim(&self) -> usize {
        self.k + 1
    }

    /// Unknowns per mesh interface.
    pub fn face_dofs(&self) -> usize {
        self.trace_dim() + self.normal_dim()
    }

    pub fn cell_dofs(&self) -> usize {
        crate::polyspace::poly_dim(self.cell_degree())
    }

    pub fn cell_quad_degree(&self) -> usize {
        2 * (self.k + 2)
    }

    pub fn face_quad_degree(&self) -> usize {
        2 * (self.k + 2) + 1
    }
}

/// Positions of the blocks of a local HHO vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalDofLayout {
    pub scheme: Scheme,
    pub cell_dim: usize,
    pub trace_dim: usize,
    pub normal_dim: usize,
    /// Start of the trace block of each local face (`None`: no unknowns).
    pub trace_offset: Vec<Option<usize>>,
    pub normal_offset: Vec<Option<usize>>,
    pub total: usize,
}

impl LocalDofLayout {
    pub fn new(mesh: &Mesh, cell: usize, scheme: Scheme) -> Self {
        let c = &mesh.cells[cell];
        let active: Vec<bool> = c
            .faces
            .iter()
            .map(|&f| scheme.bc == BcMode::Strong || !mesh.faces[f].is_boundary())
            .collect();
        let cell_dim = scheme.cell_dofs();
        let (td, nd) = (scheme.trace_dim(), scheme.normal_dim());
        let n_active = active.iter().filter(|&&a| a).count();
        let mut trace_offset = Vec::with_capacity(active.len());
        let mut normal_offset = Vec::with_capacity(active.len());
        let (mut t, mut n) = (cell_dim, cell_dim + n_active * td);
        for &a in &active {
            if a {
                trace_offset.push(Some(t));
                normal_offset.push(Some(n));
                t += td;
                n += nd;
            } else {
                trace_offset.push(None);
                normal_offset.push(None);
            }
        }
        Self {
            scheme,
            cell_dim,
            trace_dim: td,
            normal_dim: nd,
            trace_offset,
            normal_offset,
            total: n,
        }
    }

    pub fn is_active(&self, local: usize) -> bool {
        self.trace_offset[local].is_some()
    }

    pub fn has_boundary_penalty(&self) -> bool {
        self.trace_offset.iter().any(|o| o.is_none())
    }
}

/// Per-face precomputed data, seen from one cell.
#[derive(Debug, Clone)]
pub struct FaceContext {
    pub face: usize,
    pub local: usize,
    /// Outward normal `n_K` on this face.
    pub normal: Point,
    /// Face tangent `t_F` (global orientation).
    pub tangent: Point,
    /// `σ_KF`.
    pub sign: f64,
    pub boundary: bool,
    pub length: f64,
    pub rule: FaceQuadrature,
    /// Reconstruction basis traces at `rule`.
    pub trace: TraceTable,
    pub trace_basis: FaceBasis,
    pub normal_basis: FaceBasis,
}

/// Everything needed to build the operators of one cell.
#[derive(Debug, Clone)]
pub struct CellContext<'m> {
    pub mesh: &'m Mesh,
    pub cell: usize,
    pub layout: LocalDofLayout,
    pub h: f64,
    /// Basis of `P^{k+2}(K)`; the cell unknowns use its first `cell_dim`
    /// functions.
    pub basis: CellBasis,
    pub rule: QuadratureRule,
    pub table: CellTable,
    pub faces: Vec<FaceContext>,
}

impl<'m> CellContext<'m> {
    pub fn new(mesh: &'m Mesh, cell: usize, scheme: Scheme) -> Result<Self> {
        Self::with_extra_degree(mesh, cell, scheme, 0)
    }

    /// Raises every quadrature degree by `extra`.
    pub fn with_extra_degree(mesh: &'m Mesh, cell: usize, scheme: Scheme, extra: usize) -> Result<Self> {
        scheme.validate()?;
        if cell >= mesh.num_cells() {
            return Err(Error::InvalidArgument(alloc::format!("no cell {cell}")));
        }
        let layout = LocalDofLayout::new(mesh, cell, scheme);
        let c = &mesh.cells[cell];
        let basis = CellBasis::for_cell(mesh, cell, scheme.recon_degree());
        let rule = cell_rule(mesh, cell, scheme.cell_quad_degree() + extra)?;
        let table = cell_table(&basis, &rule.points);
        let mut faces = Vec::with_capacity(c.num_faces());
        for (local, &f) in c.faces.iter().enumerate() {
            let face = &mesh.faces[f];
            let normal = mesh.outward_normal(cell, local);
            let rule = face_rule(face, scheme.face_quad_degree() + extra)?;
            let trace = trace_table(&basis, &rule.rule.points, normal, face.tangent);
            let trace_basis = FaceBasis::new(face, scheme.trace_degree());
            faces.push(FaceContext {
                face: f,
                local,
                normal,
                tangent: face.tangent,
                sign: c.signs[local],
                boundary: face.is_boundary(),
                length: face.diameter,
                rule,
                trace,
                normal_basis: trace_basis.with_degree(scheme.normal_degree()),
                trace_basis,
            });
        }
        Ok(Self {
            mesh,
            cell,
            layout,
            h: c.diameter,
            basis,
            rule,
            table,
            faces,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.layout.scheme
    }

    pub fn cell_dim(&self) -> usize {
        self.layout.cell_dim
    }

    pub fn recon_dim(&self) -> usize {
        self.basis.dim()
    }

    /// First `n` columns of `m` (the cell-unknown part of a reconstruction
    /// basis table).
    pub(crate) fn cols(m: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
        m.columns(0, n).into_owned()
    }
}

/// Local matrices of one cell.
#[derive(Debug, Clone)]
pub struct LocalOperators {
    pub cell: usize,
    pub layout: LocalDofLayout,
    /// Local DoFs → coefficients of the reconstruction in `P^{k+2}(K)`.
    pub r: DMatrix<f64>,
    /// Hessian Gram matrix of the `P^{k+2}(K)` basis.
    pub g: DMatrix<f64>,
    /// Stabilization on faces carrying unknowns.
    pub s: DMatrix<f64>,
    /// Boundary penalty on faces without unknowns (zero when there are none).
    pub sb: DMatrix<f64>,
    /// `Rᵀ G R + S + S^b`.
    pub a: DMatrix<f64>,
}

impl LocalOperators {
    /// Dimension of the kernel of `a` expected for this cell.
    pub fn expected_kernel(&self) -> usize {
        if self.layout.has_boundary_penalty() {
            0
        } else {
            3
        }
    }

    /// Null-space dimension of the Jacobi-equilibrated `A_K`.
    pub fn kernel_dim(&self) -> usize {
        let a = crate::linalg::equilibrate(&self.a);
        a.nrows() - symmetric_rank(&a, 1e-10)
    }
}

pub fn build_local_operators(ctx: &CellContext) -> Result<LocalOperators> {
    let r = reconstruction(ctx)?;
    let g = crate::polyspace::hessian_gram(&ctx.table, &ctx.table, &ctx.rule.weights);
    let s = stabilization(ctx, &r)?;
    let sb = boundary_penalty(ctx);
    let a = crate::linalg::symmetrize(&(r.transpose() * &g * &r + &s + &sb));
    Ok(LocalOperators {
        cell: ctx.cell,
        layout: ctx.layout.clone(),
        r,
        g,
        s,
        sb,
        a,
    })
}

/// Builds the local operators and checks the kernel dimension of `A`.
pub fn build_local_matrices(mesh: &Mesh, cell: usize, scheme: Scheme) -> Result<LocalOperators> {
    let ctx = CellContext::new(mesh, cell, scheme)?;
    let ops = build_local_operators(&ctx)?;
    let found = ops.kernel_dim();
    if found != ops.expected_kernel() {
        return Err(Error::KernelDimension {
            cell,
            expected: ops.expected_kernel(),
            found,
        });
    }
    Ok(ops)
}

/// Gram matrix of the local seminorm
/// `‖∇²v_K‖² + h^{-3}‖v_∂K − v_K‖² + h^{-1}‖γ − ∂_n v_K‖²` (faces with
/// unknowns) `+ h^{-3}‖v_K‖² + h^{-1}‖∇v_K‖²` (faces without).
pub fn seminorm_matrix(ctx: &CellContext) -> DMatrix<f64> {
    use crate::polyspace::weighted_gram;
    let lay = &ctx.layout;
    let nc = lay.cell_dim;
    let n = lay.total;
    let mut m = DMatrix::zeros(n, n);
    let w = &ctx.rule.weights;
    let t = &ctx.table;
    let hc = |x: &DMatrix<f64>| CellContext::cols(x, nc);
    let hess = weighted_gram(&hc(&t.hxx), w, &hc(&t.hxx)) + weighted_gram(&hc(&t.hxy), w, &hc(&t.hxy)) * 2.0 + weighted_gram(&hc(&t.hyy), w, &hc(&t.hyy));
    m.view_mut((0, 0), (nc, nc)).add_assign(&hess);
    let (h3, h1) = (ctx.h.powi(-3), 1.0 / ctx.h);
    for fc in &ctx.faces {
        let wq = &fc.rule.rule.weights;
        let nq = wq.len();
        match (lay.trace_offset[fc.local], lay.normal_offset[fc.local]) {
            (Some(to), Some(no)) => {
                let mut v = DMatrix::zeros(nq, n);
                v.view_mut((0, 0), (nq, nc)).copy_from(&(-hc(&fc.trace.value)));
                v.view_mut((0, to), (nq, lay.trace_dim)).copy_from(&fc.trace_basis.value_table(&fc.rule.offsets));
                m += weighted_gram(&v, wq, &v) * h3;
                let mut g = DMatrix::zeros(nq, n);
                g.view_mut((0, 0), (nq, nc)).copy_from(&(-hc(&fc.trace.dn)));
                g.view_mut((0, no), (nq, lay.normal_dim)).copy_from(&fc.normal_basis.value_table(&fc.rule.offsets));
                m += weighted_gram(&g, wq, &g) * h1;
            }
            _ => {
                let (v, dx, dy) = (hc(&fc.trace.value), hc(&fc.trace.dx), hc(&fc.trace.dy));
                let b = weighted_gram(&v, wq, &v) * h3 + (weighted_gram(&dx, wq, &dx) + weighted_gram(&dy, wq, &dy)) * h1;
                m.view_mut((0, 0), (nc, nc)).add_assign(&b);
            }
        }
    }
    m
}

/// `|v̂|_{V̂_K}`.
pub fn local_seminorm(ctx: &CellContext, v: &nalgebra::DVector<f64>) -> f64 {
    v.dot(&(seminorm_matrix(ctx) * v)).max(0.0).sqrt()
}

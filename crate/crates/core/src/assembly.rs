//! Global numbering, cellwise assembly with static condensation, and
//! recovery of the eliminated cell unknowns.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::localops::{build_local_operators, lifting, nitsche_load, BcMode, CellContext, LocalOperators, Scheme, Variant};
use crate::manufactured::ExactSolution;
use crate::mesh::{Mesh, Point};
use crate::polyspace::{cell_value_table, project_face, weighted_moments, CanonicalInterp, FaceBasis};
use crate::quadrature::{cell_rule, face_rule};
use crate::sparse::CsrMatrix;

/// Boundary data `g_D` and `G = g_N n + (∂_t g_D) t`.
pub trait BoundaryData: Sync {
    fn g_d(&self, p: Point) -> f64;
    /// `G` at `p` on a face with unit normal `n` and tangent `t`.
    fn g(&self, p: Point, n: Point, t: Point) -> Point;

    fn g_n(&self, p: Point, n: Point) -> f64 {
        self.g(p, n, Point::new(-n.y, n.x)).dot(n)
    }
}

/// `g_D = 0`, `g_N = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Homogeneous;

impl BoundaryData for Homogeneous {
    fn g_d(&self, _: Point) -> f64 {
        0.0
    }

    fn g(&self, _: Point, _: Point, _: Point) -> Point {
        Point::default()
    }
}

/// Data taken from an exact solution: `g_D = u`, `G = ∇u`.
pub struct ExactBoundary<'a>(pub &'a dyn ExactSolution);

impl BoundaryData for ExactBoundary<'_> {
    fn g_d(&self, p: Point) -> f64 {
        self.0.value(p)
    }

    fn g(&self, p: Point, _: Point, _: Point) -> Point {
        self.0.gradient(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalDof {
    Free(usize),
    /// Prescribed boundary value.
    Fixed(usize),
}

/// Face unknowns: per face a contiguous `[trace | normal]` block, either in
/// the free or in the prescribed index space.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub scheme: Scheme,
    pub face_block: Vec<Option<GlobalDof>>,
    pub n_free: usize,
    pub n_fixed: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, scheme: Scheme) -> Self {
        let nd = scheme.face_dofs();
        let (mut free, mut fixed) = (0, 0);
        let face_block = mesh
            .faces
            .iter()
            .map(|f| {
                if !f.is_boundary() {
                    free += nd;
                    Some(GlobalDof::Free(free - nd))
                } else if scheme.bc == BcMode::Strong {
                    fixed += nd;
                    Some(GlobalDof::Fixed(fixed - nd))
                } else {
                    None
                }
            })
            .collect();
        Self {
            scheme,
            face_block,
            n_free: free,
            n_fixed: fixed,
        }
    }

    /// Global index and sign of every face unknown of `cell`, in local order
    /// (after the cell block).
    pub fn cell_map(&self, mesh: &Mesh, cell: usize) -> Vec<(GlobalDof, f64)> {
        let c = &mesh.cells[cell];
        let td = self.scheme.trace_dim();
        let nd = self.scheme.normal_dim();
        let shift = |g: GlobalDof, j: usize| match g {
            GlobalDof::Free(i) => GlobalDof::Free(i + j),
            GlobalDof::Fixed(i) => GlobalDof::Fixed(i + j),
        };
        let mut out = Vec::new();
        for &f in &c.faces {
            if let Some(g) = self.face_block[f] {
                out.extend((0..td).map(|j| (shift(g, j), 1.0)));
            }
        }
        for (l, &f) in c.faces.iter().enumerate() {
            if let Some(g) = self.face_block[f] {
                out.extend((0..nd).map(|j| (shift(g, td + j), c.signs[l])));
            }
        }
        out
    }
}

/// Prescribed boundary values: trace `J_F^{k+1}(g_D)` (`Π_F^{k+2}(g_D)` for
/// variant B) and normal `Π_F^k(G·n_F)`.
pub fn boundary_values(mesh: &Mesh, dofs: &DofMap, data: &dyn BoundaryData) -> Result<Vec<f64>> {
    let scheme = dofs.scheme;
    let mut vals = vec![0.0; dofs.n_fixed];
    for (f, face) in mesh.faces.iter().enumerate() {
        let Some(GlobalDof::Fixed(base)) = dofs.face_block[f] else {
            continue;
        };
        let rule = face_rule(face, scheme.face_quad_degree() + scheme.rhs_extra_degree)?;
        let tb = FaceBasis::new(face, scheme.trace_degree());
        let trace = match scheme.variant {
            Variant::A | Variant::C => CanonicalInterp::new(face, scheme.k)?.interpolate(|p| data.g_d(p), &rule),
            Variant::B => project_face(|p| data.g_d(p), &tb, &rule)?,
        };
        let normal = project_face(|p| data.g(p, face.normal, face.tangent).dot(face.normal), &tb.with_degree(scheme.k), &rule)?;
        vals[base..base + trace.len()].copy_from_slice(trace.as_slice());
        vals[base + trace.len()..base + trace.len() + normal.len()].copy_from_slice(normal.as_slice());
    }
    Ok(vals)
}

/// `(f, φ_j)_K` on the cell unknowns.
pub fn cell_load(ctx: &CellContext, f: &(dyn Fn(Point) -> f64 + Sync)) -> Result<DVector<f64>> {
    let scheme = ctx.scheme();
    let rule = cell_rule(ctx.mesh, ctx.cell, scheme.cell_quad_degree() + scheme.rhs_extra_degree)?;
    let t = cell_value_table(&ctx.basis.with_degree(scheme.cell_degree()), &rule.points);
    let vals: Vec<f64> = rule.points.iter().map(|&p| f(p)).collect();
    let mut b = DVector::zeros(ctx.layout.total);
    b.rows_mut(0, ctx.cell_dim()).copy_from(&weighted_moments(&t, &rule.weights, &vals));
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssemblyOptions {
    /// Verify `dim ker A_K` on every cell.
    pub check_kernel: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { check_kernel: true }
    }
}

/// Data kept per cell to recover its unknowns from the face solution.
#[derive(Debug, Clone)]
pub struct CellRecovery {
    /// `A_cc^{-1} A_cf`.
    pub x: DMatrix<f64>,
    /// `A_cc^{-1} b_c`.
    pub y: DVector<f64>,
    pub map: Vec<(GlobalDof, f64)>,
    /// Reconstruction matrix.
    pub r: DMatrix<f64>,
    /// `L_K` of the boundary data (zero unless boundary-penalty cell).
    pub lift: DVector<f64>,
}

/// Face-only system left after eliminating every cell block.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub dofs: DofMap,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    pub fixed: Vec<f64>,
    pub cells: Vec<CellRecovery>,
}

/// Uncondensed local system of one cell: operators and load.
pub fn local_system(ctx: &CellContext, f: &(dyn Fn(Point) -> f64 + Sync), data: &dyn BoundaryData) -> Result<(LocalOperators, DVector<f64>)> {
    let ops = build_local_operators(ctx)?;
    let mut b = cell_load(ctx, f)?;
    if ctx.scheme().bc == BcMode::Nitsche {
        b += nitsche_load(ctx, &ops.r, data)?;
    }
    Ok((ops, b))
}

struct CellOutput {
    recovery: CellRecovery,
    s: DMatrix<f64>,
    g: DVector<f64>,
}

fn condense_cell(
    mesh: &Mesh,
    cell: usize,
    dofs: &DofMap,
    f: &(dyn Fn(Point) -> f64 + Sync),
    data: &dyn BoundaryData,
    opts: AssemblyOptions,
) -> Result<CellOutput> {
    let scheme = dofs.scheme;
    let ctx = CellContext::new(mesh, cell, scheme)?;
    let (ops, b) = local_system(&ctx, f, data)?;
    if opts.check_kernel {
        let found = ops.kernel_dim();
        if found != ops.expected_kernel() {
            return Err(Error::KernelDimension {
                cell,
                expected: ops.expected_kernel(),
                found,
            });
        }
    }
    let nc = ctx.cell_dim();
    let nf = ops.a.nrows() - nc;
    let a = &ops.a;
    let acc = a.view((0, 0), (nc, nc)).into_owned();
    let acf = a.view((0, nc), (nc, nf)).into_owned();
    let aff = a.view((nc, nc), (nf, nf)).into_owned();
    let chol = acc.cholesky().ok_or(Error::SingularLocal { cell, what: "cell block" })?;
    let x = chol.solve(&acf);
    let y = chol.solve(&b.rows(0, nc).into_owned());
    let s = crate::linalg::symmetrize(&(aff - acf.transpose() * &x));
    let g = b.rows(nc, nf).into_owned() - acf.transpose() * &y;
    let lift = if scheme.bc == BcMode::Nitsche { lifting(&ctx, data)? } else { DVector::zeros(ctx.recon_dim()) };
    Ok(CellOutput {
        recovery: CellRecovery {
            x,
            y,
            map: dofs.cell_map(mesh, cell),
            r: ops.r,
            lift,
        },
        s,
        g,
    })
}

/// Assembles and condenses the global problem. Cells are processed through
/// `exec`; the scatter is sequential in cell order, so the result does not
/// depend on the executor.
pub fn assemble<E: Executor>(
    mesh: &Mesh,
    scheme: Scheme,
    f: &(dyn Fn(Point) -> f64 + Sync),
    data: &dyn BoundaryData,
    opts: AssemblyOptions,
    exec: &E,
) -> Result<CondensedSystem> {
    scheme.validate()?;
    let dofs = DofMap::new(mesh, scheme);
    let fixed = boundary_values(mesh, &dofs, data)?;
    let outputs = exec.map(mesh.num_cells(), |c| condense_cell(mesh, c, &dofs, f, data, opts));
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut rhs = vec![0.0; dofs.n_free];
    let mut cells = Vec::with_capacity(mesh.num_cells());
    for out in outputs {
        let out = out?;
        let map = &out.recovery.map;
        for (i, &(gi, si)) in map.iter().enumerate() {
            let GlobalDof::Free(row) = gi else { continue };
            rhs[row] += si * out.g[i];
            for (j, &(gj, sj)) in map.iter().enumerate() {
                let v = si * sj * out.s[(i, j)];
                match gj {
                    GlobalDof::Free(col) => {
                        rows.push(row);
                        cols.push(col);
                        vals.push(v);
                    }
                    GlobalDof::Fixed(col) => rhs[row] -= v * fixed[col],
                }
            }
        }
        cells.push(out.recovery);
    }
    let matrix = CsrMatrix::from_triplets(dofs.n_free, &rows, &cols, &vals)?;
    Ok(CondensedSystem {
        dofs,
        matrix,
        rhs,
        fixed,
        cells,
    })
}

/// Local face vector `û_∂K` of one cell from global free and fixed values.
pub fn gather(map: &[(GlobalDof, f64)], free: &[f64], fixed: &[f64]) -> DVector<f64> {
    DVector::from_iterator(
        map.len(),
        map.iter().map(|&(g, s)| match g {
            GlobalDof::Free(i) => s * free[i],
            GlobalDof::Fixed(i) => s * fixed[i],
        }),
    )
}

/// Full local vectors `û_K = (u_K, u_∂K, γ_∂K)` for every cell.
pub fn recover_cells(system: &CondensedSystem, face_solution: &[f64]) -> Result<Vec<DVector<f64>>> {
    if face_solution.len() != system.dofs.n_free {
        return Err(Error::DimensionMismatch {
            expected: system.dofs.n_free,
            found: face_solution.len(),
        });
    }
    Ok(system
        .cells
        .iter()
        .map(|c| {
            let uf = gather(&c.map, face_solution, &system.fixed);
            let uc = &c.y - &c.x * &uf;
            let mut v = DVector::zeros(uc.len() + uf.len());
            v.rows_mut(0, uc.len()).copy_from(&uc);
            v.rows_mut(uc.len(), uf.len()).copy_from(&uf);
            v
        })
        .collect())
}

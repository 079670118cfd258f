//! Manufactured-solution runs over mesh families and fitted rates.

use alloc::vec::Vec;

use crate::assembly::{assemble, recover_cells, AssemblyOptions, ExactBoundary};
use crate::error::{Error, Result};
use crate::exec::{Clock, Executor};
use crate::localops::Scheme;
use crate::manufactured::ExactSolution;
use crate::mesh::{build_rect_mesh, build_tri_mesh, build_voronoi_mesh, Mesh};
use crate::post::{error_norms, reconstruct_field, ErrorNorms, ErrorReport, Field};
use crate::solve::{solve, SolveConfig, SolveStats};
#[allow(unused_imports)]
use num_traits::Float;

/// Output of one manufactured-solution solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub report: ErrorReport,
    pub norms: ErrorNorms,
    pub stats: SolveStats,
    pub field: Field,
    pub face_solution: Vec<f64>,
}

/// Assemble, solve, recover, reconstruct and measure for `f = Δ²u` with
/// boundary data taken from `u`.
pub fn solve_manufactured<E: Executor, C: Clock>(
    mesh: &Mesh,
    scheme: Scheme,
    u: &dyn ExactSolution,
    config: &SolveConfig,
    opts: AssemblyOptions,
    exec: &E,
    clock: &C,
) -> Result<Solution> {
    let data = ExactBoundary(u);
    let f = |p| u.bilaplacian(p);
    let t0 = clock.seconds();
    let system = assemble(mesh, scheme, &f, &data, opts, exec)?;
    let t1 = clock.seconds();
    let (x, stats) = solve(&system.matrix, &system.rhs, config)?;
    let t2 = clock.seconds();
    let full = recover_cells(&system, &x)?;
    let field = reconstruct_field(&system, &full);
    let norms = error_norms(mesh, scheme, &field, u, exec)?;
    Ok(Solution {
        report: ErrorReport {
            h_max: mesh.h_max(),
            dofs: system.dofs.n_free,
            err_h2_rel: norms.h2_rel(),
            err_l2_rel: norms.l2_rel(),
            assembly_s: t1 - t0,
            solve_s: t2 - t1,
        },
        norms,
        stats,
        field,
        face_solution: x,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshKind {
    /// `n × n` squares.
    Rect,
    /// `n × n` squares split into `2n²` triangles.
    Tri,
    /// Clipped Voronoi diagram of `n` seeded sites.
    Voronoi { seed: u64, lloyd_iters: usize },
}

/// Refinement sequence: one resolution per level (`n` per side for
/// rect/tri, number of cells for Voronoi).
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFamily {
    pub kind: MeshKind,
    pub levels: Vec<usize>,
}

impl MeshFamily {
    pub fn rect(levels: &[usize]) -> Self {
        Self {
            kind: MeshKind::Rect,
            levels: levels.to_vec(),
        }
    }

    pub fn voronoi(levels: &[usize], seed: u64, lloyd_iters: usize) -> Self {
        Self {
            kind: MeshKind::Voronoi { seed, lloyd_iters },
            levels: levels.to_vec(),
        }
    }

    pub fn build(&self, level: usize) -> Result<Mesh> {
        build_mesh(self.kind, self.levels[level])
    }
}

pub fn build_mesh(kind: MeshKind, n: usize) -> Result<Mesh> {
    Ok(match kind {
        MeshKind::Rect => build_rect_mesh(n, n)?,
        MeshKind::Tri => build_tri_mesh(n)?,
        MeshKind::Voronoi { seed, lloyd_iters } => build_voronoi_mesh(n, seed, lloyd_iters)?,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Number of finest levels used in the fits.
pub const FIT_LEVELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slopes {
    /// `d log e / d log h`.
    pub h2_vs_h: f64,
    pub l2_vs_h: f64,
    /// `−d log e / d log DoFs^{1/2}`.
    pub h2_vs_dofs: f64,
    pub l2_vs_dofs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateTable {
    /// Sorted by `h_max`, coarsest first.
    pub reports: Vec<ErrorReport>,
}

impl RateTable {
    pub fn new(mut reports: Vec<ErrorReport>) -> Self {
        reports.sort_by(|a, b| b.h_max.total_cmp(&a.h_max));
        Self { reports }
    }

    /// Fits over the finest `FIT_LEVELS` levels (all if fewer); `None`
    /// below two levels.
    pub fn slopes(&self) -> Option<Slopes> {
        let n = self.reports.len();
        if n < 2 {
            return None;
        }
        let r = &self.reports[n.saturating_sub(FIT_LEVELS)..];
        let lh: Vec<f64> = r.iter().map(|r| r.h_max.ln()).collect();
        let ld: Vec<f64> = r.iter().map(|r| 0.5 * (r.dofs as f64).ln()).collect();
        let e2: Vec<f64> = r.iter().map(|r| r.err_h2_rel.ln()).collect();
        let e0: Vec<f64> = r.iter().map(|r| r.err_l2_rel.ln()).collect();
        Some(Slopes {
            h2_vs_h: ls_slope(&lh, &e2),
            l2_vs_h: ls_slope(&lh, &e0),
            h2_vs_dofs: -ls_slope(&ld, &e2),
            l2_vs_dofs: -ls_slope(&ld, &e0),
        })
    }

    /// `(H², L²)` slopes against `h` between each level and the previous one.
    pub fn level_slopes(&self) -> Vec<Option<(f64, f64)>> {
        let r = &self.reports;
        (0..r.len())
            .map(|i| {
                (i > 0).then(|| {
                    let dh = (r[i].h_max / r[i - 1].h_max).ln();
                    ((r[i].err_h2_rel / r[i - 1].err_h2_rel).ln() / dh, (r[i].err_l2_rel / r[i - 1].err_l2_rel).ln() / dh)
                })
            })
            .collect()
    }
}

/// Failure at one level; the levels completed before it are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyFailure {
    pub level: usize,
    pub error: Error,
    pub partial: RateTable,
}

pub fn convergence_study<E: Executor, C: Clock>(
    family: &MeshFamily,
    scheme: Scheme,
    u: &dyn ExactSolution,
    config: &SolveConfig,
    exec: &E,
    clock: &C,
) -> core::result::Result<RateTable, StudyFailure> {
    let mut done = Vec::new();
    for level in 0..family.levels.len() {
        let run = family
            .build(level)
            .and_then(|mesh| solve_manufactured(&mesh, scheme, u, config, AssemblyOptions::default(), exec, clock));
        match run {
            Ok(s) => done.push(s.report),
            Err(error) => {
                return Err(StudyFailure {
                    level,
                    error,
                    partial: RateTable::new(done),
                })
            }
        }
    }
    Ok(RateTable::new(done))
}

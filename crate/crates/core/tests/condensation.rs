use hho_core::assembly::{assemble, boundary_values, local_system, recover_cells, AssemblyOptions, BoundaryData, DofMap, ExactBoundary, GlobalDof, Homogeneous};
use hho_core::exec::Sequential;
use hho_core::linalg::{min_eigenvalue, rel_diff};
use hho_core::localops::{nitsche_load, nitsche_load_via_lifting, reconstruction, BcMode, CellContext, Scheme, Variant};
use hho_core::manufactured::{ExactSolution, SinSquaredGaussian};
use hho_core::mesh::{build_rect_mesh, build_tri_mesh, build_voronoi_mesh, Mesh, Point};
use hho_core::post::reconstruct_field;
use hho_core::solve::{solve, SolveConfig, SolveMethod};
use nalgebra::{DMatrix, DVector};

/// Uncondensed system over `[all cell unknowns | free face unknowns]`, with
/// prescribed values already moved to the right-hand side.
struct Full {
    k: DMatrix<f64>,
    b: DVector<f64>,
    n_cell: usize,
    cell_offsets: Vec<usize>,
}

fn full_system(mesh: &Mesh, scheme: Scheme, f: &(dyn Fn(Point) -> f64 + Sync), data: &dyn BoundaryData) -> Full {
    let dofs = DofMap::new(mesh, scheme);
    let fixed = boundary_values(mesh, &dofs, data).unwrap();
    let nc = scheme.cell_dofs();
    let n_cell = nc * mesh.num_cells();
    let n = n_cell + dofs.n_free;
    let mut k = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let mut cell_offsets = Vec::new();
    for cell in 0..mesh.num_cells() {
        let ctx = CellContext::new(mesh, cell, scheme).unwrap();
        let (ops, bl) = local_system(&ctx, f, data).unwrap();
        // global position (or fixed value) and sign of every local unknown
        let mut idx: Vec<(Option<usize>, f64, f64)> = (0..nc).map(|i| (Some(cell * nc + i), 1.0, 0.0)).collect();
        for (g, s) in dofs.cell_map(mesh, cell) {
            idx.push(match g {
                GlobalDof::Free(i) => (Some(n_cell + i), s, 0.0),
                GlobalDof::Fixed(i) => (None, s, fixed[i]),
            });
        }
        cell_offsets.push(cell * nc);
        for (i, &(gi, si, _)) in idx.iter().enumerate() {
            let Some(gi) = gi else { continue };
            b[gi] += si * bl[i];
            for (j, &(gj, sj, vj)) in idx.iter().enumerate() {
                match gj {
                    Some(gj) => k[(gi, gj)] += si * sj * ops.a[(i, j)],
                    None => b[gi] -= si * ops.a[(i, j)] * sj * vj,
                }
            }
        }
    }
    Full { k, b, n_cell, cell_offsets }
}

fn small_meshes() -> Vec<Mesh> {
    vec![
        build_rect_mesh(2, 2).unwrap(),
        build_rect_mesh(3, 3).unwrap(),
        build_tri_mesh(2).unwrap(),
        build_voronoi_mesh(16, 5, 10).unwrap(),
    ]
}

const SCHEMES: [(Variant, BcMode); 5] = [
    (Variant::A, BcMode::Strong),
    (Variant::B, BcMode::Strong),
    (Variant::C, BcMode::Strong),
    (Variant::A, BcMode::Nitsche),
    (Variant::B, BcMode::Nitsche),
];

fn load(p: Point) -> f64 {
    (3.0 * p.x).sin() + p.y * p.y
}

#[test]
fn condensed_system_equals_dense_schur_complement() {
    let u = SinSquaredGaussian;
    for mesh in small_meshes() {
        assert!(mesh.num_cells() <= 16);
        for (variant, bc) in SCHEMES {
            for k in 0..3 {
                let scheme = Scheme::new(variant, k, bc);
                let data = ExactBoundary(&u);
                let full = full_system(&mesh, scheme, &load, &data);
                let nc = full.n_cell;
                let nf = full.k.nrows() - nc;
                let kcc = full.k.view((0, 0), (nc, nc)).into_owned();
                let kcf = full.k.view((0, nc), (nc, nf)).into_owned();
                let kff = full.k.view((nc, nc), (nf, nf)).into_owned();
                let inv = kcc.clone().try_inverse().unwrap();
                let schur = &kff - kcf.transpose() * &inv * &kcf;
                let g = full.b.rows(nc, nf) - kcf.transpose() * &inv * full.b.rows(0, nc);
                let sys = assemble(&mesh, scheme, &load, &data, AssemblyOptions::default(), &Sequential).unwrap();
                let d = rel_diff(&sys.matrix.to_dense(), &schur);
                assert!(d < 1e-10, "{variant:?} {bc:?} k={k}: matrix {d:e}");
                let rhs = DVector::from_vec(sys.rhs.clone());
                let e = (&rhs - &g).norm() / g.norm().max(1e-300);
                assert!(e < 1e-10, "{variant:?} {bc:?} k={k}: rhs {e:e}");
            }
        }
    }
}

#[test]
fn recovered_cells_match_dense_uncondensed_solve() {
    let mesh = build_rect_mesh(2, 2).unwrap();
    let mut state = 12345u64;
    let mut rnd = move || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    };
    let coef: Vec<f64> = (0..6).map(|_| rnd()).collect();
    let f = move |p: Point| coef[0] + coef[1] * p.x + coef[2] * p.y + coef[3] * (4.0 * p.x * p.y).cos() + coef[4] * p.x.powi(3) + coef[5] * (2.0 * p.y).exp();
    for (variant, bc) in SCHEMES {
        for k in 0..3 {
            let scheme = Scheme::new(variant, k, bc);
            let full = full_system(&mesh, scheme, &f, &Homogeneous);
            let x = full.k.clone().cholesky().unwrap().solve(&full.b);
            let sys = assemble(&mesh, scheme, &f, &Homogeneous, AssemblyOptions::default(), &Sequential).unwrap();
            let (faces, _) = solve(&sys.matrix, &sys.rhs, &SolveConfig::default()).unwrap();
            let cells = recover_cells(&sys, &faces).unwrap();
            let nc = scheme.cell_dofs();
            for (c, v) in cells.iter().enumerate() {
                let want = x.rows(full.cell_offsets[c], nc);
                let err = (v.rows(0, nc) - want).amax() / x.amax();
                assert!(err < 1e-9, "{variant:?} {bc:?} k={k} cell {c}: {err:e}");
            }
            // residual of the assembled uncondensed system
            let mut z = DVector::zeros(full.k.nrows());
            for (c, v) in cells.iter().enumerate() {
                z.rows_mut(full.cell_offsets[c], nc).copy_from(&v.rows(0, nc));
            }
            z.rows_mut(full.n_cell, faces.len()).copy_from(&DVector::from_vec(faces.clone()));
            let res = (&full.k * &z - &full.b).norm() / full.b.norm();
            assert!(res < 1e-9, "{res:e}");
        }
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let mesh = build_voronoi_mesh(16, 2, 5).unwrap();
    let sys = assemble(&mesh, Scheme::new(Variant::B, 1, BcMode::Strong), &|_| 0.0, &Homogeneous, AssemblyOptions::default(), &Sequential).unwrap();
    let (x, _) = solve(&sys.matrix, &sys.rhs, &SolveConfig::default()).unwrap();
    for c in recover_cells(&sys, &x).unwrap() {
        assert_eq!(c.amax(), 0.0);
    }
}

#[test]
fn condensed_matrices_are_spd() {
    for mesh in small_meshes().into_iter().chain([build_voronoi_mesh(30, 8, 10).unwrap()]) {
        for (variant, bc) in SCHEMES {
            for k in 0..4 {
                let sys = assemble(&mesh, Scheme::new(variant, k, bc), &load, &Homogeneous, AssemblyOptions::default(), &Sequential).unwrap();
                if sys.matrix.n == 0 || sys.matrix.n > 500 {
                    continue;
                }
                let d = sys.matrix.to_dense();
                assert_eq!(d, d.transpose());
                assert!(min_eigenvalue(&d) > 0.0, "{variant:?} {bc:?} k={k}");
            }
        }
    }
}

#[test]
fn one_cell_mesh_is_fully_prescribed() {
    let mesh = build_rect_mesh(1, 1).unwrap();
    let u = hho_core::manufactured::Polynomial::patch(3);
    let scheme = Scheme::new(Variant::A, 1, BcMode::Strong);
    let sys = assemble(&mesh, scheme, &|p| u.bilaplacian(p), &ExactBoundary(&u), AssemblyOptions::default(), &Sequential).unwrap();
    assert_eq!(sys.dofs.n_free, 0);
    let field = reconstruct_field(&sys, &recover_cells(&sys, &[]).unwrap());
    for p in [Point::new(0.3, 0.6), Point::new(0.8, 0.1)] {
        assert!((field.eval(&mesh, 0, p) - u.value(p)).abs() < 1e-10);
    }
}

#[test]
fn interface_dof_counts() {
    let mesh = build_voronoi_mesh(20, 4, 5).unwrap();
    for k in 0..4 {
        for (variant, per) in [(Variant::A, 2 * k + 3), (Variant::B, 2 * k + 4), (Variant::C, 2 * k + 3)] {
            let d = DofMap::new(&mesh, Scheme::new(variant, k, BcMode::Strong));
            assert_eq!(d.n_free, per * mesh.num_interior_faces());
        }
    }
    let d = DofMap::new(&build_rect_mesh(2, 2).unwrap(), Scheme::new(Variant::A, 0, BcMode::Strong));
    assert_eq!(d.n_free, 12);
}

#[test]
fn flipping_interior_faces_leaves_the_field_unchanged() {
    let base = build_voronoi_mesh(16, 11, 10).unwrap();
    let interior: Vec<usize> = (0..base.num_faces()).filter(|&f| !base.faces[f].is_boundary()).collect();
    let mut flipped = base.clone();
    for &f in interior.iter().step_by(3) {
        flipped = flipped.with_flipped_face(f).unwrap();
    }
    let u = SinSquaredGaussian;
    for (variant, bc) in SCHEMES {
        for k in 0..3 {
            let scheme = Scheme::new(variant, k, bc);
            let fields: Vec<_> = [&base, &flipped]
                .iter()
                .map(|m| {
                    let sys = assemble(m, scheme, &|p| u.bilaplacian(p), &ExactBoundary(&u), AssemblyOptions::default(), &Sequential).unwrap();
                    let (x, _) = solve(&sys.matrix, &sys.rhs, &SolveConfig::default()).unwrap();
                    reconstruct_field(&sys, &recover_cells(&sys, &x).unwrap())
                })
                .collect();
            for c in 0..base.num_cells() {
                let (a, b) = (&fields[0].coeffs[c], &fields[1].coeffs[c]);
                assert!((a - b).amax() <= 1e-10 * a.amax(), "{variant:?} {bc:?} k={k} cell {c}");
            }
        }
    }
}

#[test]
fn nitsche_load_paths_agree_globally() {
    let mesh = build_voronoi_mesh(16, 3, 10).unwrap();
    let u = SinSquaredGaussian;
    let data = ExactBoundary(&u);
    for variant in [Variant::A, Variant::B] {
        for k in 0..4 {
            let scheme = Scheme::new(variant, k, BcMode::Nitsche);
            let dofs = DofMap::new(&mesh, scheme);
            let nc = scheme.cell_dofs();
            let n = nc * mesh.num_cells() + dofs.n_free;
            let (mut g1, mut g2) = (DVector::<f64>::zeros(n), DVector::<f64>::zeros(n));
            for cell in 0..mesh.num_cells() {
                let ctx = CellContext::new(&mesh, cell, scheme).unwrap();
                let r = reconstruction(&ctx).unwrap();
                let (l1, l2) = (nitsche_load(&ctx, &r, &data).unwrap(), nitsche_load_via_lifting(&ctx, &r, &data).unwrap());
                for i in 0..nc {
                    g1[cell * nc + i] += l1[i];
                    g2[cell * nc + i] += l2[i];
                }
                for (j, (g, s)) in dofs.cell_map(&mesh, cell).into_iter().enumerate() {
                    let GlobalDof::Free(gi) = g else { unreachable!() };
                    g1[nc * mesh.num_cells() + gi] += s * l1[nc + j];
                    g2[nc * mesh.num_cells() + gi] += s * l2[nc + j];
                }
            }
            let d = (&g1 - &g2).norm() / g1.norm();
            assert!(d < 1e-10, "{variant:?} k={k}: {d:e}");
        }
    }
}

#[test]
fn direct_and_cg_agree() {
    let mesh = build_rect_mesh(2, 2).unwrap();
    let sys = assemble(&mesh, Scheme::new(Variant::A, 0, BcMode::Strong), &load, &Homogeneous, AssemblyOptions::default(), &Sequential).unwrap();
    assert_eq!(sys.matrix.n, 12);
    let (x1, _) = solve(&sys.matrix, &sys.rhs, &SolveConfig::default()).unwrap();
    let cfg = SolveConfig {
        method: SolveMethod::ConjugateGradient,
        cg_tol: 1e-14,
        ..Default::default()
    };
    let (x2, _) = solve(&sys.matrix, &sys.rhs, &cfg).unwrap();
    let scale = x1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in x1.iter().zip(&x2) {
        assert!((a - b).abs() < 1e-9 * scale);
    }
}

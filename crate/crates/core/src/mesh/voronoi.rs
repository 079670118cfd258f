//! Lloyd-relaxed Voronoi meshes of the unit square.
//!
//! Each Voronoi cell is obtained by clipping the square with the bisector
//! half-planes of nearby generators, found through a bucket grid; clipping
//! stops once no unvisited generator can be closer than twice the current
//! cell radius. Vertices computed independently by neighbouring cells are
//! merged afterwards, which yields a conforming polygonal mesh.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{polygon_area_centroid, validate, Mesh, Point};
use crate::error::MeshError;
#[allow(unused_imports)]
use num_traits::Float;

const MAX_ATTEMPTS: usize = 10;

/// Clipped Voronoi diagram of `n_cells` seeded generators with
/// `lloyd_iters` centroidal relaxation sweeps. The result is a pure function
/// of the three arguments. A degenerate diagram is regenerated from perturbed
/// generators; the call fails only after ten unsuccessful attempts.
pub fn build_voronoi_mesh(n_cells: usize, seed: u64, lloyd_iters: usize) -> Result<Mesh, MeshError> {
    if n_cells == 0 {
        return Err(MeshError::InvalidParameters(format!("voronoi mesh needs n_cells >= 1")));
    }
    let mut reason = alloc::string::String::new();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sites: Vec<Point> = (0..n_cells).map(|_| Point::new(rng.gen::<f64>(), rng.gen::<f64>())).collect();
        if attempt > 0 {
            let mut jitter = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(attempt as u64)));
            let amp = 1e-3 / (n_cells as f64).sqrt();
            for s in &mut sites {
                s.x = (s.x + amp * (jitter.gen::<f64>() - 0.5)).clamp(1e-9, 1.0 - 1e-9);
                s.y = (s.y + amp * (jitter.gen::<f64>() - 0.5)).clamp(1e-9, 1.0 - 1e-9);
            }
        }
        for _ in 0..lloyd_iters {
            let cells = voronoi_cells(&sites);
            for (s, poly) in sites.iter_mut().zip(&cells) {
                if poly.len() >= 3 {
                    *s = polygon_area_centroid(poly).1;
                }
            }
        }
        let cells = voronoi_cells(&sites);
        match conforming_mesh(&cells) {
            Ok(mesh) => {
                let report = validate(&mesh);
                if report.is_valid() {
                    return Ok(mesh);
                }
                reason = report.failures.join("; ");
            }
            Err(e) => reason = format!("{e}"),
        }
    }
    Err(MeshError::VoronoiFailed {
        attempts: MAX_ATTEMPTS,
        reason,
    })
}

struct BucketGrid {
    m: usize,
    buckets: Vec<Vec<usize>>,
}

impl BucketGrid {
    fn new(sites: &[Point]) -> Self {
        let m = ((sites.len() as f64).sqrt().ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); m * m];
        for (i, s) in sites.iter().enumerate() {
            let (bx, by) = Self::locate(m, *s);
            buckets[by * m + bx].push(i);
        }
        Self { m, buckets }
    }

    fn locate(m: usize, p: Point) -> (usize, usize) {
        let f = |v: f64| ((v * m as f64).floor().max(0.0) as usize).min(m - 1);
        (f(p.x), f(p.y))
    }
}

fn clip(poly: &[Point], site: Point, other: Point) -> Vec<Point> {
    let d = other - site;
    let mid = (site + other) * 0.5;
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        let da = (a - mid).dot(d);
        let db = (b - mid).dot(d);
        if da <= 0.0 {
            out.push(a);
        }
        if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
            out.push(a + (b - a) * (da / (da - db)));
        }
    }
    out
}

/// Counterclockwise Voronoi polygons clipped to the unit square.
fn voronoi_cells(sites: &[Point]) -> Vec<Vec<Point>> {
    let grid = BucketGrid::new(sites);
    let m = grid.m;
    let width = 1.0 / m as f64;
    sites
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut poly = vec![
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(1.0, 1.0),
                Point::new(0.0, 1.0),
            ];
            let (bx, by) = BucketGrid::locate(m, p);
            for r in 0..=m {
                let r = r as isize;
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs() != r && dy.abs() != r {
                            continue;
                        }
                        let (x, y) = (bx as isize + dx, by as isize + dy);
                        if x < 0 || y < 0 || x >= m as isize || y >= m as isize {
                            continue;
                        }
                        for &j in &grid.buckets[y as usize * m + x as usize] {
                            if j != i && sites[j].dist(p) > 1e-14 {
                                poly = clip(&poly, p, sites[j]);
                            }
                        }
                    }
                }
                let radius = poly.iter().map(|v| v.dist(p)).fold(0.0, f64::max);
                if r as f64 * width >= 2.0 * radius {
                    break;
                }
            }
            poly
        })
        .collect()
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

fn on_boundary_count(p: Point) -> usize {
    [p.x == 0.0, p.x == 1.0, p.y == 0.0, p.y == 1.0].iter().filter(|&&b| b).count()
}

/// Merges coincident polygon vertices and builds the mesh topology.
fn conforming_mesh(cells: &[Vec<Point>]) -> Result<Mesh, MeshError> {
    let tol = 1e-6 / (cells.len() as f64).sqrt();
    let mut all: Vec<Point> = Vec::new();
    let mut owner: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
    for poly in cells {
        owner.push((all.len()..all.len() + poly.len()).collect());
        all.extend_from_slice(poly);
    }
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| all[a].x.total_cmp(&all[b].x).then(all[a].y.total_cmp(&all[b].y)));
    let mut parent: Vec<usize> = (0..all.len()).collect();
    for (ia, &a) in order.iter().enumerate() {
        for &b in &order[ia + 1..] {
            if all[b].x - all[a].x > tol {
                break;
            }
            if (all[b].y - all[a].y).abs() <= tol {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    // representative: prefer points lying exactly on the square's sides
    let mut rep: Vec<Option<usize>> = vec![None; all.len()];
    for i in 0..all.len() {
        let r = find(&mut parent, i);
        match rep[r] {
            Some(cur) if on_boundary_count(all[cur]) >= on_boundary_count(all[i]) => {}
            _ => rep[r] = Some(i),
        }
    }
    let mut new_id = vec![usize::MAX; all.len()];
    let mut vertices = Vec::new();
    for i in 0..all.len() {
        let r = find(&mut parent, i);
        if new_id[r] == usize::MAX {
            new_id[r] = vertices.len();
            vertices.push(all[rep[r].unwrap_or(r)]);
        }
    }
    let mut polygons = Vec::with_capacity(cells.len());
    for (c, ids) in owner.iter().enumerate() {
        let mut poly: Vec<usize> = Vec::with_capacity(ids.len());
        for &i in ids {
            let v = new_id[find(&mut parent, i)];
            if poly.last() != Some(&v) {
                poly.push(v);
            }
        }
        while poly.len() > 1 && poly.first() == poly.last() {
            poly.pop();
        }
        if poly.len() < 3 {
            return Err(MeshError::OpenCellLoop { cell: c });
        }
        polygons.push(poly);
    }
    Mesh::from_polygons(vertices, &polygons)
}

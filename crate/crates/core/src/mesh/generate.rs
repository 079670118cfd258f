use alloc::format;
use alloc::vec::Vec;

use super::{Mesh, Point};
use crate::error::MeshError;

fn grid_vertices(nx: usize, ny: usize) -> Vec<Point> {
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push(Point::new(i as f64 / nx as f64, j as f64 / ny as f64));
        }
    }
    v
}

/// `nx × ny` axis-aligned rectangles tiling the unit square.
pub fn build_rect_mesh(nx: usize, ny: usize) -> Result<Mesh, MeshError> {
    if nx == 0 || ny == 0 {
        return Err(MeshError::InvalidParameters(format!("rect mesh needs nx, ny >= 1 (got {nx}, {ny})")));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut polys = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            polys.push(alloc::vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_polygons(grid_vertices(nx, ny), &polys)
}

/// Uniform triangulation: each of the `n²` squares is split along its
/// `(0,0)–(1,1)` diagonal, giving `2n²` triangles. Doubling `n` is the same
/// mesh as quadrisecting every triangle.
pub fn build_tri_mesh(n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParameters(format!("tri mesh needs n >= 1 (got {n})")));
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut polys = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            polys.push(alloc::vec![id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            polys.push(alloc::vec![id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_polygons(grid_vertices(n, n), &polys)
}

//! Polygonal meshes of a planar domain.
//!
//! Cells are stored as counterclockwise loops of faces. Every face carries a
//! fixed unit normal `n_F`; a cell sees it through the sign
//! `σ_KF = n_F·n_K ∈ {+1, −1}`. The face tangent is `t_F = (v1 − v0)/|v1 − v0|`
//! and the normal is `t_F` rotated clockwise, so a cell traversing a face
//! from `v0` to `v1` has `σ_KF = +1`. Boundary faces are always stored with
//! the outward orientation.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};


use crate::error::MeshError;
#[allow(unused_imports)]
use num_traits::Float;

mod generate;
mod voronoi;

pub use generate::{build_rect_mesh, build_tri_mesh};
pub use voronoi::build_voronoi_mesh;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, other: Point) -> f64 {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    /// First entry is always present; the second is `None` on the boundary.
    pub cells: (usize, Option<usize>),
    pub normal: Point,
    pub tangent: Point,
    pub midpoint: Point,
    /// Segment length `h_F`.
    pub diameter: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cells.1.is_none()
    }

    pub fn cell_ids(&self) -> impl Iterator<Item = usize> + '_ {
        core::iter::once(self.cells.0).chain(self.cells.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub faces: Vec<usize>,
    /// `σ_KF` for each entry of `faces`.
    pub signs: Vec<f64>,
    /// Counterclockwise vertex loop; `vertices[i]` starts `faces[i]`.
    pub vertices: Vec<usize>,
    pub centroid: Point,
    pub area: f64,
    /// `h_K`.
    pub diameter: f64,
}

impl Cell {
    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Position of `face` in this cell's loop.
    pub fn local_face(&self, face: usize) -> Option<usize> {
        self.faces.iter().position(|&f| f == face)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min: Point,
    pub max: Point,
}

impl BoundingBox {
    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub faces: Vec<Face>,
    pub cells: Vec<Cell>,
    pub bbox: BoundingBox,
}

/// Shoelace area and centroid of a vertex loop.
pub fn polygon_area_centroid(pts: &[Point]) -> (f64, Point) {
    let n = pts.len();
    let mut a2 = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    // shift to the first vertex to limit cancellation
    let o = pts[0];
    for i in 0..n {
        let p = pts[i] - o;
        let q = pts[(i + 1) % n] - o;
        let c = p.cross(q);
        a2 += c;
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    let area = 0.5 * a2;
    if area.abs() <= f64::EPSILON * polygon_diameter(pts).powi(2) {
        let mut m = Point::default();
        for p in pts {
            m = m + *p;
        }
        return (area, m * (1.0 / n as f64));
    }
    (area, Point::new(o.x + cx / (3.0 * a2), o.y + cy / (3.0 * a2)))
}

pub fn polygon_diameter(pts: &[Point]) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            d = d.max(pts[i].dist(pts[j]));
        }
    }
    d
}

impl Mesh {
    /// Builds a mesh from counterclockwise vertex loops. Shared edges are
    /// detected by vertex pairs; an interface is oriented along the loop of
    /// the lower-numbered cell.
    pub fn from_polygons(vertices: Vec<Point>, polygons: &[Vec<usize>]) -> Result<Mesh, MeshError> {
        let mut edge_map: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut face_vertices: Vec<[usize; 2]> = Vec::new();
        let mut face_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_faces = Vec::with_capacity(polygons.len());
        let mut cell_signs = Vec::with_capacity(polygons.len());
        for (c, poly) in polygons.iter().enumerate() {
            if poly.len() < 3 {
                return Err(MeshError::OpenCellLoop { cell: c });
            }
            let mut faces = Vec::with_capacity(poly.len());
            let mut signs = Vec::with_capacity(poly.len());
            for i in 0..poly.len() {
                let a = poly[i];
                let b = poly[(i + 1) % poly.len()];
                if a >= vertices.len() || b >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange {
                        what: "vertex",
                        index: a.max(b),
                    });
                }
                let key = (a.min(b), a.max(b));
                let f = *edge_map.entry(key).or_insert_with(|| {
                    face_vertices.push([a, b]);
                    face_cells.push(Vec::new());
                    face_vertices.len() - 1
                });
                face_cells[f].push(c);
                faces.push(f);
                signs.push(if face_vertices[f][0] == a { 1.0 } else { -1.0 });
            }
            cell_faces.push(faces);
            cell_signs.push(signs);
        }
        Mesh::from_topology(vertices, face_vertices, face_cells, cell_faces, cell_signs)
    }

    /// Builds a mesh from explicit faces and signed cell face loops, checking
    /// the face/cell adjacency and the closure of every loop. Geometry
    /// (normals, diameters, areas, centroids) is recomputed.
    pub fn from_topology(
        vertices: Vec<Point>,
        face_vertices: Vec<[usize; 2]>,
        face_cells: Vec<Vec<usize>>,
        cell_faces: Vec<Vec<usize>>,
        cell_signs: Vec<Vec<f64>>,
    ) -> Result<Mesh, MeshError> {
        if face_cells.len() != face_vertices.len() {
            return Err(MeshError::InvalidParameters(String::from(
                "face cell lists and face vertex lists differ in length",
            )));
        }
        if cell_signs.len() != cell_faces.len() {
            return Err(MeshError::InvalidParameters(String::from(
                "cell sign lists and cell face lists differ in length",
            )));
        }
        let mut faces = Vec::with_capacity(face_vertices.len());
        for (f, (fv, fc)) in face_vertices.iter().zip(&face_cells).enumerate() {
            for &v in fv {
                if v >= vertices.len() {
                    return Err(MeshError::IndexOutOfRange { what: "vertex", index: v });
                }
            }
            if fc.is_empty() || fc.len() > 2 || (fc.len() == 2 && fc[0] == fc[1]) {
                return Err(MeshError::FaceAdjacency { face: f, count: fc.len() });
            }
            for &c in fc {
                if c >= cell_faces.len() {
                    return Err(MeshError::IndexOutOfRange { what: "cell", index: c });
                }
            }
            let p0 = vertices[fv[0]];
            let p1 = vertices[fv[1]];
            let d = p1 - p0;
            let len = d.norm();
            if len <= 0.0 || !len.is_finite() {
                return Err(MeshError::DegenerateFace { face: f });
            }
            let t = d * (1.0 / len);
            faces.push(Face {
                vertices: *fv,
                cells: (fc[0], fc.get(1).copied()),
                normal: Point::new(t.y, -t.x),
                tangent: t,
                midpoint: (p0 + p1) * 0.5,
                diameter: len,
            });
        }

        let mut cells = Vec::with_capacity(cell_faces.len());
        for (c, (cf, cs)) in cell_faces.into_iter().zip(cell_signs).enumerate() {
            if cf.len() < 3 || cs.len() != cf.len() {
                return Err(MeshError::OpenCellLoop { cell: c });
            }
            let mut loop_vertices = Vec::with_capacity(cf.len());
            for (i, (&f, &s)) in cf.iter().zip(&cs).enumerate() {
                let face = faces.get(f).ok_or(MeshError::IndexOutOfRange { what: "face", index: f })?;
                if face.cells.0 != c && face.cells.1 != Some(c) {
                    return Err(MeshError::FaceCellMismatch { face: f, cell: c });
                }
                if s != 1.0 && s != -1.0 {
                    return Err(MeshError::OpenCellLoop { cell: c });
                }
                let (start, end) = if s > 0.0 {
                    (face.vertices[0], face.vertices[1])
                } else {
                    (face.vertices[1], face.vertices[0])
                };
                let next = cf[(i + 1) % cf.len()];
                let nface = faces.get(next).ok_or(MeshError::IndexOutOfRange { what: "face", index: next })?;
                let nstart = if cs[(i + 1) % cf.len()] > 0.0 {
                    nface.vertices[0]
                } else {
                    nface.vertices[1]
                };
                if end != nstart {
                    return Err(MeshError::OpenCellLoop { cell: c });
                }
                loop_vertices.push(start);
            }
            // each vertex shared by exactly two faces of the loop
            let mut sorted = loop_vertices.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::OpenCellLoop { cell: c });
            }
            let pts: Vec<Point> = loop_vertices.iter().map(|&v| vertices[v]).collect();
            let (area, centroid) = polygon_area_centroid(&pts);
            cells.push(Cell {
                faces: cf,
                signs: cs,
                vertices: loop_vertices,
                centroid,
                area,
                diameter: polygon_diameter(&pts),
            });
        }
        // every face must appear in the loops of exactly the cells it lists
        let mut seen = vec![0usize; faces.len()];
        for cell in &cells {
            for &f in &cell.faces {
                seen[f] += 1;
            }
        }
        for (f, face) in faces.iter().enumerate() {
            let expected = if face.is_boundary() { 1 } else { 2 };
            if seen[f] != expected {
                return Err(MeshError::FaceAdjacency { face: f, count: seen[f] });
            }
        }

        let bbox = bounding_box(&vertices);
        Ok(Mesh {
            vertices,
            faces,
            cells,
            bbox,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_interior_faces(&self) -> usize {
        self.faces.iter().filter(|f| !f.is_boundary()).count()
    }

    /// `max_K h_K`.
    pub fn h_max(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    pub fn cell_points(&self, cell: usize) -> Vec<Point> {
        self.cells[cell].vertices.iter().map(|&v| self.vertices[v]).collect()
    }

    /// Unit outward normal of `cell` on its `local`-th face.
    pub fn outward_normal(&self, cell: usize, local: usize) -> Point {
        let c = &self.cells[cell];
        self.faces[c.faces[local]].normal * c.signs[local]
    }

    /// Copy of the mesh with the stored orientation of `face` reversed (both
    /// vertex order and normal), updating the signs of its cells. Only
    /// interfaces may be flipped: boundary faces keep the outward normal.
    pub fn with_flipped_face(&self, face: usize) -> Result<Mesh, MeshError> {
        let f = self.faces.get(face).ok_or(MeshError::IndexOutOfRange { what: "face", index: face })?;
        if f.is_boundary() {
            return Err(MeshError::InvalidParameters(format!(
                "face {face} is a boundary face; its orientation is fixed"
            )));
        }
        let mut mesh = self.clone();
        let fm = &mut mesh.faces[face];
        fm.vertices.swap(0, 1);
        fm.normal = -fm.normal;
        fm.tangent = -fm.tangent;
        let cells: Vec<usize> = fm.cell_ids().collect();
        for c in cells {
            let cell = &mut mesh.cells[c];
            for (i, &g) in cell.faces.iter().enumerate() {
                if g == face {
                    cell.signs[i] = -cell.signs[i];
                }
            }
        }
        Ok(mesh)
    }
}

fn bounding_box(vertices: &[Point]) -> BoundingBox {
    let mut min = Point::new(f64::INFINITY, f64::INFINITY);
    let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for v in vertices {
        min.x = min.x.min(v.x);
        min.y = min.y.min(v.y);
        max.x = max.x.max(v.x);
        max.y = max.y.max(v.y);
    }
    BoundingBox { min, max }
}

/// Positively oriented triangles covering one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SubTriangulation {
    pub cell: usize,
    pub triangles: Vec<[Point; 3]>,
}

impl SubTriangulation {
    pub fn total_area(&self) -> f64 {
        self.triangles.iter().map(|t| triangle_area(t)).sum()
    }
}

pub fn triangle_area(t: &[Point; 3]) -> f64 {
    0.5 * (t[1] - t[0]).cross(t[2] - t[0])
}

fn segments_cross(a: Point, b: Point, c: Point, d: Point) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

fn is_simple_polygon(pts: &[Point]) -> bool {
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            // skip adjacent edges
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Splits a cell into triangles: a fan from the centroid when the cell is
/// star-shaped with respect to it, ear clipping otherwise.
pub fn subtriangulate(mesh: &Mesh, cell: usize) -> Result<SubTriangulation, MeshError> {
    let c = mesh.cells.get(cell).ok_or(MeshError::IndexOutOfRange { what: "cell", index: cell })?;
    let pts = mesh.cell_points(cell);
    subtriangulate_polygon(cell, &pts, c.centroid, c.diameter)
}

pub(crate) fn subtriangulate_polygon(
    cell: usize,
    pts: &[Point],
    centroid: Point,
    diameter: f64,
) -> Result<SubTriangulation, MeshError> {
    let n = pts.len();
    if n == 3 {
        let t = [pts[0], pts[1], pts[2]];
        if triangle_area(&t) <= 0.0 {
            return Err(MeshError::SelfIntersecting { cell });
        }
        return Ok(SubTriangulation { cell, triangles: vec![t] });
    }
    if !is_simple_polygon(pts) {
        return Err(MeshError::SelfIntersecting { cell });
    }
    let tol = 1e-14 * diameter * diameter;
    let fan: Vec<[Point; 3]> = (0..n).map(|i| [centroid, pts[i], pts[(i + 1) % n]]).collect();
    if fan.iter().all(|t| triangle_area(t) > tol) {
        return Ok(SubTriangulation { cell, triangles: fan });
    }
    ear_clip(cell, pts, tol)
}

fn ear_clip(cell: usize, pts: &[Point], tol: f64) -> Result<SubTriangulation, MeshError> {
    let mut idx: Vec<usize> = (0..pts.len()).collect();
    let mut triangles = Vec::with_capacity(pts.len() - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let a = pts[idx[(i + m - 1) % m]];
            let b = pts[idx[i]];
            let c = pts[idx[(i + 1) % m]];
            let t = [a, b, c];
            if triangle_area(&t) <= tol {
                continue;
            }
            let contains_other = idx.iter().enumerate().any(|(j, &v)| {
                if j == i || j == (i + m - 1) % m || j == (i + 1) % m {
                    return false;
                }
                let p = pts[v];
                (b - a).cross(p - a) >= 0.0 && (c - b).cross(p - b) >= 0.0 && (a - c).cross(p - c) >= 0.0
            });
            if contains_other {
                continue;
            }
            triangles.push(t);
            idx.remove(i);
            clipped = true;
            break;
        }
        if !clipped {
            return Err(MeshError::SelfIntersecting { cell });
        }
    }
    let t = [pts[idx[0]], pts[idx[1]], pts[idx[2]]];
    if triangle_area(&t) <= 0.0 {
        return Err(MeshError::SelfIntersecting { cell });
    }
    triangles.push(t);
    Ok(SubTriangulation { cell, triangles })
}

/// Outcome of [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub failures: Vec<String>,
    /// `min_S min(r_S/h_S, h_S/h_K)` over the sub-triangles of every cell.
    pub shape_regularity: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.failures.is_empty()
    }
}

fn inradius_ratio(t: &[Point; 3]) -> (f64, f64) {
    let a = t[1].dist(t[2]);
    let b = t[0].dist(t[2]);
    let c = t[0].dist(t[1]);
    let s = 0.5 * (a + b + c);
    let r = triangle_area(t).abs() / s;
    let h = a.max(b).max(c);
    (r / h, h)
}

/// Checks the mesh invariants and estimates the shape-regularity parameter.
pub fn validate(mesh: &Mesh) -> ValidationReport {
    let mut failures = Vec::new();
    for (f, face) in mesh.faces.iter().enumerate() {
        if (face.normal.norm() - 1.0).abs() > 1e-14 {
            failures.push(format!("face {f}: normal is not unit length"));
        }
        if face.normal.dot(face.tangent).abs() > 1e-14 {
            failures.push(format!("face {f}: normal not perpendicular to the segment"));
        }
        for c in face.cell_ids() {
            if mesh.cells.get(c).and_then(|cell| cell.local_face(f)).is_none() {
                failures.push(format!("face {f}: adjacency lists cell {c} which does not contain it"));
            }
        }
    }
    let mut rho = f64::INFINITY;
    let mut total_area = 0.0;
    for (c, cell) in mesh.cells.iter().enumerate() {
        let pts = mesh.cell_points(c);
        let (shoelace, _) = polygon_area_centroid(&pts);
        let h2 = cell.diameter * cell.diameter;
        if !(cell.area > 0.0) || !(cell.area > 1e-14 * h2) {
            failures.push(format!("cell {c}: non-positive area {:e}", cell.area));
            continue;
        }
        if (shoelace - cell.area).abs() > 1e-12 * h2 {
            failures.push(format!("cell {c}: area differs from the shoelace formula"));
        }
        total_area += cell.area;
        for (i, &f) in cell.faces.iter().enumerate() {
            let face = &mesh.faces[f];
            if face.diameter > cell.diameter * (1.0 + 1e-14) {
                failures.push(format!("cell {c}: face {f} longer than the cell diameter"));
            }
            // σ = +1 iff the loop runs along the stored face direction
            let start = cell.vertices[i];
            let expected = if face.vertices[0] == start { 1.0 } else { -1.0 };
            if cell.signs[i] != expected {
                failures.push(format!("cell {c}: wrong orientation sign for face {f}"));
            }
        }
        match subtriangulate(mesh, c) {
            Ok(sub) => {
                if (sub.total_area() - cell.area).abs() > 1e-12 * h2 {
                    failures.push(format!("cell {c}: sub-triangulation does not cover the cell"));
                }
                for t in &sub.triangles {
                    let (ratio, h_s) = inradius_ratio(t);
                    rho = rho.min(ratio).min(h_s / cell.diameter);
                }
            }
            Err(e) => failures.push(format!("{e}")),
        }
    }
    let euler = mesh.num_vertices() as i64 - mesh.num_faces() as i64 + mesh.num_cells() as i64;
    if euler != 1 {
        failures.push(format!("Euler relation V - E + C = {euler}, expected 1"));
    }
    let domain = mesh.bbox.area();
    if failures.is_empty() && (total_area - domain).abs() > 1e-10 * domain.max(1.0) {
        failures.push(format!("cell areas sum to {total_area}, domain area is {domain}"));
    }
    ValidationReport {
        failures,
        shape_regularity: if rho.is_finite() { rho } else { 0.0 },
    }
}

//! Gauss–Legendre rules on segments and composite collapsed-Gauss rules on
//! polygons.

use alloc::format;
use alloc::vec::Vec;


use crate::error::{Error, Result};
use crate::mesh::{subtriangulate, Face, Mesh, Point, SubTriangulation};
#[allow(unused_imports)]
use num_traits::Float;

/// Quadrature points and positive weights in the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Gauss–Legendre rule on the reference segment `(−1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

pub const MAX_SEGMENT_POINTS: usize = 30;

/// `n`-point Gauss–Legendre rule, exact to degree `2n − 1`.
pub fn segment_rule(n_points: usize) -> Result<SegmentRule> {
    if n_points == 0 || n_points > MAX_SEGMENT_POINTS {
        return Err(Error::InvalidArgument(format!(
            "segment rule needs 1..={MAX_SEGMENT_POINTS} points, got {n_points}"
        )));
    }
    let n = n_points;
    let mut nodes = alloc::vec![0.0; n];
    let mut weights = alloc::vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(SegmentRule {
        nodes,
        weights,
        exact_degree: 2 * n - 1,
    })
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Number of Gauss points needed for exactness up to `degree`.
pub fn points_for_degree(degree: usize) -> usize {
    degree / 2 + 1
}

impl SegmentRule {
    /// Nodes and weights on `(a, b)`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        (
            self.nodes.iter().map(|&x| mid + half * x).collect(),
            self.weights.iter().map(|&w| w * half).collect(),
        )
    }
}

/// Rule on one mesh face, carrying both the points and their arclength
/// offsets `s` from the face midpoint along the face tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceQuadrature {
    pub rule: QuadratureRule,
    pub offsets: Vec<f64>,
}

pub fn face_rule(face: &Face, degree: usize) -> Result<FaceQuadrature> {
    let seg = segment_rule(points_for_degree(degree).min(MAX_SEGMENT_POINTS))?;
    let half = 0.5 * face.diameter;
    let (offsets, weights) = seg.on_interval(-half, half);
    let points = offsets.iter().map(|&s| face.midpoint + face.tangent * s).collect();
    Ok(FaceQuadrature {
        rule: QuadratureRule {
            points,
            weights,
            exact_degree: seg.exact_degree,
        },
        offsets,
    })
}

/// Collapsed tensor-Gauss rule on a triangle, exact to `degree`.
pub fn triangle_rule(tri: &[Point; 3], degree: usize) -> Result<QuadratureRule> {
    // x = (1−u)A + u(1−v)B + uvC, dx = 2|T| u du dv over (0,1)²
    let nu = points_for_degree(degree + 1).min(MAX_SEGMENT_POINTS);
    let nv = points_for_degree(degree).min(MAX_SEGMENT_POINTS);
    let (us, wus) = segment_rule(nu)?.on_interval(0.0, 1.0);
    let (vs, wvs) = segment_rule(nv)?.on_interval(0.0, 1.0);
    let [a, b, c] = *tri;
    let jac = (b - a).cross(c - a);
    let mut points = Vec::with_capacity(nu * nv);
    let mut weights = Vec::with_capacity(nu * nv);
    for (&u, &wu) in us.iter().zip(&wus) {
        for (&v, &wv) in vs.iter().zip(&wvs) {
            points.push(a * (1.0 - u) + b * (u * (1.0 - v)) + c * (u * v));
            weights.push(wu * wv * u * jac);
        }
    }
    Ok(QuadratureRule {
        points,
        weights,
        exact_degree: degree,
    })
}

/// Composite rule over a sub-triangulation.
pub fn composite_rule(sub: &SubTriangulation, degree: usize) -> Result<QuadratureRule> {
    let mut rule = QuadratureRule {
        points: Vec::new(),
        weights: Vec::new(),
        exact_degree: degree,
    };
    for t in &sub.triangles {
        let r = triangle_rule(t, degree)?;
        rule.points.extend(r.points);
        rule.weights.extend(r.weights);
    }
    Ok(rule)
}

/// Rule on mesh cell `cell`, exact for polynomials of total degree `degree`.
pub fn cell_rule(mesh: &Mesh, cell: usize, degree: usize) -> Result<QuadratureRule> {
    composite_rule(&subtriangulate(mesh, cell)?, degree)
}

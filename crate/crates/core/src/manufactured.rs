//! Closed-form solutions used to drive and verify the solver.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::mesh::Point;
#[allow(unused_imports)]
use num_traits::Float;

/// A smooth exact solution with the derivatives the discretization needs.
/// Hessians are returned as `[∂xx, ∂xy, ∂yy]`.
pub trait ExactSolution: Sync {
    fn value(&self, p: Point) -> f64;
    fn gradient(&self, p: Point) -> Point;
    fn hessian(&self, p: Point) -> [f64; 3];
    /// `∇Δu`.
    fn grad_laplacian(&self, p: Point) -> Point;
    /// `Δ²u`, i.e. the load `f`.
    fn bilaplacian(&self, p: Point) -> f64;
}

/// `sin²(πx) sin²(πy)`; `u` and `∂_n u` vanish on the unit square.
#[derive(Debug, Clone, Copy, Default)]
pub struct SinSquared;

// derivatives of sin²(πt), orders 0..=4
fn s(t: f64) -> [f64; 5] {
    let s1 = (PI * t).sin();
    let (s2, c2) = (2.0 * PI * t).sin_cos();
    [
        s1 * s1,
        PI * s2,
        2.0 * PI * PI * c2,
        -4.0 * PI.powi(3) * s2,
        -8.0 * PI.powi(4) * c2,
    ]
}

impl ExactSolution for SinSquared {
    fn value(&self, p: Point) -> f64 {
        s(p.x)[0] * s(p.y)[0]
    }

    fn gradient(&self, p: Point) -> Point {
        let (a, b) = (s(p.x), s(p.y));
        Point::new(a[1] * b[0], a[0] * b[1])
    }

    fn hessian(&self, p: Point) -> [f64; 3] {
        let (a, b) = (s(p.x), s(p.y));
        [a[2] * b[0], a[1] * b[1], a[0] * b[2]]
    }

    fn grad_laplacian(&self, p: Point) -> Point {
        let (a, b) = (s(p.x), s(p.y));
        Point::new(a[3] * b[0] + a[1] * b[2], a[2] * b[1] + a[0] * b[3])
    }

    fn bilaplacian(&self, p: Point) -> f64 {
        let (a, b) = (s(p.x), s(p.y));
        a[4] * b[0] + 2.0 * a[2] * b[2] + a[0] * b[4]
    }
}

/// `sin²(πx) sin²(πy) + exp(−(x−½)² − (y−½)²)`, with non-homogeneous
/// boundary data.
#[derive(Debug, Clone, Copy, Default)]
pub struct SinSquaredGaussian;

fn gauss(p: Point) -> (f64, f64, f64, f64) {
    let (x, y) = (p.x - 0.5, p.y - 0.5);
    let r2 = x * x + y * y;
    ((-r2).exp(), x, y, r2)
}

impl ExactSolution for SinSquaredGaussian {
    fn value(&self, p: Point) -> f64 {
        SinSquared.value(p) + gauss(p).0
    }

    fn gradient(&self, p: Point) -> Point {
        let (g, x, y, _) = gauss(p);
        SinSquared.gradient(p) + Point::new(-2.0 * x * g, -2.0 * y * g)
    }

    fn hessian(&self, p: Point) -> [f64; 3] {
        let (g, x, y, _) = gauss(p);
        let h = SinSquared.hessian(p);
        [h[0] + (4.0 * x * x - 2.0) * g, h[1] + 4.0 * x * y * g, h[2] + (4.0 * y * y - 2.0) * g]
    }

    fn grad_laplacian(&self, p: Point) -> Point {
        let (g, x, y, r2) = gauss(p);
        let c = (16.0 - 8.0 * r2) * g;
        SinSquared.grad_laplacian(p) + Point::new(c * x, c * y)
    }

    fn bilaplacian(&self, p: Point) -> f64 {
        let (g, _, _, r2) = gauss(p);
        SinSquared.bilaplacian(p) + g * (16.0 * r2 * r2 - 64.0 * r2 + 32.0)
    }
}

/// `Σ c x^a y^b` in global coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Polynomial {
    pub terms: Vec<(f64, u32, u32)>,
}

fn falling(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64)
}

impl Polynomial {
    /// `∂x^i ∂y^j` at `p`.
    pub fn derivative(&self, p: Point, i: u32, j: u32) -> f64 {
        self.terms
            .iter()
            .filter(|&&(_, a, b)| a >= i && b >= j)
            .map(|&(c, a, b)| c * falling(a, i) * falling(b, j) * p.x.powi((a - i) as i32) * p.y.powi((b - j) as i32))
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(_, a, b)| a + b).max().unwrap_or(0)
    }

    /// A fixed polynomial of total degree exactly `degree` with every
    /// monomial present.
    pub fn patch(degree: u32) -> Self {
        let mut terms = Vec::new();
        for d in 0..=degree {
            for b in 0..=d {
                let a = d - b;
                let sign = if (a + 2 * b) % 3 == 1 { -1.0 } else { 1.0 };
                terms.push((sign * (1.0 + 0.5 * a as f64) / (1.0 + b as f64 + d as f64), a, b));
            }
        }
        Self { terms }
    }
}

impl ExactSolution for Polynomial {
    fn value(&self, p: Point) -> f64 {
        self.derivative(p, 0, 0)
    }

    fn gradient(&self, p: Point) -> Point {
        Point::new(self.derivative(p, 1, 0), self.derivative(p, 0, 1))
    }

    fn hessian(&self, p: Point) -> [f64; 3] {
        [self.derivative(p, 2, 0), self.derivative(p, 1, 1), self.derivative(p, 0, 2)]
    }

    fn grad_laplacian(&self, p: Point) -> Point {
        Point::new(
            self.derivative(p, 3, 0) + self.derivative(p, 1, 2),
            self.derivative(p, 2, 1) + self.derivative(p, 0, 3),
        )
    }

    fn bilaplacian(&self, p: Point) -> f64 {
        self.derivative(p, 4, 0) + 2.0 * self.derivative(p, 2, 2) + self.derivative(p, 0, 4)
    }
}

/// Registered manufactured problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManufacturedCase {
    /// `sin²(πx) sin²(πy)`, homogeneous data.
    SinSquared,
    /// `sin²(πx) sin²(πy) + exp(−|x − (½,½)|²)`.
    SinSquaredGaussian,
    /// Polynomial of degree `k + 2`, reproduced exactly by the scheme.
    Patch,
}

impl ManufacturedCase {
    pub fn id(self) -> u32 {
        match self {
            ManufacturedCase::SinSquared => 1,
            ManufacturedCase::SinSquaredGaussian => 2,
            ManufacturedCase::Patch => 0,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(ManufacturedCase::Patch),
            1 => Some(ManufacturedCase::SinSquared),
            2 => Some(ManufacturedCase::SinSquaredGaussian),
            _ => None,
        }
    }

    pub fn solution(self, k: usize) -> Box<dyn ExactSolution> {
        match self {
            ManufacturedCase::SinSquared => Box::new(SinSquared),
            ManufacturedCase::SinSquaredGaussian => Box::new(SinSquaredGaussian),
            ManufacturedCase::Patch => Box::new(Polynomial::patch(k as u32 + 2)),
        }
    }
}

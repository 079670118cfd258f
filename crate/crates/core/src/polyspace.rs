//! Scaled monomial bases on cells and faces, L²-orthogonal projections, the
//! canonical hybrid interpolation `J_F^{k+1}`, and trace tables of cell
//! polynomials on faces.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{Face, Mesh, Point};
use crate::quadrature::{FaceQuadrature, QuadratureRule};
#[allow(unused_imports)]
use num_traits::Float;

/// `((x − x_K)/h_K)^a ((y − y_K)/h_K)^b` for `a + b ≤ degree`, ordered by
/// total degree, so the first three functions span `P¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellBasis {
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
    exponents: Vec<(u32, u32)>,
}

/// Dimension of `P^m` in two variables.
pub const fn poly_dim(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

/// Derivatives of every basis function at one point, up to a fixed order.
#[derive(Debug, Clone)]
pub struct Derivatives {
    order: usize,
    dim: usize,
    data: Vec<f64>,
}

impl Derivatives {
    fn slot(i: usize, j: usize) -> usize {
        let t = i + j;
        t * (t + 1) / 2 + j
    }

    /// `∂x^i ∂y^j φ` for all basis functions.
    pub fn get(&self, i: usize, j: usize) -> &[f64] {
        assert!(i + j <= self.order, "derivative order {} not tabulated", i + j);
        let s = Self::slot(i, j) * self.dim;
        &self.data[s..s + self.dim]
    }
}

impl CellBasis {
    pub fn new(center: Point, scale: f64, degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(poly_dim(degree));
        for d in 0..=degree as u32 {
            for b in 0..=d {
                exponents.push((d - b, b));
            }
        }
        Self {
            center,
            scale,
            degree,
            exponents,
        }
    }

    pub fn for_cell(mesh: &Mesh, cell: usize, degree: usize) -> Self {
        let c = &mesh.cells[cell];
        Self::new(c.centroid, c.diameter, degree)
    }

    /// Same center and scale, different degree.
    pub fn with_degree(&self, degree: usize) -> Self {
        Self::new(self.center, self.scale, degree)
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[(u32, u32)] {
        &self.exponents
    }

    pub fn derivatives(&self, p: Point, order: usize) -> Derivatives {
        let dim = self.dim();
        let m = self.degree;
        let x = (p.x - self.center.x) / self.scale;
        let y = (p.y - self.center.y) / self.scale;
        let mut px = vec![1.0; m + 1];
        let mut py = vec![1.0; m + 1];
        for e in 1..=m {
            px[e] = px[e - 1] * x;
            py[e] = py[e - 1] * y;
        }
        let nslots = poly_dim(order);
        let mut data = vec![0.0; nslots * dim];
        let inv_h = 1.0 / self.scale;
        for t in 0..=order {
            let hpow = inv_h.powi(t as i32);
            for j in 0..=t {
                let i = t - j;
                let base = Derivatives::slot(i, j) * dim;
                for (n, &(a, b)) in self.exponents.iter().enumerate() {
                    let (a, b) = (a as usize, b as usize);
                    if a < i || b < j {
                        continue;
                    }
                    data[base + n] = falling(a, i) * falling(b, j) * hpow * px[a - i] * py[b - j];
                }
            }
        }
        Derivatives { order, dim, data }
    }

    pub fn values(&self, p: Point) -> DVector<f64> {
        DVector::from_column_slice(self.derivatives(p, 0).get(0, 0))
    }

    /// Value of the polynomial with coefficients `c` at `p`.
    pub fn eval(&self, c: &DVector<f64>, p: Point) -> f64 {
        self.values(p).dot(c)
    }
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, r| acc * (n - r) as f64)
}

/// 1D scaled monomials `(s/h_F)^j`, `s` the arclength offset from the face
/// midpoint along the face tangent.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceBasis {
    pub midpoint: Point,
    pub tangent: Point,
    pub length: f64,
    pub degree: usize,
}

impl FaceBasis {
    pub fn new(face: &Face, degree: usize) -> Self {
        Self {
            midpoint: face.midpoint,
            tangent: face.tangent,
            length: face.diameter,
            degree,
        }
    }

    pub fn with_degree(&self, degree: usize) -> Self {
        Self { degree, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.degree + 1
    }

    pub fn offset(&self, p: Point) -> f64 {
        (p - self.midpoint).dot(self.tangent)
    }

    pub fn values_at(&self, s: f64) -> DVector<f64> {
        let r = s / self.length;
        let mut v = DVector::zeros(self.dim());
        let mut acc = 1.0;
        for j in 0..self.dim() {
            v[j] = acc;
            acc *= r;
        }
        v
    }

    /// Tangential derivatives `d/ds (s/h)^j = j (s/h)^{j−1} / h`.
    pub fn tangential_at(&self, s: f64) -> DVector<f64> {
        let r = s / self.length;
        let mut v = DVector::zeros(self.dim());
        let mut acc = 1.0;
        for j in 1..self.dim() {
            v[j] = j as f64 * acc / self.length;
            acc *= r;
        }
        v
    }

    /// `nq × dim` table of values at the quadrature offsets.
    pub fn value_table(&self, offsets: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(offsets.len(), self.dim(), |q, j| self.values_at(offsets[q])[j])
    }

    pub fn tangential_table(&self, offsets: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(offsets.len(), self.dim(), |q, j| self.tangential_at(offsets[q])[j])
    }
}

/// `aᵀ diag(w) b`.
pub fn weighted_gram(a: &DMatrix<f64>, w: &[f64], b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut wb = b.clone();
    for (q, &wq) in w.iter().enumerate() {
        wb.row_mut(q).scale_mut(wq);
    }
    a.transpose() * wb
}

/// `aᵀ diag(w) v`.
pub fn weighted_moments(a: &DMatrix<f64>, w: &[f64], v: &[f64]) -> DVector<f64> {
    let wv = DVector::from_iterator(w.len(), w.iter().zip(v).map(|(a, b)| a * b));
    a.transpose() * wv
}

/// `nq × dim` table of basis values at the rule points.
pub fn cell_value_table(basis: &CellBasis, points: &[Point]) -> DMatrix<f64> {
    let mut t = DMatrix::zeros(points.len(), basis.dim());
    for (q, &p) in points.iter().enumerate() {
        let d = basis.derivatives(p, 0);
        for (j, v) in d.get(0, 0).iter().enumerate() {
            t[(q, j)] = *v;
        }
    }
    t
}

/// Gram matrix `(φ_i, φ_j)_K`.
pub fn cell_mass_matrix(basis: &CellBasis, rule: &QuadratureRule) -> DMatrix<f64> {
    let t = cell_value_table(basis, &rule.points);
    weighted_gram(&t, &rule.weights, &t)
}

/// Gram matrix `(ψ_i, ψ_j)_F`.
pub fn face_mass_matrix(basis: &FaceBasis, rule: &FaceQuadrature) -> DMatrix<f64> {
    let t = basis.value_table(&rule.offsets);
    weighted_gram(&t, &rule.rule.weights, &t)
}

pub(crate) fn spd_solve(m: DMatrix<f64>, rhs: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    let chol = m.cholesky().ok_or(Error::SingularLocal { cell: usize::MAX, what })?;
    Ok(chol.solve(rhs))
}

/// `Π_K^m v` in the coefficients of `basis`.
pub fn project_cell(v: impl Fn(Point) -> f64, basis: &CellBasis, rule: &QuadratureRule) -> Result<DVector<f64>> {
    let t = cell_value_table(basis, &rule.points);
    let vals: Vec<f64> = rule.points.iter().map(|&p| v(p)).collect();
    let rhs = weighted_moments(&t, &rule.weights, &vals);
    let mass = weighted_gram(&t, &rule.weights, &t);
    let sol = spd_solve(mass, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), "cell mass matrix")?;
    Ok(sol.column(0).into_owned())
}

/// `Π_F^m v` in the coefficients of `basis`.
pub fn project_face(v: impl Fn(Point) -> f64, basis: &FaceBasis, rule: &FaceQuadrature) -> Result<DVector<f64>> {
    let t = basis.value_table(&rule.offsets);
    let vals: Vec<f64> = rule.rule.points.iter().map(|&p| v(p)).collect();
    let rhs = weighted_moments(&t, &rule.rule.weights, &vals);
    let mass = weighted_gram(&t, &rule.rule.weights, &t);
    let sol = spd_solve(mass, &DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice()), "face mass matrix")?;
    Ok(sol.column(0).into_owned())
}

/// Weight functions of the interior moments of `J_F^{k+1}`. Any basis of
/// `P^{k−1}(F)` gives the same operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MomentWeights {
    #[default]
    Monomial,
    Legendre,
}

fn legendre_values(n: usize, x: f64) -> Vec<f64> {
    let mut v = vec![0.0; n];
    if n > 0 {
        v[0] = 1.0;
    }
    if n > 1 {
        v[1] = x;
    }
    for j in 2..n {
        let jf = j as f64;
        v[j] = ((2.0 * jf - 1.0) * x * v[j - 1] - (jf - 1.0) * v[j - 2]) / jf;
    }
    v
}

/// Canonical hybrid interpolation onto `P^{k+1}(F)`: values at both face
/// endpoints plus, for `k ≥ 1`, moments against `P^{k−1}(F)`.
#[derive(Debug, Clone)]
pub struct CanonicalInterp {
    pub k: usize,
    basis: FaceBasis,
    weights: MomentWeights,
    dof_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl CanonicalInterp {
    pub fn new(face: &Face, k: usize) -> Result<Self> {
        Self::with_weights(face, k, MomentWeights::Monomial)
    }

    pub fn with_weights(face: &Face, k: usize, weights: MomentWeights) -> Result<Self> {
        let basis = FaceBasis::new(face, k + 1);
        let n = k + 2;
        // moments of degree ≤ 2k are integrated exactly with k+1 points
        let rule = crate::quadrature::face_rule(face, 2 * k + 1)?;
        let mut dofs = DMatrix::zeros(n, n);
        let half = 0.5 * basis.length;
        dofs.row_mut(0).copy_from(&basis.values_at(-half).transpose());
        dofs.row_mut(1).copy_from(&basis.values_at(half).transpose());
        let tmp = Self {
            k,
            basis: basis.clone(),
            weights,
            dof_lu: DMatrix::<f64>::identity(1, 1).lu(),
        };
        let table = basis.value_table(&rule.offsets);
        let wt = tmp.weight_table(&rule.offsets);
        let mom = weighted_gram(&wt, &rule.rule.weights, &table);
        for m in 0..k {
            dofs.row_mut(2 + m).copy_from(&mom.row(m));
        }
        let lu = dofs.lu();
        if !lu.is_invertible() {
            return Err(Error::SingularLocal {
                cell: usize::MAX,
                what: "canonical interpolation DoF matrix",
            });
        }
        Ok(Self { dof_lu: lu, ..tmp })
    }

    pub fn basis(&self) -> &FaceBasis {
        &self.basis
    }

    /// `nq × k` table of the moment weight functions.
    pub fn weight_table(&self, offsets: &[f64]) -> DMatrix<f64> {
        let k = self.k;
        DMatrix::from_fn(offsets.len(), k, |q, m| match self.weights {
            MomentWeights::Monomial => (offsets[q] / self.basis.length).powi(m as i32),
            MomentWeights::Legendre => legendre_values(k, 2.0 * offsets[q] / self.basis.length)[m],
        })
    }

    /// Coefficients of `J(v)` from its degrees of freedom (columns of `dofs`
    /// are independent inputs): rows are `v(start)`, `v(end)`, then the `k`
    /// moments.
    pub fn from_dofs(&self, dofs: &DMatrix<f64>) -> DMatrix<f64> {
        self.dof_lu.solve(dofs).expect("invertible DoF matrix")
    }

    /// `J(v)` for a pointwise evaluable `v`; `rule` integrates the moments.
    pub fn interpolate(&self, v: impl Fn(Point) -> f64, rule: &FaceQuadrature) -> DVector<f64> {
        let half = 0.5 * self.basis.length;
        let a = self.basis.midpoint - self.basis.tangent * half;
        let b = self.basis.midpoint + self.basis.tangent * half;
        let vals: Vec<f64> = rule.rule.points.iter().map(|&p| v(p)).collect();
        let mom = weighted_moments(&self.weight_table(&rule.offsets), &rule.rule.weights, &vals);
        let mut dofs = DMatrix::zeros(self.k + 2, 1);
        dofs[(0, 0)] = v(a);
        dofs[(1, 0)] = v(b);
        for m in 0..self.k {
            dofs[(2 + m, 0)] = mom[m];
        }
        self.from_dofs(&dofs).column(0).into_owned()
    }

    /// Matrix applying `J` to the traces of a cell basis: column `j` holds the
    /// face coefficients of `J(φ_j|_F)`.
    pub fn cell_basis_matrix(&self, cell: &CellBasis, rule: &FaceQuadrature) -> DMatrix<f64> {
        let half = 0.5 * self.basis.length;
        let a = self.basis.midpoint - self.basis.tangent * half;
        let b = self.basis.midpoint + self.basis.tangent * half;
        let n = cell.dim();
        let vals = cell_value_table(cell, &rule.rule.points);
        let mom = weighted_gram(&self.weight_table(&rule.offsets), &rule.rule.weights, &vals);
        let mut dofs = DMatrix::zeros(self.k + 2, n);
        dofs.row_mut(0).copy_from(&cell.values(a).transpose());
        dofs.row_mut(1).copy_from(&cell.values(b).transpose());
        for m in 0..self.k {
            dofs.row_mut(2 + m).copy_from(&mom.row(m));
        }
        self.from_dofs(&dofs)
    }
}

/// `J_F^{k+1}(v)`, coefficients in the degree-`k+1` face basis of `face`.
pub fn canonical_interp_face(v: impl Fn(Point) -> f64, k: usize, face: &Face, rule: &FaceQuadrature) -> Result<DVector<f64>> {
    Ok(CanonicalInterp::new(face, k)?.interpolate(v, rule))
}

/// Exact tangential derivative, in the face basis of one degree less.
pub fn tangential_derivative(coeffs: &DVector<f64>, basis: &FaceBasis) -> DVector<f64> {
    let m = coeffs.len();
    if m <= 1 {
        return DVector::zeros(1);
    }
    DVector::from_fn(m - 1, |j, _| (j + 1) as f64 * coeffs[j + 1] / basis.length)
}

/// Traces of every cell basis function on one face, at the face quadrature
/// points (rows) for each basis function (columns). `normal` is the outward
/// normal of the cell and `tangent` the face tangent.
#[derive(Debug, Clone)]
pub struct TraceTable {
    pub value: DMatrix<f64>,
    pub dx: DMatrix<f64>,
    pub dy: DMatrix<f64>,
    pub dn: DMatrix<f64>,
    pub dt: DMatrix<f64>,
    pub dnn: DMatrix<f64>,
    pub dnt: DMatrix<f64>,
    /// `∂_n Δ φ`.
    pub dn_lap: DMatrix<f64>,
    /// `∇∂_n φ = ∇²φ n`, x and y components.
    pub grad_dn_x: DMatrix<f64>,
    pub grad_dn_y: DMatrix<f64>,
}

pub fn trace_table(basis: &CellBasis, points: &[Point], normal: Point, tangent: Point) -> TraceTable {
    let nq = points.len();
    let dim = basis.dim();
    let z = || DMatrix::zeros(nq, dim);
    let mut t = TraceTable {
        value: z(),
        dx: z(),
        dy: z(),
        dn: z(),
        dt: z(),
        dnn: z(),
        dnt: z(),
        dn_lap: z(),
        grad_dn_x: z(),
        grad_dn_y: z(),
    };
    let (nx, ny) = (normal.x, normal.y);
    let (tx, ty) = (tangent.x, tangent.y);
    for (q, &p) in points.iter().enumerate() {
        let d = basis.derivatives(p, 3);
        let (v, x, y) = (d.get(0, 0), d.get(1, 0), d.get(0, 1));
        let (xx, xy, yy) = (d.get(2, 0), d.get(1, 1), d.get(0, 2));
        let (xxx, xxy, xyy, yyy) = (d.get(3, 0), d.get(2, 1), d.get(1, 2), d.get(0, 3));
        for j in 0..dim {
            t.value[(q, j)] = v[j];
            t.dx[(q, j)] = x[j];
            t.dy[(q, j)] = y[j];
            t.dn[(q, j)] = nx * x[j] + ny * y[j];
            t.dt[(q, j)] = tx * x[j] + ty * y[j];
            let hn_x = xx[j] * nx + xy[j] * ny;
            let hn_y = xy[j] * nx + yy[j] * ny;
            t.grad_dn_x[(q, j)] = hn_x;
            t.grad_dn_y[(q, j)] = hn_y;
            t.dnn[(q, j)] = nx * hn_x + ny * hn_y;
            t.dnt[(q, j)] = tx * hn_x + ty * hn_y;
            t.dn_lap[(q, j)] = nx * (xxx[j] + xyy[j]) + ny * (xxy[j] + yyy[j]);
        }
    }
    t
}

/// Pointwise traces of one cell polynomial on a face.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceTraces {
    pub value: Vec<f64>,
    pub dn: Vec<f64>,
    pub dnn: Vec<f64>,
    pub dnt: Vec<f64>,
    pub dn_lap: Vec<f64>,
}

/// Value, `∂_n`, `∂_nn`, `∂_nt` and `∂_nΔ` of the cell polynomial `coeffs`
/// at the points of `rule` on the `local`-th face of `cell`, with `n = n_K`.
pub fn trace_on_face(
    mesh: &Mesh,
    cell: usize,
    local: usize,
    basis: &CellBasis,
    coeffs: &DVector<f64>,
    rule: &FaceQuadrature,
) -> Result<FaceTraces> {
    let c = mesh.cells.get(cell).ok_or(Error::InvalidArgument(alloc::format!("no cell {cell}")))?;
    if local >= c.faces.len() {
        return Err(Error::InvalidArgument(alloc::format!("cell {cell} has no local face {local}")));
    }
    let face = &mesh.faces[c.faces[local]];
    let t = trace_table(basis, &rule.rule.points, mesh.outward_normal(cell, local), face.tangent);
    let col = |m: &DMatrix<f64>| (m * coeffs).iter().copied().collect::<Vec<f64>>();
    Ok(FaceTraces {
        value: col(&t.value),
        dn: col(&t.dn),
        dnn: col(&t.dnn),
        dnt: col(&t.dnt),
        dn_lap: col(&t.dn_lap),
    })
}

/// Cell quadrature table: values, Hessian entries and bilaplacian.
#[derive(Debug, Clone)]
pub struct CellTable {
    pub value: DMatrix<f64>,
    pub hxx: DMatrix<f64>,
    pub hxy: DMatrix<f64>,
    pub hyy: DMatrix<f64>,
    pub bilap: DMatrix<f64>,
}

pub fn cell_table(basis: &CellBasis, points: &[Point]) -> CellTable {
    let nq = points.len();
    let dim = basis.dim();
    let z = || DMatrix::zeros(nq, dim);
    let mut t = CellTable {
        value: z(),
        hxx: z(),
        hxy: z(),
        hyy: z(),
        bilap: z(),
    };
    for (q, &p) in points.iter().enumerate() {
        let d = basis.derivatives(p, 4);
        let (v, xx, xy, yy) = (d.get(0, 0), d.get(2, 0), d.get(1, 1), d.get(0, 2));
        let (x4, x2y2, y4) = (d.get(4, 0), d.get(2, 2), d.get(0, 4));
        for j in 0..dim {
            t.value[(q, j)] = v[j];
            t.hxx[(q, j)] = xx[j];
            t.hxy[(q, j)] = xy[j];
            t.hyy[(q, j)] = yy[j];
            t.bilap[(q, j)] = x4[j] + 2.0 * x2y2[j] + y4[j];
        }
    }
    t
}

/// `(∇²φ_i, ∇²ψ_j)_K` between the bases tabulated in `a` and `b`.
pub fn hessian_gram(a: &CellTable, b: &CellTable, w: &[f64]) -> DMatrix<f64> {
    weighted_gram(&a.hxx, w, &b.hxx) + weighted_gram(&a.hxy, w, &b.hxy) * 2.0 + weighted_gram(&a.hyy, w, &b.hyy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rect_mesh, polygon_area_centroid, polygon_diameter, subtriangulate_polygon};
    use crate::quadrature::{cell_rule, composite_rule, face_rule};
    use proptest::prelude::*;

    fn segment_face(a: Point, b: Point) -> Face {
        let d = b - a;
        let len = d.norm();
        let t = d * (1.0 / len);
        Face {
            vertices: [0, 1],
            cells: (0, None),
            normal: Point::new(t.y, -t.x),
            tangent: t,
            midpoint: (a + b) * 0.5,
            diameter: len,
        }
    }

    fn pentagon_rule(degree: usize) -> (CellBasis, QuadratureRule) {
        let pts = alloc::vec![
            Point::new(0.12, 0.03),
            Point::new(0.41, 0.09),
            Point::new(0.47, 0.37),
            Point::new(0.22, 0.48),
            Point::new(0.02, 0.26),
        ];
        let (_, c) = polygon_area_centroid(&pts);
        let h = polygon_diameter(&pts);
        let sub = subtriangulate_polygon(0, &pts, c, h).unwrap();
        (CellBasis::new(c, h, 2), composite_rule(&sub, degree).unwrap())
    }

    #[test]
    fn dims() {
        for m in 0..6 {
            assert_eq!(CellBasis::new(Point::default(), 1.0, m).dim(), (m + 1) * (m + 2) / 2);
        }
    }

    #[test]
    fn unit_square_mass_matrix() {
        let mesh = build_rect_mesh(1, 1).unwrap();
        let rule = cell_rule(&mesh, 0, 4).unwrap();
        let m0 = cell_mass_matrix(&CellBasis::for_cell(&mesh, 0, 0), &rule);
        assert!((m0[(0, 0)] - 1.0).abs() < 1e-15);
        let m1 = cell_mass_matrix(&CellBasis::for_cell(&mesh, 0, 1), &rule);
        assert!(m1[(0, 1)].abs() < 1e-15 && m1[(0, 2)].abs() < 1e-15);
    }

    #[test]
    fn pentagon_mass_matrix_against_high_order_oracle() {
        let (basis, rule) = pentagon_rule(4);
        let m = cell_mass_matrix(&basis, &rule);
        let (_, fine) = pentagon_rule(30);
        for i in 0..basis.dim() {
            for j in 0..basis.dim() {
                let want = fine.integrate(|p| {
                    let v = basis.values(p);
                    v[i] * v[j]
                });
                assert!((m[(i, j)] - want).abs() < 1e-12 * m[(0, 0)]);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let basis = CellBasis::new(Point::new(0.3, 0.2), 0.7, 5);
        let p = Point::new(0.41, 0.13);
        let h = 1e-5;
        let d = basis.derivatives(p, 4);
        for (i, j) in [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1)] {
            let dx = basis.derivatives(p + Point::new(h, 0.0), 4);
            let mx = basis.derivatives(p - Point::new(h, 0.0), 4);
            let dy = basis.derivatives(p + Point::new(0.0, h), 4);
            let my = basis.derivatives(p - Point::new(0.0, h), 4);
            for n in 0..basis.dim() {
                let fdx = (dx.get(i, j)[n] - mx.get(i, j)[n]) / (2.0 * h);
                let fdy = (dy.get(i, j)[n] - my.get(i, j)[n]) / (2.0 * h);
                let ex = d.get(i + 1, j)[n];
                let ey = d.get(i, j + 1)[n];
                assert!((fdx - ex).abs() <= 1e-6 * ex.abs().max(1.0));
                assert!((fdy - ey).abs() <= 1e-6 * ey.abs().max(1.0));
            }
        }
    }

    #[test]
    fn projection_of_x_on_constants() {
        let mesh = build_rect_mesh(1, 1).unwrap();
        let rule = cell_rule(&mesh, 0, 4).unwrap();
        let c = project_cell(|p| p.x, &CellBasis::for_cell(&mesh, 0, 0), &rule).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn projection_of_sines_against_normal_equations_oracle() {
        let mesh = build_rect_mesh(1, 1).unwrap();
        let basis = CellBasis::for_cell(&mesh, 0, 2);
        let pi = core::f64::consts::PI;
        let v = |p: Point| (pi * p.x).sin() * (pi * p.y).sin();
        let got = project_cell(v, &basis, &cell_rule(&mesh, 0, 16).unwrap()).unwrap();
        // oracle: normal equations built point-by-point with a much finer rule
        let fine = cell_rule(&mesh, 0, 40).unwrap();
        let n = basis.dim();
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (&p, &w) in fine.points.iter().zip(&fine.weights) {
            let phi = basis.values(p);
            a += &phi * phi.transpose() * w;
            b += &phi * (w * v(p));
        }
        let want = a.lu().solve(&b).unwrap();
        assert!((got - want).amax() < 1e-10);
    }

    #[test]
    fn projection_residual_is_orthogonal() {
        let (basis, rule) = pentagon_rule(20);
        let v = |p: Point| (p.x * 3.0).exp() * (p.y + 0.2).cos();
        let c = project_cell(v, &basis, &rule).unwrap();
        for j in 0..basis.dim() {
            let r = rule.integrate(|p| (v(p) - basis.eval(&c, p)) * basis.values(p)[j]);
            assert!(r.abs() < 1e-11);
        }
    }

    proptest! {
        #[test]
        fn projection_is_idempotent(coeffs in proptest::collection::vec(-2.0f64..2.0, 10)) {
            let (basis, rule) = pentagon_rule(8);
            let b3 = basis.with_degree(3);
            let c = DVector::from_vec(coeffs);
            let p1 = project_cell(|p| b3.eval(&c, p), &b3, &rule).unwrap();
            prop_assert!((&p1 - &c).amax() < 1e-12 * c.amax().max(1.0));
            let p2 = project_cell(|p| b3.eval(&p1, p), &b3, &rule).unwrap();
            prop_assert!((&p2 - &p1).amax() < 1e-12 * c.amax().max(1.0));
        }
    }

    #[test]
    fn face_projection_of_s_squared() {
        let len = 0.8;
        let face = segment_face(Point::new(-0.4, 0.0), Point::new(0.4, 0.0));
        let rule = face_rule(&face, 6).unwrap();
        let c = project_face(|p| p.x * p.x, &FaceBasis::new(&face, 0), &rule).unwrap();
        assert!((c[0] - len * len / 12.0).abs() < 1e-15);
    }

    #[test]
    fn face_projection_of_exp_against_dense_oracle() {
        let face = segment_face(Point::new(-0.5, 0.0), Point::new(0.5, 0.0));
        let basis = FaceBasis::new(&face, 1);
        let got = project_face(|p| p.x.exp(), &basis, &face_rule(&face, 30).unwrap()).unwrap();
        // ∫ e^s = e^{1/2} − e^{−1/2}; ∫ s e^s = [ (s−1)e^s ]
        let e = |s: f64| s.exp();
        let m0 = e(0.5) - e(-0.5);
        let m1 = (0.5 - 1.0) * e(0.5) - (-0.5 - 1.0) * e(-0.5);
        // basis (1, s): Gram [[1, 0], [0, 1/12]]
        let want = [m0, m1 * 12.0];
        assert!((got[0] - want[0]).abs() < 1e-14 && (got[1] - want[1]).abs() < 1e-13);
    }

    #[test]
    fn j_k0_is_lagrange() {
        let face = segment_face(Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        let rule = face_rule(&face, 10).unwrap();
        let c = canonical_interp_face(|p| p.x * p.x, 0, &face, &rule).unwrap();
        // J = x = 1/2 + s in the basis (1, s/h) with h = 1
        assert!((c[0] - 0.5).abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn j_of_cubic_against_dof_system_oracle() {
        let face = segment_face(Point::new(-1.0, 0.0), Point::new(1.0, 0.0));
        let rule = face_rule(&face, 10).unwrap();
        let got = canonical_interp_face(|p| p.x.powi(3), 1, &face, &rule).unwrap();
        // oracle in the basis (1, s, s²): rows v(−1), v(1), ∫v
        let a = nalgebra::Matrix3::new(1.0, -1.0, 1.0, 1.0, 1.0, 1.0, 2.0, 0.0, 2.0 / 3.0);
        let b = nalgebra::Vector3::new(-1.0, 1.0, 0.0);
        let x = a.lu().solve(&b).unwrap();
        // face basis is (s/2)^j
        for j in 0..3 {
            assert!((got[j] - x[j] * 2f64.powi(j as i32)).abs() < 1e-14);
        }
    }

    #[test]
    fn j_reproduces_its_space_and_is_weight_independent() {
        let face = segment_face(Point::new(0.2, 0.1), Point::new(0.5, 0.5));
        for k in 0..6 {
            let rule = face_rule(&face, 2 * k + 12).unwrap();
            let jm = CanonicalInterp::new(&face, k).unwrap();
            let jl = CanonicalInterp::with_weights(&face, k, MomentWeights::Legendre).unwrap();
            let b = jm.basis().clone();
            let c = DVector::from_fn(k + 2, |j, _| (j as f64 * 0.7).sin() + 0.3);
            let poly = |p: Point| b.values_at(b.offset(p)).dot(&c);
            assert!((jm.interpolate(poly, &rule) - &c).amax() < 1e-11);
            let v = |p: Point| (3.0 * p.x - p.y).sin();
            assert!((jm.interpolate(v, &rule) - jl.interpolate(v, &rule)).amax() < 1e-11);
        }
    }

    #[test]
    fn tangential_derivatives() {
        let face = segment_face(Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        let b = FaceBasis::new(&face, 2);
        assert_eq!(tangential_derivative(&DVector::from_vec(alloc::vec![3.0]), &b.with_degree(0))[0], 0.0);
        // s = h (s/h) → 1
        let d = tangential_derivative(&DVector::from_vec(alloc::vec![0.0, 2.0]), &b.with_degree(1));
        assert!((d[0] - 1.0).abs() < 1e-15);
        // s² = h² (s/h)² → 2s = 2h (s/h)
        let d = tangential_derivative(&DVector::from_vec(alloc::vec![0.0, 0.0, 4.0]), &b);
        assert!(d[0].abs() < 1e-15 && (d[1] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn traces_on_unit_square() {
        let mesh = build_rect_mesh(1, 1).unwrap();
        let basis = CellBasis::for_cell(&mesh, 0, 4);
        let rule_cell = cell_rule(&mesh, 0, 10).unwrap();
        let cell = &mesh.cells[0];
        // face x = 1
        let local = (0..4).find(|&i| (mesh.faces[cell.faces[i]].midpoint.x - 1.0).abs() < 1e-15).unwrap();
        let rule = face_rule(&mesh.faces[cell.faces[local]], 6).unwrap();
        let x2 = project_cell(|p| p.x * p.x, &basis, &rule_cell).unwrap();
        let t = trace_on_face(&mesh, 0, local, &basis, &x2, &rule).unwrap();
        for q in 0..t.value.len() {
            assert!((t.dn[q] - 2.0).abs() < 1e-11);
            assert!((t.dnn[q] - 2.0).abs() < 1e-11);
            assert!(t.dnt[q].abs() < 1e-11);
        }
        // x³y on y = 0 with n = (0, −1): ∂_nΔ = −6x
        let bottom = (0..4).find(|&i| mesh.faces[cell.faces[i]].midpoint.y.abs() < 1e-15).unwrap();
        let rule = face_rule(&mesh.faces[cell.faces[bottom]], 6).unwrap();
        let c = project_cell(|p| p.x.powi(3) * p.y, &basis, &rule_cell).unwrap();
        let t = trace_on_face(&mesh, 0, bottom, &basis, &c, &rule).unwrap();
        for (q, p) in rule.rule.points.iter().enumerate() {
            assert!((t.dn_lap[q] + 6.0 * p.x).abs() < 1e-11);
        }
        // affine functions have vanishing second and third derivatives
        // 2x − y + 1 written directly in the scaled basis
        let mut lin = DVector::zeros(basis.dim());
        let (c, h) = (basis.center, basis.scale);
        lin[0] = 2.0 * c.x - c.y + 1.0;
        lin[1] = 2.0 * h;
        lin[2] = -h;
        let t = trace_on_face(&mesh, 0, bottom, &basis, &lin, &rule).unwrap();
        let worst = t.dnn.iter().chain(&t.dnt).chain(&t.dn_lap).fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(worst < 1e-12, "{worst:e}");
        assert!(trace_on_face(&mesh, 0, 7, &basis, &lin, &rule).is_err());
    }

    #[test]
    fn mass_matrix_conditioning_guard() {
        // condition number after diagonal equilibration
        let mesh = crate::mesh::build_voronoi_mesh(30, 5, 10).unwrap();
        for c in 0..mesh.num_cells() {
            let rule = cell_rule(&mesh, c, 14).unwrap();
            let m = cell_mass_matrix(&CellBasis::for_cell(&mesh, c, 7), &rule);
            let d = DVector::from_fn(m.nrows(), |i, _| 1.0 / m[(i, i)].sqrt());
            let m = DMatrix::from_diagonal(&d) * m * DMatrix::from_diagonal(&d);
            let eig = m.symmetric_eigenvalues();
            let cond = eig.max() / eig.min();
            assert!(eig.min() > 0.0 && cond < 1e8, "cell {c}: cond {cond:e}");
        }
    }
}

//! Reference shape functions, quadrature rules and the affine tetrahedron map.
//!
//! Node numbering follows the VTK conventions so that elements can be written
//! out without reordering:
//!
//! ```text
//! tet10:     corners 0..3, mid-edge 4:(0,1) 5:(1,2) 6:(0,2) 7:(0,3) 8:(1,3) 9:(2,3)
//! tri6:      corners 0..2, mid-edge 3:(0,1) 4:(1,2) 5:(2,0)
//! quad8:     corners (-1,-1) (1,-1) (1,1) (-1,1), mid-edge 4..7 counterclockwise from (0,-1)
//! ```
//!
//! The tet and triangle reference domains are the unit simplices, the quad
//! lives on `[-1, 1]^2`. Points are always passed as `[f64; 3]`; unused
//! trailing coordinates are ignored.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

/// Local edges of a tetrahedron, in the order of the P2 mid-edge nodes.
pub const TET_EDGES: [[usize; 2]; 6] = [[0, 1], [1, 2], [0, 2], [0, 3], [1, 3], [2, 3]];

/// Local faces of a tetrahedron; face `f` is opposite corner `f`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

/// Mid-edge node of the P2 tetrahedron sitting between two local corners.
pub fn tet_edge_node(a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    4 + TET_EDGES.iter().position(|e| *e == [a, b]).expect("corner pair is an edge")
}

const MAX_NODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Tet,
    Triangle,
    Quad8,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Tet => "tetrahedron",
            Shape::Triangle => "triangle",
            Shape::Quad8 => "quadrilateral",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Shape::Tet => 3,
            Shape::Triangle | Shape::Quad8 => 2,
        }
    }

    /// Measure of the reference domain.
    pub fn measure(self) -> f64 {
        match self {
            Shape::Tet => 1.0 / 6.0,
            Shape::Triangle => 0.5,
            Shape::Quad8 => 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReferenceElement {
    shape: Shape,
    order: u8,
}

impl ReferenceElement {
    pub fn new(shape: Shape, order: u8) -> Result<Self> {
        match (shape, order) {
            (Shape::Tet, 1 | 2) | (Shape::Triangle, 1 | 2) | (Shape::Quad8, 2) => {
                Ok(Self { shape, order })
            }
            _ => Err(Error::UnsupportedElement(format!(
                "{} of order {order}",
                shape.name()
            ))),
        }
    }

    pub fn tet(order: u8) -> Result<Self> {
        Self::new(Shape::Tet, order)
    }

    pub fn triangle(order: u8) -> Result<Self> {
        Self::new(Shape::Triangle, order)
    }

    pub fn quad8() -> Self {
        Self { shape: Shape::Quad8, order: 2 }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn node_count(&self) -> usize {
        match (self.shape, self.order) {
            (Shape::Tet, 1) => 4,
            (Shape::Tet, _) => 10,
            (Shape::Triangle, 1) => 3,
            (Shape::Triangle, _) => 6,
            (Shape::Quad8, _) => 8,
        }
    }

    pub fn nodes(&self) -> Vec<[f64; 3]> {
        let mut out = match self.shape {
            Shape::Tet => vec![
                [0.0, 0.0, 0.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
            ],
            Shape::Triangle => vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            Shape::Quad8 => {
                return vec![
                    [-1.0, -1.0, 0.0],
                    [1.0, -1.0, 0.0],
                    [1.0, 1.0, 0.0],
                    [-1.0, 1.0, 0.0],
                    [0.0, -1.0, 0.0],
                    [1.0, 0.0, 0.0],
                    [0.0, 1.0, 0.0],
                    [-1.0, 0.0, 0.0],
                ]
            }
        };
        if self.order == 2 {
            let edges: &[[usize; 2]] = match self.shape {
                Shape::Tet => &TET_EDGES,
                _ => &[[0, 1], [1, 2], [2, 0]],
            };
            for [a, b] in edges {
                let (pa, pb) = (out[*a], out[*b]);
                out.push([
                    0.5 * (pa[0] + pb[0]),
                    0.5 * (pa[1] + pb[1]),
                    0.5 * (pa[2] + pb[2]),
                ]);
            }
        }
        out
    }

    /// Writes the basis values at `r` into `out[..node_count]`.
    pub fn values_into(&self, r: &[f64; 3], out: &mut [f64]) {
        match self.shape {
            Shape::Tet => simplex_values(3, self.order, r, out),
            Shape::Triangle => simplex_values(2, self.order, r, out),
            Shape::Quad8 => quad8_values(r, out),
        }
    }

    /// Writes the reference gradients at `r` into `out[..node_count]`.
    pub fn gradients_into(&self, r: &[f64; 3], out: &mut [[f64; 3]]) {
        match self.shape {
            Shape::Tet => simplex_gradients(3, self.order, r, out),
            Shape::Triangle => simplex_gradients(2, self.order, r, out),
            Shape::Quad8 => quad8_gradients(r, out),
        }
    }

    /// Writes the reference Hessians at `r` into `out[..node_count]`.
    pub fn hessians_into(&self, r: &[f64; 3], out: &mut [[[f64; 3]; 3]]) {
        match self.shape {
            Shape::Tet => simplex_hessians(3, self.order, out),
            Shape::Triangle => simplex_hessians(2, self.order, out),
            Shape::Quad8 => quad8_hessians(r, out),
        }
    }

    pub fn values(&self, r: &[f64; 3]) -> Vec<f64> {
        let mut v = vec![0.0; self.node_count()];
        self.values_into(r, &mut v);
        v
    }

    pub fn gradients(&self, r: &[f64; 3]) -> Vec<[f64; 3]> {
        let mut g = vec![[0.0; 3]; self.node_count()];
        self.gradients_into(r, &mut g);
        g
    }

    pub fn hessians(&self, r: &[f64; 3]) -> Vec<[[f64; 3]; 3]> {
        let mut h = vec![[[0.0; 3]; 3]; self.node_count()];
        self.hessians_into(r, &mut h);
        h
    }

    pub fn eval(&self, r: &[f64; 3], deriv: Derivative) -> BasisEval {
        match deriv {
            Derivative::Value => BasisEval::Values(self.values(r)),
            Derivative::Gradient => BasisEval::Gradients(self.gradients(r)),
            Derivative::Hessian => BasisEval::Hessians(self.hessians(r)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    Value,
    Gradient,
    Hessian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasisEval {
    Values(Vec<f64>),
    Gradients(Vec<[f64; 3]>),
    Hessians(Vec<[[f64; 3]; 3]>),
}

// Barycentric coordinates of a simplex: L0 = 1 - sum(r), Li = r[i-1].
fn barycentric(dim: usize, r: &[f64; 3]) -> [f64; 4] {
    let mut l = [0.0; 4];
    let mut sum = 0.0;
    for i in 0..dim {
        l[i + 1] = r[i];
        sum += r[i];
    }
    l[0] = 1.0 - sum;
    l
}

fn barycentric_gradient(dim: usize, i: usize) -> [f64; 3] {
    let mut g = [0.0; 3];
    if i == 0 {
        for c in g.iter_mut().take(dim) {
            *c = -1.0;
        }
    } else {
        g[i - 1] = 1.0;
    }
    g
}

fn simplex_edges(dim: usize) -> &'static [[usize; 2]] {
    if dim == 3 {
        &TET_EDGES
    } else {
        &[[0, 1], [1, 2], [2, 0]]
    }
}

fn simplex_values(dim: usize, order: u8, r: &[f64; 3], out: &mut [f64]) {
    let l = barycentric(dim, r);
    let nc = dim + 1;
    if order == 1 {
        out[..nc].copy_from_slice(&l[..nc]);
        return;
    }
    for i in 0..nc {
        out[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (k, [a, b]) in simplex_edges(dim).iter().enumerate() {
        out[nc + k] = 4.0 * l[*a] * l[*b];
    }
}

fn simplex_gradients(dim: usize, order: u8, r: &[f64; 3], out: &mut [[f64; 3]]) {
    let l = barycentric(dim, r);
    let nc = dim + 1;
    let dl: [[f64; 3]; 4] = std::array::from_fn(|i| barycentric_gradient(dim, i));
    if order == 1 {
        out[..nc].copy_from_slice(&dl[..nc]);
        return;
    }
    for i in 0..nc {
        let f = 4.0 * l[i] - 1.0;
        out[i] = [f * dl[i][0], f * dl[i][1], f * dl[i][2]];
    }
    for (k, [a, b]) in simplex_edges(dim).iter().enumerate() {
        let (a, b) = (*a, *b);
        out[nc + k] = std::array::from_fn(|c| 4.0 * (l[a] * dl[b][c] + l[b] * dl[a][c]));
    }
}

fn simplex_hessians(dim: usize, order: u8, out: &mut [[[f64; 3]; 3]]) {
    let nc = dim + 1;
    let dl: [[f64; 3]; 4] = std::array::from_fn(|i| barycentric_gradient(dim, i));
    if order == 1 {
        for h in out[..nc].iter_mut() {
            *h = [[0.0; 3]; 3];
        }
        return;
    }
    for i in 0..nc {
        out[i] = std::array::from_fn(|p| std::array::from_fn(|q| 4.0 * dl[i][p] * dl[i][q]));
    }
    for (k, [a, b]) in simplex_edges(dim).iter().enumerate() {
        let (a, b) = (*a, *b);
        out[nc + k] = std::array::from_fn(|p| {
            std::array::from_fn(|q| 4.0 * (dl[a][p] * dl[b][q] + dl[b][p] * dl[a][q]))
        });
    }
}

const QUAD8_NODES: [[f64; 2]; 8] = [
    [-1.0, -1.0],
    [1.0, -1.0],
    [1.0, 1.0],
    [-1.0, 1.0],
    [0.0, -1.0],
    [1.0, 0.0],
    [0.0, 1.0],
    [-1.0, 0.0],
];

fn quad8_values(r: &[f64; 3], out: &mut [f64]) {
    let (x, y) = (r[0], r[1]);
    for (i, [xi, yi]) in QUAD8_NODES.iter().enumerate() {
        out[i] = if i < 4 {
            0.25 * (1.0 + x * xi) * (1.0 + y * yi) * (x * xi + y * yi - 1.0)
        } else if *xi == 0.0 {
            0.5 * (1.0 - x * x) * (1.0 + y * yi)
        } else {
            0.5 * (1.0 + x * xi) * (1.0 - y * y)
        };
    }
}

fn quad8_gradients(r: &[f64; 3], out: &mut [[f64; 3]]) {
    let (x, y) = (r[0], r[1]);
    for (i, [xi, yi]) in QUAD8_NODES.iter().enumerate() {
        out[i] = if i < 4 {
            [
                0.25 * xi * (1.0 + y * yi) * (2.0 * x * xi + y * yi),
                0.25 * yi * (1.0 + x * xi) * (x * xi + 2.0 * y * yi),
                0.0,
            ]
        } else if *xi == 0.0 {
            [-x * (1.0 + y * yi), 0.5 * yi * (1.0 - x * x), 0.0]
        } else {
            [0.5 * xi * (1.0 - y * y), -y * (1.0 + x * xi), 0.0]
        };
    }
}

fn quad8_hessians(r: &[f64; 3], out: &mut [[[f64; 3]; 3]]) {
    let (x, y) = (r[0], r[1]);
    for (i, [xi, yi]) in QUAD8_NODES.iter().enumerate() {
        let (hxx, hxy, hyy) = if i < 4 {
            (
                0.5 * xi * xi * (1.0 + y * yi),
                0.25 * xi * yi * (2.0 * x * xi + 2.0 * y * yi + 1.0),
                0.5 * yi * yi * (1.0 + x * xi),
            )
        } else if *xi == 0.0 {
            (-(1.0 + y * yi), -x * yi, 0.0)
        } else {
            (0.0, -y * xi, -(1.0 + x * xi))
        };
        out[i] = [[hxx, hxy, 0.0], [hxy, hyy, 0.0], [0.0, 0.0, 0.0]];
    }
}

/// Basis values for a P1/P2 line on `[0, 1]`, nodes ordered (start, end, middle).
pub fn line_values(order: u8, t: f64) -> ([f64; 3], [f64; 3]) {
    if order == 1 {
        ([1.0 - t, t, 0.0], [-1.0, 1.0, 0.0])
    } else {
        let l0 = 1.0 - t;
        (
            [l0 * (2.0 * l0 - 1.0), t * (2.0 * t - 1.0), 4.0 * l0 * t],
            [1.0 - 4.0 * l0, 4.0 * t - 1.0, 4.0 * (l0 - t)],
        )
    }
}

/// Positive-weight quadrature on a reference domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 3], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

pub const MAX_QUADRATURE_DEGREE: usize = 19;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "at least one Gauss point");
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Newton on P_n from the usual cosine guess.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p_prev, mut p) = (1.0, z);
            for k in 2..=n {
                let next = ((2 * k - 1) as f64 * z * p - (k - 1) as f64 * p_prev) / k as f64;
                p_prev = p;
                p = next;
            }
            dp = n as f64 * (z * p - p_prev) / (z * z - 1.0);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    (
        x.iter().map(|xi| 0.5 * (xi + 1.0)).collect(),
        w.iter().map(|wi| 0.5 * wi).collect(),
    )
}

/// Quadrature rule on the reference domain of `shape`, exact for
/// polynomials of total degree `degree` (tensor degree for quads).
///
/// Simplices use collapsed (Duffy) Gauss-Legendre products, except for
/// degree <= 1 where the centroid rule is returned.
pub fn quadrature_rule(shape: Shape, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_QUADRATURE_DEGREE {
        return Err(Error::UnsupportedQuadrature { shape: shape.name(), degree });
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match shape {
        Shape::Tet if degree <= 1 => {
            points.push([0.25; 3]);
            weights.push(1.0 / 6.0);
        }
        Shape::Triangle if degree <= 1 => {
            points.push([1.0 / 3.0, 1.0 / 3.0, 0.0]);
            weights.push(0.5);
        }
        Shape::Triangle => {
            let (x, w) = gauss_legendre_unit((degree + 2).div_ceil(2));
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    points.push([*u, v * (1.0 - u), 0.0]);
                    weights.push(wu * wv * (1.0 - u));
                }
            }
        }
        Shape::Tet => {
            let (x, w) = gauss_legendre_unit((degree + 3).div_ceil(2));
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    for (s, ws) in x.iter().zip(&w) {
                        points.push([*u, v * (1.0 - u), s * (1.0 - u) * (1.0 - v)]);
                        weights.push(wu * wv * ws * (1.0 - u) * (1.0 - u) * (1.0 - v));
                    }
                }
            }
        }
        Shape::Quad8 => {
            let (x, w) = gauss_legendre((degree + 2) / 2);
            for (u, wu) in x.iter().zip(&w) {
                for (v, wv) in x.iter().zip(&w) {
                    points.push([*u, *v, 0.0]);
                    weights.push(wu * wv);
                }
            }
        }
    }
    Ok(QuadratureRule { points, weights, degree })
}

/// Affine map `x = A r + x1` of the reference tetrahedron onto a physical one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub a: Mat3,
    pub a_inv: Mat3,
    pub x1: Vec3,
    pub det: f64,
}

impl AffineMap {
    pub fn from_corners(corners: [Vec3; 4]) -> Option<Self> {
        let a = Matrix3::from_columns(&[
            corners[1] - corners[0],
            corners[2] - corners[0],
            corners[3] - corners[0],
        ]);
        let det = a.determinant();
        let scale = a.column(0).norm() * a.column(1).norm() * a.column(2).norm();
        if !(det.abs() > 1e-14 * scale) {
            return None;
        }
        let a_inv = a.try_inverse()?;
        Some(Self { a, a_inv, x1: corners[0], det })
    }

    pub fn volume(&self) -> f64 {
        self.det / 6.0
    }

    pub fn to_physical(&self, r: &Vec3) -> Vec3 {
        self.a * r + self.x1
    }

    pub fn to_reference(&self, x: &Vec3) -> Vec3 {
        self.a_inv * (x - self.x1)
    }

    /// `A^{-T} g`: pulls a reference gradient back to physical coordinates.
    pub fn physical_gradient(&self, g: &[f64; 3]) -> Vec3 {
        self.a_inv.transpose() * Vector3::from(*g)
    }

    /// `A^{-T} H A^{-1}`.
    pub fn physical_hessian(&self, h: &[[f64; 3]; 3]) -> Mat3 {
        let hm = Matrix3::from_fn(|i, j| h[i][j]);
        self.a_inv.transpose() * hm * self.a_inv
    }
}

/// Basis of a tet evaluated at a physical point through the inverse map.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalBasis {
    pub reference: Vec3,
    pub values: Vec<f64>,
    pub gradients: Vec<Vec3>,
}

pub fn inverse_affine_map(
    element: &ReferenceElement,
    map: &AffineMap,
    x: &Vec3,
) -> Result<PhysicalBasis> {
    if element.shape() != Shape::Tet {
        return Err(Error::UnsupportedElement(
            "physical evaluation requires a tetrahedron".into(),
        ));
    }
    let r = map.to_reference(x);
    let rp = [r.x, r.y, r.z];
    let mut vals = [0.0; MAX_NODES];
    let mut grads = [[0.0; 3]; MAX_NODES];
    let n = element.node_count();
    element.values_into(&rp, &mut vals);
    element.gradients_into(&rp, &mut grads);
    Ok(PhysicalBasis {
        reference: r,
        values: vals[..n].to_vec(),
        gradients: grads[..n].iter().map(|g| map.physical_gradient(g)).collect(),
    })
}

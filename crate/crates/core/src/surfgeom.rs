//! Geometry of reconstructed surface elements.

use crate::basis::{quadrature_rule, Shape};
use crate::error::{Error, Result};
use crate::reconstruct::{SurfaceElement, SurfaceKind, SurfaceMesh};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub x: Vec3,
    pub t_r: Vec3,
    pub t_s: Vec3,
    pub normal: Vec3,
    /// `|t_r x t_s|`
    pub jacobian: f64,
}

/// Frame of `elem` at reference point `r` (only the first two coordinates
/// are used).
pub fn surface_frame(elem: &SurfaceElement, r: &[f64; 3]) -> Result<TangentFrame> {
    let basis = elem.kind.reference();
    let n = basis.node_count();
    let mut vals = [0.0; 8];
    let mut grads = [[0.0; 3]; 8];
    basis.values_into(r, &mut vals);
    basis.gradients_into(r, &mut grads);
    let mut x = Vec3::zeros();
    let mut t_r = Vec3::zeros();
    let mut t_s = Vec3::zeros();
    for i in 0..n {
        x += elem.nodes[i] * vals[i];
        t_r += elem.nodes[i] * grads[i][0];
        t_s += elem.nodes[i] * grads[i][1];
    }
    let c = t_r.cross(&t_s);
    let jacobian = c.norm();
    if !(jacobian > 1e-14) {
        return Err(Error::DegenerateSurface(jacobian));
    }
    Ok(TangentFrame { x, t_r, t_s, normal: c / jacobian, jacobian })
}

/// `I - n n^T` for the (renormalized) direction `n`.
pub fn tangential_projector(n: &Vec3) -> Result<Mat3> {
    let len = n.norm();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::ZeroNormal);
    }
    let u = n / len;
    Ok(Mat3::identity() - u * u.transpose())
}

/// One surface quadrature point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    /// Quadrature weight times surface Jacobian.
    pub weight: f64,
    pub frame: TangentFrame,
    /// Position in the reference coordinates of the parent tetrahedron.
    pub parent_ref: Vec3,
}

fn shape_of(kind: SurfaceKind) -> Shape {
    match kind {
        SurfaceKind::Quad8 => Shape::Quad8,
        _ => Shape::Triangle,
    }
}

pub fn surface_quadrature(elem: &SurfaceElement, degree: usize) -> Result<Vec<SurfacePoint>> {
    let rule = quadrature_rule(shape_of(elem.kind), degree)?;
    let basis = elem.kind.reference();
    let mut vals = [0.0; 8];
    let mut out = Vec::with_capacity(rule.len());
    for (p, w) in rule.iter() {
        let frame = surface_frame(elem, p)?;
        basis.values_into(p, &mut vals);
        let parent_ref = elem
            .parent_ref
            .iter()
            .zip(&vals)
            .fold(Vec3::zeros(), |acc, (r, v)| acc + r * *v);
        out.push(SurfacePoint { weight: w * frame.jacobian, frame, parent_ref });
    }
    Ok(out)
}

pub fn element_area(elem: &SurfaceElement, degree: usize) -> Result<f64> {
    Ok(surface_quadrature(elem, degree)?.iter().map(|p| p.weight).sum())
}

/// Total area with a rule of degree 8, ample for quadratic elements.
pub fn surface_area(surface: &SurfaceMesh) -> Result<f64> {
    surface.elements.iter().map(|e| element_area(e, 8)).sum()
}

//! Analytic level-set fields and their nodal interpolants on the background
//! mesh.

use serde::{Deserialize, Serialize};

use crate::basis::ReferenceElement;
use crate::error::{Error, Result};
use crate::mesh::TetMesh;
use crate::Vec3;

/// Distance below which a point counts as lying on the medial axis.
pub const MEDIAL_AXIS_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AnalyticField {
    /// Signed distance to an infinite circular cylinder.
    Cylinder { point: [f64; 3], axis: [f64; 3], radius: f64 },
    /// `|x_perp|^2 - r^2`: same zero set as `Cylinder`, not a distance.
    CylinderQuadratic { point: [f64; 3], axis: [f64; 3], radius: f64 },
    Sphere { center: [f64; 3], radius: f64 },
    Plane { point: [f64; 3], normal: [f64; 3] },
}

/// Value, gradient and closest surface point of an analytic field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactEval {
    pub value: f64,
    pub gradient: Vec3,
    pub closest: Vec3,
}

impl AnalyticField {
    pub fn cylinder(point: Vec3, axis: Vec3, radius: f64) -> Self {
        let axis = axis.normalize();
        Self::Cylinder { point: point.into(), axis: axis.into(), radius }
    }

    pub fn cylinder_quadratic(point: Vec3, axis: Vec3, radius: f64) -> Self {
        let axis = axis.normalize();
        Self::CylinderQuadratic { point: point.into(), axis: axis.into(), radius }
    }

    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Self::Sphere { center: center.into(), radius }
    }

    pub fn plane(point: Vec3, normal: Vec3) -> Self {
        let normal = normal.normalize();
        Self::Plane { point: point.into(), normal: normal.into() }
    }

    /// The unit-axis cylinder of radius `r` along `x` through the origin.
    pub fn x_cylinder(radius: f64) -> Self {
        Self::cylinder(Vec3::zeros(), Vec3::x(), radius)
    }

    fn radial(point: &[f64; 3], axis: &[f64; 3], x: &Vec3) -> Vec3 {
        let (p, a) = (Vec3::from(*point), Vec3::from(*axis).normalize());
        let d = x - p;
        d - a * a.dot(&d)
    }

    /// Field value; defined everywhere, including the medial axis.
    pub fn value(&self, x: &Vec3) -> f64 {
        match self {
            Self::Cylinder { point, axis, radius } => Self::radial(point, axis, x).norm() - radius,
            Self::CylinderQuadratic { point, axis, radius } => {
                Self::radial(point, axis, x).norm_squared() - radius * radius
            }
            Self::Sphere { center, radius } => (x - Vec3::from(*center)).norm() - radius,
            Self::Plane { point, normal } => {
                Vec3::from(*normal).normalize().dot(&(x - Vec3::from(*point)))
            }
        }
    }

    pub fn gradient(&self, x: &Vec3) -> Result<Vec3> {
        let guard = |v: Vec3| -> Result<Vec3> {
            let n = v.norm();
            if n < MEDIAL_AXIS_GUARD {
                Err(Error::MedialAxis { point: (*x).into(), node: None })
            } else {
                Ok(v / n)
            }
        };
        match self {
            Self::Cylinder { point, axis, .. } => guard(Self::radial(point, axis, x)),
            Self::CylinderQuadratic { point, axis, .. } => Ok(2.0 * Self::radial(point, axis, x)),
            Self::Sphere { center, .. } => guard(x - Vec3::from(*center)),
            Self::Plane { normal, .. } => Ok(Vec3::from(*normal).normalize()),
        }
    }

    /// Signed distance, unit gradient and closest point.
    pub fn eval_exact(&self, x: &Vec3) -> Result<ExactEval> {
        let value = self.value(x);
        let gradient = self.gradient(x)?;
        let closest = match self {
            Self::CylinderQuadratic { point, axis, radius } => {
                let rad = Self::radial(point, axis, x);
                if rad.norm() < MEDIAL_AXIS_GUARD {
                    return Err(Error::MedialAxis { point: (*x).into(), node: None });
                }
                x - rad + rad.normalize() * *radius
            }
            _ => x - gradient * value,
        };
        Ok(ExactEval { value, gradient, closest })
    }

    /// Exact unit normal of the zero set nearest to `x`.
    pub fn normal(&self, x: &Vec3) -> Result<Vec3> {
        Ok(self.gradient(x)?.normalize())
    }
}

/// One level-set value per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<f64>,
    pub order: u8,
}

/// Samples `field` at every node of `mesh`, including P2 mid-edge nodes.
///
/// Distance values are well defined on the medial axis, so only non-finite
/// values are rejected.
pub fn sample_nodal(field: &AnalyticField, mesh: &TetMesh) -> Result<NodalField> {
    let values = mesh
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let v = field.value(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidInput(format!("non-finite level set at node {i}")))
            }
        })
        .collect::<Result<_>>()?;
    Ok(NodalField { values, order: mesh.order() })
}

/// Interpolated `phi_h` and its physical gradient at reference point `r` of
/// element `elem`.
pub fn eval_discrete(
    mesh: &TetMesh,
    elem: usize,
    field: &NodalField,
    r: &[f64; 3],
) -> Result<(f64, Vec3)> {
    if elem >= mesh.element_count() {
        return Err(Error::InvalidInput(format!("element {elem} out of range")));
    }
    let basis = ReferenceElement::tet(mesh.order())?;
    let nodes = mesh.element(elem);
    let mut vals = [0.0; 10];
    let mut grads = [[0.0; 3]; 10];
    basis.values_into(r, &mut vals);
    basis.gradients_into(r, &mut grads);
    let mut phi = 0.0;
    let mut g = [0.0; 3];
    for (i, &n) in nodes.iter().enumerate() {
        let v = field.values[n];
        phi += vals[i] * v;
        for c in 0..3 {
            g[c] += grads[i][c] * v;
        }
    }
    Ok((phi, mesh.map(elem).physical_gradient(&g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_background_mesh, Aabb};

    #[test]
    fn sphere_example() {
        let s = AnalyticField::sphere(Vec3::zeros(), 1.0);
        let e = s.eval_exact(&Vec3::new(2.0, 0.0, 0.0)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.gradient, Vec3::x());
        assert_eq!(e.closest, Vec3::x());
    }

    #[test]
    fn cylinder_point_on_surface() {
        let c = AnalyticField::x_cylinder(1.0);
        let e = c.eval_exact(&Vec3::new(2.0, 0.6, 0.8)).unwrap();
        assert!(e.value.abs() < 1e-15);
        assert!((e.gradient - Vec3::new(0.0, 0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn plane_example() {
        let p = AnalyticField::plane(Vec3::zeros(), Vec3::z());
        assert!((p.value(&Vec3::new(5.0, 5.0, -0.3)) + 0.3).abs() < 1e-15);
    }

    #[test]
    fn medial_axis_is_rejected() {
        let c = AnalyticField::x_cylinder(1.0);
        assert!(matches!(c.eval_exact(&Vec3::new(3.0, 0.0, 0.0)), Err(Error::MedialAxis { .. })));
        assert!(AnalyticField::sphere(Vec3::zeros(), 1.0).gradient(&Vec3::zeros()).is_err());
        // the value itself stays defined
        assert_eq!(c.value(&Vec3::new(3.0, 0.0, 0.0)), -1.0);
    }

    #[test]
    fn distance_gradients_are_unit_and_projection_lands_on_surface() {
        let fields = [
            AnalyticField::cylinder(Vec3::new(0.1, 0.2, 0.0), Vec3::new(1.0, 1.0, 0.3), 0.7),
            AnalyticField::sphere(Vec3::new(0.3, -0.2, 0.5), 1.1),
            AnalyticField::plane(Vec3::new(0.0, 0.5, 0.0), Vec3::new(1.0, 2.0, 3.0)),
        ];
        let h = 1e-6;
        for f in fields {
            for x in [Vec3::new(0.9, 0.4, -0.7), Vec3::new(-1.2, 0.8, 1.5)] {
                let e = f.eval_exact(&x).unwrap();
                let fd = Vec3::from_fn(|i, _| {
                    let mut d = Vec3::zeros();
                    d[i] = h;
                    (f.value(&(x + d)) - f.value(&(x - d))) / (2.0 * h)
                });
                assert!((fd.norm() - 1.0).abs() < 1e-8);
                assert!((fd - e.gradient).norm() < 1e-8);
                assert!(f.value(&e.closest).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nodal_sampling_examples() {
        let mesh = build_background_mesh(Aabb::new([-1.0; 3], [1.0; 3]), 2, 2).unwrap();
        let plane = AnalyticField::plane(Vec3::new(0.1, 0.0, 0.0), Vec3::new(1.0, -1.0, 0.5));
        let phi = sample_nodal(&plane, &mesh).unwrap();
        for (x, v) in mesh.nodes().iter().zip(&phi.values) {
            assert!((plane.value(x) - v).abs() < 1e-15);
        }
        let sphere = AnalyticField::sphere(Vec3::zeros(), 1.0);
        let phi = sample_nodal(&sphere, &mesh).unwrap();
        let on_x = mesh.nodes().iter().position(|x| *x == Vec3::x()).unwrap();
        assert_eq!(phi.values[on_x], 0.0);
    }

    #[test]
    fn polynomial_reproduction() {
        let mesh = build_background_mesh(Aabb::new([-1.3; 3], [1.3; 3]), 3, 2).unwrap();
        let plane = AnalyticField::plane(Vec3::new(0.1, 0.0, 0.2), Vec3::new(1.0, -1.0, 0.5));
        let quad = AnalyticField::cylinder_quadratic(Vec3::zeros(), Vec3::x(), 1.0);
        let p1 = build_background_mesh(Aabb::new([-1.3; 3], [1.3; 3]), 3, 1).unwrap();
        let pl1 = sample_nodal(&plane, &p1).unwrap();
        let pl2 = sample_nodal(&plane, &mesh).unwrap();
        let q2 = sample_nodal(&quad, &mesh).unwrap();
        let pts = [[0.1, 0.2, 0.3], [0.25, 0.25, 0.25], [0.6, 0.1, 0.05]];
        for e in (0..mesh.element_count()).step_by(7) {
            for r in &pts {
                let x = mesh.map(e).to_physical(&Vec3::from(*r));
                let (v1, g1) = eval_discrete(&p1, e, &pl1, r).unwrap();
                let (v2, _) = eval_discrete(&mesh, e, &pl2, r).unwrap();
                let (vq, gq) = eval_discrete(&mesh, e, &q2, r).unwrap();
                assert!((v1 - plane.value(&x)).abs() < 1e-13);
                assert!((v2 - plane.value(&x)).abs() < 1e-13);
                assert!((g1 - plane.gradient(&x).unwrap()).norm() < 1e-12);
                assert!((vq - quad.value(&x)).abs() < 1e-12);
                assert!((gq - quad.gradient(&x).unwrap()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn discrete_gradient_matches_differences() {
        let mesh = build_background_mesh(Aabb::new([-1.5; 3], [1.5; 3]), 3, 2).unwrap();
        let phi = sample_nodal(&AnalyticField::x_cylinder(1.0), &mesh).unwrap();
        let h = 1e-6;
        for e in [0, 17, 55, 101] {
            let r = [0.2, 0.3, 0.1];
            let (_, g) = eval_discrete(&mesh, e, &phi, &r).unwrap();
            let x = mesh.map(e).to_physical(&Vec3::from(r));
            for d in 0..3 {
                let mut dx = Vec3::zeros();
                dx[d] = h;
                let rp = mesh.map(e).to_reference(&(x + dx));
                let rm = mesh.map(e).to_reference(&(x - dx));
                let (vp, _) = eval_discrete(&mesh, e, &phi, &rp.into()).unwrap();
                let (vm, _) = eval_discrete(&mesh, e, &phi, &rm.into()).unwrap();
                assert!(((vp - vm) / (2.0 * h) - g[d]).abs() < 1e-6);
            }
        }
        assert!(eval_discrete(&mesh, mesh.element_count(), &phi, &[0.0; 3]).is_err());
    }
}

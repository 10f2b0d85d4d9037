//! Stabilized trace finite element system for a linear elastic membrane.
//!
//! Bulk shape functions of the active tetrahedra are traced onto the
//! reconstructed surface. Three matrices are assembled on one block pattern:
//! the membrane form, the gradient jump penalty and the scaled Hessian jump
//! penalty. Stabilization weights are applied at solve time, so parameter
//! sweeps reuse a single assembly.

use serde::{Deserialize, Serialize};

use crate::basis::{quadrature_rule, ReferenceElement, Shape};
use crate::error::{Error, Result};
use crate::linalg::{combine, solve_reduced, Block, BlockPattern, SolveInfo};
use crate::mesh::{ActiveMesh, TetMesh};
use crate::reconstruct::{SurfaceElement, SurfaceMesh};
use crate::surfgeom::{surface_frame, surface_quadrature, tangential_projector};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub young: f64,
    pub poisson: f64,
    pub mu: f64,
    pub lambda: f64,
}

/// Plane-stress Lamé parameters `mu = E/(2(1+nu))`, `lambda = E nu/(1-nu^2)`.
pub fn lame_plane_stress(young: f64, poisson: f64) -> Result<Material> {
    if !(poisson > -1.0 && poisson < 1.0) || !young.is_finite() || young < 0.0 {
        return Err(Error::InvalidMaterial(format!("E = {young}, nu = {poisson}")));
    }
    Ok(Material {
        young,
        poisson,
        mu: young / (2.0 * (1.0 + poisson)),
        lambda: young * poisson / (1.0 - poisson * poisson),
    })
}

/// Weights of the gradient and Hessian jump terms. First order background
/// meshes use `gradient` only.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizationParams {
    pub gradient: f64,
    #[serde(default)]
    pub hessian: f64,
}

impl StabilizationParams {
    pub fn new(gradient: f64, hessian: f64) -> Result<Self> {
        if !(gradient >= 0.0 && hessian >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "stabilization weights must be non-negative, got ({gradient}, {hessian})"
            )));
        }
        Ok(Self { gradient, hessian })
    }

    pub fn single(gamma: f64) -> Result<Self> {
        Self::new(gamma, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    pub surface_degree: usize,
    pub face_degree: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self { surface_degree: 6, face_degree: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct MembraneSystem {
    /// Pattern over active node slots.
    pub pattern: BlockPattern,
    pub stiffness: Vec<Block>,
    pub gradient_jump: Vec<Block>,
    /// Hessian jumps, already scaled by `h^2`.
    pub hessian_jump: Vec<Block>,
    pub load: Vec<f64>,
    pub h: f64,
    pub bulk_order: u8,
    pub surface_order: u8,
    pub stabilization: StabilizationParams,
}

impl MembraneSystem {
    pub fn n_dof(&self) -> usize {
        self.load.len()
    }

    /// Stabilized operator `a_h + g1 j1 + g2 j2` (the Hessian term only
    /// enters for second order background meshes).
    pub fn operator(&self, stab: &StabilizationParams) -> Vec<Block> {
        let g2 = if self.bulk_order == 2 { stab.hessian } else { 0.0 };
        combine(&[
            (&self.stiffness, 1.0),
            (&self.gradient_jump, stab.gradient),
            (&self.hessian_jump, g2),
        ])
    }

    pub fn energy(values: &[Block], pattern: &BlockPattern, u: &[f64]) -> f64 {
        pattern.matvec(values, u).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    pub fn with_load_scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.load.iter_mut().for_each(|v| *v *= s);
        out
    }
}

struct Scatter<'a> {
    pattern: &'a BlockPattern,
    values: &'a mut [Block],
}

impl Scatter<'_> {
    fn add(&mut self, i: usize, j: usize, a: usize, b: usize, v: f64) {
        let k = self.pattern.find(i, j).expect("pattern covers all couplings");
        self.values[k][a][b] += v;
    }
}

fn slots_of(active: &ActiveMesh, nodes: &[usize], elem: usize) -> Result<Vec<usize>> {
    nodes
        .iter()
        .map(|&n| {
            active
                .node_slot(n)
                .ok_or_else(|| Error::Assembly(format!("node {n} of element {elem} is not active")))
        })
        .collect()
}

/// Assembles membrane stiffness, jump penalties and the load `(f, v)`.
pub fn assemble_system(
    mesh: &TetMesh,
    active: &ActiveMesh,
    surface: &SurfaceMesh,
    material: &Material,
    stabilization: StabilizationParams,
    load: impl Fn(&Vec3) -> Vec3,
    options: &AssemblyOptions,
) -> Result<MembraneSystem> {
    let basis = ReferenceElement::tet(mesh.order())?;
    let nb = basis.node_count();

    let mut cliques: Vec<Vec<usize>> = Vec::new();
    for &e in &active.elements {
        cliques.push(slots_of(active, mesh.element(e), e)?);
    }
    let mut face_nodes: Vec<Vec<usize>> = Vec::with_capacity(active.faces.len());
    for f in &active.faces {
        let mut u: Vec<usize> = mesh.element(f.left).to_vec();
        for &n in mesh.element(f.right) {
            if !u.contains(&n) {
                u.push(n);
            }
        }
        cliques.push(slots_of(active, &u, f.left)?);
        face_nodes.push(u);
    }
    let pattern = BlockPattern::from_cliques(active.nodes.len(), cliques.iter().map(|c| c.as_slice()));

    let mut stiffness = pattern.zeros();
    let mut rhs = vec![0.0; active.n_dof()];
    let mut grads = vec![[0.0; 3]; nb];
    let mut vals = vec![0.0; nb];
    {
        let mut k = Scatter { pattern: &pattern, values: &mut stiffness };
        let (mu, lambda) = (material.mu, material.lambda);
        for el in &surface.elements {
            let e = el.parent;
            if !active.is_active_element(e) {
                return Err(Error::Assembly(format!("surface element parent {e} is not active")));
            }
            let slots = slots_of(active, mesh.element(e), e)?;
            let map = mesh.map(e);
            for q in surface_quadrature(el, options.surface_degree)? {
                let p = tangential_projector(&q.frame.normal)?;
                let r = [q.parent_ref.x, q.parent_ref.y, q.parent_ref.z];
                basis.values_into(&r, &mut vals);
                basis.gradients_into(&r, &mut grads);
                let pg: Vec<Vec3> = grads.iter().map(|g| p * map.physical_gradient(g)).collect();
                let w = q.weight;
                for i in 0..nb {
                    for j in 0..nb {
                        let gij = pg[i].dot(&pg[j]);
                        for a in 0..3 {
                            for b in 0..3 {
                                let v = mu * (p[(a, b)] * gij + pg[j][a] * pg[i][b])
                                    + lambda * pg[i][a] * pg[j][b];
                                k.add(slots[i], slots[j], a, b, w * v);
                            }
                        }
                    }
                }
                let f = load(&q.frame.x);
                for i in 0..nb {
                    for a in 0..3 {
                        rhs[3 * slots[i] + a] += w * vals[i] * f[a];
                    }
                }
            }
        }
    }

    let h = mesh.h();
    let mut gradient_jump = pattern.zeros();
    let mut hessian_jump = pattern.zeros();
    let rule = quadrature_rule(Shape::Triangle, options.face_degree)?;
    let mut hess = vec![[[0.0; 3]; 3]; nb];
    for (f, nodes) in active.faces.iter().zip(&face_nodes) {
        let slots = slots_of(active, nodes, f.left)?;
        let [a, b, c] = f.nodes.corners.map(|n| mesh.node(n));
        let (e1, e2) = (b - a, c - a);
        let jac = e1.cross(&e2).norm();
        let m = nodes.len();
        let mut jg = vec![Vec3::zeros(); m];
        let mut jh = vec![Mat3::zeros(); m];
        for (pt, w) in rule.iter() {
            let x = a + e1 * pt[0] + e2 * pt[1];
            jg.iter_mut().for_each(|g| *g = Vec3::zeros());
            jh.iter_mut().for_each(|g| *g = Mat3::zeros());
            for (side, sign) in [(f.left, 1.0), (f.right, -1.0)] {
                let map = mesh.map(side);
                let rr = map.to_reference(&x);
                let r = [rr.x, rr.y, rr.z];
                basis.gradients_into(&r, &mut grads);
                basis.hessians_into(&r, &mut hess);
                for (l, n) in mesh.element(side).iter().enumerate() {
                    let u = nodes.iter().position(|m| m == n).expect("union contains node");
                    jg[u] += map.physical_gradient(&grads[l]) * sign;
                    if mesh.order() == 2 {
                        jh[u] += map.physical_hessian(&hess[l]) * sign;
                    }
                }
            }
            let wj = w * jac;
            for i in 0..m {
                for j in 0..m {
                    let vg = wj * jg[i].dot(&jg[j]);
                    let vh = wj * h * h * jh[i].dot(&jh[j]);
                    let kg = pattern.find(slots[i], slots[j]).expect("face coupling");
                    for d in 0..3 {
                        gradient_jump[kg][d][d] += vg;
                        hessian_jump[kg][d][d] += vh;
                    }
                }
            }
        }
    }

    Ok(MembraneSystem {
        pattern,
        stiffness,
        gradient_jump,
        hessian_jump,
        load: rhs,
        h,
        bulk_order: mesh.order(),
        surface_order: surface.surface_order,
        stabilization,
    })
}

/// Displacement DOFs prescribed to zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Constraints {
    pub fixed: Vec<usize>,
}

/// Axial displacement fixed at `x = 0`, transverse displacement fixed at
/// `x = length`, on every active node lying in those planes.
pub fn end_constraints(mesh: &TetMesh, active: &ActiveMesh, length: f64) -> Constraints {
    let tol = 1e-9 * length;
    let mut fixed = Vec::new();
    for (slot, &n) in active.nodes.iter().enumerate() {
        let x = mesh.node(n).x;
        if x.abs() <= tol {
            fixed.push(3 * slot);
        }
        if (x - length).abs() <= tol {
            fixed.push(3 * slot + 1);
            fixed.push(3 * slot + 2);
        }
    }
    Constraints { fixed }
}

#[derive(Debug, Clone)]
pub struct DisplacementField {
    /// Three components per active node slot.
    pub values: Vec<f64>,
    pub info: SolveInfo,
}

impl DisplacementField {
    pub fn node(&self, slot: usize) -> Vec3 {
        Vec3::new(self.values[3 * slot], self.values[3 * slot + 1], self.values[3 * slot + 2])
    }
}

pub fn apply_constraints_and_solve(
    system: &MembraneSystem,
    stabilization: &StabilizationParams,
    constraints: &Constraints,
) -> Result<DisplacementField> {
    let n = system.n_dof();
    let mut is_fixed = vec![false; n];
    for &d in &constraints.fixed {
        if d >= n {
            return Err(Error::InvalidInput(format!("constraint dof {d} out of range ({n} dofs)")));
        }
        is_fixed[d] = true;
    }
    let mut next = 0;
    let free: Vec<Option<usize>> = is_fixed
        .iter()
        .map(|&f| {
            if f {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect();
    let op = system.operator(stabilization);
    let (values, info) = solve_reduced(&system.pattern, &op, &system.load, &free)?;
    Ok(DisplacementField { values, info })
}

/// In-plane strain `P sym(grad u) P` at a point given in parent reference
/// coordinates.
pub fn surface_strain(
    mesh: &TetMesh,
    active: &ActiveMesh,
    parent: usize,
    parent_ref: &Vec3,
    projector: &Mat3,
    u: &DisplacementField,
) -> Result<Mat3> {
    let basis = ReferenceElement::tet(mesh.order())?;
    let grads = basis.gradients(&[parent_ref.x, parent_ref.y, parent_ref.z]);
    let map = mesh.map(parent);
    let mut du = Mat3::zeros();
    for (l, &n) in mesh.element(parent).iter().enumerate() {
        let slot = active
            .node_slot(n)
            .ok_or_else(|| Error::Assembly(format!("node {n} is not active")))?;
        du += u.node(slot) * map.physical_gradient(&grads[l]).transpose();
    }
    let eps = (du + du.transpose()) * 0.5;
    Ok(projector * eps * projector)
}

/// Membrane stress `2 mu eps + lambda tr(eps) P` at reference point `r` of a
/// surface element.
pub fn evaluate_stress(
    mesh: &TetMesh,
    active: &ActiveMesh,
    elem: &SurfaceElement,
    u: &DisplacementField,
    material: &Material,
    r: &[f64; 3],
) -> Result<Mat3> {
    let frame = surface_frame(elem, r)?;
    let p = tangential_projector(&frame.normal)?;
    let vals = elem.kind.reference().values(r);
    let parent_ref = elem.parent_ref.iter().zip(&vals).fold(Vec3::zeros(), |acc, (x, v)| acc + x * *v);
    let eps = surface_strain(mesh, active, elem.parent, &parent_ref, &p, u)?;
    Ok(stress_from_strain(&eps, &p, material))
}

pub fn stress_from_strain(eps: &Mat3, projector: &Mat3, material: &Material) -> Mat3 {
    eps * (2.0 * material.mu) + projector * (material.lambda * eps.trace())
}

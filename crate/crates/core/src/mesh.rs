//! Structured tetrahedral background meshes, face adjacency and the active
//! submesh of elements cut by the surface.

use std::collections::{BTreeMap, HashMap};

use crate::basis::{tet_edge_node, AffineMap, TET_EDGES, TET_FACES};
use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> [f64; 3] {
        std::array::from_fn(|i| self.max[i] - self.min[i])
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().iter().map(|e| e * e).sum::<f64>().sqrt()
    }
}

/// Cells per axis of the structured grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Divisions(pub [usize; 3]);

impl From<usize> for Divisions {
    fn from(n: usize) -> Self {
        Divisions([n; 3])
    }
}

impl From<[usize; 3]> for Divisions {
    fn from(n: [usize; 3]) -> Self {
        Divisions(n)
    }
}

#[derive(Debug, Clone)]
pub struct TetMesh {
    nodes: Vec<Vec3>,
    connectivity: Vec<usize>,
    order: u8,
    bounds: Aabb,
    divisions: [usize; 3],
    maps: Vec<AffineMap>,
    /// Refinement level label carried through studies.
    pub level: usize,
}

// The six tetrahedra of the Kuhn split of a cube around its main diagonal.
// Cube corners are numbered by their binary coordinates (bit0 = x, bit1 = y,
// bit2 = z); each tet walks 0 -> 7 along one permutation of the axes.
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

/// Builds a structured mesh of `box` where each grid cube is split into six
/// tetrahedra along its main diagonal. For `order == 2` mid-edge nodes are
/// appended after the grid nodes.
pub fn build_background_mesh(
    bounds: Aabb,
    divisions: impl Into<Divisions>,
    order: u8,
) -> Result<TetMesh> {
    let Divisions(n) = divisions.into();
    if n.iter().any(|&k| k == 0) {
        return Err(Error::InvalidMesh(format!("subdivisions must be positive, got {n:?}")));
    }
    let ext = bounds.extent();
    if ext.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidMesh(format!("degenerate box {bounds:?}")));
    }
    if order != 1 && order != 2 {
        return Err(Error::InvalidMesh(format!("unsupported order {order}")));
    }
    let [nx, ny, nz] = n;
    let node_id = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let coord = |axis: usize, i: usize| {
        if i == n[axis] {
            bounds.max[axis]
        } else {
            bounds.min[axis] + ext[axis] * i as f64 / n[axis] as f64
        }
    };

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(Vec3::new(coord(0, i), coord(1, j), coord(2, k)));
            }
        }
    }

    let per_elem = if order == 1 { 4 } else { 10 };
    let mut connectivity = Vec::with_capacity(6 * nx * ny * nz * per_elem);
    let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let corner = |c: usize| node_id(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                for tet in KUHN_TETS {
                    let mut v = tet.map(corner);
                    let vol = signed_volume(&nodes, &v);
                    if vol < 0.0 {
                        v.swap(2, 3);
                    }
                    connectivity.extend_from_slice(&v);
                    if order == 2 {
                        for [a, b] in TET_EDGES {
                            let key = (v[a].min(v[b]), v[a].max(v[b]));
                            let id = *midpoints.entry(key).or_insert_with(|| {
                                nodes.push((nodes[key.0] + nodes[key.1]) * 0.5);
                                nodes.len() - 1
                            });
                            connectivity.push(id);
                        }
                    }
                }
            }
        }
    }

    let mut mesh = TetMesh {
        nodes,
        connectivity,
        order,
        bounds,
        divisions: n,
        maps: Vec::new(),
        level: 0,
    };
    mesh.maps = (0..mesh.element_count())
        .map(|e| AffineMap::from_corners(mesh.corners(e)).ok_or(Error::DegenerateElement(e)))
        .collect::<Result<_>>()?;
    Ok(mesh)
}

fn signed_volume(nodes: &[Vec3], v: &[usize; 4]) -> f64 {
    let (a, b, c, d) = (nodes[v[0]], nodes[v[1]], nodes[v[2]], nodes[v[3]]);
    (b - a).dot(&(c - a).cross(&(d - a))) / 6.0
}

impl TetMesh {
    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn divisions(&self) -> [usize; 3] {
        self.divisions
    }

    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Vec3 {
        self.nodes[i]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes_per_element(&self) -> usize {
        if self.order == 1 {
            4
        } else {
            10
        }
    }

    pub fn element_count(&self) -> usize {
        self.connectivity.len() / self.nodes_per_element()
    }

    pub fn element(&self, e: usize) -> &[usize] {
        let n = self.nodes_per_element();
        &self.connectivity[e * n..(e + 1) * n]
    }

    pub fn corners(&self, e: usize) -> [Vec3; 4] {
        let el = self.element(e);
        std::array::from_fn(|i| self.nodes[el[i]])
    }

    pub fn map(&self, e: usize) -> &AffineMap {
        &self.maps[e]
    }

    pub fn volume(&self, e: usize) -> f64 {
        self.maps[e].volume()
    }

    pub fn centroid(&self, e: usize) -> Vec3 {
        self.corners(e).iter().sum::<Vec3>() / 4.0
    }

    /// Mesh size `N^{-1/3}` with `N` the node count.
    pub fn h(&self) -> f64 {
        (self.node_count() as f64).powf(-1.0 / 3.0)
    }

    /// Global node ids of local face `f` of element `e`, in canonical order:
    /// ascending corners, then the mid-edge nodes of edges (a,b), (b,c), (a,c).
    pub fn canonical_face(&self, e: usize, f: usize) -> CanonicalFace {
        let el = self.element(e);
        let mut local = TET_FACES[f];
        local.sort_by_key(|&l| el[l]);
        let corners = local.map(|l| el[l]);
        let mids = if self.order == 2 {
            Some([
                el[tet_edge_node(local[0], local[1])],
                el[tet_edge_node(local[1], local[2])],
                el[tet_edge_node(local[0], local[2])],
            ])
        } else {
            None
        };
        CanonicalFace { corners, mids }
    }

    /// Mid-edge node between two global corner ids, looked up in element `e`.
    pub fn edge_midpoint(&self, e: usize, a: usize, b: usize) -> Option<usize> {
        if self.order == 1 {
            return None;
        }
        let el = self.element(e);
        let la = el[..4].iter().position(|&n| n == a)?;
        let lb = el[..4].iter().position(|&n| n == b)?;
        Some(el[tet_edge_node(la, lb)])
    }
}

/// Node sequence of a triangular face shared by two elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CanonicalFace {
    pub corners: [usize; 3],
    /// Mid-edge nodes of (a,b), (b,c), (a,c) for P2 meshes.
    pub mids: Option<[usize; 3]>,
}

impl CanonicalFace {
    pub fn nodes(&self) -> Vec<usize> {
        let mut v = self.corners.to_vec();
        if let Some(m) = self.mids {
            v.extend_from_slice(&m);
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorFace {
    /// Lower element index.
    pub left: usize,
    /// Higher element index.
    pub right: usize,
    /// Local face index of this face in `left` and `right`.
    pub local: [usize; 2],
    pub nodes: CanonicalFace,
    /// Unit normal pointing from `left` into `right`.
    pub normal: Vec3,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FaceSet {
    pub faces: Vec<InteriorFace>,
}

impl FaceSet {
    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }
}

/// Interior faces of `mesh`, sorted by their corner ids. Boundary faces are
/// skipped.
pub fn face_adjacency(mesh: &TetMesh) -> Result<FaceSet> {
    let mut seen: BTreeMap<[usize; 3], Vec<(usize, usize)>> = BTreeMap::new();
    for e in 0..mesh.element_count() {
        for f in 0..4 {
            let key = mesh.canonical_face(e, f).corners;
            let owners = seen.entry(key).or_default();
            owners.push((e, f));
            if owners.len() > 2 {
                return Err(Error::NonManifoldFace { nodes: key });
            }
        }
    }
    let mut faces = Vec::new();
    for (key, owners) in seen {
        if owners.len() != 2 {
            continue;
        }
        let (mut l, mut r) = (owners[0], owners[1]);
        if l.0 > r.0 {
            std::mem::swap(&mut l, &mut r);
        }
        let nodes = mesh.canonical_face(l.0, l.1);
        let [a, b, c] = key.map(|n| mesh.node(n));
        let mut normal = (b - a).cross(&(c - a)).normalize();
        if normal.dot(&(mesh.centroid(r.0) - mesh.centroid(l.0))) < 0.0 {
            normal = -normal;
        }
        faces.push(InteriorFace { left: l.0, right: r.0, local: [l.1, r.1], nodes, normal });
    }
    Ok(FaceSet { faces })
}

/// Elements cut by the surface together with their shared faces and the
/// displacement DOF numbering.
#[derive(Debug, Clone)]
pub struct ActiveMesh {
    pub elements: Vec<usize>,
    pub faces: Vec<InteriorFace>,
    /// Active background nodes in ascending order.
    pub nodes: Vec<usize>,
    slot: Vec<usize>,
    element_flag: Vec<bool>,
}

const INACTIVE: usize = usize::MAX;

impl ActiveMesh {
    pub fn n_dof(&self) -> usize {
        3 * self.nodes.len()
    }

    pub fn is_active_element(&self, e: usize) -> bool {
        self.element_flag.get(e).copied().unwrap_or(false)
    }

    /// Position of background node `node` among the active nodes.
    pub fn node_slot(&self, node: usize) -> Option<usize> {
        match self.slot.get(node) {
            Some(&s) if s != INACTIVE => Some(s),
            _ => None,
        }
    }

    pub fn dof(&self, node: usize, component: usize) -> Option<usize> {
        self.node_slot(node).map(|s| 3 * s + component)
    }
}

pub fn active_submesh(mesh: &TetMesh, cut_flags: &[bool]) -> Result<ActiveMesh> {
    if cut_flags.len() != mesh.element_count() {
        return Err(Error::InvalidInput(format!(
            "{} cut flags for {} elements",
            cut_flags.len(),
            mesh.element_count()
        )));
    }
    let elements: Vec<usize> = (0..cut_flags.len()).filter(|&e| cut_flags[e]).collect();
    if elements.is_empty() {
        return Err(Error::NoActiveElements);
    }
    let mut slot = vec![INACTIVE; mesh.node_count()];
    for &e in &elements {
        for &n in mesh.element(e) {
            slot[n] = 0;
        }
    }
    let mut nodes = Vec::new();
    for (n, s) in slot.iter_mut().enumerate() {
        if *s != INACTIVE {
            *s = nodes.len();
            nodes.push(n);
        }
    }
    let faces = face_adjacency(mesh)?
        .faces
        .into_iter()
        .filter(|f| cut_flags[f.left] && cut_flags[f.right])
        .collect();
    Ok(ActiveMesh { elements, faces, nodes, slot, element_flag: cut_flags.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> Aabb {
        Aabb::new([0.0; 3], [1.0; 3])
    }

    #[test]
    fn single_cube_p1() {
        let m = build_background_mesh(unit_box(), 1, 1).unwrap();
        assert_eq!(m.node_count(), 8);
        assert_eq!(m.element_count(), 6);
        let total: f64 = (0..6).map(|e| m.volume(e)).sum();
        assert!((0..6).all(|e| m.volume(e) > 0.0));
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_cube_p2_midpoints() {
        let m = build_background_mesh(unit_box(), 1, 2).unwrap();
        assert_eq!(m.element_count(), 6);
        // 8 corners + 12 cube edges + 6 face diagonals + 1 main diagonal
        assert_eq!(m.node_count(), 27);
        for e in 0..6 {
            let el = m.element(e);
            assert_eq!(el.len(), 10);
            for (k, [a, b]) in TET_EDGES.iter().enumerate() {
                let mid = (m.node(el[*a]) + m.node(el[*b])) * 0.5;
                assert_eq!(m.node(el[4 + k]), mid);
            }
        }
    }

    #[test]
    fn refinement_halves_spacing() {
        let m1 = build_background_mesh(unit_box(), 1, 1).unwrap();
        let m2 = build_background_mesh(unit_box(), 2, 1).unwrap();
        assert_eq!(m2.element_count(), 8 * m1.element_count());
        assert_eq!((m2.node(1) - m2.node(0)).norm(), 0.5);
        assert_eq!((m1.node(1) - m1.node(0)).norm(), 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(build_background_mesh(unit_box(), 0, 1).is_err());
        assert!(build_background_mesh(Aabb::new([0.0; 3], [1.0, 0.0, 1.0]), 2, 1).is_err());
        assert!(build_background_mesh(unit_box(), 2, 3).is_err());
    }

    #[test]
    fn no_duplicate_nodes() {
        let m = build_background_mesh(Aabb::new([0.0, -1.0, -1.0], [4.0, 1.0, 1.0]), [4, 3, 3], 2)
            .unwrap();
        let tol = 1e-12 * m.bounds().diagonal();
        let mut sorted: Vec<Vec3> = m.nodes().to_vec();
        sorted.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        for i in 0..sorted.len() {
            for j in i + 1..sorted.len() {
                if sorted[j].x - sorted[i].x > tol {
                    break;
                }
                assert!((sorted[i] - sorted[j]).norm() > tol);
            }
        }
    }

    #[test]
    fn single_tet_has_no_interior_faces() {
        // A one-cube mesh restricted to a single element still reports faces
        // between cube tets; build one tet by hand instead.
        let m = build_background_mesh(unit_box(), 1, 1).unwrap();
        let mut flags = vec![false; 6];
        flags[0] = true;
        let active = active_submesh(&m, &flags).unwrap();
        assert_eq!(active.elements, vec![0]);
        assert!(active.faces.is_empty());
        assert_eq!(active.n_dof(), 12);
    }

    #[test]
    fn cube_face_count_matches_enumeration() {
        let m = build_background_mesh(unit_box(), 1, 1).unwrap();
        let fs = face_adjacency(&m).unwrap();
        // brute force: count every (element, face) incidence and the faces
        // lying on the cube boundary
        let mut incidences = 0;
        let mut boundary = 0;
        for e in 0..6 {
            for f in 0..4 {
                incidences += 1;
                let c = m.canonical_face(e, f).corners.map(|n| m.node(n));
                let on_boundary = (0..3).any(|ax| {
                    (c.iter().all(|p| p[ax] == 0.0)) || c.iter().all(|p| p[ax] == 1.0)
                });
                if on_boundary {
                    boundary += 1;
                }
            }
        }
        assert_eq!(boundary, 12);
        assert_eq!(fs.len(), (incidences - boundary) / 2);
        for f in &fs.faces {
            assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            assert!(f.left < f.right);
        }
    }

    #[test]
    fn canonical_faces_agree_from_both_sides() {
        let m = build_background_mesh(unit_box(), 2, 2).unwrap();
        let fs = face_adjacency(&m).unwrap();
        for f in &fs.faces {
            let from_left = m.canonical_face(f.left, f.local[0]);
            let from_right = m.canonical_face(f.right, f.local[1]);
            assert_eq!(from_left, from_right);
        }
        assert_eq!(fs, face_adjacency(&m).unwrap());
    }

    #[test]
    fn empty_active_set_is_an_error() {
        let m = build_background_mesh(unit_box(), 1, 1).unwrap();
        assert!(matches!(active_submesh(&m, &[false; 6]), Err(Error::NoActiveElements)));
    }
}

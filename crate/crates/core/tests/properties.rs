use proptest::prelude::*;

use tracefem::analysis::geometric_and_normal_error;
use tracefem::basis::{AffineMap, ReferenceElement};
use tracefem::levelset::{sample_nodal, AnalyticField};
use tracefem::mesh::{build_background_mesh, Aabb};
use tracefem::optimize::golden_section;
use tracefem::reconstruct::{
    find_root_on_segment, merge_surface_nodes, reconstruct_surface, LevelSet, ReconstructionConfig,
    RootOptions,
};
use tracefem::surfgeom::{surface_frame, tangential_projector};
use tracefem::{Error, Vec3};

fn unit_vector() -> impl Strategy<Value = Vec3> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
        .prop_filter("non-zero", |(x, y, z)| x * x + y * y + z * z > 1e-2)
        .prop_map(|(x, y, z)| Vec3::new(x, y, z).normalize())
}

fn tet_point() -> impl Strategy<Value = [f64; 3]> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64)
        .prop_filter("inside", |(a, b, c)| a + b + c <= 1.0)
        .prop_map(|(a, b, c)| [a, b, c])
}

fn bisect(f: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    let neg_lo = f(lo) < 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) < 0.0) == neg_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn skip_invalid<T>(r: tracefem::Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(Error::InvalidTopology(_) | Error::NoActiveElements) => None,
        Err(e) => panic!("{e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn partition_of_unity(r in tet_point()) {
        for el in [ReferenceElement::tet(1).unwrap(), ReferenceElement::tet(2).unwrap()] {
            let sum: f64 = el.values(&r).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-13);
            let g = el.gradients(&r);
            for i in 0..3 {
                prop_assert!(g.iter().map(|d| d[i]).sum::<f64>().abs() <= 1e-12);
            }
        }
        let uv = [r[0], r[1], 0.0];
        if r[0] + r[1] <= 1.0 {
            let sum: f64 = ReferenceElement::triangle(2).unwrap().values(&uv).iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-13);
        }
        let st = [2.0 * r[0] - 1.0, 2.0 * r[1] - 1.0, 0.0];
        let sum: f64 = ReferenceElement::quad8().values(&st).iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn projector_identities(n in unit_vector()) {
        let p = tangential_projector(&n).unwrap();
        prop_assert!((p * p - p).abs().max() <= 1e-12);
        prop_assert!((p - p.transpose()).abs().max() <= 1e-12);
        prop_assert!((p * n).norm() <= 1e-12);
        prop_assert!((p.trace() - 2.0).abs() <= 1e-12);
    }

    #[test]
    fn affine_round_trip(
        c in proptest::collection::vec(-1.0..1.0f64, 12),
        r in tet_point(),
    ) {
        let corners = [0, 1, 2, 3].map(|i| Vec3::new(c[3 * i], c[3 * i + 1], c[3 * i + 2]));
        if let Some(map) = AffineMap::from_corners(corners) {
            let r = Vec3::from(r);
            let back = map.to_reference(&map.to_physical(&r));
            let scale = map.a.norm() * map.a_inv.norm();
            prop_assert!((back - r).norm() <= 1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn newton_matches_bisection(
        center in (-0.2..0.2f64, -0.2..0.2f64, -0.2..0.2f64),
        radius in 0.4..0.8f64,
        dir in unit_vector(),
    ) {
        let c = Vec3::new(center.0, center.1, center.2);
        let sphere = AnalyticField::sphere(c, radius);
        let a = c + dir * 0.05;
        let b = c + dir * 1.5;
        let (a, b) = ([a.x, a.y, a.z], [b.x, b.y, b.z]);
        let eval = |x: &[f64; 3]| {
            let p = Vec3::from(*x);
            let g = sphere.gradient(&p)?;
            Ok((sphere.value(&p), [g.x, g.y, g.z]))
        };
        let root = find_root_on_segment(eval, &a, &b, &RootOptions::default()).unwrap();
        let t = bisect(|t| {
            let x: [f64; 3] = std::array::from_fn(|i| a[i] + t * (b[i] - a[i]));
            sphere.value(&Vec3::from(x))
        });
        let want: [f64; 3] = std::array::from_fn(|i| a[i] + t * (b[i] - a[i]));
        let d = (0..3).map(|i| (root.point[i] - want[i]).powi(2)).sum::<f64>().sqrt();
        prop_assert!(d <= 1e-10, "{d:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn planar_surfaces_are_exact(
        point in (-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64),
        normal in unit_vector(),
        order in 1u8..=2,
        discrete in any::<bool>(),
    ) {
        let mesh = build_background_mesh(Aabb::new([-1.0; 3], [1.0; 3]), 3, order).unwrap();
        let plane = AnalyticField::plane(Vec3::new(point.0, point.1, point.2), normal);
        let nodal = sample_nodal(&plane, &mesh).unwrap();
        let ls = if discrete { LevelSet::Discrete(&nodal) } else { LevelSet::Exact(&plane) };
        let cfg = ReconstructionConfig { surface_order: order, ..Default::default() };
        if let Some(rec) = skip_invalid(reconstruct_surface(&mesh, ls, &cfg)) {
            let (g, n) = geometric_and_normal_error(&rec.surface, &plane).unwrap();
            prop_assert!(g <= 1e-12 && n <= 1e-12, "{g:e} {n:e}");
        }
    }

    #[test]
    fn shared_nodes_coincide(
        center in (-0.15..0.15f64, -0.15..0.15f64, -0.15..0.15f64),
        radius in 0.45..0.75f64,
        discrete in any::<bool>(),
    ) {
        let mesh = build_background_mesh(Aabb::new([-1.0; 3], [1.0; 3]), 6, 2).unwrap();
        let sphere = AnalyticField::sphere(Vec3::new(center.0, center.1, center.2), radius);
        let nodal = sample_nodal(&sphere, &mesh).unwrap();
        let ls = if discrete { LevelSet::Discrete(&nodal) } else { LevelSet::Exact(&sphere) };
        if let Some(rec) = skip_invalid(reconstruct_surface(&mesh, ls, &ReconstructionConfig::default())) {
            let merged = merge_surface_nodes(&rec.surface);
            let mut first = vec![None::<Vec3>; merged.points.len()];
            for (el, (_, ids)) in rec.surface.elements.iter().zip(&merged.cells) {
                for (x, &id) in el.nodes.iter().zip(ids) {
                    match first[id] {
                        Some(p) => prop_assert!((p - x).norm() <= 1e-12),
                        None => first[id] = Some(*x),
                    }
                }
                let frame = surface_frame(el, &el.kind.centroid()).unwrap();
                prop_assert!((frame.normal.norm() - 1.0).abs() <= 1e-12);
                prop_assert!(frame.normal.dot(&frame.t_r).abs() <= 1e-10);
                prop_assert!(frame.normal.dot(&frame.t_s).abs() <= 1e-10);
                prop_assert!(frame.jacobian > 0.0);
            }
        }
    }

    #[test]
    fn golden_section_finds_quadratic_minimum(c in 0.5..99.5f64) {
        let (x, _) = golden_section(|g| (g - c).powi(2), 0.0, 100.0, 1e-2);
        prop_assert!((x - c).abs() <= 1e-2);
    }
}

//! Cut classification on a coarse mesh: how many elements are cut, how many
//! give triangles or quadrilaterals, and which would be rejected.

use tracefem::levelset::{sample_nodal, AnalyticField};
use tracefem::mesh::{build_background_mesh, Aabb};
use tracefem::reconstruct::{classify_element, LevelSet, SamplingGrid, Verdict};
use tracefem::Vec3;

fn main() -> tracefem::Result<()> {
    let mesh = build_background_mesh(Aabb::new([-1.0; 3], [1.0; 3]), 5, 2)?;
    let field = AnalyticField::sphere(Vec3::new(0.1, 0.05, 0.0), 0.7);
    let nodal = sample_nodal(&field, &mesh)?;
    let grid = SamplingGrid::new(2, 4)?;

    for (name, ls) in [("exact", LevelSet::Exact(&field)), ("discrete", LevelSet::Discrete(&nodal))] {
        let (mut cut, mut tri, mut quad, mut bad) = (0, 0, 0, Vec::new());
        for e in 0..mesh.element_count() {
            let report = classify_element(&mesh, e, ls, &grid, 0.0)?;
            match report.verdict {
                Verdict::NotCut => {}
                Verdict::ValidCut => {
                    cut += 1;
                    if report.face_cut.iter().filter(|c| **c).count() == 3 {
                        tri += 1;
                    } else {
                        quad += 1;
                    }
                }
                Verdict::InvalidTopology(issue) => bad.push((e, issue)),
            }
        }
        println!("{name}: cut={cut} tri={tri} quad={quad} invalid={}", bad.len());
        for (e, issue) in bad.iter().take(3) {
            println!("  element {e}: {issue}");
        }
    }
    Ok(())
}

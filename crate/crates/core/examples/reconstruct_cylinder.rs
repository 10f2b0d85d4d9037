//! Reconstructs the benchmark cylinder from the exact level set and from its
//! nodal interpolant, then reports element counts, area and errors.
//!
//! ```bash
//! cargo run --release --example reconstruct_cylinder -- 2
//! ```

use tracefem::analysis::geometric_and_normal_error;
use tracefem::reconstruct::{ReconstructionConfig, SourceKind, SurfaceKind};
use tracefem::study::{reconstruct_from, MeshLadder};
use tracefem::surfgeom::surface_area;

fn main() -> tracefem::Result<()> {
    let k: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1);
    let mesh = MeshLadder::default().build(k, 2)?;
    let field = tracefem::levelset::AnalyticField::x_cylinder(1.0);
    println!("k={k} nodes={} h={:.4}", mesh.node_count(), mesh.h());

    for source in [SourceKind::Exact, SourceKind::Discrete] {
        let rec = reconstruct_from(&mesh, &field, source, &ReconstructionConfig::default())?;
        let count = |kind| rec.surface.elements.iter().filter(|e| e.kind == kind).count();
        let area = surface_area(&rec.surface)?;
        let (geom, normal) = geometric_and_normal_error(&rec.surface, &field)?;
        println!(
            "{source:>8}: tri6={} quad8={} area={area:.6} (8pi={:.6}) eps_geom={geom:.3e} eps_n={normal:.3e}",
            count(SurfaceKind::Tri6),
            count(SurfaceKind::Quad8),
            8.0 * std::f64::consts::PI,
        );
    }
    Ok(())
}

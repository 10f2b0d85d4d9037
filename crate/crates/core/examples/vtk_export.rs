//! Quadratic surface of a sphere written as a legacy VTK file with the
//! level-set value at every node.

use tracefem::export::{write_vtk, PointData};
use tracefem::levelset::AnalyticField;
use tracefem::mesh::{build_background_mesh, Aabb};
use tracefem::reconstruct::{merge_surface_nodes, reconstruct_surface, LevelSet, ReconstructionConfig};
use tracefem::Vec3;

fn main() -> tracefem::Result<()> {
    let mesh = build_background_mesh(Aabb::new([-1.0; 3], [1.0; 3]), 6, 2)?;
    let sphere = AnalyticField::sphere(Vec3::new(0.05, 0.0, 0.0), 0.62);
    let rec = reconstruct_surface(&mesh, LevelSet::Exact(&sphere), &ReconstructionConfig::default())?;
    let merged = merge_surface_nodes(&rec.surface);
    let phi: Vec<f64> = merged.points.iter().map(|x| sphere.value(x)).collect();
    let normals: Vec<Vec3> =
        merged.points.iter().map(|x| sphere.normal(x)).collect::<tracefem::Result<_>>()?;

    let path = std::env::temp_dir().join("sphere.vtk");
    write_vtk(
        &path,
        &merged,
        "sphere",
        &[PointData::Scalars("phi", &phi), PointData::Vectors("normal", &normals)],
    )?;
    println!("{} points, {} cells -> {}", merged.points.len(), merged.cells.len(), path.display());
    Ok(())
}

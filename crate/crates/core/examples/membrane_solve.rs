//! Loaded cylinder membrane on the coarsest P2 mesh, written to VTK.
//!
//! ```bash
//! cargo run --release --example membrane_solve -- out/membrane.vtk
//! ```

use std::path::PathBuf;

use tracefem::analysis::BenchmarkConfig;
use tracefem::membrane::{AssemblyOptions, StabilizationParams};
use tracefem::reconstruct::{ReconstructionConfig, SourceKind};
use tracefem::study::{MeshLadder, MembraneLevel};

fn main() -> tracefem::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("membrane_k1.vtk"));

    let mesh = MeshLadder::default().build(1, 2)?;
    let level = MembraneLevel::new(
        mesh,
        SourceKind::Exact,
        &ReconstructionConfig::default(),
        BenchmarkConfig::default(),
        &AssemblyOptions::default(),
    )?;
    let stab = StabilizationParams::new(31.6944, 7.8296)?;
    let u = level.solve(&stab)?;
    let tip = (0..level.active.nodes.len()).map(|s| u.node(s).x).fold(0.0f64, f64::max);

    println!("surface elements: {}", level.reconstruction.surface.len());
    println!("active dofs: {}", level.system.n_dof());
    println!("solver: cholesky={} residual={:.2e}", u.info.cholesky, u.info.relative_residual);
    println!("max axial displacement: {tip:.4e}");
    println!("stress error: {:.4}", level.stress_error(&u)?);

    level.write_vtk(&path, &u)?;
    println!("wrote {}", path.display());
    Ok(())
}

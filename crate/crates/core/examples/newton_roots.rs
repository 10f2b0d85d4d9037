//! Safeguarded Newton search on an edge and inside a triangular face.

use tracefem::reconstruct::{find_face_interior_root, find_root_on_segment, RootOptions, SearchStrategy};

fn main() -> tracefem::Result<()> {
    let opts = RootOptions::default();

    // unit circle crossing the segment (0.2, 0.1, 0) -> (1.5, 0.4, 0)
    let circle = |r: &[f64; 3]| Ok((r[0] * r[0] + r[1] * r[1] - 1.0, [2.0 * r[0], 2.0 * r[1], 0.0]));
    let edge = find_root_on_segment(circle, &[0.2, 0.1, 0.0], &[1.5, 0.4, 0.0], &opts)?;
    println!(
        "edge root {:?} value={:.2e} newton={} bisection={}",
        edge.point, edge.value, edge.iterations, edge.bisections
    );

    // a flat start forces bisection steps
    let cubic = |r: &[f64; 3]| Ok((r[0].powi(3) - 0.001, [3.0 * r[0] * r[0], 0.0, 0.0]));
    let flat = find_root_on_segment(cubic, &[-1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &opts)?;
    println!("cubic root x={:.12} bisection={}", flat.point[0], flat.bisections);

    // quarter circle through a face whose boundary roots are (0.6, 0) and (0, 0.6)
    let face = |p: &[f64; 2]| Ok((p[0] * p[0] + p[1] * p[1] - 0.36, [2.0 * p[0], 2.0 * p[1]]));
    let identity = [[1.0, 0.0], [0.0, 1.0]];
    for strategy in [SearchStrategy::ChordNormal, SearchStrategy::Gradient] {
        let r = find_face_interior_root(face, [0.6, 0.0], [0.0, 0.6], identity, strategy, &opts)?;
        println!("{strategy:?}: interior point ({:.6}, {:.6})", r.point[0], r.point[1]);
    }
    Ok(())
}
